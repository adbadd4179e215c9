"""
Unit tests for the network model module.
"""

import os
import sys
import tempfile
import unittest

import networkx as nx

# Add the parent directory to the path so we can import the package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from qnc_toolkit.models import Edge, NetworkGraph
from qnc_toolkit.network import (generate_deployment, generate_random_network, read_edge_list,
                                 shortest_paths, to_networkx, write_edge_list)


def brute_force_distances(g):
    """Hop distance to the gateway by enumerating every simple path."""
    graph = to_networkx(g)
    distances = {g.gateway: 0}
    for v in range(1, g.n + 1):
        if v == g.gateway:
            continue
        lengths = [len(path) - 1 for path in nx.all_simple_paths(graph, v, g.gateway)]
        if lengths:
            distances[v] = min(lengths)
    return distances


class TestRandomNetwork(unittest.TestCase):
    """Test cases for random deployments."""

    def test_edge_count_and_simplicity(self):
        """Graphs have the requested number of distinct, loop-free edges."""
        g = generate_random_network(20, 80, seed=3)
        self.assertEqual(g.num_edges, 80)
        pairs = {(e.tail, e.head) for e in g.edges}
        self.assertEqual(len(pairs), 80)
        self.assertTrue(all(e.tail != e.head for e in g.edges))
        self.assertTrue(1 <= g.gateway <= 20)

    def test_complete_graph(self):
        """m = n(n-1) yields every ordered pair."""
        g = generate_random_network(5, 20, seed=1)
        self.assertEqual({(e.tail, e.head) for e in g.edges},
                         {(u, v) for u in range(1, 6) for v in range(1, 6) if u != v})

    def test_seed_determinism(self):
        """The same seed gives the same graph."""
        self.assertEqual(generate_random_network(30, 100, seed=7), generate_random_network(30, 100, seed=7))
        self.assertNotEqual(generate_random_network(30, 100, seed=7).edges,
                            generate_random_network(30, 100, seed=8).edges)

    def test_invalid_arguments(self):
        """Impossible edge counts are rejected."""
        with self.assertRaises(ValueError):
            generate_random_network(10, 91)
        with self.assertRaises(ValueError):
            generate_random_network(1, 1)
        with self.assertRaises(ValueError):
            generate_random_network(10, 0)

    def test_graph_validation(self):
        """Self loops and duplicate edges are rejected."""
        with self.assertRaises(ValueError):
            NetworkGraph(n=3, edges=(Edge(1, 1),), gateway=2)
        with self.assertRaises(ValueError):
            NetworkGraph(n=3, edges=(Edge(1, 2), Edge(1, 2)), gateway=2)
        with self.assertRaises(ValueError):
            NetworkGraph(n=3, edges=(Edge(1, 2, capacity=0.0),), gateway=2)
        # Antiparallel edges are allowed
        g = NetworkGraph(n=3, edges=(Edge(1, 2), Edge(2, 1)), gateway=2)
        self.assertEqual(g.in_edges(2), [0])
        self.assertEqual(g.out_edges(2), [1])


class TestShortestPaths(unittest.TestCase):
    """Test cases for the routing tree."""

    def test_matches_brute_force(self):
        """Dijkstra hop distances equal exhaustive simple-path search."""
        for seed in range(10):
            g = generate_random_network(7, 14, seed=seed)
            rt = shortest_paths(g)
            self.assertEqual(rt.hop_distance, brute_force_distances(g))

    def test_next_hop_moves_closer(self):
        """Every next hop leaves the node and gets one hop closer."""
        g = generate_deployment(25, 120, master_seed=5)
        rt = shortest_paths(g)
        self.assertTrue(rt.fully_reachable)
        for v, e_id in rt.next_hop.items():
            edge = g.edges[e_id]
            self.assertEqual(edge.tail, v)
            self.assertEqual(rt.hop_distance[edge.head], rt.hop_distance[v] - 1)
        self.assertNotIn(g.gateway, rt.next_hop)
        self.assertEqual(len(rt.next_hop), g.n - 1)

    def test_chain(self):
        """A chain toward the gateway has distances 3, 2, 1."""
        g = NetworkGraph(n=4, edges=(Edge(1, 2), Edge(2, 3), Edge(3, 4)), gateway=4)
        rt = shortest_paths(g)
        self.assertEqual(rt.hop_distance, {1: 3, 2: 2, 3: 1, 4: 0})
        self.assertEqual(rt.next_hop, {1: 0, 2: 1, 3: 2})
        self.assertEqual(rt.max_hop_distance, 3)

    def test_unreachable(self):
        """Nodes without a path are reported."""
        g = NetworkGraph(n=4, edges=(Edge(1, 2), Edge(4, 3)), gateway=2)
        rt = shortest_paths(g)
        self.assertEqual(rt.unreachable, (3, 4))
        self.assertFalse(rt.fully_reachable)

    def test_deployment_determinism(self):
        """Deployments depend only on the master seed and key."""
        a = generate_deployment(30, 90, master_seed=11, key=(0, 1, 2))
        b = generate_deployment(30, 90, master_seed=11, key=(0, 1, 2))
        self.assertEqual(a, b)
        self.assertTrue(shortest_paths(a).fully_reachable)


class TestEdgeListIO(unittest.TestCase):
    """Test cases for edge-list files."""

    def test_round_trip(self):
        """Written edge lists read back to the same graph."""
        g = generate_random_network(12, 40, seed=2, capacity=1.5)
        with tempfile.TemporaryDirectory() as tmp:
            path = write_edge_list(g, os.path.join(tmp, 'graph.txt'))
            self.assertEqual(read_edge_list(path), g)

    def test_malformed(self):
        """Lines without three fields are rejected."""
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.txt')
            with open(path, 'w') as handle:
                handle.write("3 1\n1 2\n")
            with self.assertRaises(ValueError):
                read_edge_list(path)


if __name__ == '__main__':
    unittest.main()
