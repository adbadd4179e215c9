"""
Network Model Module for the QNC toolkit.

This module generates random deployments, computes the shortest-path routing
tree toward the gateway and reads/writes plain-text edge lists.
"""

import logging
from typing import List

import networkx as nx
import numpy as np

from .models import Edge, NetworkGraph, RoutingTree
from .utils import SeedLike, derive_seed

logger = logging.getLogger(__name__)

DEFAULT_CAPACITY = 1.0


def generate_random_network(n: int, m_edges: int, seed: SeedLike = None,
                            capacity: float = DEFAULT_CAPACITY) -> NetworkGraph:
    """Draw a directed simple graph with uniformly placed edges.

    Args:
        n: Number of nodes (>= 2)
        m_edges: Number of distinct directed edges (1 <= m_edges <= n(n-1))
        seed: Seed or generator
        capacity: Common edge capacity in bits per channel use

    Returns:
        NetworkGraph with a uniformly chosen gateway
    """
    if n < 2:
        raise ValueError(f"n must be at least 2, got {n}")
    if m_edges < 1:
        raise ValueError(f"m_edges must be at least 1, got {m_edges}")
    if m_edges > n * (n - 1):
        raise ValueError(f"m_edges={m_edges} exceeds n(n-1)={n * (n - 1)}")

    rng = np.random.default_rng(seed)
    # Ordered pairs (u, v), u != v, indexed as u * (n - 1) + r
    picks = rng.choice(n * (n - 1), size=m_edges, replace=False)
    tails = picks // (n - 1)
    rest = picks % (n - 1)
    heads = np.where(rest < tails, rest, rest + 1)
    gateway = int(rng.integers(1, n + 1))

    edges = [Edge(int(u) + 1, int(v) + 1, capacity) for u, v in zip(tails, heads)]
    return NetworkGraph(n=n, edges=tuple(edges), gateway=gateway)


def to_networkx(g: NetworkGraph) -> nx.DiGraph:
    """Directed networkx view with edge ids and capacities as attributes."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(1, g.n + 1))
    for e_id, edge in enumerate(g.edges):
        graph.add_edge(edge.tail, edge.head, edge_id=e_id, capacity=edge.capacity)
    return graph


def shortest_paths(g: NetworkGraph) -> RoutingTree:
    """Hop-minimal in-tree toward the gateway.

    Distances come from Dijkstra with unit weights on the reversed graph. Each
    node forwards on its smallest-id out-edge whose head is one hop closer.

    Args:
        g: Network graph

    Returns:
        RoutingTree; nodes without a path to the gateway are listed as unreachable
    """
    reversed_graph = to_networkx(g).reverse(copy=True)
    distances = nx.single_source_dijkstra_path_length(reversed_graph, g.gateway, weight=lambda u, v, d: 1)
    hop_distance = {int(v): int(d) for v, d in distances.items()}

    next_hop = {}
    for v in range(1, g.n + 1):
        if v == g.gateway or v not in hop_distance:
            continue
        for e_id in g.out_edges(v):
            head = g.edges[e_id].head
            if hop_distance.get(head) == hop_distance[v] - 1:
                next_hop[v] = e_id
                break

    unreachable = tuple(v for v in range(1, g.n + 1) if v not in hop_distance)
    if unreachable:
        logger.debug(f"{len(unreachable)} nodes cannot reach gateway {g.gateway}")
    return RoutingTree(gateway=g.gateway, next_hop=next_hop,
                       hop_distance=dict(sorted(hop_distance.items())), unreachable=unreachable)


def generate_deployment(n: int, m_edges: int, master_seed: int, key=(),
                        capacity: float = DEFAULT_CAPACITY, max_attempts: int = 1000) -> NetworkGraph:
    """Random network in which every node reaches the gateway.

    Deployments with unreachable nodes are discarded; attempt a uses the child
    seed (master_seed, *key, a).

    Args:
        n: Number of nodes
        m_edges: Number of edges
        master_seed: Root seed
        key: Index path of this deployment under the root seed
        capacity: Common edge capacity
        max_attempts: Resampling budget

    Returns:
        NetworkGraph with full reachability
    """
    for attempt in range(max_attempts):
        g = generate_random_network(n, m_edges, derive_seed(master_seed, *key, attempt), capacity)
        if shortest_paths(g).fully_reachable:
            if attempt:
                logger.warning(f"Deployment {key} resampled: accepted after {attempt + 1} draws")
            return g
    raise ValueError(f"no fully reachable deployment with n={n}, |E|={m_edges} in {max_attempts} draws")


def write_edge_list(g: NetworkGraph, path: str) -> str:
    """Write the graph as 'n gateway' followed by 'tail head capacity' lines.

    Args:
        g: Network graph
        path: Output file path

    Returns:
        The path written
    """
    with open(path, 'w') as handle:
        handle.write(f"{g.n} {g.gateway}\n")
        for edge in g.edges:
            handle.write(f"{edge.tail} {edge.head} {edge.capacity!r}\n")
    logger.info(f"Edge list written to {path}")
    return path


def read_edge_list(path: str) -> NetworkGraph:
    """Read a graph written by :func:`write_edge_list`."""
    with open(path) as handle:
        lines = [line.split() for line in handle if line.strip()]
    if not lines or len(lines[0]) != 2:
        raise ValueError(f"{path}: missing 'n gateway' header")
    n, gateway = int(lines[0][0]), int(lines[0][1])
    edges: List[Edge] = []
    for number, parts in enumerate(lines[1:], start=2):
        if len(parts) != 3:
            raise ValueError(f"{path}:{number}: expected 'tail head capacity'")
        edges.append(Edge(int(parts[0]), int(parts[1]), float(parts[2])))
    return NetworkGraph(n=n, edges=tuple(edges), gateway=gateway)
