"""
Unit tests for the QNC encoder module.
"""

import os
import sys
import tempfile
import unittest

import numpy as np

# Add the parent directory to the path so we can import the package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from qnc_toolkit.encoder import (design_quantizers, generate_coefficients, load_trace, orthonormal_block,
                                 read_trace_records, save_trace, simulate, transfer_coefficients, write_trace)
from qnc_toolkit.messages import random_orthonormal, sample_messages
from qnc_toolkit.models import Edge, EdgeQuantizer, MessagePrior, NetworkGraph
from qnc_toolkit.network import generate_deployment


class TestCoefficients(unittest.TestCase):
    """Test cases for coefficient generation."""

    def setUp(self):
        """Set up test environment."""
        self.g = generate_deployment(20, 80, master_seed=1)
        self.sched = generate_coefficients(self.g, 6, seed=2)

    def test_sparsity_patterns(self):
        """beta only where tail(e) = head(e'), alpha only where tail(e) = v and t = 2."""
        for t in range(2, 7):
            f = self.sched.propagation_matrix(t).tocoo()
            for e, e_prime in zip(f.row, f.col):
                self.assertEqual(self.g.edges[e].tail, self.g.edges[e_prime].head)
            a = self.sched.encoding_matrix(t).tocoo()
            if t > 2:
                self.assertEqual(a.nnz, 0)
            for e, v in zip(a.row, a.col):
                self.assertEqual(self.g.edges[e].tail, v + 1)
        self.assertEqual(self.sched.encoding_matrix(2).nnz, self.g.num_edges)

    def test_unit_rows(self):
        """Rows of [F | A] have unit norm, or are empty when nothing feeds the edge."""
        for t in range(2, 7):
            f = self.sched.propagation_matrix(t).toarray()
            a = self.sched.encoding_matrix(t).toarray()
            norms = np.sqrt((f ** 2).sum(axis=1) + (a ** 2).sum(axis=1))
            for e, norm in enumerate(norms):
                if norm == 0:
                    self.assertGreater(t, 2)
                    self.assertEqual(self.g.in_edges(self.g.edges[e].tail), [])
                else:
                    self.assertAlmostEqual(norm, 1.0, places=12)
            if t == 5:
                active = norms > 0
                np.testing.assert_allclose((f[active] ** 2).sum(axis=1), 1.0, atol=1e-12)

    def test_orthonormal_block(self):
        """Local blocks have orthonormal rows (wide) or columns (tall)."""
        rng = np.random.default_rng(0)
        wide = orthonormal_block(3, 5, rng)
        np.testing.assert_allclose(wide @ wide.T, np.eye(3), atol=1e-10)
        tall = orthonormal_block(6, 2, rng)
        np.testing.assert_allclose(tall.T @ tall, np.eye(2), atol=1e-10)
        square = orthonormal_block(4, 4, rng)
        np.testing.assert_allclose(square @ square.T, np.eye(4), atol=1e-10)

    def test_selector(self):
        """B has one 1 per row selecting the gateway in-edges in order."""
        b = self.sched.selector.toarray()
        self.assertEqual(b.shape, (len(self.g.gateway_in_edges), self.g.num_edges))
        np.testing.assert_array_equal(b.sum(axis=1), 1.0)
        self.assertEqual(list(np.argmax(b, axis=1)), self.g.gateway_in_edges)

    def test_leaf_node(self):
        """A node without in-edges sends only alpha x_v at t = 2."""
        g = NetworkGraph(n=3, edges=(Edge(1, 2), Edge(2, 3)), gateway=3)
        sched = generate_coefficients(g, 3, seed=0)
        a = sched.encoding_matrix(2).toarray()
        self.assertAlmostEqual(abs(a[0, 0]), 1.0)
        self.assertEqual(sched.propagation_matrix(3).toarray()[0].tolist(), [0.0, 0.0])

    def test_determinism(self):
        """Same seed, same schedule."""
        other = generate_coefficients(self.g, 6, seed=2)
        for t in range(2, 7):
            self.assertEqual((self.sched.propagation_matrix(t) != other.propagation_matrix(t)).nnz, 0)
            self.assertEqual((self.sched.encoding_matrix(t) != other.encoding_matrix(t)).nnz, 0)

    def test_rejects_short_horizon(self):
        with self.assertRaises(ValueError):
            generate_coefficients(self.g, 1)


class TestQuantizers(unittest.TestCase):
    """Test cases for quantizer design."""

    def setUp(self):
        """Set up test environment."""
        self.g = generate_deployment(20, 80, master_seed=3)
        self.sched = generate_coefficients(self.g, 5, seed=4)
        self.prior = MessagePrior(n=20, k=4)

    def test_one_bit(self):
        """L = 1, C = 1 gives two levels at +-R/2."""
        quantizer = EdgeQuantizer(levels=2, limit=3.0)
        out, _ = quantizer.quantize(np.array([-5.0, -0.1, 0.0, 0.1, 5.0]))
        np.testing.assert_allclose(out, [-1.5, -1.5, 1.5, 1.5, 1.5])

    def test_idempotent(self):
        """Q(Q(y)) = Q(y)."""
        quantizer = EdgeQuantizer(levels=16, limit=2.0)
        values = np.random.default_rng(0).normal(0, 2, 1000)
        once, _ = quantizer.quantize(values)
        twice, clipped = quantizer.quantize(once)
        np.testing.assert_array_equal(once, twice)
        self.assertFalse(clipped.any())

    def test_uniform_noise_model(self):
        """Gaussian input at R = 4 sigma with 64 levels has noise variance close to Delta^2/12."""
        quantizer = EdgeQuantizer(levels=64, limit=4.0)
        values = np.random.default_rng(1).standard_normal(1_000_000)
        out, clipped = quantizer.quantize(values)
        noise = (out - values)[~clipped]
        self.assertLess(abs(noise.var() / quantizer.noise_variance - 1.0), 0.1)

    def test_range_rule(self):
        """R_e(t) = 4 sqrt((k/n) sigma^2 sum_v Omega^2) and levels 2^(L C)."""
        bank = design_quantizers(self.sched, self.prior, 6)
        np.testing.assert_array_equal(bank.levels, 64.0)
        for t in range(2, 6):
            omega = transfer_coefficients(self.sched, t)
            expected = 4 * np.sqrt(self.prior.message_power * (omega ** 2).sum(axis=1))
            np.testing.assert_allclose(bank.limits[t], expected, rtol=1e-12)

    def test_longer_blocks_shrink_steps(self):
        """Larger L strictly decreases the step for the same range."""
        short = design_quantizers(self.sched, self.prior, 4)
        long = design_quantizers(self.sched, self.prior, 8)
        active = short.limits[3] > 0
        self.assertTrue(np.all(long.steps(3)[active] < short.steps(3)[active]))

    def test_rejects_sub_bit_blocks(self):
        g = generate_deployment(10, 30, master_seed=0, capacity=0.5)
        sched = generate_coefficients(g, 3, seed=0)
        with self.assertRaises(ValueError):
            design_quantizers(sched, MessagePrior(n=10, k=2), 1)


class TestSimulation(unittest.TestCase):
    """Test cases for the QNC recursion."""

    def setUp(self):
        """Set up test environment."""
        self.g = generate_deployment(20, 80, master_seed=5)
        self.sched = generate_coefficients(self.g, 7, seed=6)
        self.prior = MessagePrior(n=20, k=4)
        transform = random_orthonormal(20, seed=7)
        self.x = sample_messages(self.prior, transform, seed=8).x
        self.bank = design_quantizers(self.sched, self.prior, 6)

    def test_noiseless_matches_transfer(self):
        """Without quantization Y(t) = Omega(t) x and Z(t) = B Omega(t) x."""
        trace = simulate(self.g, self.sched, None, self.x)
        np.testing.assert_array_equal(trace.y(1), 0.0)
        for t in range(2, 8):
            omega = transfer_coefficients(self.sched, t)
            np.testing.assert_allclose(trace.y(t), omega @ self.x, atol=1e-12)
            np.testing.assert_allclose(trace.z(t), self.sched.selector @ (omega @ self.x), atol=1e-12)
        self.assertEqual(trace.clip_count, 0)
        self.assertFalse(np.any(trace.noises))

    def test_exact_recursion(self):
        """Y(t) = F(t) Y(t-1) + A(t) x + N(t) with the recorded noises."""
        trace = simulate(self.g, self.sched, self.bank, self.x)
        for t in range(2, 8):
            predicted = (self.sched.propagation_matrix(t) @ trace.y(t - 1)
                         + self.sched.encoding_matrix(t) @ self.x + trace.noise(t))
            scale = max(np.max(np.abs(trace.y(t))), 1.0)
            self.assertLess(np.max(np.abs(trace.y(t) - predicted)) / scale, 1e-12)

    def test_noise_bounded_by_half_step(self):
        """|N_e(t)| <= Delta_e(t)/2 unless the input was clipped."""
        trace = simulate(self.g, self.sched, self.bank, self.x)
        for t in range(2, 8):
            u = self.sched.propagation_matrix(t) @ trace.y(t - 1) + self.sched.encoding_matrix(t) @ self.x
            inside = np.abs(u) <= self.bank.limits[t]
            bound = self.bank.steps(t) / 2 + 1e-12
            self.assertTrue(np.all(np.abs(trace.noise(t))[inside] <= bound[inside]))

    def test_zero_input(self):
        """x = 0 keeps every noise within half a step."""
        trace = simulate(self.g, self.sched, self.bank, np.zeros(20))
        for t in range(2, 8):
            self.assertTrue(np.all(np.abs(trace.noise(t)) <= self.bank.steps(t) / 2 + 1e-12))

    def test_idle_edges_send_zero(self):
        """Edges with no information path transmit exact zero."""
        g = NetworkGraph(n=3, edges=(Edge(1, 2), Edge(2, 3)), gateway=3)
        sched = generate_coefficients(g, 4, seed=1)
        bank = design_quantizers(sched, MessagePrior(n=3, k=3), 4)
        self.assertEqual(bank.limits[3, 0], 0.0)
        trace = simulate(g, sched, bank, np.array([1.0, -2.0, 0.5]))
        self.assertEqual(trace.y(3)[0], 0.0)
        self.assertEqual(trace.noise(3)[0], 0.0)

    def test_clip_rate(self):
        """Gaussian messages at L = 8 clip far less than once per thousand quantizations."""
        g = generate_deployment(100, 800, master_seed=9)
        sched = generate_coefficients(g, 6, seed=10)
        prior = MessagePrior(n=100, k=100)
        bank = design_quantizers(sched, prior, 8)
        clips = 0
        total = 0
        for seed in range(5):
            x = sample_messages(prior, random_orthonormal(100, seed=seed), seed=seed).x
            trace = simulate(g, sched, bank, x)
            clips += trace.clip_count
            total += trace.total_quantizations
        self.assertGreater(total, 0)
        self.assertLess(clips / total, 1e-3)

    def test_determinism(self):
        a = simulate(self.g, self.sched, self.bank, self.x)
        b = simulate(self.g, self.sched, self.bank, self.x)
        np.testing.assert_array_equal(a.contents, b.contents)
        np.testing.assert_array_equal(a.packets, b.packets)

    def test_trace_export(self):
        """Binary traces round-trip exactly; text records cover every (t, e)."""
        trace = simulate(self.g, self.sched, self.bank, self.x)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = load_trace(save_trace(trace, os.path.join(tmp, 'trace.npz')))
            records = read_trace_records(write_trace(trace, os.path.join(tmp, 'trace.txt')))
        np.testing.assert_array_equal(loaded.contents, trace.contents)
        np.testing.assert_array_equal(loaded.noises, trace.noises)
        np.testing.assert_array_equal(loaded.packets, trace.packets)
        self.assertEqual(loaded.clip_count, trace.clip_count)
        self.assertEqual(len(records), trace.T * self.g.num_edges)
        row = records[(records['t'] == 3) & (records['e'] == 5)].iloc[0]
        self.assertEqual(row['Y'], trace.y(3)[5])
        self.assertEqual(row['N'], trace.noise(3)[5])


if __name__ == '__main__':
    unittest.main()
