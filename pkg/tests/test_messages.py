"""
Unit tests for the message model module.
"""

import os
import sys
import tempfile
import unittest

import numpy as np

# Add the parent directory to the path so we can import the package
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from qnc_toolkit.messages import prior_pdf, random_orthonormal, read_ensemble, sample_messages, write_ensemble
from qnc_toolkit.models import Grid, MessageEnsemble, MessagePrior, SparsifyingTransform


class TestMessagePrior(unittest.TestCase):
    """Test cases for the spike-and-slab prior."""

    def test_defaults(self):
        """Spike variance defaults to 1e-4 of the slab variance."""
        prior = MessagePrior(n=100, k=5)
        self.assertAlmostEqual(prior.spike_variance, 5e-4)
        self.assertAlmostEqual(prior.sparsity, 0.05)
        self.assertAlmostEqual(prior.message_power, 0.25)

    def test_validation(self):
        """Out-of-range sparsity and spike widths are rejected."""
        with self.assertRaises(ValueError):
            MessagePrior(n=10, k=11)
        with self.assertRaises(ValueError):
            MessagePrior(n=10, k=2, signal_variance=5.0, spike_variance=0.01)
        with self.assertRaises(ValueError):
            MessagePrior(n=10, k=2, signal_variance=0.0)
        self.assertEqual(MessagePrior(n=10, k=0).sparsity, 0.0)


class TestTransform(unittest.TestCase):
    """Test cases for the sparsifying transform."""

    def test_random_orthonormal(self):
        """Generated transforms are orthonormal and seed-deterministic."""
        transform = random_orthonormal(50, seed=4)
        np.testing.assert_allclose(transform.phi.T @ transform.phi, np.eye(50), atol=1e-10)
        np.testing.assert_array_equal(transform.phi, random_orthonormal(50, seed=4).phi)

    def test_rejects_non_orthonormal(self):
        """A non-orthonormal matrix is rejected."""
        with self.assertRaises(ValueError):
            SparsifyingTransform(np.array([[1.0, 0.1], [0.0, 1.0]]))
        with self.assertRaises(ValueError):
            SparsifyingTransform(np.ones((2, 3)))


class TestSampling(unittest.TestCase):
    """Test cases for message sampling."""

    def setUp(self):
        """Set up test environment."""
        self.prior = MessagePrior(n=100, k=5)
        self.transform = random_orthonormal(100, seed=0)

    def test_zeros_off_support(self):
        """s is exactly zero where q is zero and x = phi s."""
        ensemble = sample_messages(self.prior, self.transform, seed=1)
        self.assertTrue(np.all(ensemble.s[~ensemble.q] == 0))
        np.testing.assert_allclose(ensemble.x, self.transform.phi @ ensemble.s, atol=1e-12)

    def test_identity_transform(self):
        """With phi = I the messages are the coefficients."""
        ensemble = sample_messages(self.prior, SparsifyingTransform.identity(100), seed=2)
        np.testing.assert_array_equal(ensemble.x, ensemble.s)

    def test_support_rate(self):
        """The empirical support fraction approaches k/n."""
        sizes = [sample_messages(self.prior, self.transform, seed=s).support_size for s in range(400)]
        self.assertAlmostEqual(np.mean(sizes) / 100, 0.05, delta=0.005)

    def test_message_power(self):
        """E[x_v^2] approaches (k/n) sigma_s^2 over many draws."""
        power = np.mean([np.mean(sample_messages(self.prior, self.transform, seed=s).x ** 2) for s in range(2000)])
        self.assertAlmostEqual(power, self.prior.message_power, delta=0.08 * self.prior.message_power)

    def test_zero_sparsity(self):
        """k = 0 gives all-zero messages."""
        ensemble = sample_messages(MessagePrior(n=10, k=0), random_orthonormal(10, seed=0), seed=0)
        self.assertEqual(ensemble.support_size, 0)
        self.assertFalse(np.any(ensemble.x))

    def test_dimension_mismatch(self):
        """Prior and transform must agree on n."""
        with self.assertRaises(ValueError):
            sample_messages(MessagePrior(n=10, k=1), random_orthonormal(11, seed=0), seed=0)

    def test_ensemble_validation(self):
        """Nonzero s off the support is rejected."""
        with self.assertRaises(ValueError):
            MessageEnsemble(q=np.array([False, True]), s=np.array([1.0, 2.0]), x=np.zeros(2))

    def test_round_trip(self):
        """Ensemble text files read back exactly."""
        ensemble = sample_messages(self.prior, self.transform, seed=9)
        with tempfile.TemporaryDirectory() as tmp:
            loaded = read_ensemble(write_ensemble(ensemble, os.path.join(tmp, 'ensemble.txt')))
        np.testing.assert_array_equal(loaded.q, ensemble.q)
        np.testing.assert_array_equal(loaded.s, ensemble.s)
        np.testing.assert_array_equal(loaded.x, ensemble.x)


class TestPriorPdf(unittest.TestCase):
    """Test cases for the prior on the decoder grid."""

    def test_normalized_mixture(self):
        """The grid prior sums to one and puts 1 - k/n mass near zero."""
        prior = MessagePrior(n=10, k=2, signal_variance=5.0)
        grid = Grid.for_prior(prior)
        pmf = prior_pdf(prior, grid)
        self.assertAlmostEqual(pmf.sum(), 1.0, places=12)
        self.assertTrue(np.all(pmf >= 0))
        near_zero = np.abs(grid.values) <= 6 * np.sqrt(prior.spike_variance)
        self.assertAlmostEqual(pmf[near_zero].sum(), 0.8, delta=0.02)
        self.assertAlmostEqual(pmf @ grid.values ** 2, prior.message_power, delta=0.01)

    def test_grid_must_resolve_spike(self):
        """Coarse or narrow grids are rejected."""
        prior = MessagePrior(n=10, k=2)
        with self.assertRaises(ValueError):
            prior_pdf(prior, Grid(half_width=8 * np.sqrt(5.0), points=1024))
        with self.assertRaises(ValueError):
            prior_pdf(prior, Grid(half_width=2.0, points=4096))

    def test_grid_for_prior(self):
        """Default spike ratio needs 2048 points, ratio 1e-3 fits in 512."""
        self.assertEqual(Grid.for_prior(MessagePrior(n=10, k=2)).points, 2048)
        wide = MessagePrior.from_sparsity(10, 0.2, spike_ratio=1e-3)
        self.assertEqual(Grid.for_prior(wide, min_points=512).points, 512)
        with self.assertRaises(ValueError):
            Grid(half_width=1.0, points=1000)


if __name__ == '__main__':
    unittest.main()
