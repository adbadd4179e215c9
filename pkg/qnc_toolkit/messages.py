"""
Message Model Module for the QNC toolkit.

This module provides the spike-and-slab prior on the sparse coefficients, the
random orthonormal sparsifying transform and message sampling.
"""

import logging

import numpy as np
import pandas as pd
from scipy import stats

from .models import Grid, MessageEnsemble, MessagePrior, SparsifyingTransform
from .utils import SeedLike

logger = logging.getLogger(__name__)

ENSEMBLE_COLUMNS = ['v', 'q', 's', 'x']


def random_orthonormal(n: int, seed: SeedLike = None) -> SparsifyingTransform:
    """Orthonormalize a square matrix of independent standard normal entries.

    Column signs follow the diagonal of R so the result is Haar distributed.

    Args:
        n: Dimension (>= 1)
        seed: Seed or generator

    Returns:
        SparsifyingTransform
    """
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    gaussian = rng.standard_normal((n, n))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return SparsifyingTransform(q * signs)


def sample_messages(prior: MessagePrior, transform: SparsifyingTransform,
                    seed: SeedLike = None) -> MessageEnsemble:
    """Draw states, sparse coefficients and messages x = phi s.

    Args:
        prior: Spike-and-slab prior
        transform: Sparsifying transform of matching dimension
        seed: Seed or generator

    Returns:
        MessageEnsemble with exact zeros off the support
    """
    if prior.n != transform.n:
        raise ValueError(f"prior dimension {prior.n} does not match transform dimension {transform.n}")
    rng = np.random.default_rng(seed)
    q = rng.random(prior.n) < prior.sparsity
    slab = rng.normal(0.0, np.sqrt(prior.signal_variance), prior.n)
    s = np.where(q, slab, 0.0)
    x = transform.phi @ s
    return MessageEnsemble(q=q, s=s, x=x)


def prior_pdf(prior: MessagePrior, grid: Grid) -> np.ndarray:
    """Prior of one coefficient as a probability vector on the grid.

    The zero spike is a Gaussian of variance ``prior.spike_variance``.

    Args:
        prior: Spike-and-slab prior
        grid: Grid covering at least six slab standard deviations

    Returns:
        Nonnegative vector over grid.values summing to one
    """
    grid.check_prior(prior)
    values = grid.values
    slab = stats.norm.pdf(values, scale=np.sqrt(prior.signal_variance))
    spike = stats.norm.pdf(values, scale=np.sqrt(prior.spike_variance))
    density = prior.sparsity * slab + (1.0 - prior.sparsity) * spike
    mass = density * grid.spacing
    return mass / mass.sum()


def write_ensemble(ensemble: MessageEnsemble, path: str) -> str:
    """Write the ensemble as space-separated columns v q s x.

    Args:
        ensemble: Sampled messages
        path: Output file path

    Returns:
        The path written
    """
    frame = pd.DataFrame(ensemble.to_dict(), columns=ENSEMBLE_COLUMNS)
    frame.to_csv(path, sep=' ', index=False, float_format='%.17g')
    logger.info(f"Ensemble written to {path}")
    return path


def read_ensemble(path: str) -> MessageEnsemble:
    """Read an ensemble written by :func:`write_ensemble`."""
    frame = pd.read_csv(path, sep=' ', float_precision='round_trip')
    missing = set(ENSEMBLE_COLUMNS) - set(frame.columns)
    if missing:
        raise ValueError(f"{path}: missing columns {sorted(missing)}")
    frame = frame.sort_values('v')
    return MessageEnsemble(
        q=frame['q'].to_numpy().astype(bool),
        s=frame['s'].to_numpy(dtype=float),
        x=frame['x'].to_numpy(dtype=float)
    )
