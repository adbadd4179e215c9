"""
Belief Propagation Decoder Module for the QNC toolkit.

This module implements grid-based sum-product decoding of the whitened
system z' = theta s + n' under the spike-and-slab prior. Messages are
probability vectors on a uniform grid; the convolutions of the constraint
update run as zero-padded FFT products, batched over blocks of constraints.
"""

import logging
from typing import Optional

import numpy as np
from scipy import fft, stats

from .exceptions import DecodingError
from .messages import prior_pdf
from .models import BeliefState, DecodeResult, Grid, MessagePrior, WhitenedSystem

logger = logging.getLogger(__name__)

EDGE_THRESHOLD = 1e-12
LOG_FLOOR = 1e-300
DEFAULT_MAX_ITER = 50
DEFAULT_DAMPING = 0.5
SUM_RANGE_STDS = 8.0
BATCH_ELEMENTS = 1 << 22


def default_tolerance(prior: MessagePrior) -> float:
    """Stopping tolerance 1e-3 x the expected signal norm sqrt(n (k/n) sigma_s^2)."""
    return max(1e-3 * np.sqrt(prior.n * prior.message_power), 1e-12)


def _normalize(pmf: np.ndarray) -> np.ndarray:
    """Normalize along the last axis; vectors without mass become uniform."""
    mass = pmf.sum(axis=-1, keepdims=True)
    uniform = np.full(pmf.shape[-1], 1.0 / pmf.shape[-1])
    return np.where(mass > 0, pmf / np.where(mass > 0, mass, 1.0), uniform)


def _noise_pmf(step: np.ndarray, offsets: np.ndarray) -> np.ndarray:
    """Unit-variance Gaussian mass of the u-cells centred at offsets * step."""
    return stats.norm.cdf((offsets + 0.5) * step) - stats.norm.cdf((offsets - 0.5) * step)


def sum_steps(coeffs: np.ndarray, grid: Grid, prior: MessagePrior) -> np.ndarray:
    """u-grid step of each constraint.

    The P cells of a term span the larger of 8 standard deviations of the
    noisy sum and the largest scaled grid value; the padded buffer of 2P
    cells holds partial sums up to twice that range.
    """
    half_range = np.maximum(
        SUM_RANGE_STDS * np.sqrt(prior.message_power * np.sum(coeffs ** 2, axis=-1) + 1.0),
        np.max(np.abs(coeffs), axis=-1) * grid.half_width
    )
    return 2 * half_range / grid.points


def deposit(coeffs: np.ndarray, forward: np.ndarray, grid: Grid, step: np.ndarray) -> np.ndarray:
    """Cloud-in-cell deposit of theta_v s_v on the cyclic u-grid of 2P cells.

    Positions outside the P central cells are accumulated into the end cells.

    Args:
        coeffs: c x d coefficients
        forward: c x d x P PMFs over s_v
        grid: Coefficient grid
        step: u-grid step of each of the c constraints

    Returns:
        c x d x 2P PMFs of theta_v s_v, offset zero at index 0
    """
    c, d, points = forward.shape
    padded = 2 * points
    edge = points // 2
    position = np.clip(coeffs[:, :, None] * grid.values / step[:, None, None], -edge, edge - 1)
    lower = np.floor(position)
    weight_upper = position - lower
    lower = lower.astype(int)
    upper = np.minimum(lower + 1, edge - 1)
    offset = (np.arange(c * d) * padded).reshape(c, d, 1)
    flat = np.concatenate([(offset + lower % padded).ravel(), (offset + upper % padded).ravel()])
    mass = np.concatenate([(forward * (1.0 - weight_upper)).ravel(), (forward * weight_upper).ravel()])
    return np.bincount(flat, weights=mass, minlength=c * d * padded).reshape(c, d, padded)


def constraint_messages(z: np.ndarray, coeffs: np.ndarray, forward: np.ndarray, grid: Grid,
                        prior: MessagePrior) -> np.ndarray:
    """Messages from a block of constraint nodes to each of their neighbours.

    For neighbour v of constraint i the message is the probability that the
    other neighbours plus unit Gaussian noise equal z_i - theta_{i,v} s_v,
    integrated over each grid cell of s_v. Constraints of lower degree are
    padded with zero coefficients, whose deposit is a unit mass at zero.

    Args:
        z: c whitened measurements
        coeffs: c x d coefficients theta_{i,v}
        forward: c x d x P incoming variable-to-constraint PMFs
        grid: Coefficient grid
        prior: Message prior (sets the range of the partial sums)

    Returns:
        c x d x P normalized PMFs over s_v
    """
    c, d, points = forward.shape
    padded = 2 * points
    step = sum_steps(coeffs, grid, prior)

    spectra = fft.rfft(deposit(coeffs, forward, grid, step), axis=2)
    ones = np.ones((c, 1, spectra.shape[2]), dtype=spectra.dtype)
    prefix = np.cumprod(np.concatenate([ones, spectra[:, :-1]], axis=1), axis=1)
    suffix = np.cumprod(np.concatenate([ones, spectra[:, :0:-1]], axis=1), axis=1)[:, ::-1]
    offsets = np.arange(-points, points)
    noise = np.zeros((c, padded))
    noise[:, offsets % padded] = _noise_pmf(step[:, None], offsets[None, :])
    leave_one_out = prefix * suffix * fft.rfft(noise, axis=1)[:, None, :]

    density = np.clip(fft.irfft(leave_one_out, n=padded, axis=2), 0.0, None)
    density = fft.fftshift(density, axes=2)
    cdf = np.concatenate([np.zeros((c, d, 1)), np.cumsum(density, axis=2)], axis=2)

    # u = z - theta s at the cell edges of s, in CDF-table coordinates
    s_edges = np.append(grid.values - grid.spacing / 2, grid.values[-1] + grid.spacing / 2)
    q = (z[:, None, None] - coeffs[:, :, None] * s_edges) / step[:, None, None] + points + 0.5
    q = np.clip(q, 0.0, padded)
    index = np.minimum(np.floor(q).astype(int), padded - 1)
    frac = q - index
    at_edges = (np.take_along_axis(cdf, index, axis=2) * (1.0 - frac)
                + np.take_along_axis(cdf, index + 1, axis=2) * frac)
    return _normalize(np.abs(np.diff(at_edges, axis=2)))


class _FactorGraph:
    """Edges of theta grouped by constraint, with blocks sized for batching."""

    def __init__(self, ws: WhitenedSystem, points: int):
        self.rows, self.cols = np.nonzero(np.abs(ws.theta) > EDGE_THRESHOLD)
        self.coeffs = ws.theta[self.rows, self.cols]
        self.z = ws.z
        self.bounds = np.searchsorted(self.rows, np.arange(ws.m + 1))
        degree = np.diff(self.bounds)
        self.slot = np.arange(self.rows.shape[0]) - self.bounds[self.rows]
        self.width = int(degree.max()) if degree.size else 0
        self.active = np.flatnonzero(degree > 0)
        self.block = max(1, BATCH_ELEMENTS // max(self.width * 2 * points, 1))

    @property
    def num_edges(self) -> int:
        return self.rows.shape[0]

    def update(self, forward: np.ndarray, grid: Grid, prior: MessagePrior) -> np.ndarray:
        """Constraint-to-variable messages of every edge."""
        updated = np.empty_like(forward)
        points = forward.shape[1]
        for start in range(0, self.active.size, self.block):
            block = self.active[start:start + self.block]
            lo, hi = self.bounds[block[0]], self.bounds[block[-1] + 1]
            member = np.searchsorted(block, self.rows[lo:hi])
            slot = self.slot[lo:hi]
            coeffs = np.zeros((block.size, self.width))
            coeffs[member, slot] = self.coeffs[lo:hi]
            incoming = np.full((block.size, self.width, points), 1.0 / points)
            incoming[member, slot] = forward[lo:hi]
            messages = constraint_messages(self.z[block], coeffs, incoming, grid, prior)
            updated[lo:hi] = messages[member, slot]
        return updated


def bp_decode(ws: WhitenedSystem, prior: MessagePrior, grid: Optional[Grid] = None,
              tolerance: Optional[float] = None, max_iter: int = DEFAULT_MAX_ITER,
              damping: float = DEFAULT_DAMPING, return_beliefs: bool = False,
              initial_beliefs: Optional[np.ndarray] = None) -> DecodeResult:
    """Sum-product MMSE decoding on the factor graph of theta.

    Forward messages start at the prior, or at ``initial_beliefs`` when the
    posteriors of a related system are available. Each iteration updates all
    constraint-to-variable messages, then all variable-to-constraint messages
    (prior times the other incoming messages). The estimate is the mean of
    prior times all incoming messages. Updates are damped except the first
    constraint update.

    Args:
        ws: Whitened system
        prior: Message prior
        grid: Coefficient grid (defaults to Grid.for_prior)
        tolerance: Stop when ||x_hat - previous x_hat|| <= tolerance
        max_iter: Iteration cap
        damping: Weight of the previous message in each update
        return_beliefs: Attach the final BeliefState to the result
        initial_beliefs: n x P PMFs used as the starting forward messages

    Returns:
        DecodeResult; without convergence, the iterate with the smallest change
    """
    if ws.n != prior.n:
        raise ValueError(f"system has n={ws.n} but prior has n={prior.n}")
    if not 0 <= damping < 1:
        raise ValueError(f"damping must lie in [0, 1), got {damping}")
    if not (np.all(np.isfinite(ws.z)) and np.all(np.isfinite(ws.theta))):
        raise DecodingError("whitened system contains non-finite values")
    grid = Grid.for_prior(prior) if grid is None else grid
    tolerance = default_tolerance(prior) if tolerance is None else tolerance

    prior_mass = prior_pdf(prior, grid)
    log_prior = np.log(np.maximum(prior_mass, LOG_FLOOR))
    graph = _FactorGraph(ws, grid.points)
    rows, cols = graph.rows, graph.cols
    points = grid.points

    if initial_beliefs is None:
        start = np.tile(prior_mass, (ws.n, 1))
    else:
        if initial_beliefs.shape != (ws.n, points):
            raise ValueError(f"initial beliefs must have shape {(ws.n, points)}, got {initial_beliefs.shape}")
        start = _normalize(np.clip(initial_beliefs, 0.0, None))
    forward = start[cols]
    backward = np.full((graph.num_edges, points), 1.0 / points)
    belief = start
    s_hat = start @ grid.values
    x_hat = ws.phi @ s_hat
    best = (np.inf, x_hat, s_hat, belief)
    history = []
    converged = graph.num_edges == 0
    iterations = 0

    for tau in range(1, (max_iter if graph.num_edges else 0) + 1):
        iterations = tau
        updated = graph.update(forward, grid, prior)
        if not np.all(np.isfinite(updated)):
            raise DecodingError(f"non-finite constraint message at iteration {tau}")
        backward = updated if tau == 1 else _normalize((1 - damping) * updated + damping * backward)

        log_backward = np.log(np.maximum(backward, LOG_FLOOR))
        total = np.tile(log_prior, (ws.n, 1))
        np.add.at(total, cols, log_backward)
        extrinsic = total[cols] - log_backward
        extrinsic -= extrinsic.max(axis=1, keepdims=True)
        forward = _normalize((1 - damping) * _normalize(np.exp(extrinsic)) + damping * forward)

        belief = _normalize(np.exp(total - total.max(axis=1, keepdims=True)))
        if not (np.all(np.isfinite(belief)) and np.all(np.isfinite(forward))):
            raise DecodingError(f"non-finite variable belief at iteration {tau}")
        s_new = belief @ grid.values
        x_new = ws.phi @ s_new
        delta = float(np.linalg.norm(x_new - x_hat))
        history.append(delta)
        s_hat, x_hat = s_new, x_new
        logger.debug(f"bp tau={tau} residual={delta:.6e}")
        if delta < best[0]:
            best = (delta, x_hat, s_hat, belief)
        if delta <= tolerance:
            converged = True
            break

    if not converged:
        logger.warning(f"BP did not converge in {max_iter} iterations (best change {best[0]:.3e})")
        x_hat, s_hat, belief = best[1], best[2], best[3]

    beliefs = None
    if return_beliefs:
        beliefs = BeliefState(rows=rows, cols=cols, forward=forward, backward=backward, iteration=iterations,
                              variable=belief)
    return DecodeResult(x_hat=x_hat, s_hat=s_hat, iterations=iterations, converged=converged,
                        history=history, decoder='bp', beliefs=beliefs)
