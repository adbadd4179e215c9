"""
QNC Encoder Module for the QNC toolkit.

This module generates the random network-coding coefficients, designs the
per-edge quantizers and simulates the time-slotted quantized network coding
recursion Y(t) = Q[F(t) Y(t-1) + A(t) x].
"""

import logging
from typing import Iterator, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import sparse

from .models import CoefficientSchedule, MessagePrior, NetworkGraph, QuantizerBank, SimulationTrace
from .utils import SeedLike

logger = logging.getLogger(__name__)

RANGE_FACTOR = 4.0
CLIP_RATE_WARNING = 1e-3
TRACE_COLUMNS = ['t', 'e', 'Y', 'N']


def orthonormal_block(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalized Gaussian block.

    Rows are orthonormal when rows <= cols, columns otherwise.

    Args:
        rows: Number of rows (out-edges)
        cols: Number of columns (in-edges)
        rng: Random generator

    Returns:
        rows x cols matrix
    """
    gaussian = rng.standard_normal((rows, cols))
    if rows <= cols:
        q, r = np.linalg.qr(gaussian.T)
        signs = np.where(np.diag(r) < 0, -1.0, 1.0)
        return (q * signs).T
    q, r = np.linalg.qr(gaussian)
    signs = np.where(np.diag(r) < 0, -1.0, 1.0)
    return q * signs


def _assemble(values, rows, cols, shape) -> sparse.csr_matrix:
    return sparse.csr_matrix(
        (np.asarray(values, dtype=float), (np.asarray(rows, dtype=int), np.asarray(cols, dtype=int))),
        shape=shape
    )


def _normalize_rows(f: sparse.csr_matrix, a: sparse.csr_matrix) -> Tuple[sparse.csr_matrix, sparse.csr_matrix]:
    """Rescale every row of [F | A] to unit l2 norm; all-zero rows stay zero."""
    norms = np.sqrt(np.asarray(f.multiply(f).sum(axis=1)).ravel()
                    + np.asarray(a.multiply(a).sum(axis=1)).ravel())
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    d = sparse.diags(scale)
    return sparse.csr_matrix(d @ f), sparse.csr_matrix(d @ a)


def generate_coefficients(g: NetworkGraph, T: int, seed: SeedLike = None) -> CoefficientSchedule:
    """Draw local encoding and propagation coefficients for slots 2..T.

    alpha_{e,v}(2) is standard normal on edges leaving v and zero for t > 2.
    Each node's beta block (Out(v) x In(v)) is an orthonormalized Gaussian
    block; each row of [F(t) | A(t)] is then rescaled to unit norm.

    Args:
        g: Network graph
        T: Final time slot (>= 2)
        seed: Seed or generator

    Returns:
        CoefficientSchedule
    """
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    rng = np.random.default_rng(seed)
    num_edges = g.num_edges

    local_encoding = {}
    propagation = {}
    for t in range(2, T + 1):
        f_rows, f_cols, f_vals = [], [], []
        a_rows, a_cols, a_vals = [], [], []
        for v in range(1, g.n + 1):
            outgoing = g.out_edges(v)
            if not outgoing:
                continue
            incoming = g.in_edges(v)
            if incoming:
                block = orthonormal_block(len(outgoing), len(incoming), rng)
                for r, e in enumerate(outgoing):
                    f_rows.extend([e] * len(incoming))
                    f_cols.extend(incoming)
                    f_vals.extend(block[r])
            if t == 2:
                a_rows.extend(outgoing)
                a_cols.extend([v - 1] * len(outgoing))
                a_vals.extend(rng.standard_normal(len(outgoing)))

        f = _assemble(f_vals, f_rows, f_cols, (num_edges, num_edges))
        a = _assemble(a_vals, a_rows, a_cols, (num_edges, g.n))
        propagation[t], local_encoding[t] = _normalize_rows(f, a)

    gateway_edges = g.gateway_in_edges
    selector = sparse.csr_matrix(
        (np.ones(len(gateway_edges)), (np.arange(len(gateway_edges)), gateway_edges)),
        shape=(len(gateway_edges), num_edges)
    )
    logger.debug(f"Generated coefficients for {num_edges} edges, T={T}, |In(gateway)|={len(gateway_edges)}")
    return CoefficientSchedule(T=T, n=g.n, local_encoding=local_encoding, propagation=propagation,
                               selector=selector, capacities=g.capacities.copy())


def iter_transfer_coefficients(sched: CoefficientSchedule, T: Optional[int] = None) -> Iterator[Tuple[int, np.ndarray]]:
    """Yield (t, Omega(t)) for t = 2..T using Omega(t) = F(t) Omega(t-1) + A(t)."""
    T = sched.T if T is None else T
    omega = None
    for t in range(2, T + 1):
        a = sched.encoding_matrix(t).toarray()
        omega = a if omega is None else sched.propagation_matrix(t) @ omega + a
        yield t, omega


def transfer_coefficients(sched: CoefficientSchedule, t: int) -> np.ndarray:
    """Noiseless transfer matrix Omega(t) from x to the edge contents Y(t).

    Args:
        sched: Coefficient schedule
        t: Time slot, 2 <= t <= sched.T

    Returns:
        |E| x n dense matrix
    """
    if not 2 <= t <= sched.T:
        raise ValueError(f"t={t} outside [2, {sched.T}]")
    for slot, omega in iter_transfer_coefficients(sched, t):
        if slot == t:
            return omega


def design_quantizers(sched: CoefficientSchedule, prior: MessagePrior, L: int) -> QuantizerBank:
    """Range R_e(t) = 4 x predicted std of Y_e(t) with 2^(L C_e) levels.

    The predicted variance is (k/n) sigma_s^2 sum_v Omega_{e,v}(t)^2. Edges with
    zero predicted variance get R = 0 and transmit exact zero.

    Args:
        sched: Coefficient schedule
        prior: Message prior
        L: Block length in channel uses per slot

    Returns:
        QuantizerBank covering slots 2..sched.T
    """
    bits = L * sched.capacities
    if np.any(bits < 1):
        raise ValueError(f"L={L} gives fewer than one bit on some edge (min L*C_e={bits.min():.3g})")
    levels = 2.0 ** bits
    limits = np.zeros((sched.T + 1, sched.num_edges))
    for t, omega in iter_transfer_coefficients(sched):
        variance = prior.message_power * np.sum(omega ** 2, axis=1)
        limits[t] = RANGE_FACTOR * np.sqrt(variance)
    return QuantizerBank(block_length=L, levels=levels, limits=limits)


def simulate(g: NetworkGraph, sched: CoefficientSchedule, quantizers: Optional[QuantizerBank],
             x: np.ndarray, T: Optional[int] = None) -> SimulationTrace:
    """Run the QNC recursion and record contents, noises and gateway packets.

    Saturated inputs are mapped to the outermost level and counted.
    ``quantizers=None`` bypasses quantization (infinite resolution).

    Args:
        g: Network graph
        sched: Coefficient schedule
        quantizers: Quantizer bank or None
        x: Messages (n-vector)
        T: Final slot (defaults to sched.T)

    Returns:
        SimulationTrace
    """
    T = sched.T if T is None else T
    x = np.asarray(x, dtype=float)
    if x.shape != (sched.n,):
        raise ValueError(f"x has shape {x.shape}, expected ({sched.n},)")
    if g.num_edges != sched.num_edges:
        raise ValueError(f"graph has {g.num_edges} edges but schedule has {sched.num_edges}")
    if not 2 <= T <= sched.T:
        raise ValueError(f"T={T} outside [2, {sched.T}]")
    if quantizers is not None and quantizers.T < T:
        raise ValueError(f"quantizers cover slots up to {quantizers.T}, need {T}")

    num_edges = sched.num_edges
    contents = np.zeros((T, num_edges))
    noises = np.zeros((T, num_edges))
    packets = np.zeros((T - 1, sched.measurements_per_slot))
    clip_counts = np.zeros(T, dtype=int)
    total = 0

    previous = contents[0]
    for t in range(2, T + 1):
        u = sched.propagation_matrix(t) @ previous + sched.encoding_matrix(t) @ x
        if quantizers is None:
            y = u
        else:
            y, clipped = quantizers.quantize(t, u)
            clip_counts[t - 1] = int(clipped.sum())
            total += int(np.count_nonzero(quantizers.limits[t] > 0))
        contents[t - 1] = y
        noises[t - 1] = y - u
        packets[t - 2] = sched.selector @ y
        previous = y

    trace = SimulationTrace(contents=contents, noises=noises, packets=packets,
                            clip_counts=clip_counts, total_quantizations=total)
    if total and trace.clip_count / total > CLIP_RATE_WARNING:
        logger.warning(f"Clip rate {trace.clip_count / total:.2e} over {total} quantizations")
    return trace


def write_trace(trace: SimulationTrace, path: str) -> str:
    """Write per-slot text records 't e Y N' (edge ids from 0).

    Args:
        trace: Simulation trace
        path: Output file path

    Returns:
        The path written
    """
    T, num_edges = trace.contents.shape
    frame = pd.DataFrame({
        't': np.repeat(np.arange(1, T + 1), num_edges),
        'e': np.tile(np.arange(num_edges), T),
        'Y': trace.contents.reshape(-1),
        'N': trace.noises.reshape(-1)
    }, columns=TRACE_COLUMNS)
    frame.to_csv(path, sep=' ', index=False, float_format='%.17g')
    logger.info(f"Trace written to {path}")
    return path


def read_trace_records(path: str) -> pd.DataFrame:
    """Read the text records written by :func:`write_trace`."""
    return pd.read_csv(path, sep=' ', float_precision='round_trip')


def save_trace(trace: SimulationTrace, path: str) -> str:
    """Exact binary export (.npz)."""
    np.savez(path, contents=trace.contents, noises=trace.noises, packets=trace.packets,
             clip_counts=trace.clip_counts, total_quantizations=trace.total_quantizations)
    return path


def load_trace(path: str) -> SimulationTrace:
    """Load a trace saved by :func:`save_trace`."""
    with np.load(path) as data:
        return SimulationTrace(
            contents=data['contents'],
            noises=data['noises'],
            packets=data['packets'],
            clip_counts=data['clip_counts'],
            total_quantizations=int(data['total_quantizations'])
        )
