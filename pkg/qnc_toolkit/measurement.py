"""
Measurement Module for the QNC toolkit.

This module assembles the total measurement system Z_tot = Psi_tot x + Psi_N N_tot
seen by the gateway and the covariance of the effective noise Psi_N N_tot.
"""

import logging
from typing import Optional

import numpy as np

from .encoder import iter_transfer_coefficients
from .models import CoefficientSchedule, MeasurementSystem, NetworkGraph, QuantizerBank, SimulationTrace

logger = logging.getLogger(__name__)


def build_measurement_system(sched: CoefficientSchedule, g: NetworkGraph,
                             quantizers: Optional[QuantizerBank], T: Optional[int] = None) -> MeasurementSystem:
    """Stack the gateway observations of slots 2..T.

    The block of slot t is B Omega(t) for the messages; noise N(t') enters
    Z(t) through B F(t) ... F(t'+1) (B itself when t' = t). Noise variances
    follow the uniform model Delta_e(t)^2 / 12.

    Args:
        sched: Coefficient schedule
        g: Network graph
        quantizers: Quantizer bank (None means noiseless)
        T: Final slot (defaults to sched.T)

    Returns:
        MeasurementSystem with m = (T-1)|In(gateway)| rows
    """
    T = sched.T if T is None else T
    if not 2 <= T <= sched.T:
        raise ValueError(f"T={T} outside [2, {sched.T}]")
    if g.num_edges != sched.num_edges:
        raise ValueError(f"graph has {g.num_edges} edges but schedule has {sched.num_edges}")

    per_slot = sched.measurements_per_slot
    num_edges = sched.num_edges
    selector = sched.selector.toarray()

    psi_tot = np.zeros(((T - 1) * per_slot, sched.n))
    psi_noise = np.zeros(((T - 1) * per_slot, (T - 1) * num_edges))
    for t, omega in iter_transfer_coefficients(sched, T):
        rows = slice((t - 2) * per_slot, (t - 1) * per_slot)
        psi_tot[rows] = selector @ omega
        block = selector
        for source in range(t, 1, -1):
            cols = slice((source - 2) * num_edges, (source - 1) * num_edges)
            psi_noise[rows, cols] = block
            block = sched.propagation_matrix(source).T.dot(block.T).T

    if quantizers is None:
        lambda_q = np.zeros((T - 1) * num_edges)
    else:
        lambda_q = np.concatenate([quantizers.noise_variances(t) for t in range(2, T + 1)])

    logger.debug(f"Measurement system T={T}: m={psi_tot.shape[0]}, noise terms={psi_noise.shape[1]}")
    return MeasurementSystem(T=T, psi_tot=psi_tot, psi_noise=psi_noise, lambda_q=lambda_q,
                             measurements_per_slot=per_slot, num_edges=num_edges)


def effective_noise_covariance(ms: MeasurementSystem) -> np.ndarray:
    """Psi_N Lambda_Q Psi_N^T, symmetrized."""
    cov = (ms.psi_noise * ms.lambda_q) @ ms.psi_noise.T
    return 0.5 * (cov + cov.T)


def linear_consistency_residual(ms: MeasurementSystem, trace: SimulationTrace, x: np.ndarray) -> float:
    """Relative max-norm residual of Z_tot - Psi_tot x - Psi_N N_tot.

    Args:
        ms: Measurement system
        trace: Recorded simulation trace covering at least ms.T slots
        x: Messages

    Returns:
        ||residual||_inf / ||Z_tot||_inf (absolute residual when Z_tot is zero)
    """
    z_tot = trace.z_tot(ms.T)
    residual = z_tot - ms.psi_tot @ x - ms.psi_noise @ trace.n_tot(ms.T)
    scale = np.max(np.abs(z_tot)) if z_tot.size else 0.0
    error = np.max(np.abs(residual)) if residual.size else 0.0
    return float(error / scale) if scale > 0 else float(error)


def write_matrix(matrix: np.ndarray, path: str) -> str:
    """Dense row-major text export, one row per line, 17 significant digits."""
    np.savetxt(path, np.atleast_2d(matrix), fmt='%.17g')
    logger.info(f"Matrix {np.shape(matrix)} written to {path}")
    return path


def read_matrix(path: str) -> np.ndarray:
    """Read a matrix written by :func:`write_matrix`."""
    return np.loadtxt(path, ndmin=2)
