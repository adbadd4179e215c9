"""
Trial Pipeline Module for the QNC toolkit.

This module runs one trial of the sweep: deployment, transform and message
sampling, QNC simulation for every block length, decoding at every stop time
and the packet-forwarding baseline.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from .bp_decoder import bp_decode
from .decoders import debiased_l1_decode, exact_mmse_oracle, l1_decode, snr
from .encoder import design_quantizers, generate_coefficients, simulate
from .exceptions import QNCError
from .forwarding import simulate_forwarding
from .measurement import build_measurement_system
from .messages import random_orthonormal, sample_messages
from .models import (DecodeResult, ExperimentConfig, Grid, MessageEnsemble, MessagePrior, ResultRow,
                     SparsifyingTransform, WhitenedSystem)
from .network import generate_deployment, shortest_paths
from .utils import SEED_COEFFICIENTS, SEED_GRAPH, SEED_MESSAGES, SEED_TRANSFORM, derive_seed
from .whitening import whiten

logger = logging.getLogger(__name__)

FORWARDING = 'forwarding'
MAX_MESSAGE_DRAWS = 1000

Task = Tuple[int, int, int]


def draw_nonzero_messages(prior: MessagePrior, transform: SparsifyingTransform, master_seed: int,
                          key: Tuple[int, ...]) -> MessageEnsemble:
    """Sample messages, redrawing until x is not identically zero.

    Args:
        prior: Message prior
        transform: Sparsifying transform
        master_seed: Root seed
        key: Index path of the trial's message stream

    Returns:
        MessageEnsemble with a nonzero x
    """
    for attempt in range(MAX_MESSAGE_DRAWS):
        ensemble = sample_messages(prior, transform, derive_seed(master_seed, *key, attempt))
        if np.any(ensemble.x != 0):
            return ensemble
    raise ValueError(f"no nonzero message vector in {MAX_MESSAGE_DRAWS} draws (k/n={prior.sparsity})")


def decode(name: str, ws: WhitenedSystem, prior: MessagePrior, grid: Grid, cfg: ExperimentConfig,
           initial_beliefs: Optional[np.ndarray] = None) -> DecodeResult:
    """Run the named decoder with the configured parameters."""
    if name == 'bp':
        return bp_decode(ws, prior, grid, max_iter=cfg.bp_max_iter, damping=cfg.bp_damping,
                         return_beliefs=cfg.bp_warm_start, initial_beliefs=initial_beliefs)
    if name == 'l1':
        return l1_decode(ws, max_iter=cfg.l1_max_iter)
    if name == 'l1_debiased':
        return debiased_l1_decode(ws, max_iter=cfg.l1_max_iter)
    if name == 'oracle':
        return exact_mmse_oracle(ws, prior)
    raise ValueError(f"unknown decoder {name!r}")


def deployment_id(edge_count: int, sparsity: float, trial: int) -> str:
    return f"E{edge_count}-k{sparsity:g}-t{trial}"


def run_trial(cfg: ExperimentConfig, task: Task) -> List[ResultRow]:
    """Evaluate every (decoder, L, T) and the forwarding baseline for one trial.

    Decoder failures become error rows for that configuration; a failure of
    the trial itself becomes a single error row.

    Args:
        cfg: Validated experiment configuration
        task: (edge_index, sparsity_index, trial)

    Returns:
        List of ResultRow
    """
    edge_index, sparsity_index, trial = task
    edge_count = cfg.edge_counts[edge_index]
    sparsity = cfg.sparsity_factors[sparsity_index]
    base = dict(deployment_id=deployment_id(edge_count, sparsity, trial), edge_count=edge_count,
                sparsity_factor=sparsity, trial=trial)
    key = (edge_index, sparsity_index, trial)
    rows: List[ResultRow] = []

    try:
        g = generate_deployment(cfg.n, edge_count, cfg.master_seed, key=(*key, SEED_GRAPH), capacity=cfg.capacity)
        routing = shortest_paths(g)
        transform = random_orthonormal(cfg.n, derive_seed(cfg.master_seed, *key, SEED_TRANSFORM))
        prior = MessagePrior.from_sparsity(cfg.n, sparsity, cfg.signal_variance,
                                           spike_ratio=cfg.spike_variance_ratio)
        x = draw_nonzero_messages(prior, transform, cfg.master_seed, (*key, SEED_MESSAGES)).x
        sched = generate_coefficients(g, cfg.t_max, derive_seed(cfg.master_seed, *key, SEED_COEFFICIENTS))
        grid = Grid.for_prior(prior, min_points=cfg.bp_grid_points)

        for L in cfg.l_sweep:
            quantizers = design_quantizers(sched, prior, L)
            trace = simulate(g, sched, quantizers, x)
            full_system = build_measurement_system(sched, g, quantizers)
            # BP posteriors at T seed the decoding at T + 1
            warm = None
            for T in range(2, cfg.t_max + 1):
                ws = whiten(full_system.truncate(T), trace.z_tot(T), transform)
                for name in cfg.decoders:
                    row = ResultRow(decoder=name, block_length=L, stop_time=T,
                                    delay_channel_uses=L * (T - 1), clip_count=trace.clips_until(T), **base)
                    try:
                        result = decode(name, ws, prior, grid, cfg, initial_beliefs=warm if name == 'bp' else None)
                        row.snr_db = snr(x, result.x_hat)
                        row.iterations = result.iterations
                        row.converged = result.converged
                        if name == 'bp' and result.beliefs is not None:
                            warm = result.beliefs.variable
                    except (QNCError, ValueError, np.linalg.LinAlgError) as exc:
                        logger.error(f"{base['deployment_id']} {name} L={L} T={T} failed: {exc}")
                        row.error = f"{type(exc).__name__}: {exc}"
                        if name == 'bp':
                            warm = None
                    rows.append(row)

            forwarded = simulate_forwarding(g, routing, x, L, prior)
            rows.append(ResultRow(decoder=FORWARDING, block_length=L,
                                  delay_channel_uses=forwarded.delay_channel_uses,
                                  snr_db=snr(x, forwarded.x_hat), clip_count=forwarded.clip_count, **base))
    except Exception as exc:
        logger.error(f"Trial {base['deployment_id']} failed: {exc}", exc_info=True)
        rows.append(ResultRow(decoder='', error=f"{type(exc).__name__}: {exc}", **base))

    logger.debug(f"Trial {base['deployment_id']} produced {len(rows)} rows")
    return rows
