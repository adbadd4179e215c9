"""
Decoders Module for the QNC toolkit.

This module provides the l1-minimization decoder and its debiased variant,
the exact MMSE oracle for small systems and the SNR figure of merit. The
belief propagation decoder lives in bp_decoder.
"""

import itertools
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .models import ORACLE_MAX_VARIABLES, DecodeResult, MessagePrior, WhitenedSystem

logger = logging.getLogger(__name__)

SNR_CAP_DB = 200.0
MAX_WEIGHT_STEPS = 100
CONTINUATION_FACTOR = 0.5
MIN_WEIGHT_RATIO = 1e-12
RADIUS_TOLERANCE = 0.01
DEFAULT_L1_MAX_ITER = 2000
KKT_TOLERANCE = 1e-8
KKT_CHECK_ITER = 20
SUPPORT_THRESHOLDS = (0.0, 1e-9, 1e-6, 1e-3)


def default_noise_radius(m: int) -> float:
    """Radius sqrt(m) + 2 (2m)^(1/4) of a unit-covariance noise vector of length m."""
    return float(np.sqrt(m) + 2.0 * (2.0 * m) ** 0.25)


def soft_threshold(v: np.ndarray, threshold: float) -> np.ndarray:
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def lasso_fista(theta: np.ndarray, z: np.ndarray, weight: float, start: Optional[np.ndarray] = None,
                max_iter: int = DEFAULT_L1_MAX_ITER, tol: float = 1e-10,
                lipschitz: Optional[float] = None) -> Tuple[np.ndarray, List[float], bool]:
    """Monotone FISTA for 0.5 ||theta s - z||^2 + weight ||s||_1.

    Args:
        theta: m x n matrix
        z: m-vector
        weight: l1 weight
        start: Warm start
        max_iter: Iteration cap
        tol: Relative step tolerance
        lipschitz: Spectral norm of theta squared (computed if omitted)

    Returns:
        (solution, objective per iteration, converged)
    """
    if lipschitz is None:
        lipschitz = float(np.linalg.norm(theta, 2) ** 2)
    s = np.zeros(theta.shape[1]) if start is None else start.copy()
    if lipschitz == 0:
        return s, [0.5 * float(z @ z)], True

    def objective(v):
        r = theta @ v - z
        return 0.5 * float(r @ r) + weight * float(np.abs(v).sum())

    y = s.copy()
    t = 1.0
    current = objective(s)
    history = [current]
    for _ in range(max_iter):
        candidate = soft_threshold(y - theta.T @ (theta @ y - z) / lipschitz, weight / lipschitz)
        value = objective(candidate)
        previous = s
        if value <= current:
            s, current = candidate, value
        history.append(current)
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = s + (t / t_next) * (candidate - s) + ((t - 1.0) / t_next) * (s - previous)
        t = t_next
        if np.linalg.norm(candidate - previous) <= tol * max(1.0, np.linalg.norm(previous)):
            return s, history, True
    return s, history, False


def _support_candidates(s: np.ndarray) -> List[np.ndarray]:
    """Supports of s after dropping entries below a few relative magnitudes."""
    peak = float(np.max(np.abs(s))) if s.size else 0.0
    candidates = []
    for relative in SUPPORT_THRESHOLDS:
        support = np.flatnonzero(np.abs(s) > relative * peak)
        if support.size and not any(np.array_equal(support, c) for c in candidates):
            candidates.append(support)
    return candidates


def kkt_solution(theta: np.ndarray, z: np.ndarray, support: np.ndarray, signs: np.ndarray,
                 radius: float) -> Optional[Tuple[np.ndarray, float]]:
    """Exact constrained l1 minimizer for a given support and sign pattern.

    On a fixed support the regularized solution is affine in the weight, so the
    weight putting the residual norm exactly on the radius has a closed form.
    The candidate is returned only when it satisfies every optimality
    condition: consistent signs on the support and correlations no larger
    than the weight off it.

    Args:
        theta: m x n matrix
        z: m-vector
        support: Indices of the nonzero coefficients
        signs: Signs of the nonzero coefficients
        radius: Residual norm of the solution

    Returns:
        (solution, weight), or None when the support is not optimal
    """
    if support.size == 0 or support.size >= theta.shape[0]:
        return None
    sub = theta[:, support]
    try:
        factor = linalg.cho_factor(sub.T @ sub)
    except linalg.LinAlgError:
        return None
    base = linalg.cho_solve(factor, sub.T @ z)
    direction = linalg.cho_solve(factor, signs)
    # The least-squares residual is orthogonal to sub @ direction
    fit_residual = sub @ base - z
    shift = sub @ direction
    slack = radius ** 2 - float(fit_residual @ fit_residual)
    curvature = float(shift @ shift)
    if slack < 0 or curvature == 0:
        return None
    weight = float(np.sqrt(slack / curvature))
    coef = base - weight * direction
    if np.any(np.sign(coef) != signs):
        return None
    solution = np.zeros(theta.shape[1])
    solution[support] = coef
    correlation = theta.T @ (z - theta @ solution)
    if np.max(np.abs(correlation)) > weight * (1.0 + KKT_TOLERANCE):
        return None
    return solution, weight


def _refine(theta: np.ndarray, z: np.ndarray, s: np.ndarray,
            radius: float) -> Optional[Tuple[np.ndarray, float]]:
    for support in _support_candidates(s):
        exact = kkt_solution(theta, z, support, np.sign(s[support]), radius)
        if exact is not None:
            return exact
    return None


def l1_decode(ws: WhitenedSystem, noise_radius: Optional[float] = None,
              max_iter: int = DEFAULT_L1_MAX_ITER) -> DecodeResult:
    """min ||s||_1 subject to ||theta s - z|| <= noise_radius.

    The constrained problem is solved through its regularized form. The l1
    weight is halved from the largest useful value, with warm starts, until
    the residual enters the radius, then bisected on a log scale. After every
    inner solve the support and signs of the iterate are tested against the
    optimality conditions, and a passing support yields the exact minimizer
    in closed form. Otherwise the search stops once the residual norm matches
    the radius within 1%.

    Args:
        ws: Whitened system
        noise_radius: Constraint radius (default sqrt(m) + 2 (2m)^(1/4))
        max_iter: Iteration cap of each inner solve

    Returns:
        DecodeResult; objective_history belongs to the weight of the returned estimate
    """
    radius = default_noise_radius(ws.m) if noise_radius is None else float(noise_radius)
    if radius < 0:
        raise ValueError(f"noise radius must be non-negative, got {radius}")
    theta, z = ws.theta, ws.z

    if np.linalg.norm(z) <= radius:
        s_hat = np.zeros(ws.n)
        return DecodeResult(x_hat=ws.phi @ s_hat, s_hat=s_hat, iterations=0, converged=True, decoder='l1')

    lipschitz = float(np.linalg.norm(theta, 2) ** 2)
    weight_max = float(np.max(np.abs(theta.T @ z)))
    log_floor = np.log(weight_max * MIN_WEIGHT_RATIO)
    log_hi, log_lo = np.log(weight_max), None
    log_weight = log_hi
    start = np.zeros(ws.n)
    feasible = None
    fallback = None
    iterations = 0
    matched = False
    for _ in range(MAX_WEIGHT_STEPS):
        if log_lo is None:
            # Continuation from the largest useful weight until the radius is reached
            log_weight = max(log_weight + np.log(CONTINUATION_FACTOR), log_floor)
        else:
            log_weight = 0.5 * (log_lo + log_hi)
        weight = float(np.exp(log_weight))
        s, history, inner_converged = lasso_fista(theta, z, weight, start, max_iter, lipschitz=lipschitz)
        iterations += len(history) - 1
        start = s

        exact = _refine(theta, z, s, radius)
        if exact is not None:
            s, weight = exact
            _, history, _ = lasso_fista(theta, z, weight, s, KKT_CHECK_ITER, lipschitz=lipschitz)
            logger.debug(f"l1 exact on support of size {np.count_nonzero(s)} (weight {weight:.4g})")
            return DecodeResult(x_hat=ws.phi @ s, s_hat=s, iterations=iterations, converged=True,
                                objective_history=history, decoder='l1')

        residual = float(np.linalg.norm(theta @ s - z))
        fallback = (s, history, inner_converged)
        if residual <= radius:
            feasible = (s, history, inner_converged)
            log_lo = log_weight
        else:
            log_hi = log_weight
        if abs(residual - radius) <= RADIUS_TOLERANCE * radius:
            matched = True
            break
        if log_lo is None and log_weight <= log_floor:
            break
    s, history, inner_converged = feasible if feasible is not None else fallback

    converged = inner_converged and (matched or feasible is not None)
    if not converged:
        logger.warning(f"l1 decoding did not converge (radius {radius:.4g}, {iterations} iterations)")
    return DecodeResult(x_hat=ws.phi @ s, s_hat=s, iterations=iterations, converged=converged,
                        objective_history=history, decoder='l1')


def debiased_l1_decode(ws: WhitenedSystem, noise_radius: Optional[float] = None,
                       max_iter: int = DEFAULT_L1_MAX_ITER) -> DecodeResult:
    """l1 decoding followed by least squares on the recovered support."""
    result = l1_decode(ws, noise_radius, max_iter)
    support = np.flatnonzero(result.s_hat)
    s_hat = np.zeros(ws.n)
    if 0 < support.size < ws.m:
        coef, *_ = linalg.lstsq(ws.theta[:, support], ws.z)
        s_hat[support] = coef
    else:
        s_hat = result.s_hat
    return DecodeResult(x_hat=ws.phi @ s_hat, s_hat=s_hat, iterations=result.iterations,
                        converged=result.converged, objective_history=result.objective_history,
                        decoder='l1_debiased')


def exact_mmse_oracle(ws: WhitenedSystem, prior: MessagePrior) -> DecodeResult:
    """Posterior mean under the exact spike-and-slab prior by support enumeration.

    Args:
        ws: Whitened system with n <= 14
        prior: Message prior (the spike is a point mass here)

    Returns:
        DecodeResult with the conditional mean
    """
    if ws.n > ORACLE_MAX_VARIABLES:
        raise ValueError(f"oracle enumerates 2^n supports; n={ws.n} exceeds {ORACLE_MAX_VARIABLES}")
    if ws.n != prior.n:
        raise ValueError(f"system has n={ws.n} but prior has n={prior.n}")
    p, variance = prior.sparsity, prior.signal_variance
    theta, z = ws.theta, ws.z
    m, n = ws.m, ws.n

    if m == 0 or p == 0:
        s_hat = np.zeros(n)
        return DecodeResult(x_hat=ws.phi @ s_hat, s_hat=s_hat, iterations=0, converged=True, decoder='oracle')

    log_weights = []
    means = []
    for mask in itertools.product((False, True), repeat=n):
        support = np.flatnonzero(mask)
        size = support.size
        if (p == 1 and size < n) or (p == 0 and size > 0):
            continue
        log_prior = (size * np.log(p) if size else 0.0) + ((n - size) * np.log1p(-p) if size < n else 0.0)
        theta_q = theta[:, support]
        cov = variance * theta_q @ theta_q.T + np.eye(m)
        factor = linalg.cho_factor(cov, lower=True)
        alpha = linalg.cho_solve(factor, z)
        log_det = 2.0 * np.sum(np.log(np.diag(factor[0])))
        log_weights.append(log_prior - 0.5 * (z @ alpha + log_det + m * np.log(2 * np.pi)))
        mean = np.zeros(n)
        mean[support] = variance * theta_q.T @ alpha
        means.append(mean)

    log_weights = np.asarray(log_weights)
    weights = np.exp(log_weights - logsumexp(log_weights))
    s_hat = weights @ np.asarray(means)
    return DecodeResult(x_hat=ws.phi @ s_hat, s_hat=s_hat, iterations=len(means), converged=True,
                        decoder='oracle')


def snr(x: np.ndarray, x_hat: np.ndarray) -> float:
    """Reconstruction SNR 10 log10(||x||^2 / ||x - x_hat||^2) in dB, capped at 200.

    Args:
        x: True messages (not all zero)
        x_hat: Estimate

    Returns:
        SNR in decibels
    """
    x = np.asarray(x, dtype=float)
    signal = float(x @ x)
    if signal == 0:
        raise ValueError("SNR is undefined for an all-zero message vector")
    error = np.asarray(x_hat, dtype=float) - x
    distortion = float(error @ error)
    if distortion == 0:
        return SNR_CAP_DB
    return float(min(10.0 * np.log10(signal / distortion), SNR_CAP_DB))
