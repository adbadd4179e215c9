"""
Whitening Module for the QNC toolkit.

This module turns the correlated-noise measurement system into the
unit-noise form z' = theta s + n' consumed by the decoders.
"""

import logging

import numpy as np
from scipy import linalg

from .measurement import effective_noise_covariance
from .models import MeasurementSystem, SparsifyingTransform, WhitenedSystem

logger = logging.getLogger(__name__)

RELATIVE_FLOOR = 1e-8
NOISELESS_FLOOR = 1e-12


def whiten_covariance(cov: np.ndarray, z: np.ndarray, sensing: np.ndarray,
                      phi: np.ndarray) -> WhitenedSystem:
    """Whiten measurements z = sensing x + noise with Cov[noise] = cov.

    Eigenvalues below 1e-8 x the largest are clamped to that floor. An all-zero
    covariance is replaced by 1e-12 I.

    Args:
        cov: m x m symmetric PSD covariance
        z: m-vector of measurements
        sensing: m x n matrix acting on x
        phi: n x n transform with x = phi s

    Returns:
        WhitenedSystem
    """
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    m = cov.shape[0]
    eigenvalues, eigenvectors = linalg.eigh(cov) if m else (np.zeros(0), np.zeros((0, 0)))
    largest = float(eigenvalues.max()) if m else 0.0

    if largest <= 0.0:
        eigenvalues = np.full(m, NOISELESS_FLOOR)
        eigenvectors = np.eye(m)
        floor_count = 0
        logger.debug("Noiseless system; whitening reduces to a fixed rescaling")
    else:
        floor = RELATIVE_FLOOR * largest
        below = eigenvalues < floor
        floor_count = int(below.sum())
        eigenvalues = np.where(below, floor, eigenvalues)
        if floor_count:
            logger.debug(f"Clamped {floor_count} of {m} noise eigenvalues to {floor:.3e}")

    scale = 1.0 / np.sqrt(eigenvalues)
    z_prime = scale * (eigenvectors.T @ z)
    theta = scale[:, None] * (eigenvectors.T @ (sensing @ phi))
    return WhitenedSystem(z=z_prime, theta=theta, floor_count=floor_count, phi=phi,
                          eigenvectors=eigenvectors, eigenvalues=eigenvalues)


def whiten(ms: MeasurementSystem, z_tot: np.ndarray, transform: SparsifyingTransform) -> WhitenedSystem:
    """Whiten a measurement system against its effective-noise covariance.

    Args:
        ms: Measurement system
        z_tot: Stacked gateway packets (m-vector)
        transform: Sparsifying transform

    Returns:
        WhitenedSystem with theta = Lambda^(-1/2) U^T Psi_tot phi
    """
    z_tot = np.asarray(z_tot, dtype=float).reshape(-1)
    if z_tot.shape[0] != ms.m:
        raise ValueError(f"z_tot has {z_tot.shape[0]} entries, system has m={ms.m}")
    if transform.n != ms.n:
        raise ValueError(f"transform dimension {transform.n} does not match n={ms.n}")
    return whiten_covariance(effective_noise_covariance(ms), z_tot, ms.psi_tot, transform.phi)
