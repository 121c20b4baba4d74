"""Shared numerical oracles for the test suite."""

import numpy as np


def principal_angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Principal angles between the column spans of two matrices.

    Sine-based formulation (SVD of the projection of one orthonormalized
    basis onto the other's complement), which keeps full accuracy for the
    near-zero angles these tests assert on; the classical cosine method
    floors at sqrt(eps).
    """
    qa, _ = np.linalg.qr(a)
    qb, _ = np.linalg.qr(b)
    residual = qb - qa @ (qa.T @ qb)
    sines = np.linalg.svd(residual, compute_uv=False)
    return np.arcsin(np.clip(sines, 0.0, 1.0))


def max_principal_angle(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(principal_angles(a, b)))
