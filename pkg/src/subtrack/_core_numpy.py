"""Pure-numpy implementations of the per-step hot kernels.

Same call signatures as the compiled module ``subtrack._core``; one of the
two is bound at import time by ``subtrack._backend``.
"""

import numpy as np

NAME = "numpy"


def solve_restricted(basis, omega, values):
    """Min-norm least-squares coefficients for basis rows ``omega`` vs ``values``."""
    w, *_ = np.linalg.lstsq(basis[omega], values, rcond=None)
    return w


def predict_and_residual(basis, omega, values, w):
    """Prediction, masked residual and their norms.

    Returns ``(p, r, w_norm, p_norm, r_norm)`` where ``p = basis @ w`` and
    ``r`` is zero off ``omega`` with ``r[omega] = values - p[omega]``.
    """
    p = basis @ w
    r = np.zeros(basis.shape[0])
    r[omega] = values - p[omega]
    return p, r, np.linalg.norm(w), np.linalg.norm(p), np.linalg.norm(r)


def apply_rotation_step(basis, p, r, w, cos_t, sin_t, p_norm, r_norm, w_norm):
    """In-place rank-one rotation update of ``basis``."""
    coeff = ((cos_t - 1.0) / p_norm) * p + (sin_t / r_norm) * r
    basis += np.outer(coeff, w / w_norm)


def gram_identity_error(basis):
    """Frobenius norm of ``basis.T @ basis - I``."""
    gram = basis.T @ basis
    gram[np.diag_indices_from(gram)] -= 1.0
    return float(np.linalg.norm(gram))
