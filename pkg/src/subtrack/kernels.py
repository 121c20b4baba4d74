"""Numerical primitives for streaming subspace tracking.

Restricted least squares on revealed rows, the closed-form SVD of the
rank-one update matrix ``[I w; 0 ||r||]``, rotation construction,
re-orthonormalization, and the span-level error metric.

All functions here are pure: no shared mutable state, identical inputs give
bit-identical outputs, safe to call from any number of threads.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._backend import core as _core
from .exceptions import ContractViolationError, DegenerateUpdateError, RankLossError

DEFAULT_ORTHO_TOL = 1e-10


@dataclass(eq=False)
class SubspaceEstimate:
    """Column-orthonormal basis of a d-dimensional subspace of R^n.

    ``basis`` is normalized to a C-contiguous float64 array; orthonormality
    is validated at construction and the measured drift ``||U^T U - I||_F``
    is kept on the instance.
    """

    basis: np.ndarray
    ortho_tol: float = DEFAULT_ORTHO_TOL

    def __post_init__(self):
        self.basis = np.ascontiguousarray(self.basis, dtype=np.float64)
        if self.basis.ndim != 2:
            raise ContractViolationError("basis must be a 2-d array")
        n, d = self.basis.shape
        if not 0 < d < n:
            raise ContractViolationError(f"need 0 < d < n, got n={n}, d={d}")
        self.drift = _core.gram_identity_error(self.basis)
        if not self.drift <= self.ortho_tol:
            raise ContractViolationError(
                f"basis not orthonormal: ||U^T U - I||_F = {self.drift:.3e} "
                f"> {self.ortho_tol:.3e}"
            )

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def d(self) -> int:
        return self.basis.shape[1]


@dataclass(eq=False)
class Observation:
    """Revealed entries of one stream vector: sorted row indices and values."""

    omega: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.omega = np.ascontiguousarray(self.omega, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.omega.ndim != 1 or self.values.ndim != 1:
            raise ContractViolationError("omega and values must be 1-d")
        if self.omega.size < 1:
            raise ContractViolationError("at least one revealed entry required")
        if self.omega.size != self.values.size:
            raise ContractViolationError("omega and values lengths differ")
        if self.omega[0] < 0 or (self.omega.size > 1 and not np.all(np.diff(self.omega) > 0)):
            raise ContractViolationError("omega must be strictly increasing and nonnegative")

    def validate_against(self, n: int) -> None:
        if self.omega[-1] >= n:
            raise ContractViolationError(
                f"index {int(self.omega[-1])} out of range for ambient dimension {n}"
            )


@dataclass(eq=False)
class UpdateIntermediates:
    """Per-step quantities shared by every tracker.

    ``p = U w`` exactly by construction; ``r`` is zero off the revealed rows
    and equals ``v - p`` on them; ``sigma = ||r|| * ||p||``. Norms are cached
    alongside because every consumer needs them.
    """

    w: np.ndarray
    p: np.ndarray
    r: np.ndarray
    sigma: float
    w_norm: float
    p_norm: float
    r_norm: float


@dataclass(frozen=True)
class StepScalars:
    """Scalars of the dominant eigenpair of the update matrix's Gram matrix.

    ``lam`` is the larger non-unit eigenvalue, ``(alpha * w; beta)`` the unit
    eigenvector, and ``eta`` the step size for which the gradient-rotation
    update coincides with the rank-one SVD refresh.
    """

    lam: float
    beta: float
    alpha: float
    eta: float


@dataclass(eq=False)
class StructuredSVDResult:
    """Closed-form left factor of ``[I w; 0 r_norm]``.

    ``u_hat`` holds the leading d of the d+1 left singular vectors;
    ``leading_vector`` is its first column ``(alpha*w; beta)``;
    ``singular_values`` has all d+1 values in nonincreasing order.
    """

    u_hat: np.ndarray
    leading_vector: np.ndarray
    singular_values: np.ndarray


def restricted_least_squares(estimate: SubspaceEstimate, obs: Observation) -> np.ndarray:
    """Coefficients minimizing ``||U_omega w - v_omega||``; min-norm on ties."""
    obs.validate_against(estimate.n)
    return _core.solve_restricted(estimate.basis, obs.omega, obs.values)


def compute_intermediates(
    estimate: SubspaceEstimate, obs: Observation, w: np.ndarray
) -> UpdateIntermediates:
    """Prediction, masked residual, and sigma for one step."""
    obs.validate_against(estimate.n)
    w = np.ascontiguousarray(w, dtype=np.float64)
    if w.shape != (estimate.d,):
        raise ContractViolationError(f"w must have length {estimate.d}")
    p, r, w_norm, p_norm, r_norm = _core.predict_and_residual(
        estimate.basis, obs.omega, obs.values, w
    )
    return UpdateIntermediates(w, p, r, r_norm * p_norm, w_norm, p_norm, r_norm)


def impute_vector(estimate: SubspaceEstimate, obs: Observation, w: np.ndarray) -> np.ndarray:
    """Full vector equal to the observation on omega and to ``U w`` elsewhere."""
    obs.validate_against(estimate.n)
    filled = estimate.basis @ np.asarray(w, dtype=np.float64)
    filled[obs.omega] = obs.values
    return filled


def nonunit_eigenvalues(w_norm_sq: float, r_norm_sq: float) -> tuple[float, float]:
    """Both roots of ``x^2 - x*(||w||^2 + ||r||^2 + 1) + ||r||^2``, larger first.

    The larger root uses the explicit formula with the discriminant factored
    as ``(||w||^2 + (||r||-1)^2) * (||w||^2 + (||r||+1)^2)`` (each factor
    nonnegative, no cancellation); the smaller root comes from the product
    identity, which is accurate when ``||r||`` is tiny.
    """
    if w_norm_sq < 0 or r_norm_sq < 0:
        raise ContractViolationError("squared norms must be nonnegative")
    b = w_norm_sq + r_norm_sq + 1.0
    r = math.sqrt(r_norm_sq)
    disc = (w_norm_sq + (r - 1.0) ** 2) * (w_norm_sq + (r + 1.0) ** 2)
    lam_max = 0.5 * (b + math.sqrt(disc))
    lam_min = r_norm_sq / lam_max
    return lam_max, lam_min


def _eigpair_scalars(w_norm: float, r_norm: float) -> tuple[float, float, float, float]:
    """(lam_max, lam_min, alpha, beta) of the dominant eigenpair.

    The spectral gap ``g = lam_max - ||r||^2`` drives alpha and beta, but
    forming it by subtraction cancels catastrophically when ``||r|| >> ||w||``.
    It is instead the positive root of ``g^2 + g*(||r||^2-1-||w||^2) -
    ||r||^2*||w||^2 = 0`` (eliminate lam from the characteristic quadratic),
    evaluated with the conjugate form on the cancelling branch.
    """
    w_sq = w_norm * w_norm
    r_sq = r_norm * r_norm
    c = r_sq - 1.0 - w_sq
    root = math.hypot(c, 2.0 * r_norm * w_norm)
    if c <= 0.0:
        gap = 0.5 * (-c + root)
    else:
        gap = (r_sq * w_sq) / (0.5 * (c + root))
    if not gap > 0.0:
        raise DegenerateUpdateError("leading eigenvalue does not dominate ||r||^2")
    lam_max = gap + r_sq
    lam_min = r_sq / lam_max
    denom = math.hypot(gap, r_norm * w_norm)
    beta = r_norm * w_norm / denom
    alpha = gap / (w_norm * denom)
    return lam_max, lam_min, alpha, beta


def greedy_step_scalars(w_norm: float, r_norm: float, sigma: float) -> StepScalars:
    """Eigenpair scalars plus the step size matching the SVD refresh.

    Requires strictly positive ``w_norm``, ``r_norm`` and ``sigma``; callers
    handle the degenerate skip path themselves. The rotation angle is
    computed as ``atan2(beta, alpha*||w||)``, which stays well conditioned
    for both tiny and near-quarter rotations; the equivalent arcsin/arccos
    forms are cross-checked with a tolerance that accounts for their inverse
    conditioning near the ends of [0, 1].
    """
    if not (w_norm > 0.0 and r_norm > 0.0 and sigma > 0.0):
        raise DegenerateUpdateError(
            f"greedy step undefined for w_norm={w_norm}, r_norm={r_norm}, sigma={sigma}"
        )
    lam, _, alpha, beta = _eigpair_scalars(w_norm, r_norm)
    cosine = alpha * w_norm
    angle = math.atan2(beta, cosine)
    eps = 2.220446049250313e-16
    asin_form = math.asin(min(beta, 1.0))
    acos_form = math.acos(min(cosine, 1.0))
    tol = 1e-9 + 8.0 * eps * (1.0 / max(beta, eps) + 1.0 / max(cosine, eps))
    if abs(asin_form - acos_form) > tol:
        raise ContractViolationError(
            f"inconsistent rotation angle: asin(beta)={asin_form!r} "
            f"vs acos(alpha*||w||)={acos_form!r}"
        )
    return StepScalars(lam, beta, alpha, angle / sigma)


def complement_basis(w: np.ndarray) -> np.ndarray:
    """d x (d-1) orthonormal basis of the orthogonal complement of ``w``.

    Deterministic: trailing columns of the Householder reflector taking
    ``w/||w||`` to a signed first coordinate axis. Empty for d = 1.
    """
    w = np.asarray(w, dtype=np.float64)
    d = w.size
    nrm = np.linalg.norm(w)
    if not nrm > 0.0:
        raise DegenerateUpdateError("complement basis undefined for w = 0")
    if d == 1:
        return np.empty((1, 0))
    u = w / nrm
    s = -1.0 if u[0] >= 0.0 else 1.0
    q = u.copy()
    q[0] -= s
    refl = np.eye(d) - np.outer(q, q) * (2.0 / (q @ q))
    return refl[:, 1:]


def build_rotation(w: np.ndarray) -> np.ndarray:
    """Orthogonal ``[w/||w|| | Z]`` with Z spanning the complement of ``w``."""
    w = np.asarray(w, dtype=np.float64)
    nrm = np.linalg.norm(w)
    if not nrm > 0.0:
        raise DegenerateUpdateError("rotation undefined for w = 0")
    rot = np.empty((w.size, w.size))
    rot[:, 0] = w / nrm
    rot[:, 1:] = complement_basis(w)
    return rot


def structured_update_svd(w: np.ndarray, r_norm: float) -> StructuredSVDResult:
    """Leading left singular vectors and all singular values of ``[I w; 0 r_norm]``.

    The Gram matrix has d-1 unit eigenvalues with eigenvectors ``(Z; 0)`` and
    two non-unit eigenvalues from the quadratic; the dominant eigenvector is
    ``(alpha*w; beta)``. ``u_hat`` drops the trailing (smallest) vector. The
    sign convention ``alpha >= 0`` is fixed by taking the larger root.
    """
    w = np.asarray(w, dtype=np.float64)
    d = w.size
    if d < 1:
        raise ContractViolationError("w must have length >= 1")
    if not r_norm > 0.0:
        raise DegenerateUpdateError("structured SVD undefined for r_norm <= 0")
    w_norm = np.linalg.norm(w)
    if not w_norm > 0.0:
        raise DegenerateUpdateError("structured SVD complement ambiguous for w = 0")
    lam_max, lam_min, alpha, beta = _eigpair_scalars(w_norm, r_norm)
    leading = np.empty(d + 1)
    leading[:d] = alpha * w
    leading[d] = beta
    u_hat = np.zeros((d + 1, d))
    u_hat[:, 0] = leading
    if d > 1:
        u_hat[:d, 1:] = complement_basis(w)
    singular_values = np.empty(d + 1)
    singular_values[0] = math.sqrt(lam_max)
    singular_values[1:d] = 1.0
    singular_values[d] = math.sqrt(lam_min)
    return StructuredSVDResult(u_hat, leading, singular_values)


def reorthonormalize(estimate: SubspaceEstimate) -> SubspaceEstimate:
    """Closest orthonormal basis with the same column span.

    Symmetric (polar) orthogonalization: exact identity on already-orthonormal
    input up to roundoff, unlike QR which can flip column signs.
    """
    basis = estimate.basis
    gram = basis.T @ basis
    vals, vecs = np.linalg.eigh(gram)
    if vals[-1] <= 0.0 or vals[0] <= 1e-14 * vals[-1]:
        raise RankLossError("basis is numerically rank deficient")
    inv_root = (vecs / np.sqrt(vals)) @ vecs.T
    return SubspaceEstimate(basis @ inv_root, ortho_tol=estimate.ortho_tol)


def subspace_error(estimate: SubspaceEstimate, truth: SubspaceEstimate) -> float:
    """Span distance ``d - ||U^T Ubar||_F^2``, clamped to [0, d].

    Equals the sum of squared sines of the principal angles; invariant under
    right-rotation of either basis.
    """
    if estimate.n != truth.n or estimate.d != truth.d:
        raise ContractViolationError("estimates must share n and d")
    overlap = estimate.basis.T @ truth.basis
    value = estimate.d - float(np.sum(overlap * overlap))
    return min(max(value, 0.0), float(estimate.d))
