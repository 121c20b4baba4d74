"""Streaming trackers: gradient-rotation updates and incremental SVD variants.

Four algorithms over a shared stepping interface: the gradient-rotation
tracker (GROUSE), the growing full-data incremental SVD, the fixed-rank
incremental SVD for partially observed vectors, and the down-weighted
(Brand-style) variant that carries singular values across steps.

The single-step transition functions are pure; the tracker classes own
mutable state plus the re-orthonormalization policy, and one logical thread
must drive a given instance at a time.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from ._backend import core as _core
from .exceptions import ContractViolationError, StreamProcessingError
from .kernels import (
    Observation,
    SubspaceEstimate,
    UpdateIntermediates,
    build_rotation,
    compute_intermediates,
    greedy_step_scalars,
    reorthonormalize,
    restricted_least_squares,
    structured_update_svd,
    subspace_error,
)

# Norms at or below this fraction of ||v_omega|| mark a step as degenerate:
# nothing to learn (r ~ 0) or no direction to rotate (w ~ 0). Both update
# paths share the test so they skip in lockstep.
DEGENERATE_RTOL = 1e-13

# Estimates produced by tracker updates validate against this drift bound;
# the default policy re-orthonormalizes well before it is reached.
TRACKER_ORTHO_TOL = 1e-8


@dataclass(frozen=True)
class TrackerState:
    """Subspace estimate plus step bookkeeping for the fixed-rank trackers."""

    estimate: SubspaceEstimate
    step_count: int = 0
    last_residual_norm: float = math.nan
    last_sigma: float = math.nan


@dataclass(frozen=True)
class StepPolicy:
    """Step-size selection for the gradient-rotation tracker.

    ``greedy`` derives the step from the dominant eigenpair of the update
    matrix (the choice under which the two update paths coincide); ``fixed``
    uses a constant; ``schedule`` indexes a caller-supplied sequence by step.
    """

    kind: str
    fixed_eta: float | None = None
    schedule: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("greedy", "fixed", "schedule"):
            raise ContractViolationError(f"unknown step policy kind {self.kind!r}")
        if self.kind == "fixed" and not (self.fixed_eta is not None and self.fixed_eta > 0):
            raise ContractViolationError("fixed policy requires fixed_eta > 0")
        if self.kind == "schedule" and self.schedule is None:
            raise ContractViolationError("schedule policy requires a schedule")

    @classmethod
    def greedy(cls) -> "StepPolicy":
        return cls("greedy")

    @classmethod
    def fixed(cls, eta: float) -> "StepPolicy":
        return cls("fixed", fixed_eta=float(eta))

    @classmethod
    def from_schedule(cls, etas) -> "StepPolicy":
        return cls("schedule", schedule=tuple(float(e) for e in etas))

    def eta_at(self, step_index: int, w_norm: float, r_norm: float, sigma: float) -> float:
        if self.kind == "greedy":
            return greedy_step_scalars(w_norm, r_norm, sigma).eta
        if self.kind == "fixed":
            return self.fixed_eta
        if step_index >= len(self.schedule):
            raise ContractViolationError(f"schedule exhausted at step {step_index}")
        return self.schedule[step_index]


@dataclass(frozen=True)
class BrandState:
    """Fixed-rank factor state for the down-weighted incremental SVD."""

    estimate: SubspaceEstimate
    singular_values: np.ndarray
    decay: float
    step_count: int = 0
    last_residual_norm: float = math.nan
    last_sigma: float = math.nan

    def __post_init__(self):
        if not 0.0 < self.decay <= 1.0:
            raise ContractViolationError("decay must lie in (0, 1]")
        sv = np.ascontiguousarray(self.singular_values, dtype=np.float64)
        if sv.shape != (self.estimate.d,) or np.any(sv < 0):
            raise ContractViolationError("singular_values must be length-d nonnegative")
        object.__setattr__(self, "singular_values", sv)


@dataclass(frozen=True)
class FullSVDState:
    """Growing thin-SVD factors of all columns seen so far."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    last_residual_norm: float = math.nan
    last_sigma: float = math.nan

    @classmethod
    def empty(cls, n: int) -> "FullSVDState":
        return cls(np.zeros((n, 0)), np.zeros(0), np.zeros((0, 0)))

    @property
    def n(self) -> int:
        return self.u.shape[0]

    @property
    def rank(self) -> int:
        return self.u.shape[1]

    @property
    def step_count(self) -> int:
        return self.v.shape[0]


def _prepare(state: TrackerState, obs: Observation) -> UpdateIntermediates:
    w = restricted_least_squares(state.estimate, obs)
    return compute_intermediates(state.estimate, obs, w)


def _degenerate(inter: UpdateIntermediates, obs: Observation) -> bool:
    scale = float(np.linalg.norm(obs.values))
    if scale == 0.0:
        return True
    return inter.w_norm <= DEGENERATE_RTOL * scale or inter.r_norm <= DEGENERATE_RTOL * scale


def _skip(state: TrackerState, inter: UpdateIntermediates) -> TrackerState:
    return replace(
        state,
        step_count=state.step_count + 1,
        last_residual_norm=inter.r_norm,
        last_sigma=inter.sigma,
    )


def grouse_update(state: TrackerState, obs: Observation, policy: StepPolicy) -> TrackerState:
    """One gradient-rotation step.

    Rotates the in-span prediction direction toward the residual direction by
    the angle ``sigma * eta``; degenerate steps (zero residual or zero
    coefficients) are skipped with the step counter advanced.
    """
    inter = _prepare(state, obs)
    if _degenerate(inter, obs):
        return _skip(state, inter)
    eta = policy.eta_at(state.step_count, inter.w_norm, inter.r_norm, inter.sigma)
    theta = inter.sigma * eta
    basis = state.estimate.basis.copy()
    _core.apply_rotation_step(
        basis, inter.p, inter.r, inter.w,
        math.cos(theta), math.sin(theta),
        inter.p_norm, inter.r_norm, inter.w_norm,
    )
    return TrackerState(
        SubspaceEstimate(basis, ortho_tol=TRACKER_ORTHO_TOL),
        state.step_count + 1,
        inter.r_norm,
        inter.sigma,
    )


def isvd_partial_update(
    state: TrackerState, obs: Observation, rotation: np.ndarray | None = None
) -> TrackerState:
    """One fixed-rank incremental-SVD step on a partially observed vector.

    Unobserved entries are imputed from the current estimate (equivalently:
    the residual is zero off the revealed rows), the closed-form SVD of the
    update matrix supplies the mixing factor, and the result is right-
    multiplied by a rotation. ``rotation=None`` selects the transpose of the
    coefficient-aligned rotation, the choice under which this step equals
    ``grouse_update`` with the greedy policy; any explicit d x d orthogonal
    matrix changes the basis but not its span.
    """
    inter = _prepare(state, obs)
    if _degenerate(inter, obs):
        return _skip(state, inter)
    d = state.estimate.d
    if rotation is None:
        right = build_rotation(inter.w).T
    else:
        right = np.asarray(rotation, dtype=np.float64)
        if right.shape != (d, d):
            raise ContractViolationError(f"rotation must be {d}x{d}")
        if np.linalg.norm(right.T @ right - np.eye(d)) > 1e-8:
            raise ContractViolationError("supplied rotation is not orthogonal")
    factor = structured_update_svd(inter.w, inter.r_norm)
    mixer = factor.u_hat @ right
    basis = state.estimate.basis @ mixer[:d] + np.outer(inter.r / inter.r_norm, mixer[d])
    return TrackerState(
        SubspaceEstimate(basis, ortho_tol=TRACKER_ORTHO_TOL),
        state.step_count + 1,
        inter.r_norm,
        inter.sigma,
    )


def brand_update(state: BrandState, obs: Observation) -> BrandState:
    """One down-weighted incremental-SVD step.

    Previous singular values are scaled by the decay before the update-matrix
    SVD; the factors are truncated back to rank d, keeping the largest
    singular values. A numerically zero residual contributes a zero row and
    column instead of an undefined residual direction.
    """
    inter = _prepare(state, obs)
    d = state.estimate.d
    scale = float(np.linalg.norm(obs.values))
    residual_ok = scale > 0.0 and inter.r_norm > DEGENERATE_RTOL * scale
    update = np.zeros((d + 1, d + 1))
    update[:d, :d] = np.diag(state.decay * state.singular_values)
    update[:d, d] = inter.w
    if residual_ok:
        update[d, d] = inter.r_norm
    left, values, _ = np.linalg.svd(update)
    mixer = left[:, :d]
    basis = state.estimate.basis @ mixer[:d]
    if residual_ok:
        basis += np.outer(inter.r / inter.r_norm, mixer[d])
    return BrandState(
        SubspaceEstimate(basis, ortho_tol=TRACKER_ORTHO_TOL),
        values[:d].copy(),
        state.decay,
        state.step_count + 1,
        inter.r_norm,
        inter.sigma,
    )


def isvd_full_step(
    state: FullSVDState,
    vector: np.ndarray,
    rank_growth_rtol: float = 1e-10,
    max_rank: int | None = None,
) -> FullSVDState:
    """Append one fully observed column to the thin SVD.

    The rank grows by one when the new column has a residual above
    ``rank_growth_rtol`` times the largest singular value (or above the
    tolerance itself while the factors are empty); otherwise the no-growth
    variant updates the factors at the current rank. ``max_rank`` truncates
    after growth, which abandons exact reconstruction.
    """
    vector = np.ascontiguousarray(vector, dtype=np.float64)
    if vector.shape != (state.n,):
        raise ContractViolationError(f"vector must have length {state.n}")
    u, s, v = state.u, state.s, state.v
    k, t = state.rank, state.step_count
    w = u.T @ vector
    p = u @ w
    r = vector - p
    r_norm = float(np.linalg.norm(r))
    sigma = r_norm * float(np.linalg.norm(p))
    threshold = rank_growth_rtol * (s[0] if k else 1.0)
    if r_norm > threshold:
        update = np.zeros((k + 1, k + 1))
        update[:k, :k] = np.diag(s)
        update[:k, k] = w
        update[k, k] = r_norm
        left, values, right_t = np.linalg.svd(update)
        new_u = u @ left[:k] + np.outer(r / r_norm, left[k])
        new_s = values
        v_block = np.zeros((t + 1, k + 1))
        v_block[:t, :k] = v
        v_block[t, k] = 1.0
        new_v = v_block @ right_t.T
        if max_rank is not None and new_s.size > max_rank:
            new_u = new_u[:, :max_rank]
            new_s = new_s[:max_rank]
            new_v = new_v[:, :max_rank]
    elif k == 0:
        new_u, new_s = u, s
        new_v = np.zeros((t + 1, 0))
    else:
        update = np.concatenate([np.diag(s), w[:, None]], axis=1)
        left, values, right_t = np.linalg.svd(update, full_matrices=False)
        new_u = u @ left
        new_s = values
        v_block = np.zeros((t + 1, k + 1))
        v_block[:t, :k] = v
        v_block[t, k] = 1.0
        new_v = v_block @ right_t.T
    return FullSVDState(new_u, new_s, new_v, r_norm, sigma)


class _ReorthMixin:
    """Shared re-orthonormalization policy for the fixed-rank trackers."""

    def _init_reorth(self, every: int | None, drift_tol: float | None):
        if every is not None and every < 1:
            raise ContractViolationError("reorth_every must be >= 1 or None")
        self._reorth_every = every
        self._reorth_drift_tol = drift_tol

    def _maybe_reorth(self):
        state = self._state
        due = self._reorth_every is not None and state.step_count % self._reorth_every == 0
        drifted = (
            self._reorth_drift_tol is not None
            and state.estimate.drift > self._reorth_drift_tol
        )
        if due or drifted:
            self._state = replace(state, estimate=reorthonormalize(state.estimate))

    @property
    def state(self):
        return self._state

    @property
    def estimate(self) -> SubspaceEstimate:
        return self._state.estimate

    @property
    def step_count(self) -> int:
        return self._state.step_count

    @property
    def last_residual_norm(self) -> float:
        return self._state.last_residual_norm

    @property
    def last_sigma(self) -> float:
        return self._state.last_sigma

    def error_vs(self, truth: SubspaceEstimate) -> float:
        return subspace_error(self._state.estimate, truth)


class GrouseTracker(_ReorthMixin):
    """Gradient-rotation subspace tracker.

    Parameters
    ----------
    initial : SubspaceEstimate
        Starting orthonormal basis.
    policy : StepPolicy, optional
        Step-size rule; defaults to the greedy step.
    reorth_every : int or None
        Re-orthonormalize after this many steps (None disables).
    reorth_drift_tol : float or None
        Re-orthonormalize whenever measured drift exceeds this (None disables).
    """

    def __init__(self, initial: SubspaceEstimate, policy: StepPolicy | None = None,
                 reorth_every: int | None = 100, reorth_drift_tol: float | None = 1e-8):
        self._state = TrackerState(initial)
        self._policy = policy if policy is not None else StepPolicy.greedy()
        self._init_reorth(reorth_every, reorth_drift_tol)

    def step(self, obs: Observation) -> None:
        self._state = grouse_update(self._state, obs, self._policy)
        self._maybe_reorth()


class PartialIsvdTracker(_ReorthMixin):
    """Fixed-rank incremental-SVD tracker for partially observed vectors.

    ``rotation=None`` keeps the default under which iterates match
    ``GrouseTracker`` with the greedy policy exactly.
    """

    def __init__(self, initial: SubspaceEstimate, rotation: np.ndarray | None = None,
                 reorth_every: int | None = 100, reorth_drift_tol: float | None = 1e-8):
        self._state = TrackerState(initial)
        self._rotation = rotation
        self._init_reorth(reorth_every, reorth_drift_tol)

    def step(self, obs: Observation) -> None:
        self._state = isvd_partial_update(self._state, obs, self._rotation)
        self._maybe_reorth()


class BrandTracker(_ReorthMixin):
    """Down-weighted incremental-SVD tracker with carried singular values.

    Singular values start at zero and are populated by the stream, matching
    the algorithm's stated initialization.
    """

    def __init__(self, initial: SubspaceEstimate, decay: float = 0.95,
                 singular_values: np.ndarray | None = None,
                 reorth_every: int | None = 100, reorth_drift_tol: float | None = 1e-8):
        if singular_values is None:
            singular_values = np.zeros(initial.d)
        self._state = BrandState(initial, singular_values, decay)
        self._init_reorth(reorth_every, reorth_drift_tol)

    def step(self, obs: Observation) -> None:
        self._state = brand_update(self._state, obs)
        self._maybe_reorth()

    @property
    def singular_values(self) -> np.ndarray:
        return self._state.singular_values


class FullIsvdTracker:
    """Growing thin-SVD over fully observed columns."""

    def __init__(self, n: int, rank_growth_rtol: float = 1e-10, max_rank: int | None = None):
        self._state = FullSVDState.empty(n)
        self._rank_growth_rtol = rank_growth_rtol
        self._max_rank = max_rank

    def step(self, obs: Observation) -> None:
        state = self._state
        obs.validate_against(state.n)
        if obs.omega.size != state.n:
            raise ContractViolationError("full-data tracker requires every entry revealed")
        self._state = isvd_full_step(
            state, obs.values, self._rank_growth_rtol, self._max_rank
        )

    @property
    def state(self) -> FullSVDState:
        return self._state

    @property
    def step_count(self) -> int:
        return self._state.step_count

    @property
    def last_residual_norm(self) -> float:
        return self._state.last_residual_norm

    @property
    def last_sigma(self) -> float:
        return self._state.last_sigma

    def error_vs(self, truth: SubspaceEstimate) -> float:
        overlap = self._state.u.T @ truth.basis
        value = truth.d - float(np.sum(overlap * overlap))
        return min(max(value, 0.0), float(truth.d))


@dataclass(frozen=True)
class TraceRecord:
    """Post-update diagnostics for one processed observation."""

    step: int
    error: float
    residual_norm: float
    sigma: float


@dataclass
class ExperimentTrace:
    """Per-step records plus free-form run metadata."""

    records: list[TraceRecord]
    metadata: dict = field(default_factory=dict)


def process_stream(tracker, stream, ground_truth: SubspaceEstimate | None = None,
                   hook=None):
    """Drive a tracker over a sequence of observations.

    Returns ``(tracker, trace)`` with one record per observation, emitted
    after the update. ``hook(record, tracker)`` runs after each step. Tracker
    failures are re-raised as ``StreamProcessingError`` carrying the failing
    index and the records accumulated so far.
    """
    records: list[TraceRecord] = []
    for index, obs in enumerate(stream):
        try:
            tracker.step(obs)
        except Exception as exc:
            raise StreamProcessingError(index, records, f"step {index}: {exc}") from exc
        error = tracker.error_vs(ground_truth) if ground_truth is not None else math.nan
        record = TraceRecord(
            tracker.step_count, error, tracker.last_residual_norm, tracker.last_sigma
        )
        records.append(record)
        if hook is not None:
            hook(record, tracker)
    return tracker, ExperimentTrace(records)
