"""Synthetic stream generation.

Vectors are drawn from a fixed random subspace with i.i.d. standard-normal
coefficients, optionally perturbed by additive Gaussian noise, and masked by
uniform fixed-size index subsets. All randomness flows through numpy's
``default_rng`` (PCG64), so a config fully determines the stream.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolationError
from .kernels import Observation, SubspaceEstimate


@dataclass(frozen=True)
class StreamConfig:
    """Everything needed to regenerate a stream and its tracker start point."""

    n: int
    d: int
    num_steps: int
    obs_count: int
    noise_stddev: float = 0.0
    seed: int = 0
    init_seed: int = 1

    def __post_init__(self):
        if not 0 < self.d < self.n:
            raise ContractViolationError(f"need 0 < d < n, got n={self.n}, d={self.d}")
        if not 1 <= self.obs_count <= self.n:
            raise ContractViolationError("obs_count must lie in [1, n]")
        if self.num_steps < 0:
            raise ContractViolationError("num_steps must be nonnegative")
        if self.noise_stddev < 0:
            raise ContractViolationError("noise_stddev must be nonnegative")


@dataclass(eq=False)
class GroundTruth:
    """Target subspace; stream coefficients are standard normal per entry."""

    u_bar: SubspaceEstimate

    @classmethod
    def random(cls, n: int, d: int, seed: int) -> "GroundTruth":
        return cls(random_orthonormal(n, d, seed))


@dataclass(eq=False)
class GeneratedStream:
    """Masked observations plus the hidden full vectors for diagnostics."""

    observations: list[Observation]
    full_vectors: np.ndarray

    def __iter__(self):
        return iter(self.observations)

    def __len__(self):
        return len(self.observations)


def random_orthonormal(n: int, d: int, seed: int) -> SubspaceEstimate:
    """Orthonormalized n x d standard-normal draw; deterministic given seed.

    QR signs are fixed to a positive R diagonal so the result is unique.
    """
    if not 0 < d < n:
        raise ContractViolationError(f"need 0 < d < n, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((n, d)))
    q *= np.sign(np.diag(r))
    return SubspaceEstimate(q)


def generate_stream(config: StreamConfig, truth: GroundTruth) -> GeneratedStream:
    """Draw the full stream for a config: coefficients, noise, masks.

    Per step: ``v = Ubar @ s + noise_stddev * g`` with ``s`` and ``g``
    standard normal, and a uniformly random size-``obs_count`` index subset.
    """
    if truth.u_bar.n != config.n or truth.u_bar.d != config.d:
        raise ContractViolationError("ground truth does not match config dimensions")
    rng = np.random.default_rng(config.seed)
    basis = truth.u_bar.basis
    observations = []
    full = np.empty((config.num_steps, config.n))
    for t in range(config.num_steps):
        coeffs = rng.standard_normal(config.d)
        vector = basis @ coeffs
        if config.noise_stddev > 0:
            vector = vector + config.noise_stddev * rng.standard_normal(config.n)
        omega = np.sort(rng.choice(config.n, size=config.obs_count, replace=False))
        full[t] = vector
        observations.append(Observation(omega, vector[omega]))
    return GeneratedStream(observations, full)
