"""Problem instances and coordinate-wise Bernoulli reward sampling."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import scalarize
from .errors import ContractViolation, InstanceGenerationError

_MAX_REJECTIONS = 10_000


@dataclass(frozen=True)
class Instance:
    """K mean vectors in [0,1]^d; rewards are coordinate-wise Bernoulli around them."""

    means: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.means, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ContractViolation("means must be a (K, d) matrix")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ContractViolation("arm means must lie in [0,1]")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "means", m)

    @property
    def n_arms(self) -> int:
        return self.means.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def to_config(self) -> dict:
        return {"means": self.means.tolist()}

    @staticmethod
    def from_config(obj: dict) -> "Instance":
        return Instance(np.asarray(obj["means"], dtype=float))


@dataclass(frozen=True)
class GapProfile:
    """Scalarized arm values, the best arm, and suboptimality gaps."""

    theta: np.ndarray
    best_arm: int
    gaps: np.ndarray
    delta_min: float
    delta_max: float


def compute_gaps(instance: Instance, spec: scalarize.ScalarizationSpec) -> GapProfile:
    """Pure function of (instance, spec); ties for the best arm go to the lowest index."""
    theta = scalarize._phi(spec, instance.means)
    best = int(np.argmax(theta))
    gaps = theta[best] - theta
    others = np.delete(gaps, best)
    delta_min = float(others.min()) if others.size else 0.0
    return GapProfile(theta=theta, best_arm=best, gaps=gaps,
                      delta_min=delta_min, delta_max=float(gaps.max()))


def generate_instance(n_arms: int, dim: int, delta_min_floor: float,
                      spec: scalarize.ScalarizationSpec,
                      rng: np.random.Generator) -> Instance:
    """Draw means uniformly on [0.1, 0.9]^d, rejecting until delta_min >= floor.

    The [0.1, 0.9] restriction avoids zero-variance Bernoulli coordinates.
    """
    if n_arms < 2 or dim < 1:
        raise ContractViolation("need n_arms >= 2 and dim >= 1")
    if not (0.0 < delta_min_floor < 0.5):
        raise ContractViolation("delta_min_floor must be in (0, 0.5)")
    for _ in range(_MAX_REJECTIONS):
        means = rng.uniform(0.1, 0.9, size=(n_arms, dim))
        candidate = Instance(means)
        if compute_gaps(candidate, spec).delta_min >= delta_min_floor:
            return candidate
    raise InstanceGenerationError(
        f"no instance with delta_min >= {delta_min_floor} in {_MAX_REJECTIONS} draws "
        f"(K={n_arms}, d={dim}, {spec.kind})")


def sample_reward(instance: Instance, arm: int, rng: np.random.Generator) -> np.ndarray:
    """One clean reward draw: each coordinate i is Bernoulli(mu[arm, i])."""
    if not 0 <= arm < instance.n_arms:
        raise ContractViolation(f"arm {arm} out of range")
    return (rng.random(instance.dim) < instance.means[arm]).astype(float)


def sample_rewards(instance: Instance, arms: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Batched draw for one round: `arms` is (N,), result is (N, d).

    Consumes one uniform block per call regardless of which arms were pulled, so
    different protocols see the same underlying randomness on a shared stream.
    """
    arms = np.asarray(arms)
    if arms.size and (arms.min() < 0 or arms.max() >= instance.n_arms):
        raise ContractViolation("arm index out of range")
    u = rng.random((arms.shape[0], instance.dim))
    return (u < instance.means[arms]).astype(float)
