"""Monotone, 1-Lipschitz scalarizations of vector rewards and their optimistic indices.

Three families are supported: weighted linear, Chebyshev (coordinate minimum),
and log-sum-exp smoothing.  All are coordinate-wise nondecreasing on [0,1]^d and
1-Lipschitz with respect to the sup norm, which is what the optimistic index
computation relies on: the supremum of the utility over an upper-closed sup-norm
rectangle is attained at the rectangle's upper corner.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

LINEAR = "linear"
CHEBYSHEV = "chebyshev"
LOGSUMEXP = "logsumexp"

_WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ScalarizationSpec:
    """Parameters of one scalarization; `dim` is validated eagerly everywhere."""

    kind: str
    dim: int
    weights: tuple[float, ...] | None = None
    beta: float | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, CHEBYSHEV, LOGSUMEXP):
            raise ContractViolation(f"unknown scalarization kind {self.kind!r}")
        if self.dim < 1:
            raise ContractViolation("dim must be >= 1")
        if self.kind == LINEAR:
            if self.weights is None or len(self.weights) != self.dim:
                raise ContractViolation("linear scalarization needs one weight per coordinate")
            w = np.asarray(self.weights, dtype=float)
            if np.any(w < 0.0):
                raise ContractViolation("linear weights must be nonnegative")
            if abs(float(w.sum()) - 1.0) > _WEIGHT_TOL:
                raise ContractViolation("linear weights must sum to 1")
        if self.kind == LOGSUMEXP:
            if self.beta is None or not self.beta > 0.0:
                raise ContractViolation("logsumexp needs beta > 0")


def linear(weights) -> ScalarizationSpec:
    w = tuple(float(v) for v in weights)
    return ScalarizationSpec(LINEAR, len(w), weights=w)


def chebyshev(dim: int) -> ScalarizationSpec:
    return ScalarizationSpec(CHEBYSHEV, dim)


def logsumexp(dim: int, beta: float) -> ScalarizationSpec:
    return ScalarizationSpec(LOGSUMEXP, dim, beta=float(beta))


def from_config(obj: dict, dim: int) -> ScalarizationSpec:
    """Build a spec from its JSON form, e.g. ``{"kind": "linear", "weights": [...]}``."""
    kind = obj.get("kind")
    if kind == LINEAR:
        return linear(obj["weights"])
    if kind == CHEBYSHEV:
        return chebyshev(dim)
    if kind == LOGSUMEXP:
        return logsumexp(dim, obj["beta"])
    raise ContractViolation(f"unknown scalarization kind {kind!r}")


def to_config(spec: ScalarizationSpec) -> dict:
    if spec.kind == LINEAR:
        return {"kind": LINEAR, "weights": list(spec.weights)}
    if spec.kind == LOGSUMEXP:
        return {"kind": LOGSUMEXP, "beta": spec.beta}
    return {"kind": CHEBYSHEV}


def _phi(spec: ScalarizationSpec, x: np.ndarray) -> np.ndarray:
    """Apply the scalarization along the last axis of `x` (no range checks)."""
    if x.shape[-1] != spec.dim:
        raise ContractViolation(f"expected dimension {spec.dim}, got {x.shape[-1]}")
    if spec.kind == LINEAR:
        return x @ np.asarray(spec.weights)
    if spec.kind == CHEBYSHEV:
        return x.min(axis=-1)
    # log-sum-exp with max shift so large beta cannot overflow
    shift = x.max(axis=-1, keepdims=True)
    out = np.log(np.exp(spec.beta * (x - shift)).sum(axis=-1)) / spec.beta
    return out + shift[..., 0]


def evaluate(spec: ScalarizationSpec, x) -> float:
    """Scalarize a single reward vector in [0,1]^d."""
    v = np.asarray(x, dtype=float)
    if v.shape != (spec.dim,):
        raise ContractViolation(f"expected shape ({spec.dim},), got {v.shape}")
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ContractViolation("reward vector outside [0,1]^d")
    return float(_phi(spec, v))


def lipschitz(spec: ScalarizationSpec) -> float:
    """Sup-norm Lipschitz constant; exactly 1 for all three families.

    Linear: the weights sum to 1.  Chebyshev: min is nonexpansive.  Log-sum-exp:
    the gradient is a softmax, whose entries also sum to 1.
    """
    return 1.0


def optimistic_index(spec: ScalarizationSpec, mean, radius: float) -> float:
    """Utility of the upper corner of the radius-`radius` sup-norm box around `mean`.

    Because the scalarization is monotone, this equals the supremum of the
    utility over the whole box intersected with [0,1]^d.
    """
    if radius < 0.0:
        raise ContractViolation("radius must be nonnegative")
    m = np.asarray(mean, dtype=float)
    if m.shape != (spec.dim,):
        raise ContractViolation(f"expected shape ({spec.dim},), got {m.shape}")
    if np.any(m < 0.0) or np.any(m > 1.0):
        raise ContractViolation("mean vector outside [0,1]^d")
    return float(_phi(spec, np.clip(m + radius, 0.0, 1.0)))


def corner_values(spec: ScalarizationSpec, means: np.ndarray, radii: np.ndarray) -> np.ndarray:
    """Vectorized optimistic indices: `means` is (..., K, d), `radii` is (..., K)."""
    corners = np.clip(means + radii[..., None], 0.0, 1.0)
    return _phi(spec, corners)
