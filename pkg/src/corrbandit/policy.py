"""Robust optimistic arm selection, verification scheduling, and certified filtering.

The arm index is the scalarized upper corner of a sup-norm confidence box whose
radius has two parts: a Hoeffding term that shrinks like 1/sqrt(m) and a
corruption term that covers the worst-case replicated corruption mass an
estimator may have absorbed.  A learner that knows the corruption budget uses
the protocol's replication factor times the budget; an agnostic learner runs
with the plain Hoeffding radius.

Certificates are scalar confidence intervals for an arm's true utility built
from verified (clean) pulls only, so no corruption strategy can forge or
invalidate them.  Filtering eliminates an arm as soon as some other arm's
certified lower bound clears its certified upper bound; when a single arm
survives and every arm has verified coverage, the team commits to it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from . import scalarize
from .errors import ContractViolation
from .protocol import S1, ProtocolSpec

KNOWN_BUDGET = "known_budget"
AGNOSTIC = "agnostic"


class Dims(NamedTuple):
    dim: int
    n_arms: int
    n_agents: int
    horizon: int


def log_term(dims: Dims, delta: float) -> float:
    """The shared union-bound log factor log(2 d K N T / delta)."""
    return math.log(2.0 * dims.dim * dims.n_arms * dims.n_agents * dims.horizon / delta)


@dataclass(frozen=True)
class PolicyConfig:
    delta: float = 0.01
    corruption_knowledge: str = KNOWN_BUDGET
    nu: int = 0
    certified: bool = False

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ContractViolation("delta must lie in (0, 1)")
        if self.corruption_knowledge not in (KNOWN_BUDGET, AGNOSTIC):
            raise ContractViolation(
                f"unknown corruption knowledge {self.corruption_knowledge!r}")
        if self.nu < 0:
            raise ContractViolation("verification budget must be nonnegative")


def corruption_term(policy: PolicyConfig, proto: ProtocolSpec,
                    n_agents: int, gamma: float) -> float:
    """Numerator of the radius' corruption part.

    Raw-sample sharing replicates every unverified sample into all N estimators,
    so a budget-aware learner must inflate by N; statistic and recommendation
    sharing consume each sample once.
    """
    if policy.corruption_knowledge == AGNOSTIC:
        return 0.0
    return (n_agents * gamma) if proto.kind == S1 else gamma


def confidence_radius(policy: PolicyConfig, proto: ProtocolSpec, m,
                      dims: Dims, gamma: float):
    """Sup-norm confidence radius for an estimator with `m` unverified samples.

    Accepts a scalar or an array of counts; the max{1, m} guard keeps the
    radius finite before the first pull.
    """
    ell = log_term(dims, policy.delta)
    cterm = corruption_term(policy, proto, dims.n_agents, gamma)
    denom = np.maximum(1, m)
    out = np.sqrt(ell / (2.0 * denom)) + cterm / denom
    return float(out) if np.isscalar(m) else out


def select_arm(spec: scalarize.ScalarizationSpec, means: np.ndarray,
               radii: np.ndarray) -> int:
    """Argmax of the optimistic indices; ties break to the lowest arm index.

    Depends only on the ordering of the indices, so rescaling all radii by a
    common factor that preserves that ordering cannot change the choice.
    """
    return int(np.argmax(scalarize.corner_values(spec, means, radii)))


class VerificationPlanner:
    """Front-loaded round-robin assignment of the global verification budget.

    Slots are assigned agent-by-agent from round 1 until the budget runs out;
    each slot forces a pull of the arm with the fewest planned verified pulls
    (ties to the lowest index), so arms finish within one pull of each other.
    The plan is a pure function of (nu, N, K, T) and is public knowledge: every
    agent can reconstruct it without communication.
    """

    def __init__(self, nu: int, n_agents: int, n_arms: int, horizon: int):
        self.total_slots = min(int(nu), n_agents * horizon)
        self.quota = np.zeros(n_arms, dtype=np.int64)
        self._forced: dict[tuple[int, int], int] = {}
        for slot in range(self.total_slots):
            round_ = slot // n_agents + 1
            agent = slot % n_agents
            arm = int(np.argmin(self.quota))
            self.quota[arm] += 1
            self._forced[(round_, agent)] = arm

    def decision(self, round_: int, agent: int) -> tuple[bool, int | None]:
        arm = self._forced.get((round_, agent))
        if arm is None:
            return False, None
        return True, arm


def schedule_verification(planner: VerificationPlanner, round_: int,
                          agent: int) -> tuple[bool, int | None]:
    return planner.decision(round_, agent)


@dataclass(frozen=True)
class Certificate:
    """Scalar confidence interval for one arm's true utility, from verified data only."""

    arm: int
    lcb: float
    ucb: float
    h_ver: int


def verified_certificate(spec: scalarize.ScalarizationSpec, ver_sum: np.ndarray,
                         h_ver: int, dims: Dims, delta: float) -> Certificate:
    """Interval centre is the utility of the verified mean (max{1, h} denominator);
    the half-width is the Hoeffding radius scaled by the Lipschitz constant."""
    denom = max(1, int(h_ver))
    center = scalarize.evaluate(spec, np.clip(ver_sum / denom, 0.0, 1.0))
    eps = scalarize.lipschitz(spec) * math.sqrt(log_term(dims, delta) / (2.0 * denom))
    return Certificate(-1, center - eps, center + eps, int(h_ver))


def certificates_for_all(spec: scalarize.ScalarizationSpec, ver_sums: np.ndarray,
                         h_ver: np.ndarray, dims: Dims, delta: float) -> list[Certificate]:
    """Current certificate for every arm, vectorized over arms."""
    denom = np.maximum(1, h_ver)
    centers = scalarize._phi(spec, ver_sums / denom[:, None])
    eps = scalarize.lipschitz(spec) * np.sqrt(log_term(dims, delta) / (2.0 * denom))
    return [Certificate(k, float(centers[k] - eps[k]), float(centers[k] + eps[k]),
                        int(h_ver[k]))
            for k in range(len(h_ver))]


def filter_and_commit(certs: Sequence[Certificate | None],
                      ver_counts: np.ndarray) -> tuple[set[int], int | None]:
    """Certificate dominance filtering.

    An arm is eliminated iff some arm's certified lower bound strictly exceeds
    its certified upper bound (strict, so exact ties never eliminate).  Arms
    without a certificate cannot be eliminated.  Commit only when exactly one
    arm survives and every arm carries at least one verified pull.
    """
    n_arms = len(certs)
    eliminated: set[int] = set()
    best_lcb = -math.inf
    for c in certs:
        if c is not None and c.lcb > best_lcb:
            best_lcb = c.lcb
    for k in range(n_arms):
        if certs[k] is not None and best_lcb > certs[k].ucb:
            eliminated.add(k)
    survivors = [k for k in range(n_arms) if k not in eliminated]
    if len(survivors) == 1 and bool(np.all(np.asarray(ver_counts) >= 1)):
        return eliminated, survivors[0]
    return eliminated, None
