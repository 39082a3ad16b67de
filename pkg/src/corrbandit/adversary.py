"""Budget-constrained adversaries that perturb unverified reward observations.

Every corruption event is charged against a single global budget in sup norm.
Verified pulls are untouchable: the clean reward is revealed, so strategies
always decline on them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .env import GapProfile
from .errors import BudgetViolation, ContractViolation


@dataclass(frozen=True)
class CorruptionEvent:
    agent: int
    round: int
    arm: int
    c_vec: np.ndarray
    c_norm: float


def make_event(agent: int, round_: int, arm: int, c_vec: np.ndarray) -> CorruptionEvent:
    v = np.asarray(c_vec, dtype=float)
    return CorruptionEvent(agent, round_, arm, v, float(np.abs(v).max()))


class BudgetLedger:
    """Running account of corruption mass spent against the global budget."""

    def __init__(self, gamma_total: float):
        if gamma_total < 0.0:
            raise ContractViolation("corruption budget must be nonnegative")
        self.gamma_total = float(gamma_total)
        self.gamma_spent = 0.0

    def remaining(self) -> float:
        return max(0.0, self.gamma_total - self.gamma_spent)

    def charge(self, norm: float) -> None:
        if norm > self.remaining():
            raise BudgetViolation(
                f"event norm {norm} exceeds remaining budget {self.remaining()}")
        self.gamma_spent += norm
        # guard against float drift pushing the running sum past the budget
        if self.gamma_spent > self.gamma_total:
            self.gamma_spent = self.gamma_total


def remaining_budget(ledger: BudgetLedger) -> float:
    return ledger.remaining()


class NoCorruption:
    label = "none"

    def propose(self, agent, round_, arm, clean, remaining, rng):
        return None


class GreedyFlip:
    """Push the best arm's observations down and the runner-up's up.

    Knows the true instance (a strictly stronger adversary than one limited to
    the public transcript, which the observation model permits).
    """

    label = "greedy_flip"

    def __init__(self, epsilon: float, gaps: GapProfile):
        if not 0.0 < epsilon <= 1.0:
            raise ContractViolation("epsilon must be in (0, 1]")
        self.epsilon = float(epsilon)
        self.best = gaps.best_arm
        theta = gaps.theta.copy()
        theta[self.best] = -np.inf
        self.runner_up = int(np.argmax(theta))

    def propose(self, agent, round_, arm, clean, remaining, rng):
        if arm == self.best:
            sign = -1.0
        elif arm == self.runner_up:
            sign = 1.0
        else:
            return None
        norm = min(self.epsilon, remaining)
        if norm <= 0.0:
            return None
        return sign * norm * np.ones_like(clean)


class EarlyInformative:
    """Dump the whole budget on the earliest unverified pulls of one arm.

    Per-sample spend is capped at 1.0 in sup norm: rewards live in [0,1]^d, so
    anything larger is clipped away.  Targeting the best arm makes it look dead
    to every estimator that consumed the corrupted samples.
    """

    label = "early_informative"
    PER_SAMPLE_CAP = 1.0

    def __init__(self, target_arm, gaps: GapProfile):
        if target_arm == "best":
            self.target = gaps.best_arm
        else:
            self.target = int(target_arm)
        self.push_down = self.target == gaps.best_arm

    def propose(self, agent, round_, arm, clean, remaining, rng):
        if arm != self.target:
            return None
        norm = min(self.PER_SAMPLE_CAP, remaining)
        if norm <= 0.0:
            return None
        sign = -1.0 if self.push_down else 1.0
        return sign * norm * np.ones_like(clean)


class ObliviousRandom:
    """Corrupt each unverified sample with probability p by a uniform-sign vector."""

    label = "oblivious_random"

    def __init__(self, p: float, epsilon: float):
        if not 0.0 <= p <= 1.0:
            raise ContractViolation("p must be in [0, 1]")
        if not 0.0 < epsilon <= 1.0:
            raise ContractViolation("epsilon must be in (0, 1]")
        self.p = float(p)
        self.epsilon = float(epsilon)

    def propose(self, agent, round_, arm, clean, remaining, rng):
        if rng.random() >= self.p:
            return None
        norm = min(self.epsilon, remaining)
        if norm <= 0.0:
            return None
        signs = rng.integers(0, 2, size=clean.shape[0]) * 2.0 - 1.0
        return signs * norm


def decide_corruption(strategy, ledger: BudgetLedger, transcript, agent: int,
                      round_: int, arm: int, verified: bool, clean: np.ndarray,
                      rng: np.random.Generator) -> CorruptionEvent | None:
    """Ask the strategy for a corruption of this observation and charge the budget.

    `transcript` is the public history (actions, messages, revealed feedback);
    the built-in strategies do not consult it but adaptive ones may.  Verified
    rounds always return None: the clean reward is observed directly.
    """
    if verified:
        return None
    vec = strategy.propose(agent, round_, arm, clean, ledger.remaining(), rng)
    if vec is None:
        return None
    event = make_event(agent, round_, arm, vec)
    ledger.charge(event.c_norm)
    return event


def apply_corruption(clean: np.ndarray, event: CorruptionEvent | None) -> np.ndarray:
    """Coordinate-wise projection of clean + corruption back onto [0,1]^d."""
    if event is None:
        return clean
    return np.clip(clean + event.c_vec, 0.0, 1.0)


@dataclass(frozen=True)
class AdversaryChoice:
    """Config-facing description of which strategy to run."""

    kind: str = "none"
    epsilon: float = 1.0
    p: float = 0.0
    target_arm: object = "best"

    def to_config(self) -> dict:
        if self.kind == "greedy_flip":
            return {"kind": self.kind, "epsilon": self.epsilon}
        if self.kind == "early_informative":
            return {"kind": self.kind, "target_arm": self.target_arm}
        if self.kind == "oblivious_random":
            return {"kind": self.kind, "p": self.p, "epsilon": self.epsilon}
        return {"kind": "none"}


def build_strategy(choice: AdversaryChoice, gaps: GapProfile):
    if choice.kind == "none":
        return NoCorruption()
    if choice.kind == "greedy_flip":
        return GreedyFlip(choice.epsilon, gaps)
    if choice.kind == "early_informative":
        return EarlyInformative(choice.target_arm, gaps)
    if choice.kind == "oblivious_random":
        return ObliviousRandom(choice.p, choice.epsilon)
    raise ContractViolation(f"unknown adversary kind {choice.kind!r}")
