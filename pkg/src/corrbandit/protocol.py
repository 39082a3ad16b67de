"""Sharing protocols: message emission/aggregation, inclusion ledgers, effective corruption.

Three protocols are supported:

* ``s1`` raw-sample sharing: every agent broadcasts its observation triple each
  round and every agent appends all broadcast samples to its own estimator with
  unit weight.  Each unverified sample therefore lands in N distinct estimators.
* ``s2`` sufficient-statistic sharing: agents broadcast per-arm cumulative
  statistics and everyone works from the single synchronized global aggregate,
  so each unverified sample is consumed exactly once.
* ``s3`` recommendation-only sharing: agents broadcast an arm index (plus an
  optional verified-value certificate) and learn from their own pulls only.

The inclusion ledger records, per estimator and arm, exactly which agent-round
samples were consumed.  That makes the replication multiplicity of every
unverified sample — and hence the effective corruption it carries — auditable
by brute force.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ContractViolation, ProtocolStateError

S1 = "s1"
S2 = "s2"
S3 = "s3"


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str
    certified: bool = False

    def __post_init__(self):
        if self.kind not in (S1, S2, S3):
            raise ContractViolation(f"unknown protocol kind {self.kind!r}")
        if self.certified and self.kind != S3:
            raise ContractViolation("certificates only apply to recommendation sharing")

    @property
    def label(self) -> str:
        return "s3_cert" if (self.kind == S3 and self.certified) else self.kind

    def n_estimators(self, n_agents: int) -> int:
        return 1 if self.kind == S2 else n_agents


class RoundObs(NamedTuple):
    """One agent's observation in one round, as fed to the protocol layer."""

    agent: int
    arm: int
    observed: np.ndarray
    verified: bool


@dataclass(frozen=True)
class Raw:
    agent: int
    arm: int
    observed: np.ndarray
    verified: bool


@dataclass(frozen=True)
class Stats:
    """Cumulative per-arm statistics of one agent through the current round.

    `pulls` counts all pulls, `obs_sum` sums unverified observations only, and
    the verified pair covers clean verified pulls.
    """

    agent: int
    pulls: np.ndarray
    obs_sum: np.ndarray
    ver_pulls: np.ndarray
    ver_sum: np.ndarray


@dataclass(frozen=True)
class Recommend:
    agent: int
    arm: int
    cert: object = None


class EstimatorBank:
    """Stacked per-arm statistics for all estimators of one episode.

    Layout: `m` and `h_ver` are (J, K) counts, `sums` and `s_ver` are (J, K, d).
    The empirical mean that drives indices uses unverified data only.
    """

    def __init__(self, n_estimators: int, n_arms: int, dim: int):
        self.m = np.zeros((n_estimators, n_arms), dtype=np.int64)
        self.sums = np.zeros((n_estimators, n_arms, dim))
        self.h_ver = np.zeros((n_estimators, n_arms), dtype=np.int64)
        self.s_ver = np.zeros((n_estimators, n_arms, dim))

    @property
    def n_estimators(self) -> int:
        return self.m.shape[0]

    def means(self) -> np.ndarray:
        """(J, K, d) empirical means with a max{1, m} denominator guard."""
        return self.sums / np.maximum(1, self.m)[..., None]

    def view(self, estimator_id: int) -> "EstimatorState":
        return EstimatorState(self, estimator_id)


class EstimatorState:
    """Read view of one estimator inside a bank."""

    def __init__(self, bank: EstimatorBank, estimator_id: int):
        self._bank = bank
        self.estimator_id = estimator_id

    @property
    def m(self) -> np.ndarray:
        return self._bank.m[self.estimator_id]

    @property
    def unverified_sum(self) -> np.ndarray:
        return self._bank.sums[self.estimator_id]

    @property
    def h_ver(self) -> np.ndarray:
        return self._bank.h_ver[self.estimator_id]

    @property
    def s_ver(self) -> np.ndarray:
        return self._bank.s_ver[self.estimator_id]

    def means(self) -> np.ndarray:
        return self.unverified_sum / np.maximum(1, self.m)[:, None]


class InclusionLedger:
    """Which (agent, round) unverified samples each estimator consumed, per arm.

    Under s1 all estimators consume identical samples, so their per-arm buckets
    alias one shared list; the multiplicity map still counts one inclusion per
    estimator.
    """

    def __init__(self):
        self._buckets: dict[tuple[int, int], list[tuple[int, int]]] = {}
        self._rho: dict[tuple[int, int], int] = {}

    def _bucket(self, estimator_id: int, arm: int) -> list:
        key = (estimator_id, arm)
        if key not in self._buckets:
            self._buckets[key] = []
        return self._buckets[key]

    def record(self, estimator_id: int, arm: int, agent: int, round_: int) -> None:
        self._bucket(estimator_id, arm).append((agent, round_))
        key = (agent, round_)
        self._rho[key] = self._rho.get(key, 0) + 1

    def record_shared(self, estimator_ids: Sequence[int], arm: int,
                      agent: int, round_: int) -> None:
        """One physical append consumed by several estimators (s1 broadcast)."""
        first = self._bucket(estimator_ids[0], arm)
        first.append((agent, round_))
        for j in estimator_ids[1:]:
            key = (j, arm)
            if key not in self._buckets:
                self._buckets[key] = first
        key = (agent, round_)
        self._rho[key] = self._rho.get(key, 0) + len(estimator_ids)

    def pairs(self, estimator_id: int, arm: int) -> list[tuple[int, int]]:
        return list(self._buckets.get((estimator_id, arm), ()))

    def estimator_ids(self) -> list[int]:
        return sorted({j for j, _ in self._buckets})


def multiplicity_of(ledger: InclusionLedger, agent: int, round_: int) -> int:
    """Number of distinct estimators that consumed this unverified sample (0 if verified)."""
    return ledger._rho.get((agent, round_), 0)


def effective_corruption(ledger: InclusionLedger, events, n_arms: int):
    """Multiplicity-weighted corruption mass, total and per arm.

    The total is defined as the sum of the per-arm values, so the conservation
    identity holds exactly.
    """
    per_arm = np.zeros(n_arms)
    for ev in events:
        per_arm[ev.arm] += multiplicity_of(ledger, ev.agent, ev.round) * ev.c_norm
    return float(per_arm.sum()), per_arm


class ProtocolState:
    """All sharing state of one episode: estimators, ledger, cumulative own-stats."""

    def __init__(self, proto: ProtocolSpec, n_agents: int, n_arms: int, dim: int):
        self.proto = proto
        self.n_agents = n_agents
        self.n_arms = n_arms
        self.dim = dim
        self.bank = EstimatorBank(proto.n_estimators(n_agents), n_arms, dim)
        self.ledger = InclusionLedger()
        # per-agent cumulative statistics (the payload of s2 messages)
        self.own_pulls = np.zeros((n_agents, n_arms), dtype=np.int64)
        self.own_obs_sum = np.zeros((n_agents, n_arms, dim))
        self.own_ver_pulls = np.zeros((n_agents, n_arms), dtype=np.int64)
        self.own_ver_sum = np.zeros((n_agents, n_arms, dim))
        # network-wide verified aggregates (clean data, safe to pool everywhere)
        self.global_ver_pulls = np.zeros(n_arms, dtype=np.int64)
        self.global_ver_sum = np.zeros((n_arms, dim))
        self.latest_recommendations: list[Recommend] = []
        self._observed_round = 0
        self._ingested_round = 0

    def observe_round(self, round_: int, obs: Sequence[RoundObs]) -> None:
        """Apply each agent's own observation for round `round_`."""
        if round_ != self._observed_round + 1:
            raise ProtocolStateError(
                f"observed round {round_} after round {self._observed_round}")
        self._observed_round = round_
        for o in obs:
            self.own_pulls[o.agent, o.arm] += 1
            if o.verified:
                self.own_ver_pulls[o.agent, o.arm] += 1
                self.own_ver_sum[o.agent, o.arm] += o.observed
                self.global_ver_pulls[o.arm] += 1
                self.global_ver_sum[o.arm] += o.observed
            else:
                self.own_obs_sum[o.agent, o.arm] += o.observed
        if self.proto.kind == S3:
            # recommendation-only: each sample is used by its own agent's estimator only
            for o in obs:
                j = o.agent
                if o.verified:
                    self.bank.h_ver[j, o.arm] += 1
                    self.bank.s_ver[j, o.arm] += o.observed
                else:
                    self.bank.m[j, o.arm] += 1
                    self.bank.sums[j, o.arm] += o.observed
                    self.ledger.record(j, o.arm, o.agent, round_)


def emit_messages(state: ProtocolState, obs: Sequence[RoundObs],
                  recommendations: np.ndarray | None = None,
                  certificates: Sequence | None = None) -> list:
    """Build this round's broadcast, one message per agent.

    For recommendation sharing, `recommendations[n]` must hold agent n's current
    optimistic-index argmax; a certificate for that arm is attached when the
    protocol is certified and the arm has at least one verified pull.
    """
    kind = state.proto.kind
    if kind == S1:
        return [Raw(o.agent, o.arm, o.observed.copy(), o.verified) for o in obs]
    if kind == S2:
        return [Stats(n, state.own_pulls[n].copy(), state.own_obs_sum[n].copy(),
                      state.own_ver_pulls[n].copy(), state.own_ver_sum[n].copy())
                for n in range(state.n_agents)]
    if recommendations is None:
        raise ContractViolation("recommendation sharing needs per-agent argmax arms")
    out = []
    for n in range(state.n_agents):
        arm = int(recommendations[n])
        cert = None
        if (state.proto.certified and certificates is not None
                and state.global_ver_pulls[arm] >= 1):
            cert = certificates[arm]
        out.append(Recommend(n, arm, cert))
    return out


def ingest_messages(state: ProtocolState, round_: int, messages: Sequence,
                    obs: Sequence[RoundObs]) -> None:
    """Fold this round's broadcast into estimators and the inclusion ledger."""
    if round_ != state._observed_round:
        raise ProtocolStateError("messages must be ingested for the observed round")
    if round_ == state._ingested_round:
        raise ProtocolStateError(f"round {round_} ingested twice")
    state._ingested_round = round_
    kind = state.proto.kind
    bank = state.bank

    if kind == S1:
        counts = np.zeros(state.n_arms, dtype=np.int64)
        vec_sum = np.zeros((state.n_arms, state.dim))
        ver_counts = np.zeros(state.n_arms, dtype=np.int64)
        ver_sum = np.zeros((state.n_arms, state.dim))
        all_ids = range(bank.n_estimators)
        for msg in messages:
            if msg.verified:
                ver_counts[msg.arm] += 1
                ver_sum[msg.arm] += msg.observed
            else:
                counts[msg.arm] += 1
                vec_sum[msg.arm] += msg.observed
                state.ledger.record_shared(list(all_ids), msg.arm, msg.agent, round_)
        bank.m += counts[None, :]
        bank.sums += vec_sum[None, :, :]
        bank.h_ver += ver_counts[None, :]
        bank.s_ver += ver_sum[None, :, :]
        return

    if kind == S2:
        pulls = np.sum([msg.pulls for msg in messages], axis=0)
        obs_sum = np.sum([msg.obs_sum for msg in messages], axis=0)
        ver_pulls = np.sum([msg.ver_pulls for msg in messages], axis=0)
        ver_sum = np.sum([msg.ver_sum for msg in messages], axis=0)
        bank.m[0] = pulls - ver_pulls
        bank.sums[0] = obs_sum
        bank.h_ver[0] = ver_pulls
        bank.s_ver[0] = ver_sum
        for o in obs:
            if not o.verified:
                state.ledger.record(0, o.arm, o.agent, round_)
        return

    # s3: estimators were already updated from own observations; just keep the
    # recommendations around for the policy layer
    state.latest_recommendations = list(messages)
