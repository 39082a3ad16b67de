"""Team regret accounting and end-of-episode audits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .env import GapProfile
from .protocol import S1, InclusionLedger, ProtocolSpec, multiplicity_of

_EQ_TOL = 1e-9


@dataclass
class RoundRecord:
    """Everything observable about one round, for audits and post-processing."""

    round: int
    arms: np.ndarray
    verified: np.ndarray
    clean: np.ndarray
    observed: np.ndarray
    c_norms: np.ndarray
    committed: bool


@dataclass
class EpisodeSummary:
    team_regret: float
    gamma_spent: float
    gamma_eff: float
    gamma_eff_per_arm: np.ndarray
    nu_spent: int
    commit_round: int | None
    committed_arm: int | None
    pull_counts: np.ndarray
    regret_curve: np.ndarray
    wall_ms: float = 0.0


def pull_counts(records: list[RoundRecord], n_arms: int) -> np.ndarray:
    counts = np.zeros(n_arms, dtype=np.int64)
    for rec in records:
        np.add.at(counts, rec.arms, 1)
    return counts


def team_regret(records: list[RoundRecord], gaps: GapProfile) -> float:
    """Round-by-round sum of the pulled arms' scalarized-mean shortfalls."""
    return float(sum(gaps.gaps[rec.arms].sum() for rec in records))


def team_regret_from_counts(counts: np.ndarray, gaps: GapProfile) -> float:
    """The same quantity as a gap-weighted sum of team pull counts."""
    return float(np.dot(gaps.gaps, counts))


def regret_curve(records: list[RoundRecord], gaps: GapProfile) -> np.ndarray:
    """Cumulative per-round team regret; the final entry equals team_regret."""
    if not records:
        return np.zeros(0)
    inst = np.array([gaps.gaps[rec.arms].sum() for rec in records])
    return np.cumsum(inst)


@dataclass
class AuditReport:
    ok: bool
    failures: list[str] = field(default_factory=list)

    def first_violation(self) -> str | None:
        return self.failures[0] if self.failures else None


def audit(records: list[RoundRecord], events, inclusion: InclusionLedger,
          proto: ProtocolSpec, gaps: GapProfile, gamma_total: float,
          gamma_spent: float, gamma_eff: float, gamma_eff_per_arm: np.ndarray,
          nu_total: int, nu_spent: int, n_agents: int) -> AuditReport:
    """Check every budget constraint and accounting identity of one episode."""
    failures: list[str] = []

    event_mass = math.fsum(ev.c_norm for ev in events)
    if gamma_spent > gamma_total:
        failures.append(f"corruption budget exceeded: {gamma_spent} > {gamma_total}")
    if abs(event_mass - gamma_spent) > _EQ_TOL * max(1.0, gamma_total):
        failures.append(
            f"event mass {event_mass} disagrees with ledger spend {gamma_spent}")
    if nu_spent > nu_total:
        failures.append(f"verification budget exceeded: {nu_spent} > {nu_total}")

    by_round = {rec.round: rec for rec in records}
    for ev in events:
        rec = by_round.get(ev.round)
        if rec is None:
            failures.append(f"event at unknown round {ev.round}")
            continue
        if rec.verified[ev.agent]:
            failures.append(f"corruption on verified pull at (n={ev.agent}, t={ev.round})")
        shift = float(np.abs(rec.observed[ev.agent] - rec.clean[ev.agent]).max())
        if shift > ev.c_norm + 1e-12:
            failures.append(
                f"projection expanded at (n={ev.agent}, t={ev.round}): {shift} > {ev.c_norm}")

    for rec in records:
        for n in np.flatnonzero(rec.verified):
            if not np.array_equal(rec.observed[n], rec.clean[n]):
                failures.append(f"verified pull altered at (n={n}, t={rec.round})")

    # replication multiplicity is constant per protocol, which makes the
    # effective-corruption identity an exact equality
    rho = n_agents if proto.kind == S1 else 1
    for ev in events:
        got = multiplicity_of(inclusion, ev.agent, ev.round)
        if got != rho:
            failures.append(
                f"multiplicity {got} != {rho} at (n={ev.agent}, t={ev.round})")
            break
    expected_eff = rho * gamma_spent
    if not math.isclose(gamma_eff, expected_eff, rel_tol=1e-12, abs_tol=1e-12):
        failures.append(f"effective corruption {gamma_eff} != {rho} * {gamma_spent}")
    if gamma_eff != float(np.asarray(gamma_eff_per_arm).sum()):
        failures.append("arm-wise effective corruption does not sum to the total")

    counts = pull_counts(records, len(gaps.gaps))
    direct = team_regret(records, gaps)
    via_counts = team_regret_from_counts(counts, gaps)
    if abs(direct - via_counts) > _EQ_TOL:
        failures.append(
            f"regret identity broken: {direct} (round sum) vs {via_counts} (gap-weighted)")
    if records and counts.sum() != n_agents * len(records):
        failures.append("pull counts do not add up to N*T")

    return AuditReport(ok=not failures, failures=failures)
