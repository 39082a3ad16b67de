"""Episode orchestration, replicated sweeps, and desk-scale figure presets.

An episode is a pure function of its configuration: all randomness flows from
streams derived by keyed spawning of the master seed, so reruns (and sweeps
with any worker count) reproduce results bit for bit.
"""
from __future__ import annotations

import math
import multiprocessing as mp
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import scalarize
from .adversary import (AdversaryChoice, BudgetLedger, apply_corruption,
                        build_strategy, decide_corruption)
from .env import Instance, compute_gaps, generate_instance, sample_rewards
from .errors import AuditFailure, ContractViolation
from .metrics import (EpisodeSummary, RoundRecord, audit, pull_counts,
                      regret_curve, team_regret)
from .policy import (AGNOSTIC, KNOWN_BUDGET, Dims, PolicyConfig,
                     VerificationPlanner, certificates_for_all,
                     confidence_radius, filter_and_commit, log_term)
from .protocol import (S1, S2, S3, ProtocolSpec, ProtocolState, RoundObs,
                       effective_corruption, emit_messages, ingest_messages)

_PRESET_SEED = 1009


@dataclass(frozen=True)
class EpisodeConfig:
    K: int
    d: int
    N: int
    T: int
    gamma: float
    protocol: ProtocolSpec
    adversary: AdversaryChoice
    scalarization: scalarize.ScalarizationSpec
    policy: PolicyConfig
    instance: Instance | None = None
    instance_floor: float = 0.1
    instance_key: int = 0
    master_seed: int = 0
    grid_index: int = 0
    rep: int = 0

    def __post_init__(self):
        if self.K < 2 or self.N < 1 or self.T < 1:
            raise ContractViolation("need K >= 2, N >= 1, T >= 1")
        if self.gamma < 0:
            raise ContractViolation("corruption budget must be nonnegative")
        if self.scalarization.dim != self.d:
            raise ContractViolation("scalarization dimension must match d")
        if self.instance is not None and (
                self.instance.n_arms != self.K or self.instance.dim != self.d):
            raise ContractViolation("fixed instance shape must match (K, d)")

    @property
    def nu(self) -> int:
        return self.policy.nu

    def dims(self) -> Dims:
        return Dims(self.d, self.K, self.N, self.T)


@dataclass
class EpisodeTrace:
    instance: Instance
    gaps: object
    records: list
    events: list
    inclusion: object
    budget: BudgetLedger
    planner: VerificationPlanner
    messages: list | None = None


def _episode_streams(cfg: EpisodeConfig):
    env_ss = np.random.SeedSequence(cfg.master_seed,
                                    spawn_key=(cfg.grid_index, cfg.rep, 1))
    adv_ss = np.random.SeedSequence(cfg.master_seed,
                                    spawn_key=(cfg.grid_index, cfg.rep, 2))
    return np.random.default_rng(env_ss), np.random.default_rng(adv_ss)


def _instance_rng(cfg: EpisodeConfig):
    # instances are keyed independently of grid point and replication so one
    # drawn instance can be pinned across a whole sweep
    return np.random.default_rng(
        np.random.SeedSequence(cfg.master_seed, spawn_key=(cfg.instance_key,)))


def _selections(state: ProtocolState, cfg: EpisodeConfig, dims: Dims) -> np.ndarray:
    """Per-agent optimistic argmax from each agent's designated estimator."""
    bank = state.bank
    if state.proto.kind == S3:
        radii = confidence_radius(cfg.policy, cfg.protocol, bank.m, dims, cfg.gamma)
        idx = scalarize.corner_values(cfg.scalarization, bank.means(), radii)
        return idx.argmax(axis=1).astype(np.int64)
    # s2 has one shared estimator; s1's local estimators ingest identical
    # broadcasts in identical order, so one index computation serves all agents
    radii = confidence_radius(cfg.policy, cfg.protocol, bank.m[0], dims, cfg.gamma)
    idx = scalarize.corner_values(cfg.scalarization, bank.means()[0], radii)
    return np.full(cfg.N, int(np.argmax(idx)), dtype=np.int64)


def run_episode(cfg: EpisodeConfig, keep_trace: bool = False,
                keep_messages: bool = False):
    """Run one episode; returns (EpisodeSummary, EpisodeTrace or None).

    Aborts with AuditFailure if any budget or accounting identity is violated.
    """
    rng_env, rng_adv = _episode_streams(cfg)
    instance = cfg.instance
    if instance is None:
        instance = generate_instance(cfg.K, cfg.d, cfg.instance_floor,
                                     cfg.scalarization, _instance_rng(cfg))
    gaps = compute_gaps(instance, cfg.scalarization)
    dims = cfg.dims()

    state = ProtocolState(cfg.protocol, cfg.N, cfg.K, cfg.d)
    strategy = build_strategy(cfg.adversary, gaps)
    budget = BudgetLedger(cfg.gamma)
    planner = VerificationPlanner(cfg.policy.nu, cfg.N, cfg.K, cfg.T)

    committed: int | None = None
    commit_round: int | None = None
    nu_spent = 0
    records: list[RoundRecord] = []
    events: list = []
    msg_log: list | None = [] if keep_messages else None

    next_choice = _selections(state, cfg, dims)

    for t in range(1, cfg.T + 1):
        arms = np.empty(cfg.N, dtype=np.int64)
        verified = np.zeros(cfg.N, dtype=bool)
        for n in range(cfg.N):
            if committed is not None:
                arms[n] = committed
                continue
            do_verify, forced = planner.decision(t, n)
            if do_verify:
                verified[n] = True
                arms[n] = forced
                nu_spent += 1
            else:
                arms[n] = next_choice[n]

        clean = sample_rewards(instance, arms, rng_env)
        observed = clean.copy()
        c_norms = np.zeros(cfg.N)
        for n in range(cfg.N):
            ev = decide_corruption(strategy, budget, records, n, t, int(arms[n]),
                                   bool(verified[n]), clean[n], rng_adv)
            if ev is not None:
                events.append(ev)
                observed[n] = apply_corruption(clean[n], ev)
                c_norms[n] = ev.c_norm

        played_committed = committed is not None
        obs = [RoundObs(n, int(arms[n]), observed[n], bool(verified[n]))
               for n in range(cfg.N)]
        state.observe_round(t, obs)

        recs = None
        certs = None
        if cfg.protocol.kind == S3:
            recs = _selections(state, cfg, dims)
            if cfg.protocol.certified:
                certs = certificates_for_all(cfg.scalarization, state.global_ver_sum,
                                             state.global_ver_pulls, dims,
                                             cfg.policy.delta)
        msgs = emit_messages(state, obs, recommendations=recs, certificates=certs)
        if msg_log is not None:
            msg_log.append(msgs)
        ingest_messages(state, t, msgs, obs)
        next_choice = recs if recs is not None else _selections(state, cfg, dims)

        if certs is not None and committed is None:
            _, winner = filter_and_commit(certs, state.global_ver_pulls)
            if winner is not None:
                committed = winner
                commit_round = t

        records.append(RoundRecord(t, arms, verified, clean, observed, c_norms,
                                   played_committed))

    counts = pull_counts(records, cfg.K)
    curve = regret_curve(records, gaps)
    g_eff, g_eff_arm = effective_corruption(state.ledger, events, cfg.K)
    summary = EpisodeSummary(
        team_regret=team_regret(records, gaps),
        gamma_spent=budget.gamma_spent,
        gamma_eff=g_eff,
        gamma_eff_per_arm=g_eff_arm,
        nu_spent=nu_spent,
        commit_round=commit_round,
        committed_arm=committed,
        pull_counts=counts,
        regret_curve=curve,
    )

    report = audit(records, events, state.ledger, cfg.protocol, gaps,
                   cfg.gamma, budget.gamma_spent, g_eff, g_eff_arm,
                   cfg.policy.nu, nu_spent, cfg.N)
    if not report.ok:
        raise AuditFailure(f"episode audit failed: {report.first_violation()}")

    trace = None
    if keep_trace:
        trace = EpisodeTrace(instance, gaps, records, events, state.ledger,
                             budget, planner, msg_log)
    return summary, trace


@dataclass(frozen=True)
class ResultRow:
    protocol: str
    adversary: str
    K: int
    d: int
    N: int
    T: int
    gamma: float
    nu: int
    scalarization: str
    master_seed: int
    rep: int
    team_regret: float
    gamma_spent: float
    gamma_eff: float
    nu_spent: int
    commit_round: int | None
    wall_ms: float
    grid_index: int = 0  # ordering key, not part of the CSV schema


def episode_row(cfg: EpisodeConfig) -> ResultRow:
    start = time.perf_counter()
    summary, _ = run_episode(cfg)
    wall_ms = (time.perf_counter() - start) * 1e3
    return ResultRow(
        protocol=cfg.protocol.label,
        adversary=cfg.adversary.kind,
        K=cfg.K, d=cfg.d, N=cfg.N, T=cfg.T,
        gamma=cfg.gamma, nu=cfg.policy.nu,
        scalarization=cfg.scalarization.kind,
        master_seed=cfg.master_seed, rep=cfg.rep,
        team_regret=summary.team_regret,
        gamma_spent=summary.gamma_spent,
        gamma_eff=summary.gamma_eff,
        nu_spent=summary.nu_spent,
        commit_round=summary.commit_round,
        wall_ms=wall_ms,
        grid_index=cfg.grid_index,
    )


def run_sweep(grid, reps: int, workers: int = 1,
              on_row=None) -> list[ResultRow]:
    """Run `reps` replications of every grid point.

    Seeds derive from (master_seed, grid_index, rep), so output is identical
    for any worker count; rows come back sorted by (grid_index, rep).
    On a worker failure, rows completed so far are attached to the raised
    error as `partial_rows`.
    """
    if reps < 1:
        raise ContractViolation("reps must be >= 1")
    tasks = [replace(cfg, grid_index=gi, rep=rep)
             for gi, cfg in enumerate(grid) for rep in range(reps)]
    rows: list[ResultRow] = []
    try:
        if workers <= 1:
            for cfg in tasks:
                rows.append(episode_row(cfg))
                if on_row:
                    on_row(rows[-1])
        else:
            ctx = mp.get_context("fork")
            with ctx.Pool(processes=workers) as pool:
                for row in pool.imap(episode_row, tasks, chunksize=1):
                    rows.append(row)
                    if on_row:
                        on_row(row)
    except Exception as exc:
        rows.sort(key=lambda r: (r.grid_index, r.rep))
        err = RuntimeError(f"sweep worker failed: {exc}")
        err.partial_rows = rows
        raise err from exc
    rows.sort(key=lambda r: (r.grid_index, r.rep))
    return rows


# --- figure presets ---------------------------------------------------------

GAMMA_FRACTIONS = (0.0, 0.005, 0.01, 0.02, 0.04)

_DESK = dict(K=10, d=3, T=4000, reps=20, fig1_agents=(2, 5, 10),
             fig2_agents=10, fig3_agents=5)
_PAPER = dict(K=20, d=5, T=10_000, reps=50, fig1_agents=(5, 10, 20),
              fig2_agents=20, fig3_agents=10)


def _coordinate_offsets(d: int) -> np.ndarray:
    """Zero-sum coordinate pattern so uniform linear utility hits the target exactly."""
    vals: list[float] = []
    v = 0.03
    while len(vals) + 2 <= d:
        vals.extend([v, -v])
        v *= 0.6
    if len(vals) < d:
        vals.append(0.0)
    return np.array(vals)


def pinned_instance(n_arms: int, dim: int) -> Instance:
    """Fixed instance shared by every preset at a given (K, d).

    One clearly best arm sits at utility 0.87 in the last slot; the rest are
    spread over [0.17, 0.37] in a scrambled deterministic order, which keeps
    the smallest gap at 0.50 and the largest at 0.70.
    """
    lows = np.linspace(0.17, 0.37, n_arms - 1)
    stride = next(s for s in (4, 3, 5, 7, 1) if math.gcd(s, n_arms - 1) == 1)
    order = [(stride * i) % (n_arms - 1) for i in range(n_arms - 1)]
    thetas = np.append(lows[order], 0.87)
    offsets = _coordinate_offsets(dim)
    means = np.empty((n_arms, dim))
    for k in range(n_arms):
        means[k] = thetas[k] + np.roll(offsets, k)
    return Instance(means)


def verification_threshold(dims: Dims, delta: float, delta_min: float,
                           lipschitz: float = 1.0) -> int:
    """Verified pulls needed for certificate filtering to isolate the best arm.

    Inverting the certificate half-width against a quarter of the smallest gap
    gives the per-arm requirement; the budget must cover all arms.
    """
    per_arm = math.ceil(8.0 * lipschitz ** 2 * log_term(dims, delta)
                        / delta_min ** 2)
    return dims.n_arms * int(per_arm)


@dataclass
class FigurePlan:
    name: str
    grid: list = field(default_factory=list)
    reps: int = 1
    meta: dict = field(default_factory=dict)


def figure_presets(name: str, paper_scale: bool = False) -> FigurePlan:
    """Sweep grids reproducing the three headline comparisons at desk scale."""
    if name not in ("fig1", "fig2", "fig3"):
        raise ContractViolation(f"unknown figure preset {name!r}")
    p = _PAPER if paper_scale else _DESK
    K, d, T, reps = p["K"], p["d"], p["T"], p["reps"]
    spec = scalarize.linear([1.0 / d] * d)
    inst = pinned_instance(K, d)
    gaps = compute_gaps(inst, spec)
    base = dict(K=K, d=d, T=T, scalarization=spec, instance=inst,
                master_seed=_PRESET_SEED)
    meta = dict(figure=name, K=K, d=d, T=T, reps=reps,
                master_seed=_PRESET_SEED, scalarization=scalarize.to_config(spec),
                instance=inst.to_config(), theta=gaps.theta.tolist(),
                best_arm=gaps.best_arm, delta_min=gaps.delta_min,
                delta_max=gaps.delta_max)
    grid: list[EpisodeConfig] = []

    if name == "fig1":
        # raw-sample vs statistic sharing under a budget-aware learner
        policy = PolicyConfig(delta=0.01, corruption_knowledge=KNOWN_BUDGET)
        adv = AdversaryChoice(kind="greedy_flip", epsilon=1.0)
        for N in p["fig1_agents"]:
            for proto in (ProtocolSpec(S1), ProtocolSpec(S2)):
                for frac in GAMMA_FRACTIONS:
                    grid.append(EpisodeConfig(N=N, gamma=frac * N * T,
                                              protocol=proto, adversary=adv,
                                              policy=policy, **base))
        meta.update(agents=list(p["fig1_agents"]),
                    gamma_fractions=list(GAMMA_FRACTIONS),
                    corruption_knowledge=KNOWN_BUDGET,
                    adversary=adv.to_config())
    elif name == "fig2":
        # statistic sharing vs plain recommendation sharing: no amplification,
        # but a visible clean-case coordination overhead
        policy = PolicyConfig(delta=0.01, corruption_knowledge=AGNOSTIC)
        adv = AdversaryChoice(kind="greedy_flip", epsilon=1.0)
        N = p["fig2_agents"]
        for proto in (ProtocolSpec(S2), ProtocolSpec(S3)):
            for frac in GAMMA_FRACTIONS:
                grid.append(EpisodeConfig(N=N, gamma=frac * N * T,
                                          protocol=proto, adversary=adv,
                                          policy=policy, **base))
        meta.update(agents=[N], gamma_fractions=list(GAMMA_FRACTIONS),
                    corruption_knowledge=AGNOSTIC, adversary=adv.to_config())
    else:
        # verification phase transition under heavy corruption of the best arm
        N = p["fig3_agents"]
        gamma = 0.25 * N * T
        delta = 0.01
        nu_star = verification_threshold(Dims(d, K, N, T), delta, gaps.delta_min)
        nu_grid = [0, math.ceil(nu_star / 4), math.ceil(nu_star / 2),
                   nu_star, 2 * nu_star]
        adv = AdversaryChoice(kind="early_informative", target_arm="best")
        for certified in (True, False):
            proto = ProtocolSpec(S3, certified=certified)
            for nu in nu_grid:
                policy = PolicyConfig(delta=delta, corruption_knowledge=AGNOSTIC,
                                      nu=nu, certified=certified)
                grid.append(EpisodeConfig(N=N, gamma=gamma, protocol=proto,
                                          adversary=adv, policy=policy, **base))
        meta.update(agents=[N], gamma=gamma, nu_grid=nu_grid, nu_star=nu_star,
                    corruption_knowledge=AGNOSTIC, adversary=adv.to_config(),
                    delta=delta)

    return FigurePlan(name=name, grid=grid, reps=reps, meta=meta)
