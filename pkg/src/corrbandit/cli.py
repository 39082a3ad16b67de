"""Command-line entry point: single runs, sweeps, figure presets, quick validation.

Exit codes: 0 ok, 1 usage error, 2 validation failure, 3 IO error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import scalarize, sim
from .config import episode_config_from_dict, sweep_from_dict
from .errors import UsageError
from .sim import ResultRow, episode_row, figure_presets, run_episode, run_sweep

CSV_COLUMNS = ["protocol", "adversary", "K", "d", "N", "T", "gamma", "nu",
               "scalarization", "master_seed", "rep", "team_regret",
               "gamma_spent", "gamma_eff", "nu_spent", "commit_round", "wall_ms"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def rows_to_csv(rows: list[ResultRow]) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        rec = dataclasses.asdict(row)
        lines.append(",".join(_fmt(rec[c]) for c in CSV_COLUMNS))
    return "\n".join(lines) + "\n"


def write_csv(rows: list[ResultRow], path: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(rows_to_csv(rows))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_trace(trace, path: str) -> None:
    """Newline-delimited JSON: one line per round with the record and messages."""
    with open(path, "w") as fh:
        for i, rec in enumerate(trace.records):
            entry = {
                "round": rec.round,
                "arms": rec.arms.tolist(),
                "verified": rec.verified.tolist(),
                "clean": rec.clean.tolist(),
                "observed": rec.observed.tolist(),
                "c_norms": rec.c_norms.tolist(),
                "committed": rec.committed,
            }
            if trace.messages is not None:
                entry["messages"] = [
                    {"type": type(m).__name__,
                     **{k: _json_default(v) if isinstance(v, np.ndarray) else
                        (dataclasses.asdict(v) if dataclasses.is_dataclass(v) and v is not None else v)
                        for k, v in dataclasses.asdict(m).items()}}
                    for m in trace.messages[i]]
            fh.write(json.dumps(entry, default=_json_default) + "\n")


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc


def _apply_seed_override(cfg):
    seed = os.environ.get("CORRBANDIT_SEED")
    if seed is None:
        return cfg
    try:
        return dataclasses.replace(cfg, master_seed=int(seed))
    except ValueError as exc:
        raise UsageError(f"CORRBANDIT_SEED: expected an integer, got {seed!r}") from exc


def _cmd_run(args) -> int:
    cfg = _apply_seed_override(episode_config_from_dict(_load_json(args.config)))
    row = episode_row(cfg)
    if args.trace:
        _, trace = run_episode(cfg, keep_trace=True, keep_messages=True)
        _write_trace(trace, args.trace)
    csv_text = rows_to_csv([row])
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        with open(args.out, "w", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    grid = [_apply_seed_override(c) for c in sweep_from_dict(_load_json(args.config))]
    try:
        rows = run_sweep(grid, reps=args.reps, workers=args.workers)
    except RuntimeError as exc:
        partial = getattr(exc, "partial_rows", [])
        if partial and args.out:
            write_csv(partial, args.out)
            print(f"wrote {len(partial)} partial rows to {args.out}", file=sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    write_csv(rows, args.out)
    return EXIT_OK


def _merge_meta(path: Path, name: str, meta: dict) -> None:
    existing = {}
    if path.exists():
        try:
            existing = json.loads(path.read_text())
        except json.JSONDecodeError:
            existing = {}
    existing[name] = meta
    path.write_text(json.dumps(existing, indent=2, default=_json_default) + "\n")


def _cmd_figure(args) -> int:
    plan = figure_presets(args.name, paper_scale=args.paper_scale)
    reps = args.reps if args.reps else plan.reps
    seed = os.environ.get("CORRBANDIT_SEED")
    grid = plan.grid
    if seed is not None:
        grid = [dataclasses.replace(c, master_seed=int(seed)) for c in grid]
        plan.meta["master_seed"] = int(seed)
    rows = run_sweep(grid, reps=reps, workers=args.workers)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(rows, str(out_dir / f"{plan.name}.csv"))
    plan.meta["reps"] = reps
    _merge_meta(out_dir / "meta.json", plan.name, plan.meta)
    print(f"wrote {out_dir / (plan.name + '.csv')} ({len(rows)} rows)")
    return EXIT_OK


def _validation_checks():
    """Quick property/audit battery; yields (name, ok, detail)."""
    from .adversary import AdversaryChoice
    from .env import compute_gaps
    from .policy import PolicyConfig, VerificationPlanner
    from .protocol import S1, S2, S3, ProtocolSpec
    from .sim import EpisodeConfig, pinned_instance

    spec = scalarize.linear([0.5, 0.5])
    inst = pinned_instance(5, 2)
    gaps = compute_gaps(inst, spec)

    # corner reduction against a brute-force grid
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        mean = rng.uniform(0, 1, 2)
        radius = rng.uniform(0, 0.5)
        oi = scalarize.optimistic_index(spec, mean, radius)
        lo = np.maximum(0.0, mean - radius)
        hi = np.minimum(1.0, mean + radius)
        axes = [np.linspace(lo[i], hi[i], 21) for i in range(2)]
        grid_pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 2)
        gmax = scalarize._phi(spec, grid_pts).max()
        worst = max(worst, abs(oi - gmax))
        if oi < gmax - 1e-12:
            yield "corner_reduction", False, f"index {oi} below grid max {gmax}"
            return
    yield "corner_reduction", True, f"max corner gap {worst:.2e}"

    # effective-corruption identities across the three protocols
    for kind, rho in ((S1, 3), (S2, 1), (S3, 1)):
        cfg = EpisodeConfig(K=5, d=2, N=3, T=150, gamma=4.0,
                            protocol=ProtocolSpec(kind),
                            adversary=AdversaryChoice(kind="greedy_flip", epsilon=1.0),
                            scalarization=spec, policy=PolicyConfig(),
                            instance=inst, master_seed=11)
        summary, _ = run_episode(cfg)
        ok = abs(summary.gamma_eff - rho * summary.gamma_spent) <= 1e-12
        yield f"effective_corruption_{kind}", ok, (
            f"gamma_eff={summary.gamma_eff:.6f} spent={summary.gamma_spent:.6f}")

    # determinism
    cfg = EpisodeConfig(K=5, d=2, N=2, T=200, gamma=2.0,
                        protocol=ProtocolSpec(S2),
                        adversary=AdversaryChoice(kind="oblivious_random", p=0.3,
                                                  epsilon=0.5),
                        scalarization=spec, policy=PolicyConfig(), instance=inst,
                        master_seed=3)
    a, _ = run_episode(cfg)
    b, _ = run_episode(cfg)
    yield "determinism", a.team_regret == b.team_regret and np.array_equal(
        a.regret_curve, b.regret_curve), f"regret={a.team_regret:.6f}"

    # verification planner covers arms evenly
    planner = VerificationPlanner(nu=12, n_agents=4, n_arms=5, horizon=50)
    spread = planner.quota.max() - planner.quota.min()
    yield "verification_plan", (planner.total_slots == 12 and spread <= 1), (
        f"quota={planner.quota.tolist()}")

    # a deliberately over-budget record must fail the audit
    from . import metrics
    from .adversary import make_event
    from .protocol import InclusionLedger
    rec = metrics.RoundRecord(1, np.array([0]), np.array([False]),
                              np.zeros((1, 2)), np.ones((1, 2)), np.array([2.0]),
                              False)
    bad = make_event(0, 1, 0, np.array([2.0, 0.0]))
    led = InclusionLedger()
    led.record(0, 0, 0, 1)
    report = metrics.audit([rec], [bad], led, ProtocolSpec(S2), gaps,
                           gamma_total=1.0, gamma_spent=2.0, gamma_eff=2.0,
                           gamma_eff_per_arm=np.array([2.0, 0, 0, 0, 0]),
                           nu_total=0, nu_spent=0, n_agents=1)
    yield "over_budget_detected", not report.ok, report.first_violation() or ""


def _cmd_validate(_args) -> int:
    failures = 0
    for name, ok, detail in _validation_checks():
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail}")
        if not ok:
            failures += 1
    return EXIT_OK if failures == 0 else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrbandit",
        description="Cooperative multi-objective bandit simulator with corruption "
                    "and verification budgets")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a single episode from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--trace", default=None,
                       help="write a per-round NDJSON trace to this path")
    p_run.add_argument("--out", default=None, help="write the result row CSV here")
    p_run.set_defaults(fn=_cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a replicated sweep grid")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--reps", type=int, default=1)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--out", required=True)
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_fig = sub.add_parser("figure", help="run a figure preset and emit CSV + meta")
    p_fig.add_argument("name", choices=["fig1", "fig2", "fig3"])
    p_fig.add_argument("--out", required=True, help="output directory")
    p_fig.add_argument("--reps", type=int, default=0,
                       help="override the preset's replication count")
    p_fig.add_argument("--workers", type=int, default=1)
    p_fig.add_argument("--paper-scale", action="store_true",
                       help="use the full-scale settings instead of desk scale")
    p_fig.set_defaults(fn=_cmd_figure)

    p_val = sub.add_parser("validate", help="run the quick property/audit suite")
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.fn(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
