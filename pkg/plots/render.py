#!/usr/bin/env python3
"""Render the three comparison figures from sweep CSVs emitted by the simulator.

Usage:
    python plots/render.py --figure fig1 --csv out/fig1.csv --meta out/meta.json --out fig1.png

All statistics beyond mean/standard-error grouping live in the simulator; this
script only aggregates rows into series and draws them.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

FIGURES = ("fig1", "fig2", "fig3")
REQUIRED_COLUMNS = ("protocol", "N", "gamma", "nu", "rep", "team_regret")


@dataclass(frozen=True)
class FigureSpec:
    figure: str
    csv_path: str
    meta_path: str
    out_path: str

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ValueError(f"figure must be one of {FIGURES}, got {self.figure!r}")


class RenderError(RuntimeError):
    pass


def _load_rows(path: str) -> list[dict]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                raise RenderError(
                    f"{path}: missing columns {missing}; found {header}")
            rows = list(reader)
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return rows


def _series_key(figure: str, row: dict, multi_n: bool):
    if figure == "fig3":
        return row["protocol"]
    if multi_n:
        return (row["protocol"], int(row["N"]))
    return row["protocol"]


def _series_label(key) -> str:
    if isinstance(key, tuple):
        return f"{key[0]} (N={key[1]})"
    return str(key)


def build_series(figure: str, rows: list[dict]) -> dict:
    """Group rows into {series key: (xs, means, stderrs)} sorted by x."""
    x_col = "nu" if figure == "fig3" else "gamma"
    multi_n = len({row["N"] for row in rows}) > 1
    buckets: dict = defaultdict(lambda: defaultdict(list))
    for row in rows:
        key = _series_key(figure, row, multi_n)
        buckets[key][float(row[x_col])].append(float(row["team_regret"]))
    series = {}
    for key, by_x in buckets.items():
        xs = sorted(by_x)
        means, errs = [], []
        for x in xs:
            vals = by_x[x]
            means.append(sum(vals) / len(vals))
            if len(vals) > 1:
                mean = means[-1]
                var = sum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
                errs.append(math.sqrt(var / len(vals)))
            else:
                errs.append(0.0)
        series[key] = (xs, means, errs)
    return series


def render(spec: FigureSpec) -> dict:
    """Draw the figure; returns {"series": count, "threshold": nu* or None}."""
    rows = _load_rows(spec.csv_path)
    series = build_series(spec.figure, rows)

    threshold = None
    if spec.figure == "fig3":
        try:
            meta = json.loads(Path(spec.meta_path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise RenderError(f"cannot read meta {spec.meta_path}: {exc}") from exc
        entry = meta.get(spec.figure, meta)
        if "nu_star" not in entry:
            raise RenderError(f"{spec.meta_path}: no nu_star entry for fig3")
        threshold = float(entry["nu_star"])

    x_label = "verification budget nu" if spec.figure == "fig3" else "corruption budget gamma"
    titles = {
        "fig1": "Team regret vs corruption budget: raw-sample vs statistic sharing",
        "fig2": "Team regret vs corruption budget: statistic vs recommendation sharing",
        "fig3": "Team regret vs verification budget under heavy corruption",
    }

    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=150)
    for key in sorted(series, key=str):
        xs, means, errs = series[key]
        lo = [m - e for m, e in zip(means, errs)]
        hi = [m + e for m, e in zip(means, errs)]
        ax.plot(xs, means, marker="o", markersize=3.5, label=_series_label(key))
        ax.fill_between(xs, lo, hi, alpha=0.2)
    if threshold is not None:
        ax.axvline(threshold, linestyle="--", color="gray", linewidth=1.2,
                   label="nu*")
    ax.set_xlabel(x_label)
    ax.set_ylabel("mean team regret")
    ax.set_title(titles[spec.figure], fontsize=10)
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    Path(spec.out_path).parent.mkdir(parents=True, exist_ok=True)
    # strip the writer's software stamp so identical inputs give identical bytes
    fig.savefig(spec.out_path, metadata={"Software": None})
    plt.close(fig)
    return {"series": len(series), "threshold": threshold}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--figure", required=True, choices=FIGURES)
    parser.add_argument("--csv", required=True)
    parser.add_argument("--meta", required=True)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        info = render(FigureSpec(args.figure, args.csv, args.meta, args.out))
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {args.out}: {info['series']} series"
          + (f", threshold at {info['threshold']}" if info["threshold"] else ""))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
