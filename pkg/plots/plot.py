#!/usr/bin/env python3
"""Render figures from hatlab CSV output.

Usage: plot.py --spec spec.json

The spec file holds one plot spec (a JSON object) or a list of them:

    {
      "input":  "out/xi/summary.csv",       # versioned hatlab CSV
      "kind":   "xi_tail",                  # see KINDS below
      "output": "xi_tail.png",
      "xscale": "linear",                   # optional axis overrides
      "yscale": "log",
      "provenance": "out/xi/provenance.json"  # optional, for fitted lines
    }

Kinds:
    separation  median cluster separation vs time (log-log) with a
                slope-1/2 guide line, from median_separation.csv
    xi_tail     semilog survival of the first reference time, with the
                fitted exponential line when a provenance file is given
    p_vs_q      max activation deficit 1 - P/Q vs separation (log-log)
    phase       (d, n) grid of outcomes from a CSV with columns d, n, value

These scripts never recompute statistics: every curve, including fitted
lines, comes from columns or provenance values the primary component wrote.
A schema mismatch or a missing column is a hard error naming the problem.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


class PlotError(Exception):
    pass


def read_csv(path: str):
    """Parse a versioned hatlab CSV: (schema tag, columns, rows of strings)."""
    schema, columns, rows = "", None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line.startswith("# schema "):
                schema = line[len("# schema "):]
                continue
            if not line or line.startswith("#"):
                continue
            if columns is None:
                columns = line.split(",")
                continue
            rows.append(line.split(","))
    if columns is None:
        raise PlotError(f"{path}: empty CSV, nothing to plot")
    return schema, columns, rows


def column(columns, rows, name, path):
    """Numeric column by name; missing names are reported explicitly."""
    if name not in columns:
        raise PlotError(
            f"{path}: required column {name!r} not found "
            f"(header has: {', '.join(columns)})")
    j = columns.index(name)
    out = []
    for row in rows:
        if row[j] != "":
            out.append(float(row[j]))
        else:
            out.append(math.nan)
    return out


def check_schema(schema: str, expected: str, path: str):
    tag = schema.split(" ")[0] if schema else ""
    if tag != expected:
        raise PlotError(
            f"{path}: schema mismatch: expected {expected!r}, "
            f"found {tag or '(none)'!r}")


def _pairs(xs, ys):
    return [(x, y) for x, y in zip(xs, ys)
            if not (math.isnan(x) or math.isnan(y))]


def _save(fig, output: str):
    fig.savefig(output, dpi=120, metadata={"Software": "hatlab-plots"})
    plt.close(fig)


def plot_separation(spec: dict):
    path = spec["input"]
    schema, cols, rows = read_csv(path)
    check_schema(schema, "hatlab/separation_growth_median/v1", path)
    t = column(cols, rows, "time", path)
    m = column(cols, rows, "median_min_sep", path)
    g = column(cols, rows, "median_growth", path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pts = [(x, y) for x, y in _pairs(t, m) if x > 0 and y > 0]
    ax.plot([p[0] for p in pts], [p[1] for p in pts],
            "o-", ms=3, color="black", label="median separation")
    gpts = [(x, y) for x, y in _pairs(t, g) if x > 0 and y > 0]
    if gpts:
        ax.plot([p[0] for p in gpts], [p[1] for p in gpts],
                "s-", ms=3, color="tab:orange", label="median growth")
        # slope-1/2 guide through the last growth point
        x1, y1 = gpts[-1]
        xs = [p[0] for p in gpts]
        ax.plot(xs, [y1 * math.sqrt(x / x1) for x in xs],
                "--", color="tab:blue", label=r"slope $1/2$ guide")
    ax.set_xscale(spec.get("xscale", "log"))
    ax.set_yscale(spec.get("yscale", "log"))
    ax.set_xlabel("time")
    ax.set_ylabel("separation")
    ax.legend()
    _save(fig, spec["output"])


def plot_xi_tail(spec: dict):
    path = spec["input"]
    schema, cols, rows = read_csv(path)
    check_schema(schema, "hatlab/xi_tail/v1", path)
    t = column(cols, rows, "t", path)
    s = column(cols, rows, "survival", path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pts = [(x, y) for x, y in _pairs(t, s) if y > 0]
    ax.plot([p[0] for p in pts], [p[1] for p in pts],
            "o", ms=4, color="black", label=r"$P(\xi_1 > t)$")
    prov_path = spec.get("provenance")
    if prov_path:
        with open(prov_path, encoding="utf-8") as fh:
            prov = json.load(fh)
        rate = prov.get("rate", prov.get("statistics", {}).get("rate"))
        if rate is not None and not math.isnan(rate) and pts:
            t0, s0 = pts[0]
            xs = [p[0] for p in pts]
            ax.plot(xs, [s0 * math.exp(-rate * (x - t0)) for x in xs],
                    "--", color="tab:red",
                    label=f"fitted rate {rate:.3f}")
    ax.set_xscale(spec.get("xscale", "linear"))
    ax.set_yscale(spec.get("yscale", "log"))
    ax.set_xlabel("t")
    ax.set_ylabel("survival")
    ax.legend()
    _save(fig, spec["output"])


def plot_p_vs_q(spec: dict):
    path = spec["input"]
    schema, cols, rows = read_csv(path)
    check_schema(schema, "hatlab/p_vs_q/v1", path)
    a = column(cols, rows, "a", path)
    dmax = column(cols, rows, "max_deficit", path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    pts = [(x, y) for x, y in _pairs(a, dmax) if x > 0 and y > 0]
    ax.plot([p[0] for p in pts], [p[1] for p in pts],
            "o-", color="black", label=r"max $1 - P/Q$")
    ax.set_xscale(spec.get("xscale", "log"))
    ax.set_yscale(spec.get("yscale", "log"))
    ax.set_xlabel("separation a")
    ax.set_ylabel("activation deficit")
    ax.legend()
    _save(fig, spec["output"])


def plot_phase(spec: dict):
    path = spec["input"]
    _, cols, rows = read_csv(path)
    d = column(cols, rows, "d", path)
    n = column(cols, rows, "n", path)
    v = column(cols, rows, "value", path)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    sc = ax.scatter(d, n, c=v, cmap="coolwarm", s=120, marker="s")
    fig.colorbar(sc, ax=ax, label="value")
    ax.set_xlabel("dimension d")
    ax.set_ylabel("n")
    _save(fig, spec["output"])


KINDS = {
    "separation": plot_separation,
    "xi_tail": plot_xi_tail,
    "p_vs_q": plot_p_vs_q,
    "phase": plot_phase,
}


def run_spec(spec: dict):
    for key in ("input", "kind", "output"):
        if key not in spec:
            raise PlotError(f"plot spec missing required field {key!r}")
    kind = spec["kind"]
    if kind not in KINDS:
        raise PlotError(
            f"unknown plot kind {kind!r} (known: {', '.join(sorted(KINDS))})")
    if not Path(spec["input"]).exists():
        raise PlotError(f"input not found: {spec['input']}")
    KINDS[kind](spec)


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--spec", required=True, help="JSON plot spec file")
    args = ap.parse_args(argv)
    with open(args.spec, encoding="utf-8") as fh:
        specs = json.load(fh)
    if isinstance(specs, dict):
        specs = [specs]
    try:
        for spec in specs:
            run_spec(spec)
    except PlotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
