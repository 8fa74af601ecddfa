"""Command-line interface.

Subcommands: green (Green's function values), hm (exact harmonic measure),
mc (Monte Carlo estimators), simulate (HAT/IHAT trajectories), analyze
(schedule events along a logged trajectory), form-dot (formation scripts),
experiment (batch runners).
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import sys

import numpy as np

from . import experiments
from .dot import ZWalkState, event_tracker, z_walk_advance
from .dot import schedule as make_schedule
from .dynamics import HatState, IhatState, hat_step, ihat_step
from .formation import algorithm_a1, replay_script, verify_script
from .green import default_table
from .lattice import (as_config, clustering_from_json, clustering_to_json,
                      config_from_json, config_to_json, dimension, pi)
from .potential import clustering_harmonic, escape_vector, transport_distribution
from .walk_mc import WalkBudget, mc_escape, mc_harmonic_measure_2d, mc_transport


def _state_hash(config) -> str:
    return hashlib.sha256(config_to_json(config).encode()).hexdigest()[:16]


def _load_config_file(path: str):
    with open(path) as fh:
        return config_from_json(fh.read())


def _load_clustering_file(path: str):
    with open(path) as fh:
        text = fh.read()
    value = json.loads(text)
    if value and isinstance(value[0][0], list):
        return clustering_from_json(text)
    return (config_from_json(text),)


def _pt_key(p) -> str:
    return ",".join(str(c) for c in p)


# ---------------------------------------------------------------------------

def cmd_green(args) -> int:
    point = tuple(int(v) for v in args.point.split(","))
    if len(point) != args.dim:
        raise SystemExit("--point length must match --dim")
    G = default_table(args.dim)
    print(json.dumps({"dim": args.dim, "point": list(point),
                      "green": G(point)}))
    return 0


def cmd_hm(args) -> int:
    G = default_table(args.dim)
    if args.clustering:
        C = _load_clustering_file(args.config)
        prof = clustering_harmonic(C, G)
        out = {"total_cap": prof.total_cap,
               "esc": {f"{i}|{_pt_key(x)}": v for (i, x), v in prof.esc.items()},
               "hm": {f"{i}|{_pt_key(x)}": v for (i, x), v in prof.hm.items()}}
    else:
        A = _load_config_file(args.config)
        prof = escape_vector(A, G)
        out = {"cap": prof.cap,
               "esc": {_pt_key(x): v for x, v in prof.esc.items()},
               "hm": {_pt_key(x): v for x, v in prof.hm.items()}}
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_mc(args) -> int:
    if args.mode in ("escape", "transport") and not args.source:
        raise SystemExit(f"--source is required for {args.mode} mode")
    A = _load_config_file(args.config)
    budget = WalkBudget(num_walks=args.walks, escape_radius=args.radius,
                        seed=args.seed)
    if args.mode in ("escape", "transport"):
        x = tuple(int(v) for v in args.source.split(","))
        if args.mode == "escape":
            out = {_pt_key(x): dataclasses.asdict(mc_escape(A, x, budget))}
        else:
            est = mc_transport(A, x, budget)
            out = {_pt_key(y): dataclasses.asdict(e) for y, e in est.items()}
    else:
        est = mc_harmonic_measure_2d(A, budget)
        out = {_pt_key(x): dataclasses.asdict(e) for x, e in est.items()}
    print(json.dumps(out, sort_keys=True))
    return 0


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    G = default_table(args.dim) if args.dim >= 3 else None
    with open(args.log, "w") as fh:
        if args.engine == "hat":
            state = HatState(config=_load_config_file(args.init))
            for _ in range(args.steps):
                state, mv = hat_step(state, G, rng)
                rec = {"step": mv.step_index,
                       "activated": list(mv.activated),
                       "target": list(mv.target),
                       "cluster": mv.cluster_label,
                       "state_hash": _state_hash(state.config)}
                if args.full_states:
                    rec["config"] = sorted([list(p) for p in state.config])
                fh.write(json.dumps(rec) + "\n")
        else:
            if G is None:
                raise SystemExit("ihat requires dim >= 3")
            state = IhatState(clusters=_load_clustering_file(args.init))
            for _ in range(args.steps):
                state, mv = ihat_step(state, G, rng)
                rec = {"step": mv.step_index,
                       "activated": list(mv.activated),
                       "target": list(mv.target),
                       "cluster": mv.cluster_label,
                       "state_hash": _state_hash(pi(state.clusters))}
                if args.full_states:
                    rec["clusters"] = [sorted([list(p) for p in b])
                                       for b in state.clusters]
                fh.write(json.dumps(rec) + "\n")
    return 0


def cmd_analyze(args) -> int:
    traj = []
    with open(args.log) as fh:
        for line in fh:
            rec = json.loads(line)
            if "clusters" not in rec:
                raise SystemExit(
                    "analyze requires a log written with --full-states by the "
                    "ihat engine (lines must carry a 'clusters' field)")
            traj.append(tuple(frozenset(map(tuple, b)) for b in rec["clusters"]))
    if not traj:
        raise SystemExit("empty trajectory log")
    n = len(pi(traj[0]))
    c1, c2, c3 = (float(v) for v in args.schedule.split(","))
    sched = make_schedule(c1, c2, c3, args.a, n)
    m = len(traj[0])
    if args.pairs == "all":
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m)]
    else:
        i, j = (int(v) for v in args.pairs.split(","))
        pairs = [(i, j)]
    cols = ["pair", "level", "insufficient", "g1", "g2", "g3", "g4",
            "ref_times", "z_positions"]
    print(",".join(cols))
    for pair in pairs:
        kappa_1 = sched.kappa(1) if sched.t(1) > 0 else 3.0
        zstate = ZWalkState(pair=pair, kappa=max(3.0, kappa_1))
        for t, C in enumerate(traj):
            zstate = z_walk_advance(zstate, C, t)
        events = event_tracker(traj, sched, pair, levels=args.levels)
        def _flag(v):
            return "" if v is None else int(v)

        for ev in events:
            print(",".join(str(v) for v in (
                f"{pair[0]}-{pair[1]}", ev.ell, int(ev.insufficient),
                _flag(ev.g1), _flag(ev.g2), _flag(ev.g3), _flag(ev.g4),
                len(zstate.reference_times),
                ";".join(_pt_key(p) for p in zstate.positions))))
    return 0


def cmd_form_dot(args) -> int:
    U = _load_config_file(args.init)
    G = default_table(args.dim)
    script = algorithm_a1(U, args.a, G)
    from .formation import algorithm_a2, algorithm_a3
    s2 = algorithm_a2(script.final_clustering)
    s3 = algorithm_a3(s2.final_clustering, args.a)
    for s in (script, s2, s3):
        for mv in s.moves:
            print(json.dumps({"step": mv.step_index,
                              "activated": list(mv.activated),
                              "target": list(mv.target),
                              "cluster": mv.cluster_label}))
    print(clustering_to_json(s3.final_clustering))
    if args.verify:
        for name, s in (("a1", script), ("a2", s2), ("a3", s3)):
            report = verify_script(s, G)
            print(json.dumps({"script": name, "ok": report.ok,
                              "log_probability": report.log_probability,
                              "failure_index": report.failure_index,
                              "failure_cause": report.failure_cause}))
    return 0


def cmd_experiment(args) -> int:
    cfg = experiments.load_config(args.config)
    if args.name:
        cfg.name = args.name
    if args.out:
        cfg.out_dir = args.out
    path = experiments.run_experiment(cfg)
    print(path)
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hatlab", description="HAT simulation and numerics toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("green", help="lattice Green's function value")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.set_defaults(fn=cmd_green)

    p = sub.add_parser("hm", help="exact escape/capacity/harmonic measure")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--config", required=True, help="JSON configuration file")
    p.add_argument("--clustering", action="store_true",
                   help="treat the file as a clustering (per-cluster profile)")
    p.set_defaults(fn=cmd_hm)

    p = sub.add_parser("mc", help="Monte Carlo estimators")
    p.add_argument("--mode", choices=("escape", "transport", "hm2d"),
                   required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--walks", type=int, default=100_000)
    p.add_argument("--radius", type=float, default=0.0,
                   help="0 selects the per-operation default")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--source", default="",
                   help="activated site for transport mode, comma-separated")
    p.set_defaults(fn=cmd_mc)

    p = sub.add_parser("simulate", help="run HAT or IHAT and log moves")
    p.add_argument("--engine", choices=("hat", "ihat"), required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--steps", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", required=True)
    p.add_argument("--full-states", action="store_true", dest="full_states")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("analyze", help="schedule events along a logged run")
    p.add_argument("--log", required=True)
    p.add_argument("--pairs", default="all")
    p.add_argument("--schedule", required=True, help="c1,c2,c3")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--levels", type=int, default=1)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("form-dot", help="formation scripts A1 -> A2 -> A3")
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--init", required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--verify", action="store_true")
    p.set_defaults(fn=cmd_form_dot)

    p = sub.add_parser("experiment", help="batch experiment runners")
    p.add_argument("--name", default="")
    p.add_argument("--config", required=True, help="TOML config file")
    p.add_argument("--out", default="")
    p.set_defaults(fn=cmd_experiment)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
