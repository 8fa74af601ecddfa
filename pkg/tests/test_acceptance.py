"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Every test measures its own wall-clock time and treats the stated budget as
a clause of the criterion. Expensive simulation outputs (criteria 5 and 6)
are session fixtures so the plotting criterion can reuse their CSVs.
"""

import hashlib
import json
import math
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

os.environ.setdefault("HATLAB_THREADS", "1")

from hatlab.dot import (DotParams, check_amlg, check_dist_below_cm,
                        check_sep_to_dist, is_dot, is_reference)
from hatlab.dynamics import HatState, hat_step, natural_clustering_update
from hatlab.experiments import (ExperimentConfig, _dot_pair,
                                intracluster_deficits, run_collapse_2d,
                                run_separation_growth, run_xi_tail)
from hatlab.formation import (algorithm_a1, algorithm_a2, algorithm_a3,
                              can_be_lined_up, verify_script)
from hatlab.green import default_table, green_origin
from hatlab.lattice import as_config, diam, dimension, lex, pi, segment, sep
from hatlab.potential import escape_vector, transport_distribution
from hatlab.walk_mc import WalkBudget, mc_escape, mc_transport

PLOT_SCRIPT = Path(__file__).resolve().parents[1] / "plots" / "plot.py"


def _report(acceptance, num, ok, detail):
    acceptance(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {detail}")
    assert ok, f"criterion {num}: {detail}"


def _random_config(rng, n, d=5, box=3):
    pts = set()
    while len(pts) < n:
        pts.add(tuple(int(v) for v in rng.integers(-box, box + 1, d)))
    return as_config(pts)


def _random_connected_config(rng, n, d=5):
    """Random connected set grown by uniform adjacent attachment (the kind
    of configuration HAT visits; every site has nontrivial hit mass, which
    keeps the conditioned-hit budget feasible)."""
    pts = [(0,) * d]
    while len(pts) < n:
        base = pts[int(rng.integers(len(pts)))]
        axis = int(rng.integers(d))
        step = 1 if rng.random() < 0.5 else -1
        cand = base[:axis] + (base[axis] + step,) + base[axis + 1:]
        if cand not in pts:
            pts.append(cand)
    return as_config(pts)


# ---------------------------------------------------------------------------
# 1. Green numerics


def test_criterion_1_green_numerics(acceptance, G5):
    t0 = time.monotonic()
    o5 = (0,) * 5
    g5 = G5(o5)
    ok_origin = 1.0 < g5 <= 1.2
    ok_return = (1.0 - 1.0 / g5) < 0.14

    origins = [green_origin(d) for d in range(3, 11)]
    ok_dec = all(a > b for a, b in zip(origins, origins[1:]))

    ok_identity = True
    for d in (3, 4, 5):
        T = default_table(d)
        e1 = (1,) + (0,) * (d - 1)
        ok_identity &= abs(T((0,) * d) - T(e1) - 1.0) < 1e-7

    # 500 random pairs with x >= y componentwise in |.| must give
    # G(x) <= G(y).
    rng = np.random.default_rng(2026)
    ok_mono = True
    for _ in range(500):
        y = rng.integers(-20, 21, 5)
        x = np.sign(np.where(y == 0, 1, y)) * (np.abs(y) + rng.integers(0, 4, 5))
        gx = G5(tuple(int(v) for v in x))
        gy = G5(tuple(int(v) for v in y))
        if gx > gy + 1e-15:
            ok_mono = False
            break

    elapsed = time.monotonic() - t0
    ok = ok_origin and ok_return and ok_dec and ok_identity and ok_mono
    ok_time = elapsed < 60
    _report(acceptance, 1,
            ok and ok_time,
            f"G5(o)={g5:.6f}, return={1 - 1/g5:.4f}, nonincreasing={ok_dec}, "
            f"identity={ok_identity}, 500-pair monotone={ok_mono}, "
            f"{elapsed:.0f}s (<60s: {ok_time})")


# ---------------------------------------------------------------------------
# 2. Solver-vs-MC equivalence


def _merged_transport_counts(U, x, total_hits, seed):
    """mc_transport batches merged into raw hit counts until the target
    number of conditioned hits is reached."""
    G = default_table(dimension(U))
    p_hit = transport_distribution(U, x, G).hit_probability
    counts: dict = {}
    hits = 0
    while hits < total_hits:
        need = total_hits - hits
        # size for the expected hit count plus a 4-sigma margin
        walks = int(need / p_hit
                    + 4.0 * math.sqrt(need * (1.0 - p_hit)) / p_hit) + 1
        walks = min(walks, 2_500_000)  # cap batch memory
        est = mc_transport(U, x, WalkBudget(walks, escape_radius=25.0,
                                            seed=seed))
        n_hit = next(iter(est.values())).samples_used
        for site, e in est.items():
            counts[site] = counts.get(site, 0) + int(round(e.value * n_hit))
        hits += n_hit
        seed += 1
    return counts, hits


def test_criterion_2_solver_vs_mc(acceptance, G5):
    # warm the JIT kernels outside the measured window
    warm = _random_connected_config(np.random.default_rng(0), 3)
    mc_escape(warm, (0,) * 5, WalkBudget(1000, escape_radius=1000.0, seed=0))
    mc_transport(warm, (0,) * 5, WalkBudget(1000, escape_radius=25.0, seed=0))
    t0 = time.monotonic()
    rng = np.random.default_rng(777)
    ok_hm = True
    ok_tv = True
    worst_hm = 0.0
    worst_tv = 0.0
    for k in range(20):
        n = int(rng.integers(3, 7))
        U = _random_connected_config(rng, n)
        prof = escape_vector(U, G5)

        # harmonic measure at a random site, MC escape / exact capacity
        x = sorted(U)[int(rng.integers(len(U)))]
        est = mc_escape(U, x, WalkBudget(1_000_000, escape_radius=1000.0,
                                         seed=int(rng.integers(2**31)) + k))
        tol = (3.0 * est.std_error + est.truncation_bias_bound) / prof.cap
        gap = abs(prof.hm[x] - est.value / prof.cap)
        worst_hm = max(worst_hm, gap - tol)
        if gap > tol:
            ok_hm = False

        # transport TV at the site with the largest exact hit probability
        src = max(U, key=lambda s: transport_distribution(U, s, G5)
                  .hit_probability)
        td = transport_distribution(U, src, G5)
        counts, hits = _merged_transport_counts(
            U, src, 1_000_000, seed=int(rng.integers(2**31)))
        exact = dict(td.weights)
        support = set(exact) | set(counts)
        tv = 0.5 * sum(abs(exact.get(s, 0.0) - counts.get(s, 0) / hits)
                       for s in support)
        worst_tv = max(worst_tv, tv)
        if tv >= 0.01 or hits < 1_000_000:
            ok_tv = False
    elapsed = time.monotonic() - t0
    ok_time = elapsed < 600
    _report(acceptance, 2,
            ok_hm and ok_tv and ok_time,
            f"20 configs: hm within 3se+trunc ({ok_hm}, worst margin "
            f"{worst_hm:+.2e}), transport TV<0.01 at >=1e6 hits ({ok_tv}, "
            f"worst {worst_tv:.4f}), {elapsed:.0f}s (<600s: {ok_time})")


# ---------------------------------------------------------------------------
# 3. Harmonic measure lower bound


def test_criterion_3_min_hm(acceptance, G5):
    t0 = time.monotonic()
    ok = True
    worst = 1.0
    for sizes in ((2, 2), (2, 3)):
        for a in (50, 100, 200):
            C = _dot_pair(5, a, sizes)
            hm = escape_vector(pi(C), G5).hm
            small = min(len(b) for b in C)
            vals = [hm[x] for b in C if len(b) == small for x in sorted(b)]
            worst = min(worst, min(vals))
            if min(vals) < 0.125:
                ok = False
    elapsed = time.monotonic() - t0
    ok_time = elapsed < 60
    _report(acceptance, 3, ok and ok_time,
            f"small-cluster hm >= 0.125 at seps {{50,100,200}} "
            f"(worst {worst:.4f}), {elapsed:.0f}s (<60s: {ok_time})")


# ---------------------------------------------------------------------------
# 4. HAT/IHAT one-step agreement


def test_criterion_4_p_vs_q(acceptance, G5):
    t0 = time.monotonic()
    maxes = {}
    min_def = math.inf
    for a in (50, 100, 200):
        recs = intracluster_deficits(_dot_pair(5, a, (2, 2)), G5)
        deficits = [r[5] for r in recs]
        min_def = min(min_def, min(deficits))
        maxes[a] = max(deficits)
    ok_sign = min_def >= -1e-10
    ok_mono = maxes[50] > maxes[100] > maxes[200]
    bound = 2.0 ** (2.2 - 5) * 1.5
    r1 = maxes[100] / maxes[50]
    r2 = maxes[200] / maxes[100]
    ok_ratio = r1 <= bound and r2 <= bound
    elapsed = time.monotonic() - t0
    ok_time = elapsed < 300
    _report(acceptance, 4,
            ok_sign and ok_mono and ok_ratio and ok_time,
            f"min deficit {min_def:.1e} >= -1e-10: {ok_sign}, monotone: "
            f"{ok_mono}, ratios {r1:.3f},{r2:.3f} <= {bound:.3f}: {ok_ratio}, "
            f"{elapsed:.0f}s (<300s: {ok_time})")


# ---------------------------------------------------------------------------
# 5. xi-tail


@pytest.fixture(scope="session")
def xi_tail_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("xi_tail")
    t0 = time.monotonic()
    cfg = ExperimentConfig(
        name="xi_tail", out_dir=str(out), dim=5, engine="ihat",
        trials=10_000, seed=404,
        init={"generator": "dot_pair", "a": 50},
        params={"cap": 1000, "fit_burn_in": 2})
    run_dir = run_xi_tail(cfg)
    return run_dir, time.monotonic() - t0


def test_criterion_5_xi_tail(acceptance, xi_tail_run):
    run_dir, elapsed = xi_tail_run
    prov = json.loads((run_dir / "provenance.json").read_text())
    stats = prov["statistics"]
    rate, r2 = stats["rate"], stats["r_squared"]
    ok = rate > 0 and r2 > 0.9
    ok_time = elapsed < 300
    _report(acceptance, 5, ok and ok_time,
            f"1e4 xi_1 samples: fitted rate {rate:.3f} > 0, "
            f"R^2 {r2:.4f} > 0.9, {elapsed:.0f}s (<300s: {ok_time})")


# ---------------------------------------------------------------------------
# 6. Separation growth


@pytest.fixture(scope="session")
def separation_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("sep_growth")
    t0 = time.monotonic()
    cfg = ExperimentConfig(
        name="separation_growth", out_dir=str(out), dim=5, n=4,
        engine="hat", steps=10_000, trials=200, seed=606,
        init={"generator": "dot_pair", "a": 100},
        params={"log_every": 25})
    run_dir = run_separation_growth(cfg)
    return run_dir, time.monotonic() - t0


def test_criterion_6_separation_growth(acceptance, separation_run):
    run_dir, elapsed = separation_run
    prov = json.loads((run_dir / "provenance.json").read_text())
    stats = prov["statistics"]
    frac = stats["survival_fraction"]
    expo = stats["growth_exponent"]
    ok_surv = frac >= 0.5
    ok_expo = 0.35 <= expo <= 0.65
    ok_time = elapsed < 1800
    _report(acceptance, 6, ok_surv and ok_expo and ok_time,
            f"200x1e4 exact HAT: survival {frac:.2f} >= 0.5, growth "
            f"exponent {expo:.3f} in [0.35,0.65], {elapsed:.0f}s "
            f"(<1800s: {ok_time})")


# ---------------------------------------------------------------------------
# 7. Formation pipeline


def test_criterion_7_formation_pipeline(acceptance, G5):
    t0 = time.monotonic()
    rng = np.random.default_rng(1717)
    a, d = 16, 5
    ok = True
    detail = ""
    for k in range(50):
        n = int(rng.choice([4, 5, 6]))
        U = _random_config(rng, n, box=12)
        while diam(U) > 30:
            U = _random_config(rng, n, box=12)
        s1 = algorithm_a1(U, a, G5)
        C1 = s1.final_clustering
        r = d * n * n * a
        if not (can_be_lined_up(C1, r) and sep(C1) >= 2 * r):
            ok, detail = False, f"input {k}: A1 not lined-up-able at sep"
            break
        s2 = algorithm_a2(C1)
        expected = tuple(as_config(segment(lex(b), len(b))) for b in C1)
        if s2.final_clustering != expected:
            ok, detail = False, f"input {k}: A2 != lined-up clustering"
            break
        s3 = algorithm_a3(s2.final_clustering, a)
        C3 = s3.final_clustering
        if not (is_dot(C3, DotParams(a, 2.0 / math.log(a)))
                and is_dot(C3, DotParams(a, 1.0))):
            ok, detail = False, f"input {k}: A3 output not a DOT"
            break
        for script in (s1, s2, s3):
            # rep.ok requires every move to carry positive exact activation
            # and transport probability; a no-op script has log-prob 0.
            rep = verify_script(script, G5)
            if not (rep.ok and math.isfinite(rep.log_probability)
                    and rep.log_probability <= 0.0):
                ok, detail = False, f"input {k}: illegal move in script"
                break
        if not ok:
            break
    elapsed = time.monotonic() - t0
    ok_time = elapsed < 600
    _report(acceptance, 7, ok and ok_time,
            f"50 inputs n in {{4,5,6}}: A1 sep>=2dn^2a, A2 exact, A3 DOT, "
            f"all moves legal ({ok}{', ' + detail if detail else ''}), "
            f"{elapsed:.0f}s (<600s: {ok_time})")


# ---------------------------------------------------------------------------
# 8. Dynamics invariants


def test_criterion_8_dynamics_invariants(acceptance, G5):
    t0 = time.monotonic()
    steps = 100_000
    C = _dot_pair(5, 100, (2, 2))
    state = HatState(config=pi(C))
    rng = np.random.default_rng(88)
    n0 = len(state.config)
    traj = [C]
    ok_n = ok_pi = ok_pair = True
    for _ in range(steps):
        new, _mv = hat_step(state, G5, rng)
        C = natural_clustering_update(C, state.config, new.config)
        state = new
        traj.append(C)
        if len(state.config) != n0:
            ok_n = False
            break
        if pi(C) != state.config:
            ok_pi = False
            break
        if len(C) >= 2:
            if not (check_sep_to_dist(C, (0, 1))
                    and check_dist_below_cm(C, (0, 1))):
                ok_pair = False
                break
    # center-of-mass drift bound between consecutive reference times
    refs = [t for t, Ct in enumerate(traj)
            if len(Ct) >= 2 and is_reference(Ct[0]) and is_reference(Ct[1])]
    ok_amlg = all(check_amlg(traj, (0, 1), m0, m1)
                  for m0, m1 in zip(refs, refs[1:]))
    elapsed = time.monotonic() - t0
    ok_time = elapsed < 600
    ok = ok_n and ok_pi and ok_pair and ok_amlg
    _report(acceptance, 8, ok and ok_time,
            f"1e5 exact HAT steps: n conserved {ok_n}, pi(C_t)=U_t {ok_pi}, "
            f"sep/dist/cm bounds {ok_pair}, amlg over {len(refs)} reference "
            f"times {ok_amlg}, {elapsed:.0f}s (<600s: {ok_time})")


# ---------------------------------------------------------------------------
# 9. d=2 collapse


def test_criterion_9_collapse_2d(acceptance, tmp_path):
    t0 = time.monotonic()
    cfg = ExperimentConfig(
        name="collapse_2d", out_dir=str(tmp_path), dim=2, n=4,
        engine="hat", steps=5000, trials=50, seed=909,
        init={"generator": "two_dimers_2d", "distance": 64},
        params={"radius_factor": 16.0, "threshold": 32.0, "log_every": 50})
    run_dir = run_collapse_2d(cfg)
    prov = json.loads((run_dir / "provenance.json").read_text())
    med = prov["statistics"]["median_final_diameter"]
    elapsed = time.monotonic() - t0
    ok = med < 32.0
    ok_time = elapsed < 900
    _report(acceptance, 9, ok and ok_time,
            f"50 MC-HAT trials, t=5000: median diameter {med:.1f} < 32, "
            f"{elapsed:.0f}s (<900s: {ok_time})")


# ---------------------------------------------------------------------------
# 10. Plots (secondary)


def _run_plot(spec, tmp_path, name):
    spec_file = tmp_path / name
    spec_file.write_text(json.dumps(spec))
    return subprocess.run(
        [sys.executable, str(PLOT_SCRIPT), "--spec", str(spec_file)],
        capture_output=True, text=True)


def test_criterion_10_plots(acceptance, xi_tail_run, separation_run,
                            tmp_path):
    xi_dir, _ = xi_tail_run
    sep_dir, _ = separation_run

    # deterministic rendering of the survival and separation figures
    hashes = {}
    for tag in ("a", "b"):
        specs = [
            {"input": str(xi_dir / "summary.csv"), "kind": "xi_tail",
             "output": str(tmp_path / f"xi_{tag}.png"),
             "provenance": str(xi_dir / "provenance.json")},
            {"input": str(sep_dir / "median_separation.csv"),
             "kind": "separation",
             "output": str(tmp_path / f"sep_{tag}.png")},
        ]
        res = _run_plot(specs, tmp_path, f"spec_{tag}.json")
        assert res.returncode == 0, res.stderr
        for kind in ("xi", "sep"):
            img = (tmp_path / f"{kind}_{tag}.png").read_bytes()
            hashes.setdefault(kind, set()).add(
                hashlib.sha256(img).hexdigest())
    deterministic = all(len(v) == 1 for v in hashes.values())

    # schema mismatch: separation CSV fed to the xi-tail kind
    res = _run_plot(
        {"input": str(sep_dir / "median_separation.csv"),
         "kind": "xi_tail", "output": str(tmp_path / "bad.png")},
        tmp_path, "bad_spec.json")
    schema_rejected = res.returncode == 1 and "schema mismatch" in res.stderr

    # missing column is reported by name
    csv_in = (xi_dir / "summary.csv").read_text().splitlines()
    csv_in[2] = csv_in[2].replace("survival", "lifetime")
    broken = tmp_path / "broken.csv"
    broken.write_text("\n".join(csv_in) + "\n")
    res = _run_plot(
        {"input": str(broken), "kind": "xi_tail",
         "output": str(tmp_path / "bad2.png")},
        tmp_path, "bad_spec2.json")
    column_named = res.returncode == 1 and "'survival' not found" in res.stderr

    ok = deterministic and schema_rejected and column_named
    _report(acceptance, 10, ok,
            f"figures deterministic {deterministic}, schema mismatch "
            f"rejected {schema_rejected}, missing column named "
            f"{column_named}")
