"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v``; the lines are also
collected into the terminal summary. Tolerances are the stated ones; a
criterion that fails is reported as failing, not relaxed.
"""
from __future__ import annotations

import math
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats as sps

from _acceptance_log import record
from flatwalk.dual_graph import build_dual, classify_transience, estimate_return, shell_resistance
from flatwalk.ensemble import Ensemble
from flatwalk.generate import book, fan, home_point, line, plane, rhombus, rings_for_radius, torus, tree
from flatwalk.geodesic_flow import cross_face, flow, hit_angle, phase_point, reverse_hit, sample_liouville
from flatwalk.scaling import estimate_fdd, tightness_samples
from flatwalk.stats import ks_2samp_distance, ks_distance, stream
from flatwalk.transport import BallIndicator, Constant, markov_samples, resolvent_series_check

import oracles

SEED = 20240611


def _spine_midpoint(c):
    return c.point_on([0, 1], [0.5, 0.5])


# 1 ------------------------------------------------------------------------

def test_criterion_1_flat_transparency():
    c = rhombus(40.0)
    rng = stream(SEED, "misc", 1)
    tab = c.tables()
    worst = 0.0
    n_events = 0
    for _ in range(1000):
        j = int(rng.integers(2))
        u, w = rng.uniform(0.0, 0.02, 2)
        bary = np.array([0.5 - u, 0.5 - w, u + w])
        x = bary @ tab.verts[j]
        phi = rng.uniform(0.0, 2.0 * math.pi)
        p = phase_point(c, j, x, np.array([math.cos(phi), math.sin(phi)]))
        p0 = c.embed(np.array([j]), x[None])[0]
        v_emb = c.embed(np.array([j]), (x + p.dir)[None])[0] - p0
        _, events = flow(c, p, 10.0, rng)
        assert events and events[-1].kind == "segment"
        for ev in events:
            z = ev.data
            pos = c.embed(np.array([z.carrier]), z.chart(c)[None])[0]
            worst = max(worst, float(np.linalg.norm(pos - (p0 + ev.time * v_emb))))
            n_events += 1
    ok = worst < 1e-9
    record(1, ok, f"max deviation {worst:.2e} over {n_events} events of 1000 flows (tol 1e-9)")
    assert ok


# 2 ------------------------------------------------------------------------

def _liouville_angles(c, spine, n, rng, cross):
    cof = c.cofaces[1][spine]
    out = np.empty(n)
    for k in range(n):
        side = cof[int(rng.integers(len(cof)))]
        p = sample_liouville(c, spine, side, rng)
        if cross:
            p = cross_face(reverse_hit(c, p, spine), c, rng)
        out[k] = hit_angle(c, p, spine)
    return out


def test_criterion_2_liouville_invariance():
    c = fan(3)
    spine = c.index[1][(0, 1)]
    n = 100_000
    pre = _liouville_angles(c, spine, n, stream(SEED, "misc", 2), cross=False)
    post = _liouville_angles(c, spine, n, stream(SEED, "misc", 3), cross=True)
    d = ks_2samp_distance(pre, post)
    ok = d < 0.015
    record(2, ok, f"two-sample KS {d:.4f} pre vs post crossing, N=1e5 on fan_3 (tol 0.015)")
    assert ok


# 3 ------------------------------------------------------------------------

def test_criterion_3_clock_law():
    c = torus(3)
    ens = Ensemble.from_point(c, c.centroid(0), 1000, stream(SEED, "misc", 4))
    ens.record_increments()
    ens.advance(120.0)
    inc = np.concatenate(ens.increments)[:100_000]
    assert inc.size == 100_000
    d = ks_distance(inc, oracles.exp1_cdf)
    mean = float(inc.mean())
    ok = d < 0.01 and 0.99 <= mean <= 1.01
    record(3, ok, f"Exp(1) KS {d:.4f} (tol 0.01), mean {mean:.4f} (in [0.99, 1.01]), N=1e5")
    assert ok


# 4 ------------------------------------------------------------------------

def test_criterion_4_resolvent_series():
    c = fan(3)
    f = BallIndicator(c, c.centroid(0), 0.25)
    r = resolvent_series_check(c, f, _spine_midpoint(c), 1.0, 12, 100_000, SEED)
    tail = 2.0**-13
    ball_ok = abs(r["tail_bound"] - tail) < 1e-18 and r["diff"] <= tail + 3 * r["combined_se"]
    # f = 1 on the boundaryless flat torus: no absorption, both sides are exact
    t = torus(3)
    r1 = resolvent_series_check(t, Constant(1.0), t.centroid(0), 1.0, 12, 20_000, SEED)
    exact = 1.0 - 2.0**-13
    one_ok = (
        r1["lhs"].value == 1.0
        and abs(r1["rhs_partial"].value - exact) < 1e-12
        and abs(r1["lhs"].value - r1["rhs_partial"].value) <= r1["tail_bound"] + 1e-15
    )
    ok = ball_ok and one_ok
    record(
        4,
        ok,
        f"ball: |{r['lhs'].value:.5f} - {r['rhs_partial'].value:.5f}| = {r['diff']:.5f} <= "
        f"{tail:.5f} + 3*{r['combined_se']:.5f}; f=1: lhs {r1['lhs'].value!r} rhs {r1['rhs_partial'].value!r}",
    )
    assert ok


# 5 ------------------------------------------------------------------------

def _distance_stat(x0):
    def stat(ens):
        c = ens.c
        d = np.full(len(ens), np.inf)
        live = np.flatnonzero(ens.alive)
        tab = c.tables()
        xs = np.asarray(x0.bary) @ tab.verts[x0.carrier]
        d[live] = c.distance(np.full(live.size, x0.carrier), np.repeat(xs[None], live.size, 0), ens.sim[live], ens.x[live])
        return d

    return stat


def test_criterion_5_markov_consistency():
    c = fan(3)
    x0 = _spine_midpoint(c)
    stat = _distance_stat(x0)
    direct, composed = markov_samples(c, x0, 0.5, 0.5, 100_000, SEED, stat, restart="position")
    d = ks_2samp_distance(direct, composed)
    a2, b2 = markov_samples(c, x0, 0.5, 0.5, 100_000, SEED, stat, restart="phase")
    d_phase = ks_2samp_distance(a2, b2)
    ok = d < 0.015
    record(
        5,
        ok,
        f"restart from the position Y_t: KS {d:.4f} (tol 0.015); "
        f"diagnostic restart from the phase point (Y_t, direction): KS {d_phase:.4f}",
    )
    assert ok


# 6 ------------------------------------------------------------------------

def test_criterion_6_flat_diffusive_limit():
    out = {}
    for eta in (0.1, 0.05):
        c = plane(rings_for_radius(1.0 / eta))
        x0 = home_point(c)
        fdd = estimate_fdd(c, x0, eta, [1.0], 100_000, SEED)
        assert fdd.alive.all()
        xy = fdd.embedded(c)[:, 0] - np.asarray(c.meta["coords"][c.meta["root"]])
        out[eta] = (xy.var(axis=0, ddof=1), sps.kurtosis(xy, axis=0, fisher=False))
    oracle = oracles.planar_random_flight(1.0, 0.05, 100_000, stream(SEED, "misc", 6))
    v10, v05, k05 = out[0.1][0], out[0.05][0], out[0.05][1]
    ok = (
        np.all(np.abs(v10 - 1.0) <= 0.05)
        and np.all(np.abs(v05 - 1.0) <= 0.03)
        and np.all(np.abs(k05 - 3.0) < 0.15)
    )
    record(
        6,
        ok,
        f"var eta=0.1 {np.round(v10, 4).tolist()} (1 +- 5%), eta=0.05 {np.round(v05, 4).tolist()} (1 +- 3%), "
        f"kurtosis eta=0.05 {np.round(k05, 4).tolist()} (3 +- 0.15); oracle var {np.round(oracle.var(axis=0), 4).tolist()}",
    )
    assert ok


# 7 ------------------------------------------------------------------------

def test_criterion_7_tightness_trend():
    pairs = [(0.4, 0.1), (0.2, 0.05), (0.1, 0.01)]
    c = plane(rings_for_radius(1.0 / 0.1))
    x0 = home_point(c)
    samples = [tightness_samples(c, x0, eta, 1.0, w, 10_000, SEED + i) for i, (eta, w) in enumerate(pairs)]
    probs = [float(np.mean(s > 0.5)) for s in samples]
    ok = probs[0] > probs[1] > probs[2]
    record(
        7,
        ok,
        f"P(stat > 0.5) along (eta, c) = {pairs}: {probs} (must strictly decrease; stat <= c/eta = "
        f"{[round(w / e, 4) for e, w in pairs]}); diagnostic mean statistic {[round(float(s.mean()), 4) for s in samples]}",
    )
    assert ok


# 8 ------------------------------------------------------------------------

def test_criterion_8_finite_speed_support():
    times = [0.1, 0.25, 0.5, 1.0]
    worst = -np.inf
    runs = []
    for name, c, eta in (
        ("plane", plane(rings_for_radius(1.0 / 0.1)), 0.1),
        ("book_3", book(3, rings_for_radius(1.0 / 0.2)), 0.2),
        ("fan_3", fan(3), 0.5),
    ):
        x0 = home_point(c) if "root" in c.meta else _spine_midpoint(c)
        fdd = estimate_fdd(c, x0, eta, times, 20_000, SEED)
        d = fdd.distance_from_start(c)
        live = np.isfinite(d)
        excess = np.where(live, d - np.asarray(times)[None] / eta, -np.inf)
        worst = max(worst, float(excess.max()))
        runs.append(name)
    # exact up to floating-point roundoff in the distance evaluation
    ok = worst <= 1e-9
    record(8, ok, f"max over runs {runs} of d(x0, Y_t) - t/eta = {worst:.3e} (must be <= 1e-9 roundoff slack)")
    assert ok


# 9 ------------------------------------------------------------------------

def test_criterion_9_transience_suite():
    checks = {}
    checks["classify(book_3)=transient"] = classify_transience(book(3, 8))["verdict"] == "transient"
    checks["classify(tree_3)=transient"] = classify_transience(tree(3, 8))["verdict"] == "transient"
    t = tree(3, 16)
    w = estimate_return(build_dual(t), t.index[0][(0,)], 10_000, 10_000, SEED)
    p_tree = w.return_probability.value
    checks["tree return 0.5+-0.02"] = abs(p_tree - oracles.tree_first_return(3)) <= 0.02
    rows = shell_resistance(build_dual(tree(3, 13)), 0, 12)
    ratios = [rows[i + 1]["increment"] / rows[i]["increment"] for i in range(len(rows) - 1)]
    checks["R_eff increment ratio 0.5+-0.05"] = all(abs(r - 0.5) <= 0.05 for r in ratios)
    ln = line(10_000)
    wl = estimate_return(build_dual(ln), ln.index[0][(ln.meta["root"],)], 10_000, 10_000, SEED)
    checks["line return >= 0.95"] = wl.return_probability.value >= 0.95
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    record(
        9,
        ok,
        f"tree return {p_tree:.4f}, ratios in [{min(ratios):.4f}, {max(ratios):.4f}], line return "
        f"{wl.return_probability.value:.4f}; failed sub-checks: {failed or 'none'}",
    )
    assert ok


# 10 -----------------------------------------------------------------------

CLI_RUNS = [
    ["validate", "--generate", "fan:3"],
    ["cat0", "--generate", "cone:7"],
    ["simulate", "--generate", "plane:auto", "--eta", "0.1", "--t", "1", "--paths", "1000", "--seed", "7"],
    ["fdd", "--generate", "plane:auto", "--eta", "0.2", "--times", "0.5,1", "--paths", "3000", "--seed", "3"],
    ["sweep", "--generate", "plane:auto", "--etas", "0.4,0.2", "--paths", "3000", "--seed", "3"],
    ["tightness", "--generate", "plane:auto", "--eta", "0.2", "--window", "0.05", "--paths", "1000"],
    ["resolvent", "--generate", "fan:3", "--start", "0,1", "--paths", "20000", "--seed", "5"],
    ["dual", "--generate", "fan:3"],
    ["walk", "--generate", "tree:3:10", "--walks", "2000", "--seed", "11"],
    ["resistance", "--generate", "tree:3:10", "--radius", "8"],
    ["classify", "--generate", "tree:3:8"],
]


def test_criterion_10_determinism(tmp_path):
    mismatched = []
    for k, args in enumerate(CLI_RUNS):
        blobs = []
        for rep in range(2):
            out = tmp_path / f"run{k}_{rep}"
            proc = subprocess.run(
                [sys.executable, "-m", "flatwalk.cli", *args, "--out", str(out)], capture_output=True, text=True
            )
            assert proc.returncode == 0, proc.stderr
            blobs.append(out.read_bytes())
        if blobs[0] != blobs[1]:
            mismatched.append(args[0])
    ok = not mismatched
    record(10, ok, f"{len(CLI_RUNS)} commands rerun with the same seed; differing outputs: {mismatched or 'none'}")
    assert ok
