import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flatwalk.ensemble import Ensemble
from flatwalk.generate import fan, home_point, plane, rhombus, rings_for_radius, torus
from flatwalk.geodesic_flow import PhasePoint
from flatwalk.stats import Estimate, ks_distance, stream
from flatwalk.transport import (
    BallIndicator,
    Constant,
    DirectionDot,
    DirectionDotSquared,
    eval_P,
    eval_resolvent,
    eval_Tt,
    events_from_csv,
    events_to_csv,
    estimate_report,
    resolvent_markov_check,
    markov_samples,
    resolvent_series_check,
    sample_renewal,
    simulate_path,
)


def spine_mid(c):
    return c.point_on([0, 1], [0.5, 0.5])


# -- renewals ---------------------------------------------------------------

def test_sample_renewal_laws():
    c = torus(3)
    z = PhasePoint(0, np.full(3, 1 / 3), np.array([1.0, 0.0]))
    rng = np.random.default_rng(0)
    n = 100_000
    inc = np.empty(n)
    ang = np.empty(n)
    for i in range(n):
        z2, t2 = sample_renewal(c, z, 0.0, rng)
        inc[i] = t2
        ang[i] = math.atan2(z2.dir[1], z2.dir[0]) % (2 * math.pi)
    assert 0.99 <= inc.mean() <= 1.01
    assert ks_distance(ang, lambda a: a / (2 * math.pi)) < 0.01
    assert abs(np.corrcoef(inc, ang)[0, 1]) < 3 / math.sqrt(n)
    assert inc.min() > 0


def test_renewal_count_is_poisson():
    c = torus(3)
    N, T = 10_000, 20.0
    ens = Ensemble.from_point(c, c.centroid(0), N, stream(1, "misc"))
    ens.advance(T)
    assert abs(ens.n_renewals.mean() - T) < 3 * math.sqrt(T) / math.sqrt(N)


# -- paths ------------------------------------------------------------------

def test_zero_horizon_path():
    c = fan(3)
    p = simulate_path(c, spine_mid(c), 0.0, np.random.default_rng(0))
    assert len(p.states) == 1 and p.events == [] and not p.cemetery


def test_rhombus_path_length_and_continuity():
    c = rhombus(40.0)
    x0 = c.point_on([0, 1], [0.5, 0.5])
    for seed in range(20):
        p = simulate_path(c, x0, 10.0, np.random.default_rng(seed))
        assert not p.cemetery
        assert p.events[-1].time == pytest.approx(10.0, abs=1e-12)
        taus = [s.tau for s in p.states]
        assert taus[0] == 0.0 and all(b > a for a, b in zip(taus, taus[1:]))
        # the flow endpoint at each renewal is the renewed state's position
        for s in p.states[1:]:
            before = [e for e in p.events if e.time <= s.tau]
            last = before[-1].data
            assert last.carrier == s.z.carrier
            assert np.allclose(last.bary, s.z.bary, atol=1e-12)


def test_path_at_queries_and_cemetery():
    c = fan(3)
    rng = np.random.default_rng(4)
    dead = [p for p in (simulate_path(c, spine_mid(c), 5.0, rng) for _ in range(50)) if p.cemetery]
    assert dead
    p = dead[0]
    assert p.at(c, p.death_time() + 1e-9) is None
    assert p.at(c, 5.0) is None


def test_simulate_path_deterministic():
    c = fan(3)
    a = simulate_path(c, spine_mid(c), 3.0, stream(9, "path", 0))
    b = simulate_path(c, spine_mid(c), 3.0, stream(9, "path", 0))
    assert events_to_csv([a], 2) == events_to_csv([b], 2)


def test_event_log_roundtrip():
    c = fan(3)
    paths = [simulate_path(c, spine_mid(c), 2.0, stream(3, "path", i)) for i in range(5)]
    text = events_to_csv(paths, 2)
    rows = events_from_csv(text)
    assert len(rows) == text.count("\n") - 1
    assert {r["kind"] for r in rows} <= {"renewal", "segment", "crossing", "skeleton_hit", "absorbed"}
    for r in rows:
        assert sum(r["bary"]) == pytest.approx(1.0, abs=1e-12)
    assert events_to_csv(paths, 2) == text


# -- operators --------------------------------------------------------------

def test_eval_P_examples():
    c = torus(3)
    x = c.centroid(0)
    assert eval_P(c, Constant(2.5), x, 1000, 0).value == pytest.approx(2.5)
    e = np.array([0.6, 0.8])
    est = eval_P(c, DirectionDot(e), x, 100_000, 1)
    assert est.within(0.0)
    est = eval_P(c, DirectionDotSquared(e), x, 100_000, 2)
    assert est.within(0.5)


def test_eval_Tt_conservative_and_identity():
    c = torus(3)
    x = c.centroid(1)
    assert eval_Tt(c, Constant(1.0), x, 3.0, 5000, 0).value == 1.0
    f = fan(3)
    y = spine_mid(f)
    ball = BallIndicator(f, y, 0.1)
    assert eval_Tt(f, ball, y, 0.0, 1000, 0).value == 1.0
    far = BallIndicator(f, f.centroid(0), 0.01)
    assert eval_Tt(f, far, y, 0.0, 1000, 0, variant="T0").value == 0.0
    with pytest.raises(ValueError):
        eval_Tt(c, ball, x, 1.0, 10, 0, variant="X")


def test_threads_do_not_change_results():
    c = fan(3)
    f = BallIndicator(c, c.centroid(0), 0.3)
    a = eval_Tt(c, f, spine_mid(c), 0.7, 70_000, 5, threads=1)
    b = eval_Tt(c, f, spine_mid(c), 0.7, 70_000, 5, threads=3)
    assert a == b


def test_resolvent_examples():
    t = torus(3)
    for lam in (0.5, 2.0):
        est = eval_resolvent(t, Constant(1.0), t.centroid(0), lam, 2000, 0)
        assert est.value == pytest.approx(1 / lam)
    c = fan(3)
    f = BallIndicator(c, c.centroid(0), 0.25)
    est = eval_resolvent(c, f, spine_mid(c), 1.0, 20_000, 1)
    assert 0.0 <= est.value <= 1.0 + 3 * est.std_error
    r0 = eval_resolvent(c, f, spine_mid(c), 2.0, 20_000, 2, variant="R0")
    assert r0.value <= 1 / 2.0 + 3 * r0.std_error


def test_series_f_one_exact():
    t = torus(3)
    r = resolvent_series_check(t, Constant(1.0), t.centroid(0), 1.0, 5, 1000, 0)
    assert r["lhs"].value == 1.0
    assert r["rhs_partial"].value == pytest.approx(1 - 2.0**-6, abs=1e-14)
    assert r["tail_bound"] == pytest.approx(2.0**-6)
    assert r["pass"]


def test_series_large_lambda():
    c = fan(3)
    f = BallIndicator(c, c.centroid(0), 0.25)
    r = resolvent_series_check(c, f, spine_mid(c), 50.0, 2, 50_000, 3)
    assert r["tail_bound"] < 1e-4
    assert r["pass"]


# -- Markov statistics ------------------------------------------------------

def _ball_stat(c):
    f = BallIndicator(c, c.centroid(0), 0.25)

    def stat(ens):
        out = np.zeros(len(ens))
        live = ens.alive
        out[live] = f(c, ens.sim[live], ens.x[live])
        return out

    return stat


def _semigroup_gap(restart):
    c = fan(3)
    a, b = markov_samples(c, spine_mid(c), 0.5, 0.5, 100_000, 17, _ball_stat(c), restart=restart)
    ea, eb = Estimate.from_samples(a), Estimate.from_samples(b)
    return abs(ea.value - eb.value), math.hypot(ea.std_error, eb.std_error)


def test_semigroup_phase_restart():
    gap, se = _semigroup_gap("phase")
    assert gap <= 3 * se


@pytest.mark.xfail(strict=True, reason="the position of Y alone is not Markov: restarting from the position discards the direction")
def test_semigroup_position_restart():
    gap, se = _semigroup_gap("position")
    assert gap <= 3 * se


@pytest.mark.xfail(strict=True, reason="resolvent field on positions ignores the direction carried by Y_t (same cause as above)")
def test_resolvent_markov_statistic():
    c = fan(3)
    f = BallIndicator(c, c.centroid(0), 0.25)
    grid = [c.point(j, b) for j in range(3) for b in ([0.6, 0.2, 0.2], [0.2, 0.6, 0.2], [0.2, 0.2, 0.6], [1 / 3] * 3)]
    r = resolvent_markov_check(c, f, spine_mid(c), 1.0, 0.5, 100_000, 21, grid, 20_000)
    assert r["pass"]


# -- finite speed -----------------------------------------------------------

@settings(max_examples=10)
@given(st.floats(0.2, 1.0), st.integers(0, 1000))
def test_finite_speed_along_paths(speed, seed):
    c = plane(rings_for_radius(2.0 * speed))
    ens = Ensemble.from_point(c, home_point(c), 500, stream(seed, "misc"), speed=speed)
    prev = ens.embedded()
    for _ in range(4):
        ens.advance(0.5)
        cur = ens.embedded()
        assert np.all(np.linalg.norm(cur - prev, axis=1) <= speed * 0.5 + 1e-12)
        prev = cur


def test_estimate_report_schema():
    text = estimate_report(Estimate(0.5, 0.01, 100), 7, {"lam": 1.0})
    doc = json.loads(text)
    assert list(doc) == ["value", "std_error", "n_samples", "seed", "params"]
