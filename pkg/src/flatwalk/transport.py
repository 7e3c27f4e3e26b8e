"""Isotropic transport process: exponential renewals with uniform link
directions between straight geodesic runs, plus Monte Carlo estimators of
its operators (link average, semigroups, resolvents).

Absorbed trajectories sit in the cemetery and every test function is
extended by zero there.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .complex_core import Complex, Point
from .ensemble import Ensemble, draw_link
from .geodesic_flow import FlowEvent, PhasePoint, flow, sample_link_direction, uniform_direction
from .stats import Estimate, Moments, run_chunks

__all__ = [
    "ChainState",
    "PathSample",
    "Field",
    "Constant",
    "BallIndicator",
    "DirectionDot",
    "DirectionDotSquared",
    "sample_renewal",
    "simulate_path",
    "eval_P",
    "eval_Tt",
    "eval_resolvent",
    "resolvent_series_check",
    "markov_samples",
    "resolvent_markov_check",
    "estimate_report",
    "events_to_csv",
    "events_from_csv",
]


@dataclass
class ChainState:
    k: int
    z: PhasePoint
    tau: float


@dataclass
class PathSample:
    states: list[ChainState]
    events: list[FlowEvent]
    horizon: float
    cemetery: bool
    seed: int | None = None
    speed: float = 1.0
    time_scale: float = 1.0  # flow time per unit of observed time
    n_skeleton: int = 0
    _checkpoints: list = field(default_factory=list, repr=False)

    @property
    def n_renewals(self) -> int:
        return len(self.states) - 1

    def checkpoints(self) -> list[tuple[float, PhasePoint]]:
        """(flow time, phase point) at every renewal and every face event, sorted."""
        if not self._checkpoints:
            pts = [(s.tau, s.z) for s in self.states]
            pts += [(e.time, e.data) for e in self.events if e.kind in ("crossing", "skeleton_hit", "absorbed")]
            pts.sort(key=lambda p: p[0])
            self._checkpoints = pts
        return self._checkpoints

    def death_time(self) -> float:
        if not self.cemetery:
            return math.inf
        return next(e.time for e in self.events if e.kind == "absorbed")

    def at(self, c: Complex, t: float) -> PhasePoint | None:
        """Phase point at observed time t; None once the path is in the cemetery."""
        flow_t = t * self.time_scale
        if flow_t >= self.death_time():
            return None
        if t > self.horizon * (1 + 1e-12):
            raise ValueError("time beyond simulated horizon")
        cps = self.checkpoints()
        lo = 0
        for i, (tk, _) in enumerate(cps):
            if tk <= flow_t:
                lo = i
            else:
                break
        tk, z = cps[lo]
        tab = c.tables()
        x = z.bary @ tab.verts[z.carrier] + z.dir * (self.speed * (flow_t - tk))
        bary = tab.A[z.carrier] @ x + tab.b[z.carrier]
        bary = np.clip(bary, 0.0, None)
        return PhasePoint(z.carrier, bary / bary.sum(), z.dir.copy())


def sample_renewal(c: Complex, z: PhasePoint, t: float, rng: np.random.Generator) -> tuple[PhasePoint, float]:
    """Uniform new direction at the current point and the next renewal time."""
    v = uniform_direction(c.dimension, rng)
    return PhasePoint(z.carrier, z.bary.copy(), v), t + float(rng.exponential())


def simulate_path(
    c: Complex,
    x0: Point,
    horizon: float,
    rng: np.random.Generator,
    speed: float = 1.0,
    seed: int | None = None,
    include_incoming: bool = False,
    time_scale: float = 1.0,
) -> PathSample:
    """One trajectory observed for ``horizon`` time units.

    The underlying chain runs for ``horizon * time_scale`` units of flow time
    at the given geodesic speed; renewal clocks are Exp(1) in flow time.
    """
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    z = sample_link_direction(c, x0, rng)
    states = [ChainState(0, z, 0.0)]
    events: list[FlowEvent] = []
    meta = dict(seed=seed, speed=speed, time_scale=time_scale)
    if horizon == 0:
        return PathSample(states, events, 0.0, False, **meta)
    obs_horizon = horizon
    horizon = horizon * time_scale
    tau = 0.0
    nxt = tau + float(rng.exponential())
    skel = 0
    while True:
        stop = min(nxt, horizon)
        z, evs = flow(c, z, stop - tau, rng, speed=speed, start_time=tau, include_incoming=include_incoming)
        events.extend(evs)
        skel += sum(e.kind == "skeleton_hit" for e in evs)
        if evs and evs[-1].kind == "absorbed":
            return PathSample(states, events, obs_horizon, True, n_skeleton=skel, **meta)
        if nxt >= horizon:
            return PathSample(states, events, obs_horizon, False, n_skeleton=skel, **meta)
        tau = nxt
        z, nxt = sample_renewal(c, z, tau, rng)
        states.append(ChainState(len(states), z, tau))


# -- test functions ---------------------------------------------------------

class Field:
    """Vectorised function of (carrier, chart position, direction)."""

    sup: float = 1.0

    def __call__(self, c: Complex, sim: np.ndarray, x: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
        raise NotImplementedError


class Constant(Field):
    def __init__(self, value: float = 1.0):
        self.value = float(value)
        self.sup = abs(self.value)

    def __call__(self, c, sim, x, v=None):
        return np.full(len(sim), self.value)


class BallIndicator(Field):
    """Indicator of the closed metric ball B(center, radius)."""

    def __init__(self, c: Complex, center: Point, radius: float):
        tab = c.tables()
        self.carrier = center.carrier
        self.cx = np.asarray(center.bary) @ tab.verts[center.carrier]
        self.radius = float(radius)
        self.sup = 1.0

    def __call__(self, c, sim, x, v=None):
        d = c.distance(np.full(len(sim), self.carrier), np.repeat(self.cx[None], len(sim), axis=0), sim, x)
        return (d <= self.radius).astype(float)


class DirectionDot(Field):
    """v . e for a fixed chart vector e (meaningful within one carrier)."""

    def __init__(self, e):
        self.e = np.asarray(e, dtype=float)
        self.sup = float(np.linalg.norm(self.e))

    def __call__(self, c, sim, x, v=None):
        return v @ self.e


class DirectionDotSquared(DirectionDot):
    def __init__(self, e):
        super().__init__(e)
        self.sup = self.sup**2

    def __call__(self, c, sim, x, v=None):
        return (v @ self.e) ** 2


def _values(c: Complex, f: Field, ens: Ensemble) -> np.ndarray:
    out = np.zeros(len(ens))
    live = ens.alive
    if live.any():
        out[live] = f(c, ens.sim[live], ens.x[live], ens.v[live])
    return out


# -- estimators -------------------------------------------------------------

def eval_P(c: Complex, f: Field, x: Point, n_samples: int, seed: int, threads: int = 1) -> Estimate:
    """Average of f over uniform link directions at x."""

    def chunk(k, size, rng):
        sim, xs, v = draw_link(c, x, size, rng)
        return Moments.of(f(c, sim, xs, v))

    return Moments.reduce(run_chunks(chunk, n_samples, seed, "path", threads)).estimate()


def eval_Tt(
    c: Complex,
    f: Field,
    x: Point,
    t: float,
    n_samples: int,
    seed: int,
    variant: str = "T",
    speed: float = 1.0,
    threads: int = 1,
) -> Estimate:
    """E f(Y_t) (variant "T") or the pure-flow link average (variant "T0")."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    renew = _variant(variant, "T0", "T")

    def chunk(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng, speed=speed, renewals=renew)
        ens.advance(t)
        return Moments.of(_values(c, f, ens))

    return Moments.reduce(run_chunks(chunk, n_samples, seed, "path", threads)).estimate()


def _variant(variant: str, pure: str, full: str) -> bool:
    if variant == pure:
        return False
    if variant == full:
        return True
    raise ValueError(f"variant must be {pure!r} or {full!r}")


def eval_resolvent(
    c: Complex,
    f: Field,
    x: Point,
    lam: float,
    n_samples: int,
    seed: int,
    variant: str = "R",
    threads: int = 1,
    purpose: str = "path",
) -> Estimate:
    """int e^{-lam t} T_t f(x) dt as (1/lam) E f(Y_T) with T ~ Exp(lam)."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    renew = _variant(variant, "R0", "R")

    def chunk(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng, renewals=renew)
        ens.advance(rng.exponential(1.0 / lam, size=size))
        return Moments.of(_values(c, f, ens) / lam)

    return Moments.reduce(run_chunks(chunk, n_samples, seed, purpose, threads)).estimate()


def resolvent_series_check(
    c: Complex,
    f: Field,
    x: Point,
    lam: float,
    n_terms: int,
    n_samples: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Compare R_lam f(x) with the partial sum over n = 0..n_terms of the
    (n+1)-fold iterate of R0_{lam+1}, each iterate being one Exp(lam+1)
    geodesic run after a fresh link direction."""
    lhs = eval_resolvent(c, f, x, lam, n_samples, seed, "R", threads, purpose="lhs")
    mu = lam + 1.0

    def chunk(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng, renewals=False)
        acc = np.zeros(size)
        for n in range(n_terms + 1):
            if n:
                ens.resample_directions()
            ens.advance(rng.exponential(1.0 / mu, size=size))
            acc += _values(c, f, ens) * mu ** -(n + 1)
        return Moments.of(acc)

    rhs = Moments.reduce(run_chunks(chunk, n_samples, seed, "rhs", threads)).estimate()
    tail = f.sup * mu ** -(n_terms + 1) / lam
    combined = math.hypot(lhs.std_error, rhs.std_error)
    diff = abs(lhs.value - rhs.value)
    return {
        "lhs": lhs,
        "rhs_partial": rhs,
        "tail_bound": tail,
        "diff": diff,
        "combined_se": combined,
        "pass": diff <= tail + 3.0 * combined,
    }


def markov_samples(
    c: Complex,
    x: Point,
    t: float,
    s: float,
    n: int,
    seed: int,
    statistic,
    restart: str = "phase",
    speed: float = 1.0,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Samples of statistic(Y_{t+s}) run straight through, and after a restart at t.

    ``restart="phase"`` keeps the position and direction at time t and draws a
    fresh clock; ``restart="position"`` also redraws the direction from the
    link. Both stages use streams independent of the direct run.
    """
    if restart not in ("phase", "position"):
        raise ValueError("restart must be 'phase' or 'position'")

    def direct(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng, speed=speed)
        ens.advance(t + s)
        return statistic(ens)

    def composed(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng, speed=speed)
        ens.advance(t)
        if restart == "position":
            ens.resample_directions()
        ens.reset_clocks()
        ens.advance(s)
        return statistic(ens)

    a = np.concatenate(run_chunks(direct, n, seed, "direct", threads))
    b = np.concatenate(run_chunks(composed, n, seed, "restart", threads))
    return a, b


def resolvent_markov_check(
    c: Complex,
    f: Field,
    x: Point,
    lam: float,
    t: float,
    n: int,
    seed: int,
    grid_points: list[Point],
    grid_samples: int,
    threads: int = 1,
) -> dict:
    """Tail of the discounted occupation integral vs e^{-lam t} R_lam f(Y_t).

    The resolvent field is estimated independently at ``grid_points`` and
    read off at the nearest grid point to Y_t.
    """
    tab = c.tables()
    gsim = np.array([p.carrier for p in grid_points])
    gx = np.array([np.asarray(p.bary) @ tab.verts[p.carrier] for p in grid_points])
    field_vals = np.array(
        [eval_resolvent(c, f, p, lam, grid_samples, seed + 1 + i, "R", threads, purpose="grid").value for i, p in enumerate(grid_points)]
    )
    decay = math.exp(-lam * t)

    def chunk(k, size, rng):
        ens = Ensemble.from_point(c, x, size, rng)
        ens.advance(t)
        live = ens.alive.copy()
        rhs = np.zeros(size)
        if live.any():
            li = np.flatnonzero(live)
            d = np.stack(
                [c.distance(np.full(li.size, gs), np.repeat(gp[None], li.size, 0), ens.sim[li], ens.x[li]) for gs, gp in zip(gsim, gx)],
                axis=1,
            )
            rhs[li] = decay * field_vals[np.argmin(d, axis=1)]
        ens.advance(rng.exponential(1.0 / lam, size=size))
        lhs = decay / lam * _values(c, f, ens)
        return Moments.of(lhs), Moments.of(rhs)

    parts = run_chunks(chunk, n, seed, "path", threads)
    lhs = Moments.reduce([p[0] for p in parts]).estimate()
    rhs = Moments.reduce([p[1] for p in parts]).estimate()
    return {"lhs": lhs, "rhs": rhs, "pass": abs(lhs.value - rhs.value) <= 3 * math.hypot(lhs.std_error, rhs.std_error)}


# -- reports and event logs -------------------------------------------------

def estimate_report(est: Estimate, seed: int, params: dict) -> str:
    return json.dumps(
        {"value": est.value, "std_error": est.std_error, "n_samples": est.n_samples, "seed": seed, "params": params},
        indent=1,
    )


def events_to_csv(paths: list[PathSample], n: int) -> str:
    """CSV rows for renewals and flow events of every path."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_id", "event_index", "kind", "time", "carrier_simplex"] + [f"bary_{i}" for i in range(n + 1)])
    for pid, p in enumerate(paths):
        rows = [(s.tau, 0, "renewal", s.z) for s in p.states]
        rows += [(e.time, 1, e.kind, e.data) for e in p.events]
        rows.sort(key=lambda r: (r[0], r[1]))
        for idx, (tm, _, kind, z) in enumerate(rows):
            w.writerow([pid, idx, kind, repr(float(tm / p.time_scale)), z.carrier] + [repr(float(b)) for b in z.bary])
    return buf.getvalue()


def events_from_csv(text: str) -> list[dict]:
    rows = []
    for r in csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")):
        bary = [float(r[k]) for k in r if k.startswith("bary_")]
        rows.append(
            {
                "path_id": int(r["path_id"]),
                "event_index": int(r["event_index"]),
                "kind": r["kind"],
                "time": float(r["time"]),
                "carrier_simplex": int(r["carrier_simplex"]),
                "bary": bary,
            }
        )
    return rows
