"""Diffusively rescaled transport Y^eta and its empirical diagnostics.

Y^eta at observed time t is the base chain run at geodesic speed eta for
t/eta^2 units of flow time, so paths are Lipschitz with constant 1/eta.
Nothing here claims the eta -> 0 limit; the Brownian sampler returns Y^eta
at an explicit resolution.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np

from .complex_core import Complex, Point
from .ensemble import Ensemble
from .stats import ks_2samp_distance, ks_threshold, run_chunks
from .transport import PathSample, simulate_path

__all__ = [
    "ScaledProcessSpec",
    "EmpiricalFDD",
    "sample_scaled_path",
    "estimate_fdd",
    "displacement_from",
    "convergence_sweep",
    "tightness_samples",
    "tightness_stat",
    "brownian_sample",
    "brownian_samples",
    "fdd_to_csv",
    "fdd_from_csv",
    "sweep_report",
]

CEMETERY = np.inf


@dataclass(frozen=True)
class ScaledProcessSpec:
    eta: float
    base_speed: float = 1.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")

    @property
    def speed(self) -> float:
        return self.eta * self.base_speed

    @property
    def time_scale(self) -> float:
        return 1.0 / self.eta**2

    @property
    def lipschitz(self) -> float:
        return self.speed * self.time_scale


@dataclass
class EmpiricalFDD:
    times: np.ndarray  # (m,)
    sim: np.ndarray  # (N, m) carrier simplices
    x: np.ndarray  # (N, m, n) chart positions
    alive: np.ndarray  # (N, m) False once in the cemetery
    start: Point
    eta: float
    seed: int

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @property
    def n_paths(self) -> int:
        return self.sim.shape[0]

    def embedded(self, c: Complex) -> np.ndarray:
        N, m = self.sim.shape
        pts = c.embed(self.sim.reshape(-1), self.x.reshape(N * m, -1))
        return pts.reshape(N, m, -1)

    def distance_from_start(self, c: Complex) -> np.ndarray:
        """(N, m) intrinsic distances to the start; inf in the cemetery."""
        N, m = self.sim.shape
        d = displacement_from(c, self.start, self.sim.reshape(-1), self.x.reshape(N * m, -1)).reshape(N, m)
        return np.where(self.alive, d, CEMETERY)


def displacement_from(c: Complex, start: Point, sim: np.ndarray, x: np.ndarray) -> np.ndarray:
    tab = c.tables()
    x0 = np.asarray(start.bary) @ tab.verts[start.carrier]
    return c.distance(np.full(len(sim), start.carrier), np.repeat(x0[None], len(sim), axis=0), sim, x)


def sample_scaled_path(c: Complex, x0: Point, eta: float, horizon: float, rng: np.random.Generator, seed=None) -> PathSample:
    """Single Y^eta trajectory on [0, horizon] (observed time)."""
    spec = ScaledProcessSpec(eta)
    return simulate_path(c, x0, horizon, rng, speed=spec.speed, seed=seed, time_scale=spec.time_scale)


def estimate_fdd(
    c: Complex,
    x0: Point,
    eta: float,
    times,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> EmpiricalFDD:
    """n_paths independent tuples (Y^eta_{t_1}, ..., Y^eta_{t_m})."""
    spec = ScaledProcessSpec(eta)
    times = np.asarray(times, dtype=float)
    if times.size == 0 or np.any(np.diff(times) <= 0) or times[0] < 0:
        raise ValueError("times must be nonempty, nonnegative and increasing")
    steps = np.diff(np.concatenate([[0.0], times])) * spec.time_scale

    def chunk(k, size, rng):
        ens = Ensemble.from_point(c, x0, size, rng, speed=spec.speed)
        sims, xs, alive = [], [], []
        for dt in steps:
            ens.advance(dt)
            sims.append(ens.sim.copy())
            xs.append(ens.x.copy())
            alive.append(ens.alive.copy())
        return np.stack(sims, 1), np.stack(xs, 1), np.stack(alive, 1)

    parts = run_chunks(chunk, n_paths, seed, "fdd", threads)
    return EmpiricalFDD(
        times,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        x0,
        eta,
        seed,
    )


def convergence_sweep(
    c: Complex,
    x0: Point,
    etas,
    t: float,
    n_paths: int,
    seed: int,
    alpha: float = 0.01,
    threads: int = 1,
) -> dict:
    """KS distances between laws of d(x0, Y^eta_t) for consecutive etas."""
    etas = [float(e) for e in etas]
    if len(etas) < 2 or any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("etas must be strictly decreasing with at least two entries")
    samples = []
    absorbed = []
    for i, eta in enumerate(etas):
        if t == 0:
            samples.append(np.zeros(n_paths))
            absorbed.append(0)
            continue
        fdd = estimate_fdd(c, x0, eta, [t], n_paths, seed + 7919 * i, threads)
        d = fdd.distance_from_start(c)[:, 0]
        absorbed.append(int(np.sum(~fdd.alive[:, 0])))
        samples.append(d)
    pairs = []
    for i in range(len(etas) - 1):
        ks = ks_2samp_distance(samples[i], samples[i + 1]) if t > 0 else 0.0
        pairs.append({"eta_a": etas[i], "eta_b": etas[i + 1], "ks": ks})
    return {
        "etas": etas,
        "t": t,
        "ks_pairs": pairs,
        "threshold": ks_threshold(n_paths, n_paths, alpha),
        "n_paths": n_paths,
        "seed": seed,
        "absorbed": absorbed,
    }


def tightness_samples(
    c: Complex,
    x0: Point,
    eta: float,
    horizon: float,
    window: float,
    n_paths: int,
    seed: int,
    mesh: float | None = None,
    threads: int = 1,
) -> np.ndarray:
    """Per-path value of sup_t min(sup_{t1} d(Y_t1, Y_t), sup_{t2} d(Y_t, Y_t2)).

    t runs over a grid of spacing ``mesh`` on [0, horizon] and t1 (t2) over
    grid points strictly less than ``window`` before (after) t, so every
    value is below window/eta.
    """
    if window <= 0 or horizon <= 0:
        raise ValueError("window and horizon must be positive")
    if c.meta.get("metric", "euclidean") != "euclidean":
        raise ValueError("tightness statistic needs a globally flat complex")
    mesh = window / 5.0 if mesh is None else mesh
    G = int(round(horizon / mesh))
    times = np.arange(1, G + 1) * (horizon / G)
    lags = int(math.ceil(window / (horizon / G) - 1e-9)) - 1
    fdd = estimate_fdd(c, x0, eta, times, n_paths, seed, threads)
    N = fdd.n_paths
    sim = np.concatenate([np.full((N, 1), -1), fdd.sim], axis=1)
    x = np.concatenate([np.zeros((N, 1, c.dimension)), fdd.x], axis=1)
    # the start point heads the grid
    tab = c.tables()
    sim[:, 0] = x0.carrier
    x[:, 0] = np.asarray(x0.bary) @ tab.verts[x0.carrier]
    pts = c.embed(sim.reshape(-1), x.reshape(-1, c.dimension)).reshape(N, G + 1, -1)
    back = np.zeros((N, G + 1))
    fwd = np.zeros((N, G + 1))
    for lag in range(1, lags + 1):
        d = np.linalg.norm(pts[:, lag:] - pts[:, :-lag], axis=2)
        back[:, lag:] = np.maximum(back[:, lag:], d)
        fwd[:, :-lag] = np.maximum(fwd[:, :-lag], d)
    stat = np.minimum(back, fwd).max(axis=1)
    dead = ~fdd.alive[:, -1]
    stat[dead] = np.inf
    return stat


def tightness_stat(
    c: Complex,
    x0: Point,
    eta: float,
    horizon: float,
    window: float,
    eps: float,
    n_paths: int,
    seed: int,
    mesh: float | None = None,
    threads: int = 1,
) -> float:
    """Empirical probability that the windowed modulus exceeds eps."""
    s = tightness_samples(c, x0, eta, horizon, window, n_paths, seed, mesh, threads)
    return float(np.mean(s > eps))


def brownian_samples(c: Complex, x0: Point, t: float, eta_resolution: float, n: int, seed: int, threads: int = 1) -> EmpiricalFDD:
    """Y^eta_t at eta = eta_resolution, an approximation of Brownian motion."""
    if t == 0:
        tab = c.tables()
        x = np.asarray(x0.bary) @ tab.verts[x0.carrier]
        return EmpiricalFDD(
            np.array([0.0]),
            np.full((n, 1), x0.carrier),
            np.repeat(x[None, None], n, axis=0),
            np.ones((n, 1), dtype=bool),
            x0,
            eta_resolution,
            seed,
        )
    return estimate_fdd(c, x0, eta_resolution, [t], n, seed, threads)


def brownian_sample(c: Complex, x0: Point, t: float, eta_resolution: float, rng: np.random.Generator) -> Point | None:
    """One approximate Brownian sample; None if the path reached the cemetery."""
    if t == 0:
        return x0
    path = sample_scaled_path(c, x0, eta_resolution, t, rng)
    z = path.at(c, t)
    return None if z is None else z.as_point()


def fdd_to_csv(c: Complex, fdd: EmpiricalFDD) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    n = c.dimension
    emb = fdd.embedded(c) if c.meta.get("metric") == "euclidean" and "coords" in c.meta else None
    header = ["path_id", "t_index", "t", "carrier_simplex"] + [f"bary_{i}" for i in range(n + 1)]
    if emb is not None:
        header += ["x", "y"][: emb.shape[2]]
    w.writerow(header)
    tab = c.tables()
    N, m = fdd.sim.shape
    for k in range(m):
        bary = tab.bary(fdd.sim[:, k], fdd.x[:, k])
        for pid in range(N):
            if not fdd.alive[pid, k]:
                row = [pid, k, repr(float(fdd.times[k])), "D"] + [""] * (n + 1)
                if emb is not None:
                    row += [""] * emb.shape[2]
            else:
                row = [pid, k, repr(float(fdd.times[k])), int(fdd.sim[pid, k])] + [repr(float(b)) for b in bary[pid]]
                if emb is not None:
                    row += [repr(float(v)) for v in emb[pid, k]]
            w.writerow(row)
    return buf.getvalue()


def fdd_from_csv(text: str) -> list[dict]:
    rows = []
    for r in csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#")):
        dead = r["carrier_simplex"] == "D"
        rows.append(
            {
                "path_id": int(r["path_id"]),
                "t_index": int(r["t_index"]),
                "t": float(r["t"]),
                "carrier_simplex": None if dead else int(r["carrier_simplex"]),
                "bary": None if dead else [float(r[k]) for k in r if k.startswith("bary_")],
                "xy": None if dead or "x" not in r else [float(r[k]) for k in ("x", "y") if k in r],
            }
        )
    return rows


def sweep_report(result: dict) -> str:
    keys = ("etas", "t", "ks_pairs", "threshold", "n_paths", "seed")
    return json.dumps({k: result[k] for k in keys}, indent=1)
