"""Batched isotropic transport on a complex.

Simulates many independent trajectories at once. Each loop round processes
exactly one event per active path (renewal, face crossing, or end of the
time budget), so cost scales with the largest per-path event count.
"""
from __future__ import annotations

import math

import numpy as np

from .complex_core import Complex, Point, link_at
from .geodesic_flow import SKELETON_EPS

__all__ = ["Ensemble", "draw_link", "uniform_directions"]


def uniform_directions(n: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.where(rng.random(k) < 0.5, 1.0, -1.0)[:, None]
    if n == 2:
        phi = rng.random(k) * (2.0 * math.pi)
        return np.stack([np.cos(phi), np.sin(phi)], axis=1)
    g = rng.standard_normal((k, n))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def draw_link(c: Complex, pt: Point, k: int, rng: np.random.Generator):
    """k draws of (carrier, chart position, direction) from the uniform link law."""
    t = c.tables()
    n = c.dimension
    link = link_at(c, pt)
    weights = dict(zip(c.top[pt.carrier], pt.bary))
    if link.kind == "sphere":
        sim = np.full(k, pt.carrier, dtype=np.int64)
        x = np.repeat((np.asarray(pt.bary) @ t.verts[pt.carrier])[None], k, axis=0)
        return sim, x, uniform_directions(n, k, rng)
    if link.kind == "hemispheres":
        hs = np.asarray(link.hemispheres, dtype=np.int64)
        sim = hs[rng.integers(len(hs), size=k)]
        xs = np.zeros((len(hs), n))
        normals = np.zeros((len(hs), n))
        for q, j in enumerate(hs):
            bary = np.array([weights.get(u, 0.0) for u in c.top[j]])
            xs[q] = bary @ t.verts[j]
            i = int(np.argmin(bary))
            normals[q] = t.A[j, i] / np.linalg.norm(t.A[j, i])
        pos = np.searchsorted(hs, sim) if np.all(np.diff(hs) > 0) else np.array([list(hs).index(s) for s in sim])
        v = uniform_directions(n, k, rng)
        nu = normals[pos]
        dot = np.sum(v * nu, axis=1)
        v = v - 2.0 * np.minimum(dot, 0.0)[:, None] * nu
        return sim, xs[pos], v
    # vertex of a 2-complex: sector chosen proportional to its angle
    angles = np.array([a[2] for a in link.arcs])
    cum = np.cumsum(angles)
    u = rng.random(k) * cum[-1]
    q = np.minimum(np.searchsorted(cum, u, side="right"), len(angles) - 1)
    theta = u - (cum[q] - angles[q])
    vtx = link.base[0]
    e1s, perps, xs, tops = [], [], [], []
    for a in link.arcs:
        j = a[3]
        sk = c.top[j]
        iv = sk.index(vtx)
        ia, ib = (m for m in range(3) if m != iv)
        V = t.verts[j]
        e1 = (V[ia] - V[iv]) / np.linalg.norm(V[ia] - V[iv])
        perp = np.array([-e1[1], e1[0]])
        if perp @ (V[ib] - V[iv]) < 0:
            perp = -perp
        e1s.append(e1)
        perps.append(perp)
        xs.append(V[iv])
        tops.append(j)
    e1s, perps, xs = np.array(e1s), np.array(perps), np.array(xs)
    v = np.cos(theta)[:, None] * e1s[q] + np.sin(theta)[:, None] * perps[q]
    return np.asarray(tops, dtype=np.int64)[q], xs[q], v


class Ensemble:
    """State of N trajectories: carrier, chart position, direction, clock.

    ``clock`` is the flow time left until the next renewal; set
    ``renewals=False`` for pure geodesic flow.
    """

    def __init__(
        self,
        c: Complex,
        sim: np.ndarray,
        x: np.ndarray,
        v: np.ndarray,
        rng: np.random.Generator,
        speed: float = 1.0,
        renewals: bool = True,
        include_incoming: bool = False,
    ):
        self.c = c
        self.t = c.tables()
        self.n = c.dimension
        self.rng = rng
        self.speed = float(speed)
        self.renewals = renewals
        self.sim = np.asarray(sim, dtype=np.int64).copy()
        self.x = np.asarray(x, dtype=float).reshape(len(self.sim), self.n).copy()
        self.v = np.asarray(v, dtype=float).reshape(len(self.sim), self.n).copy()
        N = len(self.sim)
        self.clock = rng.exponential(size=N) if renewals else np.full(N, np.inf)
        self.alive = np.ones(N, dtype=bool)
        self.time = np.zeros(N)
        self.n_renewals = np.zeros(N, dtype=np.int64)
        self.n_crossings = np.zeros(N, dtype=np.int64)
        self.n_skeleton = 0
        if include_incoming:
            self._ptr, self._cnt = self.t.ptr_incl, self.t.cnt_incl
        else:
            self._ptr, self._cnt = self.t.ptr, self.t.cnt
        self.increments: list[np.ndarray] | None = None

    @classmethod
    def from_point(cls, c: Complex, pt: Point, k: int, rng: np.random.Generator, **kw) -> "Ensemble":
        sim, x, v = draw_link(c, pt, k, rng)
        return cls(c, sim, x, v, rng, **kw)

    def __len__(self) -> int:
        return len(self.sim)

    def record_increments(self) -> None:
        """Keep every drawn renewal waiting time (for clock-law diagnostics)."""
        self.increments = [self.clock.copy()]

    def resample_directions(self, idx: np.ndarray | None = None) -> None:
        """Fresh uniform directions at the current positions (operator P)."""
        idx = np.flatnonzero(self.alive) if idx is None else idx
        self.v[idx] = uniform_directions(self.n, len(idx), self.rng)

    def reset_clocks(self, idx: np.ndarray | None = None) -> None:
        idx = np.flatnonzero(self.alive) if idx is None else idx
        if self.renewals:
            self.clock[idx] = self.rng.exponential(size=len(idx))

    def bary(self) -> np.ndarray:
        return self.t.bary(self.sim, self.x)

    def embedded(self) -> np.ndarray:
        return self.c.embed(self.sim, self.x)

    def advance(self, duration) -> None:
        """Run every live path forward by ``duration`` units of flow time."""
        t = self.t
        rem = np.broadcast_to(np.asarray(duration, dtype=float), self.sim.shape).copy()
        active = np.flatnonzero(self.alive & (rem > 0))
        n = self.n
        while active.size:
            s = self.sim[active]
            xa = self.x[active]
            va = self.v[active]
            A = t.A[s]
            bary = np.einsum("mij,mj->mi", A, xa) + t.b[s]
            np.maximum(bary, 0.0, out=bary)
            rate = np.einsum("mij,mj->mi", A, va) * self.speed
            neg = rate < 0.0
            te = np.full(bary.shape, np.inf)
            te[neg] = bary[neg] / -rate[neg]
            fi = np.argmin(te, axis=1)
            tmin = te[np.arange(len(active)), fi]
            ck = self.clock[active]
            rm = rem[active]
            dt = np.minimum(ck, rm)
            hit = tmin <= dt
            step = np.where(hit, tmin, dt)
            self.x[active] = xa + va * (self.speed * step)[:, None]
            self.clock[active] = ck - step
            rem[active] = rm - step
            self.time[active] += step

            quiet = ~hit
            renew = active[quiet & (ck <= rm)]
            finished = active[quiet & (rm <= ck)]
            rem[finished] = 0.0
            if renew.size:
                self.v[renew] = uniform_directions(n, renew.size, self.rng)
                draws = self.rng.exponential(size=renew.size)
                self.clock[renew] = draws
                self.n_renewals[renew] += 1
                if self.increments is not None:
                    self.increments.append(draws)

            if hit.any():
                self._cross(active[hit], s[hit], fi[hit], bary[hit] + rate[hit] * tmin[hit, None])
            active = active[self.alive[active] & (rem[active] > 0.0)]

    def _cross(self, idx, s, fi, hb):
        t = self.t
        rows = np.arange(len(idx))
        hb[rows, fi] = 0.0
        np.maximum(hb, 0.0, out=hb)
        hb /= hb.sum(axis=1, keepdims=True)
        if self.n > 1:
            other = hb.copy()
            other[rows, fi] = np.inf
            skel = other.min(axis=1) < SKELETON_EPS
        else:
            skel = np.zeros(len(idx), dtype=bool)
        self.x[idx] = np.einsum("mi,mij->mj", hb, t.verts[s])
        if skel.any():
            self._skeleton_renew(idx[skel], hb[skel])
            idx, s, fi, hb = idx[~skel], s[~skel], fi[~skel], hb[~skel]
        cnt = self._cnt[s, fi]
        dead = cnt == 0
        if dead.any():
            self.alive[idx[dead]] = False
            idx, s, fi, hb, cnt = idx[~dead], s[~dead], fi[~dead], hb[~dead], cnt[~dead]
        if not idx.size:
            return
        choice = (self.rng.random(idx.size) * cnt).astype(np.int64)
        tr = self._ptr[s, fi] + np.minimum(choice, cnt - 1)
        R = t.R[tr]
        xn = np.einsum("mij,mj->mi", R, self.x[idx]) + t.off[tr]
        vn = np.einsum("mij,mj->mi", R, self.v[idx])
        vn /= np.linalg.norm(vn, axis=1, keepdims=True)
        tg = t.tgt[tr]
        nb = np.einsum("mij,mj->mi", t.A[tg], xn) + t.b[tg]
        nb[np.arange(idx.size), t.tgt_local[tr]] = 0.0
        np.maximum(nb, 0.0, out=nb)
        nb /= nb.sum(axis=1, keepdims=True)
        self.x[idx] = np.einsum("mi,mij->mj", nb, t.verts[tg])
        self.v[idx] = vn
        self.sim[idx] = tg
        self.n_crossings[idx] += 1

    def _skeleton_renew(self, idx, hb):
        """Measure-zero policy: new direction uniform on the carrier's tangent cone."""
        self.n_skeleton += idx.size
        A = self.t.A[self.sim[idx]]
        near = hb < SKELETON_EPS
        todo = np.arange(idx.size)
        while todo.size:
            v = uniform_directions(self.n, todo.size, self.rng)
            rate = np.einsum("mij,mj->mi", A[todo], v)
            ok = np.all((rate > 0.0) | ~near[todo], axis=1)
            self.v[idx[todo[ok]]] = v[ok]
            todo = todo[~ok]
