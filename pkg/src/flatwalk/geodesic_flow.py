"""Generalised geodesic flow on a piecewise-flat complex.

Inside a maximal simplex motion is a straight chart line. At a codim-1 face
the trajectory continues into another coface: tangential components are
copied through the face's own chart and the normal is rebuilt along the
new simplex's inward normal, so |cos theta| is preserved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .complex_core import Complex, ComplexError, Point, link_at

__all__ = [
    "SKELETON_EPS",
    "SkeletonHit",
    "Absorbed",
    "PhasePoint",
    "FaceHit",
    "FlowEvent",
    "Advance",
    "FlowTables",
    "phase_point",
    "advance_in_simplex",
    "cross_face",
    "flow",
    "sample_liouville",
    "uniform_direction",
    "sample_link_direction",
    "hit_angle",
    "reverse_hit",
]

SKELETON_EPS = 1e-9
RENORM_TOL = 1e-12


class SkeletonHit(Exception):
    """Trajectory reached the (n-2)-skeleton within SKELETON_EPS."""

    def __init__(self, point: "PhasePoint", consumed: float):
        super().__init__("geodesic hit the codimension-2 skeleton")
        self.point = point
        self.consumed = consumed


class Absorbed(Exception):
    """Trajectory left through a face with a single coface (cemetery)."""


@dataclass
class FlowTables:
    """Per-simplex affine data shared by the scalar and batched flows."""

    n: int
    verts: np.ndarray  # (M, n+1, n) chart vertex coordinates
    A: np.ndarray  # (M, n+1, n) barycentric gradients
    b: np.ndarray  # (M, n+1)
    face: np.ndarray  # (M, n+1) codim-1 face opposite each local vertex
    ptr: np.ndarray  # (M, n+1) first transition index
    cnt: np.ndarray  # (M, n+1) number of admissible continuations
    tgt: np.ndarray  # (T,) target simplex
    tgt_local: np.ndarray  # (T,) local index of the shared face in the target
    R: np.ndarray  # (T, n, n) velocity map into the target chart
    off: np.ndarray  # (T, n) so that x' = R x + off on the shared face
    ptr_incl: np.ndarray = field(repr=False, default=None)
    cnt_incl: np.ndarray = field(repr=False, default=None)
    embed_R: np.ndarray | None = field(repr=False, default=None)
    embed_o: np.ndarray | None = field(repr=False, default=None)
    page: np.ndarray | None = field(repr=False, default=None)

    @classmethod
    def build(cls, c: Complex) -> "FlowTables":
        n = c.dimension
        M = len(c.top)
        verts = np.zeros((M, n + 1, n))
        A = np.zeros((M, n + 1, n))
        b = np.zeros((M, n + 1))
        face = np.zeros((M, n + 1), dtype=np.int64)
        for j in range(M):
            V = c.metric_simplex(n, j).chart
            verts[j] = V
            Q = np.linalg.inv(np.vstack([V.T, np.ones(n + 1)]))
            A[j] = Q[:, :n]
            b[j] = Q[:, n]
            face[j] = c.faces_of_top(j)
        local = {}
        for j in range(M):
            for i, f in enumerate(face[j]):
                local[(j, int(f))] = i
        nu = A / np.linalg.norm(A, axis=2, keepdims=True)

        tgt, tgt_local, Rs, offs = [], [], [], []
        ptr = np.zeros((M, n + 1), dtype=np.int64)
        cnt = np.zeros((M, n + 1), dtype=np.int64)
        ptr_incl = np.zeros((M, n + 1), dtype=np.int64)
        cnt_incl = np.zeros((M, n + 1), dtype=np.int64)
        face_verts = c.simplices[n - 1]
        for j in range(M):
            for i in range(n + 1):
                f = int(face[j, i])
                cof = c.cofaces[n - 1][f]
                ptr_incl[j, i] = len(tgt)
                if len(cof) < 2:
                    # boundary face: absorbing under both rules
                    cnt_incl[j, i] = 0
                    ptr[j, i] = len(tgt)
                    continue
                # the incoming simplex goes first so the exclusive rule is a suffix
                order = [j] + [k for k in cof if k != j]
                for k in order:
                    ik = local[(k, f)]
                    Rm, o = _face_map(c, j, i, k, ik, face_verts[f], verts, nu)
                    tgt.append(k)
                    tgt_local.append(ik)
                    Rs.append(Rm)
                    offs.append(o)
                cnt_incl[j, i] = len(order)
                ptr[j, i] = ptr_incl[j, i] + 1
                cnt[j, i] = len(order) - 1
        tables = cls(
            n=n,
            verts=verts,
            A=A,
            b=b,
            face=face,
            ptr=ptr,
            cnt=cnt,
            tgt=np.asarray(tgt, dtype=np.int64),
            tgt_local=np.asarray(tgt_local, dtype=np.int64),
            R=np.asarray(Rs).reshape(-1, n, n),
            off=np.asarray(offs).reshape(-1, n),
            ptr_incl=ptr_incl,
            cnt_incl=cnt_incl,
        )
        coords = c.meta.get("coords")
        if coords is not None:
            tables._attach_embedding(c, np.asarray(coords, dtype=float))
        return tables

    def _attach_embedding(self, c: Complex, coords: np.ndarray) -> None:
        """Affine maps chart -> stored flat picture, one per maximal simplex."""
        n = self.n
        M = len(c.top)
        d = coords.shape[1]
        eR = np.zeros((M, d, n))
        eo = np.zeros((M, d))
        for j, s in enumerate(c.top):
            V = self.verts[j]
            P = coords[list(s)]
            # P_k = eR V_k + eo for every vertex
            X = np.hstack([V, np.ones((n + 1, 1))])
            sol, *_ = np.linalg.lstsq(X, P, rcond=None)
            eR[j] = sol[:n].T
            eo[j] = sol[n]
        self.embed_R = eR
        self.embed_o = eo
        pages = c.meta.get("pages")
        self.page = np.asarray(pages, dtype=np.int64) if pages is not None else np.zeros(M, dtype=np.int64)

    def bary(self, sim: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.einsum("mij,mj->mi", self.A[sim], x) + self.b[sim]

    def to_chart(self, sim: np.ndarray, bary: np.ndarray) -> np.ndarray:
        return np.einsum("mi,mij->mj", bary, self.verts[sim])


def _face_map(c, j, i, k, ik, fverts, verts, nu):
    """Affine map from chart j to chart k gluing them along their shared face."""
    n = c.dimension
    sj = c.top[j]
    sk = c.top[k]
    Pj = np.array([verts[j][sj.index(u)] for u in fverts])
    Pk = np.array([verts[k][sk.index(u)] for u in fverts])
    Rm = -np.outer(nu[k, ik], nu[j, i])
    if n > 1:
        Ej = (Pj[1:] - Pj[0]).T
        Ek = (Pk[1:] - Pk[0]).T
        Rm = Rm + Ek @ np.linalg.pinv(Ej)
    off = Pk[0] - Rm @ Pj[0]
    return Rm, off


@dataclass
class PhasePoint:
    carrier: int
    bary: np.ndarray
    dir: np.ndarray

    def chart(self, c: Complex) -> np.ndarray:
        return self.bary @ c.tables().verts[self.carrier]

    def as_point(self) -> Point:
        return Point(self.carrier, tuple(float(v) for v in self.bary))

    def copy(self) -> "PhasePoint":
        return PhasePoint(self.carrier, self.bary.copy(), self.dir.copy())


@dataclass
class FaceHit:
    face: int
    point: np.ndarray  # barycentrics on the face vertices (sorted order)
    incoming: int
    tangential: np.ndarray  # velocity tangent part in the face's own chart
    cos_theta: float
    local: int = -1  # local index of the face in the incoming simplex
    chart_point: np.ndarray | None = None
    chart_dir: np.ndarray | None = None


@dataclass
class FlowEvent:
    kind: str  # segment | crossing | skeleton_hit | absorbed
    time: float
    data: PhasePoint | None = None


@dataclass
class Advance:
    kind: str  # "interior" or "hit"
    consumed: float
    point: PhasePoint | None = None
    hit: FaceHit | None = None


def phase_point(c: Complex, carrier: int, x: np.ndarray, v: np.ndarray) -> PhasePoint:
    t = c.tables()
    bary = t.A[carrier] @ x + t.b[carrier]
    return PhasePoint(carrier, _clean_bary(bary), _unit(v))


def _clean_bary(bary: np.ndarray) -> np.ndarray:
    bary = np.where(bary < 0.0, 0.0, bary)
    return bary / bary.sum()


def _unit(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    nrm = np.linalg.norm(v)
    if abs(nrm - 1.0) > RENORM_TOL:
        v = v / nrm
    return v


def _face_chart_basis(c: Complex, face: int, incoming: int, tables: FlowTables):
    """Edge matrices of a face in its own chart and in the incoming chart."""
    n = c.dimension
    fverts = c.simplices[n - 1][face]
    F = c.metric_simplex(n - 1, face).chart
    s = c.top[incoming]
    P = np.array([tables.verts[incoming][s.index(u)] for u in fverts])
    EF = (F[1:] - F[0]).T  # (n-1, n-1)
    EP = (P[1:] - P[0]).T  # (n, n-1)
    return EF, EP


def advance_in_simplex(c: Complex, p: PhasePoint, budget: float, speed: float = 1.0) -> Advance:
    """Move along a straight chart line until the budget expires or a face is hit.

    Raises SkeletonHit when the exit point is within SKELETON_EPS of the
    (n-2)-skeleton.
    """
    if budget < 0 or speed <= 0:
        raise ValueError("budget must be >= 0 and speed > 0")
    t = c.tables()
    j = p.carrier
    x = p.bary @ t.verts[j]
    rate = t.A[j] @ p.dir * speed
    neg = rate < 0.0
    times = np.full(len(rate), np.inf)
    times[neg] = p.bary[neg] / -rate[neg]
    i = int(np.argmin(times))
    te = float(times[i])
    if te > budget:
        return Advance("interior", budget, point=PhasePoint(j, _clean_bary(p.bary + rate * budget), p.dir.copy()))
    bary = p.bary + rate * te
    bary[i] = 0.0
    bary = _clean_bary(bary)
    others = np.delete(bary, i)
    if c.dimension > 1 and np.min(others) < SKELETON_EPS:
        raise SkeletonHit(PhasePoint(j, bary, p.dir.copy()), te)
    f = int(t.face[j, i])
    nu = t.A[j, i] / np.linalg.norm(t.A[j, i])
    normal = float(p.dir @ nu)
    tang = p.dir - normal * nu
    if c.dimension > 1:
        EF, EP = _face_chart_basis(c, f, j, t)
        tang_face = EF @ np.linalg.pinv(EP) @ tang
    else:
        tang_face = np.zeros(0)
    fverts = c.simplices[c.dimension - 1][f]
    s = c.top[j]
    fb = np.array([bary[s.index(u)] for u in fverts])
    hit = FaceHit(
        face=f,
        point=fb,
        incoming=j,
        tangential=tang_face,
        cos_theta=-normal,
        local=i,
        chart_point=x + p.dir * speed * te,
        chart_dir=p.dir.copy(),
    )
    return Advance("hit", te, hit=hit)


def cross_face(hit: FaceHit, c: Complex, rng: np.random.Generator, include_incoming: bool = False) -> PhasePoint:
    """Continue a transversal face hit into a uniformly chosen coface.

    With ``include_incoming`` the incoming simplex is one of the candidates
    (the reflected branch); by default it is excluded.
    """
    n = c.dimension
    cof = c.cofaces[n - 1][hit.face]
    if len(cof) < 2:
        raise Absorbed(hit.face)
    choices = list(cof) if include_incoming else [k for k in cof if k != hit.incoming]
    k = choices[int(rng.integers(len(choices)))]
    t = c.tables()
    fverts = c.simplices[n - 1][hit.face]
    sk = c.top[k]
    ik = sk.index(next(u for u in sk if u not in fverts))
    nu_k = t.A[k, ik] / np.linalg.norm(t.A[k, ik])
    if n > 1:
        EF, EK = _face_chart_basis(c, hit.face, k, t)
        tang = EK @ np.linalg.solve(EF, hit.tangential)
    else:
        tang = np.zeros(1)
    v = tang + hit.cos_theta * nu_k
    bary = np.zeros(n + 1)
    for u, w in zip(fverts, hit.point):
        bary[sk.index(u)] = w
    return PhasePoint(k, bary, _unit(v))


def uniform_direction(n: int, rng: np.random.Generator) -> np.ndarray:
    if n == 1:
        return np.array([1.0 if rng.random() < 0.5 else -1.0])
    if n == 2:
        phi = rng.random() * 2.0 * math.pi
        return np.array([math.cos(phi), math.sin(phi)])
    g = rng.standard_normal(n)
    return g / np.linalg.norm(g)


def _resample_inward(c: Complex, p: PhasePoint, rng: np.random.Generator) -> PhasePoint:
    """Uniform direction on the tangent cone of the carrier at a boundary point."""
    t = c.tables()
    near = p.bary < SKELETON_EPS
    while True:
        v = uniform_direction(c.dimension, rng)
        if np.all(t.A[p.carrier][near] @ v > 0.0):
            return PhasePoint(p.carrier, p.bary.copy(), v)


def flow(
    c: Complex,
    p: PhasePoint,
    t: float,
    rng: np.random.Generator,
    speed: float = 1.0,
    start_time: float = 0.0,
    include_incoming: bool = False,
) -> tuple[PhasePoint, list[FlowEvent]]:
    """Flow for time t; the last event is 'absorbed' if the cemetery was reached."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    events: list[FlowEvent] = []
    if t == 0:
        return p, events
    remaining = t
    clock = start_time
    cur = p
    while True:
        try:
            adv = advance_in_simplex(c, cur, remaining, speed)
        except SkeletonHit as sk:
            remaining -= sk.consumed
            clock += sk.consumed
            cur = _resample_inward(c, sk.point, rng)
            events.append(FlowEvent("skeleton_hit", clock, cur.copy()))
            continue
        remaining -= adv.consumed
        clock += adv.consumed
        if adv.kind == "interior":
            cur = adv.point
            events.append(FlowEvent("segment", start_time + t, cur.copy()))
            return cur, events
        try:
            cur = cross_face(adv.hit, c, rng, include_incoming)
        except Absorbed:
            j = adv.hit.incoming
            bary = c.tables().bary(np.array([j]), adv.hit.chart_point[None])[0]
            cur = PhasePoint(j, _clean_bary(bary), adv.hit.chart_dir)
            events.append(FlowEvent("absorbed", clock, cur.copy()))
            return cur, events
        events.append(FlowEvent("crossing", clock, cur.copy()))
        if remaining <= 0.0:
            events.append(FlowEvent("segment", start_time + t, cur.copy()))
            return cur, events


def sample_liouville(c: Complex, face: int, side: int, rng: np.random.Generator) -> PhasePoint:
    """Uniform point on a face and a cos-weighted inward direction into ``side``."""
    n = c.dimension
    fverts = c.simplices[n - 1][face]
    s = c.top[side]
    if face not in c.faces_of_top(side):
        raise ComplexError("side is not a coface of face")
    w = rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1)
    bary = np.zeros(n + 1)
    for u, wi in zip(fverts, w):
        bary[s.index(u)] = wi
    t = c.tables()
    i = s.index(next(u for u in s if u not in fverts))
    nu = t.A[side, i] / np.linalg.norm(t.A[side, i])
    # projected cos-weighted hemisphere = uniform on the equatorial ball
    if n > 1:
        while True:
            q = rng.uniform(-1.0, 1.0, n - 1)
            if q @ q < 1.0:
                break
        EF, EP = _face_chart_basis(c, face, side, t)
        tang = EP @ np.linalg.solve(EF, q)
        v = tang + math.sqrt(max(0.0, 1.0 - q @ q)) * nu
    else:
        v = nu
    return PhasePoint(side, bary, _unit(v))


def reverse_hit(c: Complex, p: PhasePoint, face: int) -> FaceHit:
    """Face hit of the reversed velocity -v at a point p lying on ``face``.

    With p inward-pointing this is the state just before p is produced by a
    crossing, i.e. the input of the crossing involution.
    """
    t = c.tables()
    j = p.carrier
    i = c.faces_of_top(j).index(face)
    nu = t.A[j, i] / np.linalg.norm(t.A[j, i])
    d = -p.dir
    normal = float(d @ nu)
    if normal >= 0.0:
        raise ValueError("direction does not point into the carrier")
    tang = d - normal * nu
    if c.dimension > 1:
        EF, EP = _face_chart_basis(c, face, j, t)
        tang_face = EF @ np.linalg.pinv(EP) @ tang
    else:
        tang_face = np.zeros(0)
    fverts = c.simplices[c.dimension - 1][face]
    s = c.top[j]
    fb = np.array([p.bary[s.index(u)] for u in fverts])
    fb = fb / fb.sum()
    x = p.bary @ t.verts[j]
    return FaceHit(face, fb, j, tang_face, -normal, i, x, d)


def hit_angle(c: Complex, p: PhasePoint, face: int) -> float:
    """Signed angle between an inward direction and the inward normal of face (2D)."""
    t = c.tables()
    j = p.carrier
    i = c.faces_of_top(j).index(face)
    nu = t.A[j, i] / np.linalg.norm(t.A[j, i])
    EF, EP = _face_chart_basis(c, face, j, t)
    tang = (EF @ np.linalg.pinv(EP) @ p.dir)[0]
    return math.atan2(tang, float(p.dir @ nu))


def sample_link_direction(c: Complex, pt: Point, rng: np.random.Generator) -> PhasePoint:
    """Draw (carrier, direction) from the normalised uniform measure on the link."""
    n = c.dimension
    link = link_at(c, pt)
    t = c.tables()
    if link.kind == "sphere":
        return PhasePoint(pt.carrier, np.array(pt.bary), uniform_direction(n, rng))
    verts = c.top[pt.carrier]
    weights = dict(zip(verts, pt.bary))
    if link.kind == "hemispheres":
        k = link.hemispheres[int(rng.integers(len(link.hemispheres)))]
        sk = c.top[k]
        bary = np.array([weights.get(u, 0.0) for u in sk])
        i = int(np.argmin(bary))
        nu = t.A[k, i]
        v = uniform_direction(n, rng)
        if v @ nu < 0:
            nu = nu / np.linalg.norm(nu)
            v = v - 2.0 * (v @ nu) * nu
        return PhasePoint(k, _clean_bary(bary), v)
    # vertex of a 2-complex: pick a sector proportional to its angle
    angles = np.array([a[2] for a in link.arcs])
    u = rng.random() * angles.sum()
    idx = min(int(np.searchsorted(np.cumsum(angles), u, side="right")), len(angles) - 1)
    k = link.arcs[idx][3]
    sk = c.top[k]
    vtx = link.base[0]
    iv = sk.index(vtx)
    a, b = (m for m in range(3) if m != iv)
    V = t.verts[k]
    e1 = (V[a] - V[iv]) / np.linalg.norm(V[a] - V[iv])
    e2 = V[b] - V[iv]
    perp = np.array([-e1[1], e1[0]])
    if perp @ e2 < 0:
        perp = -perp
    theta = rng.random() * angles[idx]
    bary = np.zeros(3)
    bary[iv] = 1.0
    return PhasePoint(k, bary, math.cos(theta) * e1 + math.sin(theta) * perp)
