"""Dual graph of a complex and the face-to-face Markov chain on it.

The chain moves from a codim-1 face to a uniformly chosen adjacent maximal
simplex and then to one of that simplex's n other codim-1 faces, uniformly.
For n = 1 this is the simple random walk on the vertices of a graph.
"""
from __future__ import annotations

import io
import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .complex_core import Complex, ComplexError, check_cat0
from .stats import Estimate, stream

__all__ = [
    "DualGraph",
    "WalkStats",
    "ChainAbsorbed",
    "build_dual",
    "chain_step",
    "chain_steps",
    "transition_matrix",
    "estimate_return",
    "chain_network",
    "effective_resistance",
    "shell_resistance",
    "classify_transience",
    "dual_to_text",
    "dual_from_text",
    "resistance_csv",
]


class ChainAbsorbed(Exception):
    """The walk sits on a truncation-boundary face."""


@dataclass
class DualGraph:
    n: int
    n_top: int
    n_codim1: int
    top_faces: np.ndarray  # (n_top, n+1)
    cof_ptr: np.ndarray  # CSR over codim-1 faces
    cof_idx: np.ndarray
    absorbing: np.ndarray  # bool per codim-1 face

    @property
    def deg(self) -> np.ndarray:
        return np.diff(self.cof_ptr)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return [(int(z), int(f)) for z in range(self.n_top) for f in self.top_faces[z]]


@dataclass
class WalkStats:
    origin: int
    horizon: int
    n_walks: int
    returned: int
    absorbed: int
    return_probability: Estimate


def build_dual(c: Complex) -> DualGraph:
    n = c.dimension
    top_faces = np.array([c.faces_of_top(j) for j in range(len(c.top))], dtype=np.int64).reshape(-1, n + 1)
    cof = c.cofaces[n - 1]
    ptr = np.zeros(len(cof) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in cof])
    idx = np.fromiter((j for x in cof for j in x), dtype=np.int64, count=int(ptr[-1]))
    absorbing = np.zeros(len(cof), dtype=bool)
    fidx = c.index[n - 1]
    for f in c.truncation:
        absorbing[fidx[f]] = True
    return DualGraph(n, len(c.top), len(cof), top_faces, ptr, idx, absorbing)


def chain_steps(g: DualGraph, x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One chain step from each face in x (absorbing faces stay put)."""
    x = np.asarray(x, dtype=np.int64)
    deg = g.deg[x]
    if np.any(deg == 0):
        raise ComplexError("face without cofaces")
    u = rng.random((2, x.size))
    z = g.cof_idx[g.cof_ptr[x] + np.minimum((u[0] * deg).astype(np.int64), deg - 1)]
    faces = g.top_faces[z]
    pos = np.argmax(faces == x[:, None], axis=1)
    k = np.minimum((u[1] * g.n).astype(np.int64), g.n - 1)
    k = k + (k >= pos)
    y = faces[np.arange(x.size), k]
    return np.where(g.absorbing[x], x, y)


def chain_step(g: DualGraph, x: int, rng: np.random.Generator) -> int:
    if g.absorbing[x]:
        raise ChainAbsorbed(x)
    return int(chain_steps(g, np.array([x]), rng)[0])


def transition_matrix(g: DualGraph, faces=None) -> sp.csr_matrix:
    """Exact transition probabilities; absorbing faces get a self-loop."""
    rows, cols, vals = [], [], []
    faces = range(g.n_codim1) if faces is None else faces
    for x in faces:
        if g.absorbing[x]:
            rows.append(x)
            cols.append(x)
            vals.append(1.0)
            continue
        cofs = g.cof_idx[g.cof_ptr[x]:g.cof_ptr[x + 1]]
        for z in cofs:
            for y in g.top_faces[z]:
                if y != x:
                    rows.append(x)
                    cols.append(int(y))
                    vals.append(1.0 / (len(cofs) * g.n))
    return sp.csr_matrix((vals, (rows, cols)), shape=(g.n_codim1, g.n_codim1))


def estimate_return(g: DualGraph, origin: int, horizon: int, n_walks: int, seed: int) -> WalkStats:
    """Fraction of walks that revisit ``origin`` within ``horizon`` steps."""
    if g.absorbing[origin]:
        raise ComplexError("origin must be an interior face")
    rng = stream(seed, "walk")
    pos = np.full(n_walks, origin, dtype=np.int64)
    active = np.arange(n_walks)
    returned = np.zeros(n_walks, dtype=bool)
    absorbed = np.zeros(n_walks, dtype=bool)
    for _ in range(horizon):
        if not active.size:
            break
        pos[active] = chain_steps(g, pos[active], rng)
        back = pos[active] == origin
        dead = g.absorbing[pos[active]]
        returned[active[back]] = True
        absorbed[active[dead]] = True
        active = active[~back & ~dead]
    p = returned.mean() if n_walks else 0.0
    se = math.sqrt(p * (1 - p) / n_walks) if n_walks else 0.0
    return WalkStats(origin, horizon, n_walks, int(returned.sum()), int(absorbed.sum()), Estimate(float(p), se, n_walks))


def chain_network(g: DualGraph) -> sp.csr_matrix:
    """Symmetric conductances c(x, y) = deg(x) p(x, y) of the reversible chain."""
    n = g.n
    pairs = [(a, b) for a in range(n + 1) for b in range(n + 1) if a != b]
    A = np.array([a for a, _ in pairs])
    B = np.array([b for _, b in pairs])
    rows = g.top_faces[:, A].reshape(-1)
    cols = g.top_faces[:, B].reshape(-1)
    vals = np.full(rows.size, 1.0 / n)
    C = sp.csr_matrix((vals, (rows, cols)), shape=(g.n_codim1, g.n_codim1))
    C.sum_duplicates()
    return C


def _solve_grounded(C: sp.csr_matrix, source: int, keep: np.ndarray) -> float:
    """Potential at source with unit current in; nodes outside ``keep`` grounded."""
    deg = np.asarray(C.sum(axis=1)).ravel()
    L = sp.diags(deg) - C
    idx = np.flatnonzero(keep)
    Lr = L[idx][:, idx].tocsc()
    d = Lr.diagonal()
    if np.any(np.abs(d) < 1e-12):
        raise ComplexError("singular network: disconnected ball")
    rhs = np.zeros(idx.size)
    rhs[np.searchsorted(idx, source)] = 1.0
    phi = spla.spsolve(Lr, rhs)
    return float(phi[np.searchsorted(idx, source)])


def effective_resistance(n_nodes: int, edges, a: int, b: int, conductance=None) -> float:
    """Two-point effective resistance of a network (unit conductances by default)."""
    edges = list(edges)
    w = np.ones(len(edges)) if conductance is None else np.asarray(conductance, dtype=float)
    r = [e[0] for e in edges] + [e[1] for e in edges]
    cc = [e[1] for e in edges] + [e[0] for e in edges]
    C = sp.csr_matrix((np.concatenate([w, w]), (r, cc)), shape=(n_nodes, n_nodes))
    keep = np.ones(n_nodes, dtype=bool)
    keep[b] = False
    # only the component of a matters; isolate nothing else
    return _solve_grounded(C, a, keep & _component(C, a))


def _component(C: sp.csr_matrix, start: int) -> np.ndarray:
    ncomp, labels = sp.csgraph.connected_components(C, directed=False)
    return labels == labels[start]


def _bfs(C: sp.csr_matrix, origin: int, limit: int) -> np.ndarray:
    dist = np.full(C.shape[0], -1, dtype=np.int64)
    dist[origin] = 0
    q = deque([origin])
    while q:
        u = q.popleft()
        if dist[u] >= limit:
            continue
        for v in C.indices[C.indptr[u]:C.indptr[u + 1]]:
            if dist[v] < 0:
                dist[v] = dist[u] + 1
                q.append(v)
    return dist


def shell_resistance(g: DualGraph, origin: int, radius: int) -> list[dict]:
    """R_eff between origin and the shorted sphere of each radius r <= radius."""
    C = chain_network(g)
    dist = _bfs(C, origin, radius)
    if np.sum(dist == radius) == 0:
        raise ComplexError("ball of the requested radius is not contained in the complex")
    out = []
    prev = 0.0
    for r in range(1, radius + 1):
        keep = (dist >= 0) & (dist < r)
        R = _solve_grounded(C, origin, keep)
        out.append({"r": r, "R_eff": R, "increment": R - prev})
        prev = R
    return out


def _first_betti_zero(c: Complex) -> bool:
    """H_1(K; R) = 0, computed from boundary ranks (a proxy for simple connectivity)."""
    V, E = len(c.simplices[0]), len(c.simplices[1])
    n_comp = sp.csgraph.connected_components(
        sp.csr_matrix((np.ones(E), ([e[0] for e in c.simplices[1]], [e[1] for e in c.simplices[1]])), shape=(V, V)),
        directed=False,
    )[0]
    rank1 = V - n_comp
    if c.dimension < 2:
        return E - rank1 == 0
    T = c.simplices[2]
    rows, cols, vals = [], [], []
    eidx = c.index[1]
    for j, (a, b, d) in enumerate(T):
        for (u, v), s in (((b, d), 1.0), ((a, d), -1.0), ((a, b), 1.0)):
            rows.append(eidx[(u, v)])
            cols.append(j)
            vals.append(s)
    if E * len(T) > 4e7:
        raise ComplexError("complex too large for the homology check; pass simply_connected")
    D2 = np.zeros((E, len(T)))
    D2[rows, cols] = vals
    rank2 = np.linalg.matrix_rank(D2)
    return E - rank1 - rank2 == 0


def classify_transience(c: Complex, simply_connected: bool | None = None, noncompact: bool | None = None) -> dict:
    """Check the branching criterion for transience on complexes of dimension <= 2.

    Returns ``{"verdict": "transient" | "not_covered", "reasons": [...]}``;
    ``not_covered`` names the first failing hypothesis. No converse is implied.
    """
    if c.dimension > 2:
        raise ComplexError("classification only covers dimension <= 2")
    reasons = []
    if noncompact is None:
        noncompact = bool(c.meta.get("infinite", False))
    if not noncompact:
        return {"verdict": "not_covered", "reasons": ["complex is compact"]}
    reasons.append("non-compact (truncated infinite complex)")
    if simply_connected is None:
        simply_connected = c.meta.get("simply_connected")
        if simply_connected is None:
            simply_connected = _first_betti_zero(c)
    if not simply_connected:
        return {"verdict": "not_covered", "reasons": reasons + ["not simply connected"]}
    reasons.append("simply connected")
    if c.flags.get("admissible") is False:
        return {"verdict": "not_covered", "reasons": reasons + ["not admissible"]}
    if c.dimension == 2:
        cat = check_cat0(c)
        if not cat["cat0"]:
            return {"verdict": "not_covered", "reasons": reasons + [f"link condition fails at {cat['violations'][0][0]}"]}
        reasons.append("nonpositively curved (link condition)")
    n = c.dimension
    fidx = c.index[n - 1]
    truncated = {fidx[f] for f in c.truncation}
    for f, cof in enumerate(c.cofaces[n - 1]):
        if f in truncated:
            continue
        if len(cof) < 3:
            names = [c.labels[v] for v in c.simplices[n - 1][f]]
            return {
                "verdict": "not_covered",
                "reasons": reasons + [f"branching fails: {n - 1}-simplex {names} has {len(cof)} cofaces"],
            }
    reasons.append("every interior codim-1 simplex has at least 3 cofaces")
    return {"verdict": "transient", "reasons": reasons}


def dual_to_text(g: DualGraph) -> str:
    buf = io.StringIO()
    buf.write("# dual graph vertex classes: T = maximal simplices, F = codim-1 simplices\n")
    buf.write(f"# n={g.n} T={g.n_top} F={g.n_codim1} edges={g.n_top * (g.n + 1)}\n")
    for z, f in g.edges:
        buf.write(f"T{z} F{f}\n")
    return buf.getvalue()


def dual_from_text(text: str) -> dict:
    """Parse a dual-graph dump back into counts and the incidence list."""
    header = {}
    edges = []
    for line in text.splitlines():
        if line.startswith("# n="):
            header = {k: int(v) for k, v in (tok.split("=") for tok in line[2:].split())}
        elif line and not line.startswith("#"):
            u, v = line.split()
            edges.append((int(u[1:]), int(v[1:])))
    return {**header, "incidences": edges}


def resistance_csv(rows: list[dict]) -> str:
    lines = ["r,R_eff,increment"]
    lines += [f"{r['r']},{r['R_eff']!r},{r['increment']!r}" for r in rows]
    return "\n".join(lines) + "\n"
