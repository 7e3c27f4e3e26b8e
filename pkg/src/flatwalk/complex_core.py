"""Piecewise-flat simplicial complexes.

A complex is stored as per-dimension tables of simplices, each simplex a
sorted tuple of integer vertex indices. Metric data lives in a single table
of squared edge lengths keyed by vertex pairs, so face compatibility holds
by construction. Every simplex gets a local Cartesian chart derived from its
Gram matrix.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Sequence

import numpy as np

__all__ = [
    "ComplexError",
    "ParseError",
    "DegenerateSimplexError",
    "InconsistentLengthError",
    "MetricSimplex",
    "Complex",
    "Point",
    "LinkStructure",
    "chart_from_sq_lengths",
    "cayley_menger_volume_sq",
    "build_complex",
    "load_complex",
    "dump_complex",
    "check_boundaryless",
    "check_admissible",
    "link_at",
    "check_cat0",
]

RANK_TOL = 1e-10


class ComplexError(ValueError):
    pass


class ParseError(ComplexError):
    pass


class DegenerateSimplexError(ComplexError):
    pass


class InconsistentLengthError(ComplexError):
    pass


def _pair(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def cayley_menger_volume_sq(sq: np.ndarray) -> float:
    """Squared k-volume of a simplex from its (k+1)x(k+1) squared-distance table.

    Evaluates the Cayley-Menger determinant with the sign and factorial
    normalisation folded in, so a nondegenerate simplex gives a positive value.
    """
    k = sq.shape[0] - 1
    if k == 0:
        return 1.0
    cm = np.ones((k + 2, k + 2))
    cm[0, 0] = 0.0
    cm[1:, 1:] = sq
    det = np.linalg.det(cm)
    return float((-1) ** (k + 1) * det / (2.0**k * math.factorial(k) ** 2))


def _pivoted_cholesky(gram: np.ndarray, tol: float = RANK_TOL) -> np.ndarray:
    """Lower-triangular L with P G P^T = L L^T, rows returned in original order."""
    g = np.array(gram, dtype=float)
    k = g.shape[0]
    perm = list(range(k))
    L = np.zeros((k, k))
    scale = max(float(np.max(np.abs(np.diag(g)))), 1.0) if k else 1.0
    for j in range(k):
        # remaining diagonal after eliminating the first j columns
        d = np.array([g[perm[i], perm[i]] - L[i, :j] @ L[i, :j] for i in range(j, k)])
        p = j + int(np.argmax(d))
        if d[p - j] <= tol * scale:
            raise DegenerateSimplexError("Gram matrix is rank deficient")
        perm[j], perm[p] = perm[p], perm[j]
        L[[j, p], :j] = L[[p, j], :j]
        L[j, j] = math.sqrt(d[p - j])
        for i in range(j + 1, k):
            L[i, j] = (g[perm[i], perm[j]] - L[i, :j] @ L[j, :j]) / L[j, j]
    out = np.zeros((k, k))
    for row, orig in enumerate(perm):
        out[orig] = L[row]
    return out


def chart_from_sq_lengths(sq: np.ndarray) -> np.ndarray:
    """Cartesian coordinates (k+1, k) reproducing a squared-distance table."""
    k = sq.shape[0] - 1
    if k == 0:
        return np.zeros((1, 0))
    gram = 0.5 * (sq[0, 1:, None] + sq[0, None, 1:] - sq[1:, 1:])
    L = _pivoted_cholesky(gram)
    return np.vstack([np.zeros((1, k)), L])


@dataclass(frozen=True)
class MetricSimplex:
    id: int
    vertices: tuple[int, ...]
    sq_edge_lengths: np.ndarray = field(repr=False, compare=False)
    chart: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def chart_error(self) -> float:
        """Max relative mismatch between chart distances and the length table."""
        worst = 0.0
        for i, j in itertools.combinations(range(len(self.vertices)), 2):
            d2 = float(np.sum((self.chart[i] - self.chart[j]) ** 2))
            worst = max(worst, abs(d2 - self.sq_edge_lengths[i, j]) / self.sq_edge_lengths[i, j])
        return worst


@dataclass(frozen=True)
class Point:
    """A point of the complex: a maximal simplex containing it and barycentrics."""

    carrier: int
    bary: tuple[float, ...]

    def support(self, c: "Complex", tol: float = 0.0) -> tuple[int, ...]:
        """Vertex tuple of the lowest-dimensional simplex containing the point."""
        verts = c.top[self.carrier]
        return tuple(v for v, b in zip(verts, self.bary) if b > tol)


@dataclass
class LinkStructure:
    base: tuple[int, ...]
    kind: str  # "sphere", "hemispheres" or "angle_graph"
    hemispheres: list[int] = field(default_factory=list)
    arcs: list[tuple[int, int, float, int]] = field(default_factory=list)
    sphere_dim: int = 1

    def total_measure(self) -> float:
        unit = _sphere_area(self.sphere_dim)
        if self.kind == "sphere":
            return unit
        if self.kind == "hemispheres":
            return 0.5 * unit * len(self.hemispheres)
        return float(sum(a[2] for a in self.arcs))


def _sphere_area(k: int) -> float:
    """Area of the unit k-sphere (k=0 gives the two-point set)."""
    return 2.0 * math.pi ** ((k + 1) / 2) / math.gamma((k + 1) / 2)


class Complex:
    """An n-dimensional piecewise-flat simplicial complex.

    Built through :func:`build_complex`; treat instances as immutable.
    """

    def __init__(
        self,
        dimension: int,
        labels: list[Hashable],
        simplices: list[list[tuple[int, ...]]],
        sq_lengths: dict[tuple[int, int], float],
        truncation: frozenset = frozenset(),
        meta: dict | None = None,
    ):
        self.dimension = dimension
        self.labels = labels
        self.simplices = simplices
        self.sq_lengths = sq_lengths
        self.truncation = truncation
        self.meta = dict(meta or {})
        self.index = [{s: i for i, s in enumerate(table)} for table in simplices]
        self.cofaces: list[list[list[int]]] = [[[] for _ in table] for table in simplices]
        for k in range(1, dimension + 1):
            for j, s in enumerate(simplices[k]):
                for f in itertools.combinations(s, k):
                    self.cofaces[k - 1][self.index[k - 1][f]].append(j)
        self._metric: dict[tuple[int, int], MetricSimplex] = {}
        self._tables = None
        self.flags = {
            "boundaryless": check_boundaryless(self)["boundaryless"],
            "admissible": None,
            "cat0": None,
        }

    @property
    def top(self) -> list[tuple[int, ...]]:
        return self.simplices[self.dimension]

    @property
    def n_vertices(self) -> int:
        return len(self.simplices[0])

    def counts(self) -> list[int]:
        return [len(t) for t in self.simplices]

    def sq_table(self, verts: Sequence[int]) -> np.ndarray:
        k = len(verts)
        sq = np.zeros((k, k))
        for i, j in itertools.combinations(range(k), 2):
            sq[i, j] = sq[j, i] = self.sq_lengths[_pair(verts[i], verts[j])]
        return sq

    def metric_simplex(self, dim: int, idx: int) -> MetricSimplex:
        key = (dim, idx)
        ms = self._metric.get(key)
        if ms is None:
            verts = self.simplices[dim][idx]
            sq = self.sq_table(verts)
            ms = MetricSimplex(idx, verts, sq, chart_from_sq_lengths(sq))
            self._metric[key] = ms
        return ms

    def faces_of_top(self, j: int) -> list[int]:
        """Indices of the (n-1)-faces of top simplex j; entry i is opposite vertex i."""
        verts = self.top[j]
        idx = self.index[self.dimension - 1]
        return [idx[verts[:i] + verts[i + 1:]] for i in range(len(verts))]

    def coface_count(self, face: int) -> int:
        return len(self.cofaces[self.dimension - 1][face])

    def point(self, carrier: int, bary: Iterable[float]) -> Point:
        b = np.asarray(list(bary), dtype=float)
        if b.shape != (self.dimension + 1,) or np.any(b < -1e-12) or abs(b.sum() - 1) > 1e-9:
            raise ComplexError("point outside complex")
        b = np.clip(b, 0.0, None)
        return Point(carrier, tuple(b / b.sum()))

    def centroid(self, carrier: int) -> Point:
        return self.point(carrier, [1.0 / (self.dimension + 1)] * (self.dimension + 1))

    def point_on(self, verts: Sequence[int], weights: Sequence[float]) -> Point:
        """Point with given barycentric weights on the simplex spanned by verts."""
        key = tuple(sorted(verts))
        order = dict(zip(verts, weights))
        dim = len(key) - 1
        j = self.index[dim][key]
        carrier = j
        for d in range(dim, self.dimension):
            carrier = self.cofaces[d][carrier][0]
        top = self.top[carrier]
        return self.point(carrier, [order.get(v, 0.0) for v in top])

    # embedding / intrinsic distance, available for generated complexes
    def embed(self, carrier: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Map chart coordinates (N, n) in given carriers to the stored flat picture."""
        t = self.tables()
        if t.embed_R is None:
            raise ComplexError("complex carries no embedding")
        return np.einsum("mij,mj->mi", t.embed_R[carrier], x) + t.embed_o[carrier]

    def distance(self, ca, xa, cb, xb) -> np.ndarray:
        """Intrinsic distance between chart points (vectorised over rows)."""
        t = self.tables()
        pa = self.embed(np.asarray(ca), np.atleast_2d(xa))
        pb = self.embed(np.asarray(cb), np.atleast_2d(xb))
        kind = self.meta.get("metric", "euclidean")
        if kind == "euclidean":
            return np.linalg.norm(pa - pb, axis=1)
        if kind == "book":
            # pages are half-planes y >= 0 glued along y = 0; across pages
            # the geodesic unfolds both pages into one plane
            pga = t.page[np.asarray(ca)]
            pgb = t.page[np.asarray(cb)]
            qb = pb.copy()
            other = pga != pgb
            qb[other, 1] = -qb[other, 1]
            return np.linalg.norm(pa - qb, axis=1)
        raise ComplexError(f"no distance available for metric kind {kind!r}")

    def tables(self):
        if self._tables is None:
            from .geodesic_flow import FlowTables

            self._tables = FlowTables.build(self)
        return self._tables

    def __repr__(self) -> str:
        return f"Complex(dim={self.dimension}, counts={self.counts()})"


def build_complex(
    dimension: int,
    top: Iterable[Sequence[int]],
    sq_lengths: dict[tuple[int, int], float],
    labels: list[Hashable] | None = None,
    truncation: Iterable[tuple[int, ...]] = (),
    meta: dict | None = None,
    validate: bool = True,
) -> Complex:
    """Close a list of top simplices under faces and wrap it as a Complex.

    Raises DegenerateSimplexError when a simplex has nonpositive volume.
    """
    top = sorted({tuple(sorted(s)) for s in top})
    if not top:
        raise ComplexError("complex has no simplices")
    for s in top:
        if len(s) != dimension + 1 or len(set(s)) != len(s):
            raise ComplexError(f"simplex {s} is not a {dimension}-simplex")
    tables: list[set] = [set() for _ in range(dimension + 1)]
    for s in top:
        for k in range(dimension + 1):
            tables[k].update(itertools.combinations(s, k + 1))
    simplices = [sorted(t) for t in tables]
    n_vert = max(v for (v,) in simplices[0]) + 1
    if labels is None:
        labels = list(range(n_vert))
    lengths = {}
    for e in simplices[1] if dimension >= 1 else []:
        if e not in sq_lengths:
            raise ComplexError(f"missing edge length for {labels[e[0]]}-{labels[e[1]]}")
        lengths[e] = float(sq_lengths[e])
    c = Complex(
        dimension,
        labels,
        simplices,
        lengths,
        frozenset(tuple(sorted(f)) for f in truncation),
        meta,
    )
    if validate:
        for e in c.simplices[1]:
            if c.sq_lengths[e] <= 0.0:
                raise DegenerateSimplexError(f"edge {[labels[v] for v in e]} has nonpositive length")
        for k in range(2, dimension + 1):
            for j, s in enumerate(c.simplices[k]):
                sq = c.sq_table(s)
                scale = float(np.max(sq)) ** k
                if cayley_menger_volume_sq(sq) <= 1e-12 * scale:
                    names = [labels[v] for v in s]
                    raise DegenerateSimplexError(f"degenerate simplex {names}")
                c.metric_simplex(k, j)
    c.flags["admissible"] = check_admissible(c) if validate else None
    return c


# -- document format --------------------------------------------------------

_DOC_KEYS = ("version", "dimension", "vertices", "simplices", "sq_edge_lengths", "boundary_policy")


def load_complex(text: str) -> Complex:
    """Parse a complex-definition JSON document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ParseError("document must be a JSON object")
    missing = [k for k in ("version", "dimension", "vertices", "simplices", "sq_edge_lengths") if k not in doc]
    if missing:
        raise ParseError(f"missing keys: {missing}")
    if doc["version"] != 1:
        raise ParseError(f"unsupported version {doc['version']!r}")
    if doc.get("boundary_policy", "absorbing") != "absorbing":
        raise ParseError("only the absorbing boundary policy is supported")
    n = doc["dimension"]
    if not isinstance(n, int) or n < 1:
        raise ParseError("dimension must be a positive integer")
    labels = list(doc["vertices"])
    if len(set(map(_label_key, labels))) != len(labels):
        raise ParseError("duplicate vertex ids")
    vid = {_label_key(v): i for i, v in enumerate(labels)}

    def ids(seq):
        try:
            return tuple(vid[_label_key(v)] for v in seq)
        except KeyError as exc:
            raise ParseError(f"undeclared vertex {exc.args[0]}") from None

    simplices = doc["simplices"]
    if not isinstance(simplices, dict):
        raise ParseError("simplices must map dimension to simplex lists")
    declared = {int(k): [ids(s) for s in v] for k, v in simplices.items()}
    top = declared.get(n, [])
    sq: dict[tuple[int, int], float] = {}
    for entry in doc["sq_edge_lengths"]:
        if len(entry) != 3:
            raise ParseError(f"bad length entry {entry!r}")
        a, b = ids(entry[:2])
        val = float(entry[2])
        key = _pair(a, b)
        if key in sq and sq[key] != val:
            raise InconsistentLengthError(f"conflicting lengths for {entry[0]}-{entry[1]}")
        sq[key] = val
    truncation = [ids(f) for f in doc.get("truncation", [])]
    c = build_complex(n, top, sq, labels=labels, truncation=truncation, meta=doc.get("meta"))
    for k, table in declared.items():
        for s in table:
            if tuple(sorted(s)) not in c.index[k]:
                raise ParseError(f"{k}-simplex {s} is not a face of any top simplex")
    return c


def _label_key(v):
    return json.dumps(v)


def dump_complex(c: Complex) -> str:
    """Serialise a complex; keys are emitted in the canonical order."""
    lab = c.labels
    doc = {
        "version": 1,
        "dimension": c.dimension,
        "vertices": lab,
        "simplices": {str(c.dimension): [[lab[v] for v in s] for s in c.top]},
        "sq_edge_lengths": [[lab[a], lab[b], c.sq_lengths[(a, b)]] for (a, b) in sorted(c.sq_lengths)],
        "boundary_policy": "absorbing",
    }
    if c.truncation:
        doc["truncation"] = [[lab[v] for v in f] for f in sorted(c.truncation)]
    if c.meta:
        doc["meta"] = c.meta
    return json.dumps(doc, indent=1)


# -- checks -----------------------------------------------------------------

def check_boundaryless(c: Complex) -> dict:
    cof = c.cofaces[c.dimension - 1]
    boundary = [c.simplices[c.dimension - 1][i] for i, cs in enumerate(cof) if len(cs) == 1]
    return {"boundaryless": not boundary, "boundary_simplices": boundary}


def _connected(nodes: list, adj: dict) -> bool:
    if not nodes:
        return True
    seen = {nodes[0]}
    queue = deque([nodes[0]])
    while queue:
        a = queue.popleft()
        for b in adj.get(a, ()):
            if b not in seen:
                seen.add(b)
                queue.append(b)
    return len(seen) == len(nodes)


def check_admissible(c: Complex) -> bool:
    """Star connectivity across codim-1 faces, for the whole complex and every
    simplex of codimension at least two."""
    n = c.dimension
    face_idx = c.index[n - 1]

    def star_connected(tops: list[int], sigma: tuple[int, ...] | None) -> bool:
        adj = defaultdict(list)
        by_face = defaultdict(list)
        for j in tops:
            s = c.top[j]
            for i in range(n + 1):
                f = s[:i] + s[i + 1:]
                if sigma is None or set(sigma) <= set(f):
                    by_face[face_idx[f]].append(j)
        for members in by_face.values():
            for a, b in itertools.combinations(members, 2):
                adj[a].append(b)
                adj[b].append(a)
        return _connected(tops, adj)

    if not star_connected(list(range(len(c.top))), None):
        return False
    for k in range(0, n - 1):
        for i, sigma in enumerate(c.simplices[k]):
            if not star_connected(_tops_containing(c, k, i), sigma):
                return False
    return True


def _tops_containing(c: Complex, dim: int, idx: int) -> list[int]:
    current = {idx}
    for d in range(dim, c.dimension):
        current = {j for i in current for j in c.cofaces[d][i]}
    return sorted(current)


def _vertex_angle(c: Complex, j: int, v: int) -> tuple[float, tuple[int, int]]:
    """Interior angle of triangle j at vertex v, with the two edges it spans."""
    s = c.top[j]
    a, b = (u for u in s if u != v)
    la = c.sq_lengths[_pair(v, a)]
    lb = c.sq_lengths[_pair(v, b)]
    lab = c.sq_lengths[_pair(a, b)]
    cosang = (la + lb - lab) / (2.0 * math.sqrt(la * lb))
    angle = math.acos(max(-1.0, min(1.0, cosang)))
    e_idx = c.index[1]
    return angle, (e_idx[_pair(v, a)], e_idx[_pair(v, b)])


def link_at(c: Complex, p: Point) -> LinkStructure:
    """Link of a point: sphere, codim-1 hemispheres, or a vertex angle graph."""
    if not 0 <= p.carrier < len(c.top):
        raise ComplexError("point outside complex")
    support = p.support(c, tol=1e-12)
    k = len(support) - 1
    n = c.dimension
    if k == n:
        return LinkStructure(support, "sphere", sphere_dim=n - 1)
    if k == n - 1:
        face = c.index[n - 1][support]
        return LinkStructure(support, "hemispheres", hemispheres=list(c.cofaces[n - 1][face]), sphere_dim=n - 1)
    if n == 2 and k == 0:
        v = support[0]
        arcs = []
        for j in _tops_containing(c, 0, c.index[0][(v,)]):
            ang, (ea, eb) = _vertex_angle(c, j, v)
            arcs.append((ea, eb, ang, j))
        return LinkStructure(support, "angle_graph", arcs=arcs, sphere_dim=1)
    raise ComplexError(f"link geometry at codimension {n - k} is not modelled")


def _shortest_cycle(arcs: list[tuple[int, int, float, int]]) -> float:
    """Length of the shortest simple cycle in a weighted multigraph."""
    adj = defaultdict(list)
    for idx, (a, b, w, _) in enumerate(arcs):
        adj[a].append((b, w, idx))
        adj[b].append((a, w, idx))
    best = math.inf
    # removing arc (a, b) and taking the shortest a-b path closes the cycle
    for idx, (a, b, w, _) in enumerate(arcs):
        dist = {a: 0.0}
        heap = [(0.0, a)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist.get(u, math.inf) or d + w >= best:
                continue
            if u == b:
                best = min(best, d + w)
                break
            for nb, ww, eid in adj[u]:
                if eid == idx:
                    continue
                nd = d + ww
                if nd < dist.get(nb, math.inf):
                    dist[nb] = nd
                    heapq.heappush(heap, (nd, nb))
    return best


def check_cat0(c: Complex, tol: float = 1e-12) -> dict:
    """Link condition at every vertex of a flat 2-complex.

    Loops are reported per vertex; vertices whose link is a forest get
    ``math.inf``.
    """
    if c.dimension > 2:
        raise ComplexError("CAT(0) check only supports dimension <= 2")
    if c.dimension == 1:
        return {"cat0": True, "violations": [], "girth": {}}
    girth = {}
    violations = []
    for (v,) in c.simplices[0]:
        link = link_at(c, c.point_on([v], [1.0]))
        g = _shortest_cycle(link.arcs)
        girth[v] = g
        if g < 2 * math.pi - tol:
            violations.append((c.labels[v], g))
    return {"cat0": not violations, "violations": violations, "girth": girth}
