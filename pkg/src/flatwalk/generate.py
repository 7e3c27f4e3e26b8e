"""Standard test complexes, truncated at a combinatorial radius.

Infinite complexes (plane, book, tree, line) are materialised up to a radius
and the codim-1 faces on the outer ring are recorded as the truncation
boundary, which is absorbing for both the flow and the dual chain. Generated
complexes carry a flat picture (``meta["coords"]``) used for distances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .complex_core import Complex, ComplexError, Point, build_complex

__all__ = [
    "MAX_SIMPLICES",
    "GeneratorSpec",
    "parse_spec",
    "generate",
    "plane",
    "fan",
    "book",
    "tree",
    "line",
    "rhombus",
    "torus",
    "cone",
    "rings_for_radius",
    "home_point",
]

MAX_SIMPLICES = 2_000_000
SQRT3_2 = math.sqrt(3.0) / 2.0


def _lattice(i: int, j: int, side: float) -> tuple[float, float]:
    return (side * (i + 0.5 * j), side * SQRT3_2 * j)


def _hex_dist(i: int, j: int) -> int:
    # axial coordinates on the triangular lattice
    return max(abs(i), abs(j), abs(i + j))


def _lattice_triangles(rings: int):
    """Triangles of the triangular lattice within hex distance ``rings`` of 0."""
    tris = []
    for i in range(-rings, rings + 1):
        for j in range(-rings, rings + 1):
            up = [(i, j), (i + 1, j), (i, j + 1)]
            down = [(i + 1, j), (i + 1, j + 1), (i, j + 1)]
            for t in (up, down):
                if all(_hex_dist(*p) <= rings for p in t):
                    tris.append(t)
    return tris


def _assemble(dimension, tris_by_key, coords_by_key, side, meta, pages=None, boundary_keys=None, root=None):
    keys = sorted({k for t in tris_by_key for k in t})
    vid = {k: i for i, k in enumerate(keys)}
    if root is not None:
        meta = {**meta, "root": vid[root]}
    top = [tuple(vid[k] for k in t) for t in tris_by_key]
    coords = np.array([coords_by_key[k] for k in keys])
    sq = {}
    for s in top:
        for a in s:
            for b in s:
                if a < b:
                    sq[(a, b)] = side * side
    order = sorted(range(len(top)), key=lambda m: tuple(sorted(top[m])))
    meta = dict(meta)
    meta["coords"] = coords.tolist()
    if pages is not None:
        meta["pages"] = [pages[m] for m in order]
    trunc = []
    c = build_complex(dimension, top, sq, labels=[_label(k) for k in keys], meta=meta, validate=False)
    if boundary_keys is not None:
        cof = c.cofaces[dimension - 1]
        for f, cs in enumerate(cof):
            if len(cs) == 1 and boundary_keys(tuple(keys[v] for v in c.simplices[dimension - 1][f])):
                trunc.append(c.simplices[dimension - 1][f])
    c = build_complex(dimension, top, sq, labels=c.labels, truncation=trunc, meta=meta)
    return c


def _label(k):
    if isinstance(k, tuple):
        return "_".join(str(x) for x in k)
    return k


def home_point(c: Complex) -> Point:
    """The generator's origin vertex (meta ``root``), else the centroid of simplex 0."""
    root = c.meta.get("root")
    if root is None:
        return c.centroid(0)
    return c.point_on([root], [1.0])


def rings_for_radius(radius: float, side: float = 1.0, margin: float = 0.1) -> int:
    """Rings of the hexagonal patch whose inscribed disc covers radius (+margin)."""
    return int(math.ceil((radius * (1.0 + margin) + side) / (side * SQRT3_2))) + 1


def plane(rings: int, side: float = 1.0) -> Complex:
    """Triangulated flat plane: hexagonal patch of equilateral triangles."""
    if rings < 1:
        raise ComplexError("rings must be positive")
    if 6 * rings * rings > MAX_SIMPLICES:
        raise ComplexError("radius too large for memory budget")
    tris = _lattice_triangles(rings)
    coords = {}
    for t in tris:
        for p in t:
            coords[p] = _lattice(*p, side)
    meta = {"kind": "plane", "rings": rings, "metric": "euclidean", "infinite": True, "simply_connected": True}
    return _assemble(2, tris, coords, side, meta, boundary_keys=lambda f: all(_hex_dist(*p) == rings for p in f), root=(0, 0))


def fan(m: int, side: float = 1.0) -> Complex:
    """m equilateral triangles sharing one edge (the spine)."""
    if m < 1:
        raise ComplexError("m must be positive")
    keys = ["a", "b"] + [f"c{k}" for k in range(m)]
    tris = [("a", "b", f"c{k}") for k in range(m)]
    coords = {"a": (0.0, 0.0), "b": (side, 0.0)}
    # every page is drawn in the upper half plane; pages tell them apart
    for k in range(m):
        coords[f"c{k}"] = (0.5 * side, SQRT3_2 * side)
    pages = list(range(m))
    vid = {k: i for i, k in enumerate(keys)}
    top = [tuple(vid[v] for v in t) for t in tris]
    sq = {}
    for s in top:
        for a in s:
            for b in s:
                if a < b:
                    sq[(a, b)] = side * side
    order = sorted(range(m), key=lambda q: tuple(sorted(top[q])))
    meta = {
        "kind": "fan",
        "m": m,
        "metric": "book",
        "coords": [list(coords[k]) for k in keys],
        "pages": [pages[q] for q in order],
        "infinite": False,
        "simply_connected": True,
    }
    return build_complex(2, top, sq, labels=keys, meta=meta)


def book(m: int, rings: int, side: float = 1.0) -> Complex:
    """m flat half-planes glued along a common line, each a lattice half-hexagon."""
    if m < 1 or rings < 1:
        raise ComplexError("m and rings must be positive")
    half = [t for t in _lattice_triangles(rings) if all(p[1] >= 0 for p in t)]
    if m * len(half) > MAX_SIMPLICES:
        raise ComplexError("radius too large for memory budget")
    tris, coords, pages = [], {}, []
    for page in range(m):
        for t in half:
            key = tuple((-1, p) if p[1] == 0 else (page, p) for p in t)
            tris.append(key)
            pages.append(page)
            for k, p in zip(key, t):
                coords[k] = _lattice(*p, side)
    meta = {"kind": "book", "m": m, "rings": rings, "metric": "book", "infinite": True, "simply_connected": True}
    return _assemble(
        2, tris, coords, side, meta, pages=pages, boundary_keys=lambda f: all(_hex_dist(*k[1]) == rings for k in f),
        root=(-1, (0, 0)),
    )


def tree(d: int, radius: int, side: float = 1.0) -> Complex:
    """1-dimensional d-regular tree truncated at graph radius ``radius``."""
    if d < 2 or radius < 1:
        raise ComplexError("need d >= 2 and radius >= 1")
    n_vert = 1 + d * sum((d - 1) ** k for k in range(radius))
    if n_vert > MAX_SIMPLICES:
        raise ComplexError("radius too large for memory budget")
    depth = [0]
    edges = []
    frontier = [0]
    for r in range(radius):
        nxt = []
        for v in frontier:
            kids = d if r == 0 else d - 1
            for _ in range(kids):
                w = len(depth)
                depth.append(r + 1)
                edges.append((v, w))
                nxt.append(w)
        frontier = nxt
    sq = {e: side * side for e in edges}
    trunc = [(v,) for v in frontier]
    meta = {"kind": "tree", "d": d, "radius": radius, "infinite": True, "simply_connected": True, "root": 0}
    return build_complex(1, edges, sq, truncation=trunc, meta=meta)


def line(radius: int, side: float = 1.0) -> Complex:
    """Path graph with 2*radius+1 vertices, labelled by integer position."""
    if radius < 1:
        raise ComplexError("radius must be positive")
    if 2 * radius + 1 > MAX_SIMPLICES:
        raise ComplexError("radius too large for memory budget")
    keys = list(range(-radius, radius + 1))
    top = [(i, i + 1) for i in range(2 * radius)]
    sq = {e: side * side for e in top}
    meta = {
        "kind": "line",
        "radius": radius,
        "metric": "euclidean",
        "coords": [[side * k] for k in keys],
        "infinite": True,
        "simply_connected": True,
        "root": radius,
    }
    return build_complex(1, top, sq, labels=keys, truncation=[(0,), (2 * radius,)], meta=meta)


def rhombus(side: float = 1.0) -> Complex:
    """Two coplanar equilateral triangles sharing an edge."""
    coords = {"a": (0.0, 0.0), "b": (side, 0.0), "c": (0.5 * side, SQRT3_2 * side), "d": (0.5 * side, -SQRT3_2 * side)}
    keys = list(coords)
    tris = [("a", "b", "c"), ("a", "b", "d")]
    vid = {k: i for i, k in enumerate(keys)}
    top = [tuple(vid[v] for v in t) for t in tris]
    sq = {}
    for s in top:
        for a in s:
            for b in s:
                if a < b:
                    sq[(a, b)] = side * side
    meta = {"kind": "rhombus", "metric": "euclidean", "coords": [list(coords[k]) for k in keys], "infinite": False}
    return build_complex(2, top, sq, labels=keys, meta=meta)


def torus(k: int = 3, side: float = 1.0) -> Complex:
    """Flat equilateral torus: the k x k periodic triangular lattice (k >= 3)."""
    if k < 3:
        raise ComplexError("torus needs k >= 3 to be a simplicial complex")
    vid = lambda i, j: (i % k) * k + (j % k)  # noqa: E731
    top = []
    for i in range(k):
        for j in range(k):
            top.append((vid(i, j), vid(i + 1, j), vid(i, j + 1)))
            top.append((vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)))
    sq = {}
    for s in top:
        for a in s:
            for b in s:
                if a < b:
                    sq[(a, b)] = side * side
    meta = {"kind": "torus", "k": k, "infinite": False, "simply_connected": False}
    return build_complex(2, top, sq, meta=meta)


def cone(m: int, side: float = 1.0) -> Complex:
    """m equilateral triangles arranged cyclically around one apex vertex."""
    if m < 3:
        raise ComplexError("cone needs m >= 3")
    top = [(0, 1 + q, 1 + (q + 1) % m) for q in range(m)]
    sq = {}
    for s in top:
        for a in s:
            for b in s:
                if a < b:
                    sq[(min(a, b), max(a, b))] = side * side
    meta = {"kind": "cone", "m": m, "infinite": False, "simply_connected": True}
    return build_complex(2, top, sq, meta=meta)


@dataclass(frozen=True)
class GeneratorSpec:
    kind: str
    params: tuple

    def __str__(self) -> str:
        return ":".join([self.kind, *map(str, self.params)])


def parse_spec(text: str) -> GeneratorSpec:
    """Parse ``kind[:p1[:p2]]``; ``auto`` is kept as a string for later sizing."""
    parts = text.split(":")
    params = tuple(p if p == "auto" else (float(p) if "." in p else int(p)) for p in parts[1:])
    return GeneratorSpec(parts[0], params)


def generate(kind: str, *params, reach: float | None = None) -> Complex:
    """Build a test complex by name.

    ``reach`` is the largest distance any trajectory can travel; generators
    given ``"auto"`` size their truncation radius from it.
    """

    def radius(p, default):
        if p == "auto" or p is None:
            if reach is None:
                raise ComplexError("auto radius needs a reach bound")
            return default(reach)
        return int(p)

    p = list(params) + [None, None, None]
    if kind == "plane":
        return plane(radius(p[0], rings_for_radius))
    if kind in ("fan", "fan_m"):
        return fan(int(p[0] if p[0] is not None else 3))
    if kind in ("book", "book_m"):
        m = int(p[0] if p[0] is not None else 3)
        return book(m, radius(p[1] if p[1] is not None else "auto" if reach else 8, rings_for_radius))
    if kind in ("tree", "tree_d"):
        d = int(p[0] if p[0] is not None else 3)
        return tree(d, radius(p[1] if p[1] is not None else 12, lambda r: int(math.ceil(r * 1.1)) + 1))
    if kind == "line":
        return line(radius(p[0] if p[0] is not None else 5, lambda r: int(math.ceil(r * 1.1)) + 1))
    if kind == "rhombus":
        return rhombus(float(p[0]) if p[0] is not None else 1.0)
    if kind == "torus":
        return torus(int(p[0]) if p[0] is not None else 3)
    if kind == "cone":
        return cone(int(p[0]))
    raise ComplexError(f"unknown generator {kind!r}")
