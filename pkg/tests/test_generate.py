import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatwalk.complex_core import ComplexError, check_cat0
from flatwalk.generate import (
    MAX_SIMPLICES,
    book,
    fan,
    generate,
    home_point,
    line,
    parse_spec,
    plane,
    rings_for_radius,
    torus,
    tree,
)


def test_plane_one_ring():
    c = plane(1)
    assert c.counts() == [7, 12, 6]


@given(st.integers(1, 6))
def test_plane_interior_edges_have_two_cofaces(r):
    c = plane(r)
    trunc = {c.index[1][f] for f in c.truncation}
    for e, cof in enumerate(c.cofaces[1]):
        if e in trunc:
            assert len(cof) == 1
        else:
            assert len(cof) == 2


def test_fan_spine_and_line():
    c = fan(3)
    assert c.coface_count(c.index[1][(0, 1)]) == 3
    ln = line(5)
    assert ln.counts() == [11, 10]
    assert ln.labels[ln.meta["root"]] == 0


def test_book_spine_and_pages():
    c = book(3, 4)
    spine = [e for e, cof in enumerate(c.cofaces[1]) if len(cof) == 3]
    assert spine
    assert check_cat0(c)["cat0"]
    assert c.flags["admissible"]


def test_tree_degrees():
    t = tree(3, 4)
    trunc = {c for (c,) in t.truncation}
    for (v,), cof in zip(t.simplices[0], t.cofaces[0]):
        assert len(cof) == (1 if v in trunc else 3)


def test_torus_is_boundaryless_and_flat():
    t = torus(3)
    assert t.flags["boundaryless"]
    assert check_cat0(t)["cat0"]


def test_auto_sizing_covers_reach():
    r = 10.0
    c = generate("plane", "auto", reach=r)
    assert c.meta["rings"] == rings_for_radius(r)
    # inscribed radius of the hexagonal patch exceeds reach + margin
    assert c.meta["rings"] * 3**0.5 / 2 > 1.1 * r
    with pytest.raises(ComplexError):
        generate("plane", "auto")


def test_memory_budget():
    with pytest.raises(ComplexError):
        plane(int((MAX_SIMPLICES / 6) ** 0.5) + 10)


def test_parse_spec():
    s = parse_spec("tree:3:12")
    assert s.kind == "tree" and s.params == (3, 12)
    assert parse_spec("plane:auto").params == ("auto",)
    assert str(s) == "tree:3:12"


def test_home_point_is_origin_vertex():
    c = plane(3)
    p = home_point(c)
    x = np.asarray(p.bary) @ c.tables().verts[p.carrier]
    assert c.embed(np.array([p.carrier]), x[None])[0] == pytest.approx([0.0, 0.0], abs=1e-12)
    assert max(p.bary) == 1.0
