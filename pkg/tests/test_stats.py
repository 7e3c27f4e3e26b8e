import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flatwalk.stats import Estimate, Moments, ks_threshold, run_chunks, stream


@given(st.lists(st.lists(st.floats(-1e3, 1e3), min_size=0, max_size=20), min_size=1, max_size=12))
def test_merged_moments_equal_direct(parts):
    flat = np.array([v for p in parts for v in p])
    m = Moments.reduce([Moments.of(np.array(p)) for p in parts])
    assert m.n == flat.size
    if flat.size:
        assert m.mean == pytest.approx(flat.mean(), abs=1e-9)
        assert m.m2 == pytest.approx(((flat - flat.mean()) ** 2).sum(), rel=1e-9, abs=1e-6)


def test_estimate_from_samples():
    x = np.arange(10.0)
    e = Estimate.from_samples(x)
    assert e.value == 4.5 and e.n_samples == 10
    assert e.std_error == pytest.approx(x.std(ddof=1) / math.sqrt(10))
    with pytest.raises(ValueError):
        Moments().estimate()


def test_streams_are_distinct_and_reproducible():
    a = stream(1, "fdd", 0).random(4)
    assert np.array_equal(a, stream(1, "fdd", 0).random(4))
    assert not np.array_equal(a, stream(1, "fdd", 1).random(4))
    assert not np.array_equal(a, stream(2, "fdd", 0).random(4))


def test_run_chunks_independent_of_threads():
    fn = lambda k, size, rng: (k, size, rng.random(size).sum())
    a = run_chunks(fn, 10_000, 3, "fdd", threads=1, chunk=999)
    b = run_chunks(fn, 10_000, 3, "fdd", threads=4, chunk=999)
    assert a == b
    assert sum(p[1] for p in a) == 10_000 and [p[0] for p in a] == list(range(11))


def test_ks_threshold():
    # c(0.01) = 1.6276 for the one-sample statistic
    assert ks_threshold(10_000) == pytest.approx(1.6276 / 100, rel=1e-3)
    assert ks_threshold(100, 100) == pytest.approx(ks_threshold(50))
