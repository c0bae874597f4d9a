import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargepoly import lattice_walk as lw
from chargepoly.errors import BudgetExceeded


def test_string_round_trip_and_vectors():
    p = lw.WalkPath.from_string(2, "AaBb")
    assert p.steps == (0, 1, 2, 3)
    assert p.to_string() == "AaBb"
    assert lw.WalkPath.from_vectors([(1, 0), (-1, 0), (0, 1), (0, -1)]) == p
    with pytest.raises(ValueError):
        lw.WalkPath.from_string(1, "B")
    with pytest.raises(ValueError):
        lw.WalkPath.from_vectors([(1, 1)])


def test_local_times_skip_the_origin():
    p = lw.WalkPath.from_string(1, "Aa")
    lt = lw.local_times(p)
    assert lt.counts == {(1,): 1, (0,): 1}
    assert lt.q() == 2
    p = lw.WalkPath.from_string(2, "AaAa")
    s = lw.summarize(p)
    assert (s.q_n, s.range, s.max_local_time) == (8, 2, 2)


def test_bridge_definition():
    assert lw.is_bridge(lw.WalkPath.from_string(1, "AA"))
    assert not lw.is_bridge(lw.WalkPath.from_string(1, "AAa"))
    assert not lw.is_bridge(lw.WalkPath.from_string(1, "AaA"))
    assert lw.is_bridge(lw.WalkPath.from_string(2, "ABA"))
    assert not lw.is_bridge(lw.WalkPath.from_string(2, "BAA"))


@pytest.mark.parametrize("d,n", [(1, 6), (2, 5), (3, 3)])
def test_histogram_matches_python_enumeration(d, n):
    h = lw.occupation_histogram(d, n)
    ref = Counter()
    bref = Counter()
    for p in lw.enumerate_walks(d, n):
        prof = lw.local_times(p).occupation_profile()
        ref[prof] += 1
        if lw.is_bridge(p):
            bref[prof] += 1
    assert dict(ref) == dict(h.profiles)
    assert dict(bref) == dict(h.bridge_profiles)
    assert h.total == (2 * d) ** n


def test_histogram_independent_of_shards():
    a = lw.occupation_histogram(2, 6)
    b = lw.occupation_histogram(2, 6, shards=3)
    assert a == b


def test_budget():
    with pytest.raises(BudgetExceeded):
        lw.occupation_histogram(2, 10, budget=1000)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_return_probabilities_box_vs_split(d):
    n = 40 if d < 3 else 24
    a = lw.return_probabilities(d, n, method="box")
    b = lw.return_probabilities(d, n, method="split")
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)
    assert a[0] == 1.0 and a[1] == 0.0
    assert a[2] == pytest.approx(1 / (2 * d))


def test_return_probability_d1_closed_form():
    p = lw.return_probabilities(1, 200)
    for r in (2, 50, 200):
        assert p[r] == pytest.approx(math.comb(r, r // 2) / 2.0**r, rel=1e-12)


def test_sample_stats_reproducible_and_correct():
    a = lw.sample_stats(2, 30, 5000, seed=11, shards=2)
    b = lw.sample_stats(2, 30, 5000, seed=11, shards=2)
    for k in lw.STAT_FIELDS:
        np.testing.assert_array_equal(a[k], b[k])
    rng = np.random.default_rng(0)
    steps = lw.sample_steps(2, 30, 20, rng)
    for row in steps:
        s = lw.summarize(lw.WalkPath(2, tuple(row.tolist())))
        from chargepoly import _kernels

        q, rng_, mx, _, _, _, br = _kernels.walk_stats(row[None, :], 2, np.zeros(0), 1)
        assert (q[0], rng_[0], mx[0], bool(br[0])) == (s.q_n, s.range, s.max_local_time, s.is_bridge)


def test_sample_bridge_is_a_bridge():
    rng = np.random.default_rng(5)
    for _ in range(20):
        p, _ = lw.sample_bridge(2, 12, rng)
        assert lw.is_bridge(p)


@given(st.lists(st.integers(0, 3), min_size=1, max_size=30))
@settings(max_examples=100, deadline=None)
def test_q_at_least_n_and_profile_consistent(steps):
    p = lw.WalkPath(2, tuple(steps))
    lt = lw.local_times(p)
    prof = lt.occupation_profile()
    assert sum((k + 1) * c for k, c in enumerate(prof)) == p.n
    assert lt.q() == lw.OccupationHistogram.q_of(prof) >= p.n
