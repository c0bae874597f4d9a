import math

import numpy as np
import pytest

from chargepoly import bridge_lab as bl
from chargepoly import lattice_walk as lw
from chargepoly.errors import BudgetExceeded


def test_small_bridge_probabilities():
    # 1/(2d)^n counts: d = 2 allows one bridge of each length 1 and 2
    assert bl.exact_bridge_probability(2, 1) == pytest.approx(0.25)
    assert bl.exact_bridge_probability(2, 2) == pytest.approx(1 / 16)
    assert bl.exact_bridge_probability(1, 2) == pytest.approx(0.25)
    assert bl.exact_bridge_probability(1, 3) == pytest.approx(0.125)


def _brute_bridges(d, n):
    return sum(lw.is_bridge(p) for p in lw.enumerate_walks(d, n))


@pytest.mark.parametrize("d,n_max", [(1, 12), (2, 8), (3, 5)])
def test_dynamic_program_matches_enumeration(d, n_max):
    for n in range(1, n_max + 1):
        brute = _brute_bridges(d, n)
        assert bl.exact_bridge_count(d, n) == brute
        assert bl.exact_bridge_probability(d, n) == pytest.approx(brute / (2 * d) ** n, rel=1e-12)


def test_mc_within_error():
    s = bl.bridge_probability(2, [16, 64], method="mc", samples=200_000, seed=5)
    for r in s.rungs:
        ex = bl.exact_bridge_probability(2, r.n)
        assert abs(r.p_hat - ex) <= 4 * r.stderr


def test_zero_hits_are_one_sided():
    r = bl.mc_bridge_probability(2, 200, 100, seed=1)
    assert r.hits == 0 and r.one_sided and r.stderr == pytest.approx(0.03)
    s = bl.BridgeSeries(2, [bl.BridgeRung(8, 0.01, 0.001, False, 10, 1000), r])
    assert math.isnan(s.ratios()[0]) and math.isnan(s.ratio_stderr()[0])
    assert "NaN" in s.to_json()


def test_budget_and_seed_errors():
    with pytest.raises(BudgetExceeded):
        bl.exact_bridge_probability(2, 4096)
    with pytest.raises(ValueError):
        bl.bridge_probability(2, [8], method="mc")


def test_one_dim_constant_below_inverse_two_pi():
    c = bl.one_dim_bridge_constant(512)
    assert 0.12 < c < 1 / (2 * math.pi)


def test_exact_ratio_settles():
    s = bl.bridge_probability(2, [256, 512, 1024], method="exact")
    r = s.ratios()
    assert all(abs(x - 1) < 0.01 for x in r)


def test_ballot_examples():
    rows = {(r.n, r.k): r for r in bl.ballot_check(6)}
    assert rows[(3, 1)].lhs == rows[(3, 1)].rhs == pytest.approx(1 / 8)
    assert rows[(3, 3)].lhs == pytest.approx(1 / 8)
    assert rows[(4, 0)].lhs == 0 and rows[(4, -2)].lhs == 0
    assert all(r.ok for r in rows.values())
    with pytest.raises(ValueError):
        bl.ballot_check(bl.BALLOT_MAX_N + 1)


def test_conditional_q_at_least_one():
    s = bl.conditional_q_bridge(2, [8, 32], samples=2000, seed=3)
    for r in s.rungs:
        assert r.value >= 1 and r.accepted == 2000 and r.tries >= 2000


def test_conditional_q_exact_small():
    # E[Q_4 | B_4] in d = 2 from the enumerated bridges
    qs = [lw.summarize(p).q_n for p in lw.enumerate_walks(2, 4) if lw.is_bridge(p)]
    s = bl.conditional_q_bridge(2, [4], samples=40_000, seed=11)
    r = s.rungs[0]
    assert abs(r.value - np.mean(qs) / 4) <= 4 * r.stderr + 1e-12


def test_silt_tail_limits():
    hi = bl.bridge_silt_tail(2, [32], eps=10.0, samples=500, seed=2)
    assert hi.rungs[0].value == 1.0
    lo = bl.bridge_silt_tail(2, [32], eps=-0.9, samples=500, seed=2)
    assert lo.rungs[0].value == 0.0
    with pytest.raises(ValueError):
        bl.bridge_silt_tail(3, [32], eps=0.1, samples=10, seed=2)


def test_series_serialisation():
    s = bl.bridge_probability(2, [4, 8], method="exact")
    assert s.to_csv().splitlines()[0] == "n,p_hat,stderr,n_times_p"
    assert '"d": 2' in s.to_json()
