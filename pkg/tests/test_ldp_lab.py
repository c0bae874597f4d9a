import math

import numpy as np
import pytest

from chargepoly import ldp_lab as ll


def test_expected_q_small_cases():
    assert ll.expected_q(2, 2).value == 2.0
    assert ll.expected_q(2, 4).value == 5.0
    ex = ll.exact_q_distribution(2, 4)
    assert ex.mean == pytest.approx(5.0)


def test_expected_q_matches_enumeration():
    for d, n in [(1, 10), (2, 7), (3, 5)]:
        assert ll.exact_q_distribution(d, n).mean == pytest.approx(ll.expected_q(d, n).value, rel=1e-13)


def test_q_distribution_trivial_and_mc():
    qd = ll.exact_q_distribution(2, 2)
    assert qd.tail(1.0) == 1.0 and qd.var == 0.0
    mc = ll.mc_q_distribution(2, 6, 50_000, seed=4)
    ex = ll.exact_q_distribution(2, 6)
    assert abs(mc.mean - ex.mean) < 4 * math.sqrt(ex.var / 50_000)


def test_green_constants():
    g3 = ll.green_constants(3)
    assert g3.G > 1 and g3.lam == pytest.approx(2 * g3.G - 1)
    assert abs(g3.G - g3.half_level_G) < 1e-4
    assert g3.G == pytest.approx(1.516386059, abs=1e-4)
    g2 = ll.green_constants(2)
    assert g2.lam == pytest.approx(2 / math.pi, rel=1e-15)
    gs = [ll.green_constants(d).G for d in (3, 4, 5)]
    assert gs[0] > gs[1] > gs[2] > 1


def test_saw_counts():
    c = ll.saw_counts(2, 10)
    assert c.counts[:4] == (4, 12, 36, 100)
    assert c.counts[9] == 44100
    assert c.submultiplicative
    assert ll.saw_counts(1, 8).counts == (2,) * 8


def test_tail_probability_t1_is_saw_fraction():
    # Q_n = n means S_1..S_n distinct; S_0 is not counted, so the first step is free
    c = ll.saw_counts(2, 9).counts
    for n in (3, 6, 9):
        p = ll.tail_probability(2, n, 1.0).p
        assert p == pytest.approx(4 * c[n - 2] / 4**n if n > 1 else 1.0, rel=1e-12)


def test_tilted_tail_unbiased():
    ex = ll.tail_probability(2, 10, 1.3).p
    zs = []
    for seed in range(5):
        est = ll.tail_probability(2, 10, 1.3, method="tilted_mc", samples=20_000, seed=seed)
        zs.append((est.p - ex) / est.stderr)
    assert max(abs(z) for z in zs) < 4


def test_strip_bound_never_exceeds_exact():
    for d, n in [(1, 14), (2, 10)]:
        qd = ll.exact_q_distribution(d, n)
        for t in (1.0, 1.5, 2.5):
            ex = qd.tail(t)
            for m in range(1, n + 1):
                sb = ll.strip_lower_bound(d, n, t, m)
                assert sb.log_lower <= math.log(ex) + 1e-12


def test_rate_function_properties():
    curve = ll.rate_function(2, [1.0, 1.25, 1.5, 2.0, 3.0], [6, 8])
    for n in (6, 8):
        vals = [p.value for p in curve.at(n)]
        assert all(v >= 0 for v in vals)
        assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
        for p in curve.at(n):
            assert p.bridge_value >= p.value


def test_wsaw_exact_properties():
    res = ll.wsaw_free_energy(2, 0.1, [2, 4, 8])
    for n, a, a2 in res.doubling_pairs():
        assert a2 >= a - 1e-15
    assert res.lower <= res.upper
    assert all(r.a_n == 0 for r in ll.wsaw_free_energy(2, 0.0, [2, 4]).rungs)
    u = np.linspace(0, 1, 11)
    assert np.all(ll.second_differences(ll.exact_wsaw_values(2, 8, u)) <= 1e-13)


def test_wsaw_mc_deterministic():
    a = ll.wsaw_free_energy(3, 1e-2, [64, 128], samples=4000, seed=7)
    b = ll.wsaw_free_energy(3, 1e-2, [64, 128], samples=4000, seed=7)
    assert a.to_json() == b.to_json()
    for r in a.rungs:
        assert r.a_n <= ll.lambda_d(3) * 1e-2 + 3 * r.sigma


def test_varadhan_exact_d2_n12():
    # E e^{-uQ} = sum_k e^{-uk} P(Q=k) lies between the largest term and K times it,
    # K the support size, so the gap is in [0, log(K)/n]
    n = 12
    u = [0.01, 0.1, 0.5, 1.0]
    res = ll.exact_varadhan(2, n, u)
    qd = ll.exact_q_distribution(2, n)
    f = ll.exact_wsaw_values(2, n, u)
    for j, r in enumerate(res.residuals):
        vals = [-x / n * u[j] + math.log(qd.tail(x / n)) / n for x in qd.support]
        assert -f[j] - max(vals) >= -1e-12
    assert res.max_residual <= math.log(len(qd.support)) / n
    assert res.residuals[0] < 0.05 and res.residuals[-1] < 0.05


def test_range_probe():
    pr = ll.range_ld_probe(1, 12, [0.0, 1.0], samples=200_000, seed=1)
    assert pr.points[0].p == 1.0 and pr.points[0].exponent == 0.0
    # S_0 is not counted, so besides the two straight paths the two that
    # reverse after the first step also have R_n = n
    assert pr.points[1].p == pytest.approx(4 * 2.0**-12, rel=0.3)
    assert pr.label == "conjecture evidence"
    with pytest.raises(ValueError):
        ll.range_ld_probe(2, 10, [1.5], seed=1)
