import math
import warnings

import numpy as np
import pytest

from chargepoly import charge_model as cm
from chargepoly import single_site as ss
from chargepoly.errors import GridResolutionWarning


def test_gaussian_closed_form_examples():
    assert ss.g_star(cm.gaussian(), 0.0, 0.5, 1) == pytest.approx(math.sqrt(0.5), rel=1e-14)
    for law in (cm.gaussian(), cm.rademacher(), cm.three_point(2)):
        assert ss.log_g_star(law, 0.7, 0.3, 0)[0] == 0.0


def test_rademacher_single_charge():
    for delta, beta in [(0.5, 0.125), (1.0, 0.3), (2.0, 0.0)]:
        assert ss.g_star(cm.rademacher(), delta, beta, 1) == pytest.approx(math.exp(-beta) * math.cosh(delta))


def test_split_sums_to_log_g_star():
    att, rep = ss.g_attractive_repulsive_split(1.0, 0.5, 1)
    assert att == pytest.approx(0.5 * math.log(2))
    assert rep == pytest.approx(-0.25)
    assert att + rep == pytest.approx(-ss.log_g_star(cm.gaussian(), 1.0, 0.5, 1)[0])
    assert ss.g_attractive_repulsive_split(0.0, 0.3, 5)[1] == 0.0
    assert ss.g_attractive_repulsive_split(1.0, 0.3, 0) == (0.0, 0.0)


def test_closed_form_vs_quadrature_grid():
    worst = 0.0
    for delta in (0, 0.5, 1, 2):
        for beta in (0.01, 0.1, 1):
            for ell in range(1, 65):
                a = ss.log_g_star(cm.gaussian(), delta, beta, ell, mode="closed_form")[0]
                b = ss.log_g_star(cm.gaussian(), delta, beta, ell, mode="quadrature")[0]
                worst = max(worst, abs(math.expm1(b - a)))
    assert worst <= 1e-10


def test_lattice_exact_vs_monte_carlo():
    rng = np.random.default_rng(1)
    for law in (cm.rademacher(), cm.three_point(2)):
        for ell in (1, 3, 7):
            exact = ss.g_star(law, 0.4, 0.1, ell)
            mean, se = ss.monte_carlo_g_star(law, 0.4, 0.1, ell, 10**6, rng)
            assert abs(mean - exact) <= 4 * se


def test_uniform_quadrature_vs_monte_carlo():
    rng = np.random.default_rng(2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        for ell in (1, 4):
            v, err = ss.log_g_star(cm.uniform(), 0.5, 0.2, ell)
            assert err < 1e-8
            mean, se = ss.monte_carlo_g_star(cm.uniform(), 0.5, 0.2, ell, 10**6, rng)
            assert abs(mean - math.exp(v)) <= 4 * se


def test_mode_checks():
    with pytest.raises(ValueError):
        ss.log_g_star(cm.rademacher(), 0.1, 0.1, 2, mode="closed_form")
    with pytest.raises(ValueError):
        ss.log_g_star(cm.gaussian(), 0.1, -0.1, 2)
    with pytest.raises(ValueError):
        ss.log_g_star(cm.gaussian(), 0.1, 0.1, 2, mode="monte_carlo")


def test_log_g_independent_route():
    # Gaussian: g(l) = E^delta exp(-beta Omega^2) with Omega ~ N(l delta, l)
    for delta, beta, ell in [(1.0, 1e-3, 10), (0.5, 0.2, 3)]:
        den = 1 + 2 * beta * ell
        closed = -0.5 * math.log(den) - beta * (ell * delta) ** 2 / den
        assert ss.log_g(cm.gaussian(), delta, beta, ell) == pytest.approx(closed, rel=1e-10)
    # Rademacher l = 1: Omega^2 = 1
    assert ss.log_g(cm.rademacher(), 0.8, 0.3, 1) == pytest.approx(-0.3)


def test_table_invariants():
    for law in (cm.gaussian(), cm.rademacher()):
        t = ss.build_table(law, 0.8, 0.32, 200)
        assert t.log_values[0] == 0.0
        assert np.all(t.log_values <= 1e-15)
        assert np.all(np.isfinite(t.log_values))
        assert t.to_csv().splitlines()[0] == "ell,log_g_star,mode,err_bound"


def test_symmetric_unit_bound_examples():
    assert ss.g_star(cm.rademacher(), 0.5, 0.125, 1) == pytest.approx(math.exp(-0.125) * math.cosh(0.5))
    assert ss.g_star(cm.rademacher(), 0.5, 0.125, 1) < 1
    rep = ss.check_symmetric_unit_bound(cm.rademacher(), [0.5, 1.0], 50)
    assert rep.passed and rep.margin >= 0
    with pytest.raises(ValueError):
        ss.check_symmetric_unit_bound(cm.three_point(2), [0.5], 10)


def test_bound_report_contract():
    with pytest.raises(ValueError):
        ss.BoundReport("x", {}, float("nan"), True)
    with pytest.raises(ValueError):
        ss.BoundReport("x", {}, -1.0, False)


def test_k1_constants():
    assert ss.k1_constant(cm.gaussian()) == pytest.approx(0.0, abs=1e-15)
    for N in (1, 2, 3):
        assert ss.k1_constant(cm.three_point(N)) == pytest.approx(N * N / 12 + 0.25)


def test_small_delta_regimes_gaussian():
    rep = ss.check_small_delta_regimes(cm.gaussian(), 0.05, 0.5)
    assert rep.passed
    law = cm.gaussian()
    beta = ss.beta_of_delta(law, 0.05, 0.0)
    lhs = ss.g_star(law, 0.05, beta, 1)
    assert lhs - (1 + ss.k1_constant(law) * 0.05**4 - 0.25 * 1.5 * 0.05**4) > 0


def test_superadditivity_negative_certificate():
    rep = ss.check_superadditivity(cm.gaussian(), 1.0, 0.01, 50)
    assert not rep.passed and rep.offending is not None


def test_gdb_smallbeta():
    rep = ss.check_gdb_smallbeta(cm.gaussian(), 1.0, 1e-3, 0.3, L=10)
    assert rep.passed
    rep = ss.check_gdb_smallbeta(cm.rademacher(), 1.0, 1e-3, 0.3, L=1000)
    assert rep.passed


def test_density_envelope_gaussian():
    rep = ss.density_envelope_check(cm.gaussian(), range(1, 200))
    assert rep.passed
    assert rep.details["c1"] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-12)
    assert rep.details["c0"] >= 0.6 / math.sqrt(2 * math.pi) * 0.99
    with pytest.raises(ValueError):
        ss.density_envelope_check(cm.rademacher(), range(1, 5))


def test_large_delta_envelope():
    rep = ss.check_large_delta_envelope(cm.gaussian(), 20.0, 0.5, range(1, 1001))
    assert rep.passed
    assert math.isfinite(rep.details["c"])
