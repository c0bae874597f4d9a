import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chargepoly import charge_model as cm
from chargepoly.errors import GridResolutionWarning

LAWS = [cm.rademacher(), cm.gaussian(), cm.uniform(), cm.three_point(2), cm.three_point(5)]


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.label)
def test_laws_are_normalised(law):
    m = law.moments
    assert m[0] == pytest.approx(1.0)
    assert abs(m[1]) < 1e-15
    assert m[2] == pytest.approx(1.0)


def test_three_point_support_and_moments():
    law = cm.three_point(2)
    assert [float(v) for v in law.values] == [-2.0, 0.0, 4.0]
    assert float(law.span_exact) == 2.0
    # E w^3 = -N^3/(3N^2) + 8N^3/(6N^2) = N
    assert law.moments[3] == pytest.approx(2.0)


def test_spans():
    assert cm.lattice_span(cm.rademacher()) == 1.0
    assert cm.lattice_span(cm.gaussian()) == 0.0
    assert cm.lattice_span(cm.finite_lattice([-2, "1/2"], ["1/5", "4/5"])) == 0.5


def test_bad_laws_rejected():
    with pytest.raises(ValueError):
        cm.finite_lattice([-1, 1], ["1/3", "1/3"])
    with pytest.raises(ValueError):
        cm.finite_lattice([0, 1], ["1/2", "1/2"])
    with pytest.raises(ValueError):
        cm.three_point(0)
    with pytest.raises(ValueError):
        cm.from_config("cauchy")


@pytest.mark.parametrize("law", LAWS, ids=lambda l: l.label)
def test_config_round_trip(law):
    assert cm.from_config(law.to_config()) == law


def test_gaussian_mgf_and_tilt():
    assert cm.mgf(cm.gaussian(), 1.3) == pytest.approx(math.exp(1.3**2 / 2))
    assert cm.annealed_exponent(cm.gaussian(), 1.3) == pytest.approx(-(1.3**2) / 2)
    assert cm.tilted_moments(cm.gaussian(), 0.7) == (0.7, 1.0)


def test_rademacher_mgf():
    assert cm.log_mgf(cm.rademacher(), 0.4) == pytest.approx(math.log(math.cosh(0.4)))


@given(st.floats(-4, 4))
@settings(max_examples=50, deadline=None)
def test_tilted_mean_is_log_mgf_derivative(delta):
    for law in (cm.uniform(), cm.three_point(3), cm.rademacher()):
        h = 1e-5
        num = (cm.log_mgf(law, delta + h) - cm.log_mgf(law, delta - h)) / (2 * h)
        m, v = cm.tilted_moments(law, delta)
        assert m == pytest.approx(num, abs=1e-6)
        assert v > 0


def test_sample_charges_match_tilted_mean():
    rng = np.random.default_rng(3)
    for law in (cm.gaussian(), cm.uniform(), cm.three_point(2)):
        x = cm.sample_charges(law, 0.5, 200_000, rng)
        m, v = cm.tilted_moments(law, 0.5)
        assert abs(x.mean() - m) < 5 * math.sqrt(v / x.size)


@pytest.mark.parametrize("ell", [1, 2, 5, 9])
def test_lattice_sum_moments(ell):
    law = cm.three_point(2)
    om = cm.omega_sum_law(law, ell)
    assert om.total_mass() == pytest.approx(1.0)
    for k in range(7):
        assert om.moment(k) == pytest.approx(cm.omega_sum_moments(law, ell, k), rel=1e-10, abs=1e-10)


def test_uniform_sum_grid_moments():
    with warnings.catch_warnings():
        warnings.simplefilter("error", GridResolutionWarning)
        with pytest.raises(GridResolutionWarning):
            cm.omega_sum_law(cm.uniform(), 3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridResolutionWarning)
        om = cm.omega_sum_law(cm.uniform(), 3)
    assert om.total_mass() == pytest.approx(1.0, abs=1e-8)
    assert om.moment(2) == pytest.approx(3.0, rel=1e-5)
    assert om.moment(4) == pytest.approx(cm.omega_sum_moments(cm.uniform(), 3, 4), rel=1e-4)
