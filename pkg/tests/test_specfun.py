import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fgmix.specfun import _log_iv, bessel_ratio, log_bessel_i, log_cd

from oracles import mp_log_iv, series_iv


def test_i0_at_one_golden_value():
    assert round(math.exp(log_bessel_i(0, 1.0)), 4) == 1.2661
    assert log_bessel_i(0, 1.0) == pytest.approx(mp_log_iv(0, 1.0), abs=1e-14)


def test_half_integer_closed_form():
    for x in [1e-8, 0.01, 1.0, 3.7, 50.0, 700.0, 1e4]:
        expected = 0.5 * math.log(2 / (math.pi * x)) + x + math.log(-math.expm1(-2 * x)) - math.log(2)
        got = log_bessel_i(0.5, x)
        assert math.exp(got - expected) == pytest.approx(1.0, rel=1e-10)
    assert log_bessel_i(0.5, 1.0) == pytest.approx(math.log(math.sqrt(2 / math.pi) * math.sinh(1.0)), abs=1e-12)


def test_three_halves_closed_form():
    # I_{3/2}(x) = sqrt(2/(pi x)) (cosh x - sinh x / x)
    for x in [0.5, 2.0, 10.0]:
        expected = math.log(math.sqrt(2 / (math.pi * x)) * (math.cosh(x) - math.sinh(x) / x))
        assert math.exp(log_bessel_i(1.5, x) - expected) == pytest.approx(1.0, rel=1e-10)


def test_zero_argument():
    assert log_bessel_i(0, 0.0) == 0.0
    assert log_bessel_i(0.5, 0.0) == -np.inf
    assert log_bessel_i(3.0, 0.0) == -np.inf


def test_large_argument_asymptotic():
    assert log_bessel_i(0, 500.0) == pytest.approx(500 - 0.5 * math.log(2 * math.pi * 500), abs=1e-3)


@pytest.mark.parametrize("order", [0.0, 0.5, 1.0, 1.5, 2.0, 3.7, 10.0])
@pytest.mark.parametrize("x", [1e-300, 1e-100, 1e-10, 0.3, 1.0, 7.5, 20.0, 100.0, 1e3, 1e5, 1e6])
def test_matches_arbitrary_precision(order, x):
    got = log_bessel_i(order, x)
    assert abs(got - mp_log_iv(order, x)) <= 1e-10 * max(1.0, abs(got)) + 1e-10


@pytest.mark.parametrize("order", [0.0, 0.5, 2.5, 6.0, 10.0])
@pytest.mark.parametrize("x", [0.01, 1.0, 5.0, 12.0, 20.0])
def test_matches_ascending_series(order, x):
    ref = float(series_iv(order, x))
    assert math.exp(log_bessel_i(order, x)) == pytest.approx(ref, rel=1e-10)


def test_appendix_ratio_with_negative_internal_order():
    ratio = math.exp(_log_iv(0.0, 1.0)) / math.exp(_log_iv(-0.25, 1.0))
    assert round(math.exp(_log_iv(-0.25, 1.0)), 4) == 1.3178
    assert ratio == pytest.approx(1.2661 / 1.3178, abs=1e-4)


def test_domain_errors():
    with pytest.raises(ValueError):
        log_bessel_i(0, -1.0)
    with pytest.raises(ValueError):
        log_bessel_i(-0.5, 1.0)
    with pytest.raises(ValueError):
        log_cd(1, 1.0)
    with pytest.raises(ValueError):
        bessel_ratio(3, -1.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(0, 30), st.floats(1e-3, 1e4), st.floats(1e-3, 10))
def test_monotonicity(order, x, dx):
    assert log_bessel_i(order, x + dx) > log_bessel_i(order, x)
    # decreasing in the order for fixed x > 0
    assert log_bessel_i(order + 0.5, x) < log_bessel_i(order, x)


def test_vectorized_matches_scalar():
    orders = np.array([0.0, 0.5, 1.0, 2.3])
    xs = np.array([0.1, 1.0, 800.0, 2.0])
    vec = log_bessel_i(orders, xs)
    assert np.allclose(vec, [log_bessel_i(o, x) for o, x in zip(orders, xs)], rtol=0, atol=1e-13)


def test_log_cd_values():
    assert log_cd(3, 0.0) == pytest.approx(math.log(1 / (4 * math.pi)), abs=1e-14)
    assert log_cd(2, 0.0) == pytest.approx(math.log(1 / (2 * math.pi)), abs=1e-14)
    assert log_cd(3, 2.0) == pytest.approx(math.log(2 / (4 * math.pi * math.sinh(2.0))), abs=1e-13)
    assert math.exp(log_cd(3, 2.0)) == pytest.approx(0.043881, abs=2e-6)


def test_log_cd_continuous_at_zero():
    for d in (2, 3, 5):
        assert log_cd(d, 1e-8) == pytest.approx(log_cd(d, 0.0), abs=1e-7)


@pytest.mark.parametrize("d", [2, 3, 4, 7])
def test_log_cd_strictly_decreasing(d):
    taus = np.logspace(-4, 5, 400)
    assert np.all(np.diff(log_cd(d, taus)) < 0)


def test_bessel_ratio():
    assert bessel_ratio(3, 1.0) == pytest.approx(1 / math.tanh(1.0) - 1.0, abs=1e-13)
    assert bessel_ratio(3, 0.0) == 0.0
    assert abs(bessel_ratio(3, 1e6) - 1.0) < 1e-5
    taus = np.logspace(-3, 4, 300)
    for d in (2, 3, 6):
        a = bessel_ratio(d, taus)
        assert np.all(np.diff(a) > 0) and np.all((a >= 0) & (a < 1))
