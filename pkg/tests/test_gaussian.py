"""Gaussian tail primitives against independent high-precision oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from barylab import gaussian
from barylab.errors import DomainError

from conftest import mp_log_tail, mp_mills, mp_phi, mp_tail, quad_tail, rel_err

GRID = [-8.0, -3.0, -1.0, -0.25, 0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 35.0, 40.0]


def test_tail_matches_high_precision_oracle():
    # the direct tail carries an unavoidable x^2 * ulp argument-rounding
    # error at large x (which is why everything downstream works in the
    # log domain); the tolerance reflects exactly that scaling
    for x in GRID:
        ref = float(mp_tail(x))
        if ref == 0.0:  # beyond ~38.6 the unnormalized tail underflows
            assert gaussian.tail(x) == 0.0
            continue
        assert abs(ref - gaussian.tail(x)) <= (1e-14 + 2e-15 * (1.0 + x * x)) * ref


def test_tail_matches_direct_quadrature():
    for x in [-3.0, 0.0, 1.0, 4.0, 12.0, 33.0]:
        assert abs(gaussian.tail(x) - quad_tail(x)) <= 1e-12 * quad_tail(x)


def test_tail_at_zero_is_sqrt_half_pi():
    assert gaussian.tail(0.0) == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-15)
    assert gaussian.SQRT_HALF_PI == pytest.approx(math.sqrt(math.pi / 2.0), rel=1e-15)


def test_tail_complement_sums_to_sqrt_2pi():
    x = np.linspace(-8.0, 8.0, 161)
    total = gaussian.tail(x) + gaussian.tail(-x)
    assert np.all(np.abs(total - gaussian.SQRT_2PI) <= 1e-14 * gaussian.SQRT_2PI)


def test_tail_strictly_decreasing_phi_strictly_increasing():
    # strictness is asserted where float64 still resolves the increments;
    # beyond that the values saturate (tail at sqrt(2*pi), phi at 1) and
    # only monotone non-strictness is meaningful
    x = np.linspace(-7.0, 10.0, 1701)
    assert np.all(np.diff(gaussian.tail(x)) < 0.0)
    y = np.linspace(-10.0, 7.0, 1701)
    assert np.all(np.diff(gaussian.phi(y)) > 0.0)
    wide = np.linspace(-37.0, 37.0, 1481)
    assert np.all(np.diff(gaussian.tail(wide)) <= 0.0)
    assert np.all(np.diff(gaussian.phi(wide)) >= 0.0)


def test_mills_sandwich_bounds():
    x = np.linspace(0.5, 40.0, 400)
    m = gaussian.mills(x)
    assert np.all(m < 1.0 / x)
    assert np.all(m > x / (x * x + 1.0))


def test_mills_matches_continued_fraction_oracle():
    for x in [1.0, 2.0, 5.0, 10.0, 20.0, 40.0]:
        assert rel_err(gaussian.mills(x), mp_mills(x)) <= 1e-14


def test_mills_consistent_with_tail_at_moderate_arguments():
    for x in [0.0, 1.0, 3.0, 10.0, 25.0]:
        direct = gaussian.tail(x) * math.exp(0.5 * x * x)
        tol = 1e-14 + 4e-15 * (1.0 + x * x)  # tail's argument-rounding scale
        assert abs(direct - gaussian.mills(x)) <= tol * gaussian.mills(x)


def test_log_mills_is_log_of_mills():
    x = np.linspace(-5.0, 44.0, 99)
    assert np.allclose(gaussian.log_mills(x), np.log(gaussian.mills(x)), rtol=0, atol=5e-13)


def test_log_tail_matches_oracle_far_out():
    for x in [10.0, 20.0, 30.0, 40.0]:
        assert abs(gaussian.log_tail(x) - float(mp_log_tail(x))) <= 1e-11


def test_log_tail_large_argument_series():
    # log T(x) = -x^2/2 - log x + log(1 - 1/x^2 + 3/x^4 - 15/x^6 + 105/x^8 - ...)
    x = 40.0
    series = 1.0 - x**-2 + 3.0 * x**-4 - 15.0 * x**-6 + 105.0 * x**-8
    expected = -0.5 * x * x - math.log(x) + math.log(series)
    assert abs(gaussian.log_tail(x) - expected) <= 1e-12


def test_phi_against_oracles():
    assert gaussian.phi(0.0) == 0.5
    assert abs(gaussian.phi(1.0) - 0.8413447460685429) <= 1e-13
    for x in [-6.0, -2.0, 0.3, 1.0, 4.0]:
        assert abs(gaussian.phi(x) - float(mp_phi(x))) <= 1e-15


def test_phi_inv_roundtrip_where_float64_resolves_it():
    # Below the center the CDF is tiny and carries ample precision; above,
    # p saturates toward 1 and the representable resolution of p itself
    # limits any inverse, so the direct roundtrip is only asserted where
    # ulp(p)/density(x) stays below the tolerance.
    for x in np.linspace(-36.0, 3.5, 80):
        back = gaussian.phi_inv(gaussian.phi(float(x)))
        assert abs(back - x) <= 2e-12 * max(1.0, abs(x))


def test_phi_inv_upper_roundtrip_reaches_deep_right_tail():
    for x in np.linspace(0.0, 36.0, 73):
        q = gaussian.tail(float(x)) / gaussian.SQRT_2PI
        back = gaussian.phi_inv_upper(q)
        assert abs(back - x) <= 1e-12 * max(1.0, abs(x))


def test_phi_inv_matches_oracle_quartile():
    # Phi^{-1}(3/4) by 50-digit bisection on the oracle CDF
    from mpmath import mp

    lo, hi = mp.mpf(0), mp.mpf(1)
    for _ in range(170):
        mid = (lo + hi) / 2
        if mp_phi(mid) < mp.mpf(3) / 4:
            lo = mid
        else:
            hi = mid
    assert abs(gaussian.phi_inv(0.75) - float((lo + hi) / 2)) <= 1e-14


def test_scalar_and_array_paths_agree():
    xs = [-3.0, 0.0, 1.5, 22.0]
    arr = gaussian.tail(np.asarray(xs))
    assert isinstance(gaussian.tail(xs[0]), float)
    assert arr.shape == (4,)
    for i, x in enumerate(xs):
        assert arr[i] == gaussian.tail(x)
    assert isinstance(gaussian.log_mills(1.0), float)
    assert gaussian.mills(np.asarray(xs)).shape == (4,)


def test_non_finite_and_out_of_range_inputs_rejected():
    for bad in [math.nan, math.inf, -math.inf]:
        with pytest.raises(DomainError):
            gaussian.tail(bad)
        with pytest.raises(DomainError):
            gaussian.log_mills(bad)
    for p in [0.0, 1.0, -0.2, 1.3]:
        with pytest.raises(DomainError):
            gaussian.phi_inv(p)
        with pytest.raises(DomainError):
            gaussian.phi_inv_upper(p)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=-35.0, max_value=35.0),
    st.floats(min_value=1e-6, max_value=5.0),
)
def test_tail_order_nonincreasing(x, gap):
    assert gaussian.tail(x + gap) <= gaussian.tail(x)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(min_value=-5.0, max_value=4.0),
    st.floats(min_value=1e-4, max_value=4.0),
)
def test_tail_order_strict_in_resolvable_band(x, gap):
    assert gaussian.tail(x + gap) < gaussian.tail(x)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-35.0, max_value=35.0))
def test_tail_log_consistency(x):
    # log_tail must agree with log(tail) wherever tail does not underflow
    t = gaussian.tail(x)
    if t > 1e-300:
        assert abs(gaussian.log_tail(x) - math.log(t)) <= 1e-11 * max(1.0, abs(math.log(t)))
