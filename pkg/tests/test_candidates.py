"""Candidate sets, reduced geometry, and the cell-membership inequality."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from mpmath import mp

from barylab.candidates import (
    Ball,
    HalfSpace,
    Interval1D,
    ProblemContext,
    SymmetricStrip,
    a_of_s,
    caccioppoli_check,
    geometry,
    reduced_line_weight,
)
from barylab.errors import DegenerateSetError, DomainError

from conftest import mp_a_of_s, mp_phi, mp_tail, rel_err


# ---------------------------------------------------------------- context


def test_context_validation():
    ProblemContext(s=10.0, eps0=1.3)
    ProblemContext(s=10.0, eps0=1.3, lambda_cap=11.0)
    with pytest.raises(DomainError):
        ProblemContext(s=-1.0, eps0=1.3)
    with pytest.raises(DomainError):
        ProblemContext(s=10.0, eps0=-0.1)
    with pytest.raises(DomainError):
        ProblemContext(s=10.0, eps0=1.3, lambda_cap=10.5)
    with pytest.raises(DomainError):
        ProblemContext(s=math.nan, eps0=1.3)


def test_working_window_flag():
    assert ProblemContext(s=10.0, eps0=1.2).in_working_window
    assert ProblemContext(s=10.0, eps0=1.3).in_working_window
    assert ProblemContext(s=10.0, eps0=1.4).in_working_window
    assert not ProblemContext(s=10.0, eps0=1.19).in_working_window
    assert not ProblemContext(s=10.0, eps0=1.41).in_working_window


def test_eps_raw_value_and_guards():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    expected = 1.3 * math.sqrt(2.0 * math.pi) * math.exp(4.5) / 9.0
    assert ctx.eps_raw() == pytest.approx(expected, rel=1e-15)
    with pytest.raises(DomainError):
        ProblemContext(s=36.0, eps0=1.3).eps_raw()
    with pytest.raises(DomainError):
        ProblemContext(s=0.0, eps0=1.3).eps_raw()


# ---------------------------------------------------------------- a_of_s


def test_a_of_s_at_zero_is_upper_quartile():
    assert abs(a_of_s(0.0) - float(mp_a_of_s(0))) <= 1e-14
    # at s = 0 the strip [-a, a] holds measure 1/2, so a = Phi^{-1}(3/4)
    assert abs(float(mp_phi(mp_a_of_s(0))) - 0.75) <= 1e-45


def test_a_of_s_solves_volume_equation_to_high_precision():
    for s in [0.5, 3.0, 10.0, 20.0, 40.0]:
        a = a_of_s(s)
        resid = 2 * mp_tail(a) / mp_tail(s) - 1
        assert abs(float(resid)) <= 2e-12


def test_a_of_s_exceeds_s_and_gap_shrinks():
    s = np.linspace(0.0, 40.0, 81)
    gaps = np.array([a_of_s(float(v)) - v for v in s])
    assert np.all(gaps > 0.0)
    # the excess decays like log(2)/s
    assert abs(40.0 * gaps[-1] - math.log(2.0)) < 2e-3


def test_a_of_s_matches_oracle_on_grid():
    for s in [0.0, 1.0, 5.0, 15.0, 30.0]:
        assert abs(a_of_s(s) - float(mp_a_of_s(s))) <= 1e-12 * max(1.0, s)


# ---------------------------------------------------------------- geometry


def test_half_space_geometry_at_its_own_level():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    g = geometry(HalfSpace(3.0), ctx)
    assert g.p_hat == pytest.approx(1.0, rel=1e-14)
    assert g.b_hat_norm == pytest.approx(1.0, rel=1e-14)
    assert g.b_hat[0] == pytest.approx(-1.0, rel=1e-14)  # barycenter opposes the normal
    assert g.measure == pytest.approx(float(mp_phi(3.0)), abs=1e-15)


def test_half_space_geometry_rotation_equivariant():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    w = reduced_line_weight(3.0, 2.5)
    g = geometry(HalfSpace(2.5, direction=(0.6, 0.8)), ctx)
    assert g.p_hat == pytest.approx(w, rel=1e-14)
    assert g.b_hat[0] == pytest.approx(-0.6 * w, rel=1e-14)
    assert g.b_hat[1] == pytest.approx(-0.8 * w, rel=1e-14)
    assert g.measure == pytest.approx(float(mp_phi(2.5)), abs=1e-15)


def test_strip_geometry_is_balanced():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    a = a_of_s(3.0)
    g = geometry(SymmetricStrip(a), ctx)
    assert g.b_hat == (0.0, 0.0)
    assert g.p_hat == pytest.approx(2.0 * reduced_line_weight(3.0, a), rel=1e-14)
    assert abs(g.measure - float(mp_phi(3.0))) <= 1e-13


def test_interval_geometry_signs_and_infinite_ray():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    wl, wr = reduced_line_weight(3.0, 2.0), reduced_line_weight(3.0, 1.5)
    g = geometry(Interval1D(-2.0, 1.5), ctx)
    assert g.p_hat == pytest.approx(wl + wr, rel=1e-14)
    assert g.b_hat[0] == pytest.approx(wl - wr, rel=1e-14)
    assert g.b_hat[1] == 0.0
    assert g.measure == pytest.approx(float(mp_phi(1.5) - mp_phi(-2.0)), abs=1e-15)

    ray = geometry(Interval1D(-2.0, math.inf), ctx)
    assert ray.p_hat == pytest.approx(wl, rel=1e-14)
    assert ray.b_hat[0] == pytest.approx(wl, rel=1e-14)


def test_ball_geometry_closed_forms_r2():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    r = 1.5
    g = geometry(Ball(r), ctx)
    assert g.measure == pytest.approx(1.0 - math.exp(-0.5 * r * r), rel=1e-14)
    expected_p = math.sqrt(2.0 * math.pi) * r * math.exp(0.5 * (9.0 - r * r))
    assert g.p_hat == pytest.approx(expected_p, rel=1e-13)
    assert g.b_hat == (0.0, 0.0)

    comp = geometry(Ball(r, complement=True), ctx)
    assert comp.measure == pytest.approx(1.0 - g.measure, rel=1e-13)
    assert comp.p_hat == pytest.approx(g.p_hat, rel=1e-14)


def test_ball_geometry_r3_against_radial_quadrature():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    r = 1.5
    g = geometry(Ball(r, dimension=3), ctx)
    # gamma_3(B_r) = integral_0^r rho^2 e^{-rho^2/2} d rho * (4 pi) / (2 pi)^{3/2}
    measure = float(
        mp.quad(lambda t: t * t * mp.e ** (-t * t / 2), [0, r])
        * 4 * mp.pi / (2 * mp.pi) ** mp.mpf("1.5")
    )
    assert g.measure == pytest.approx(measure, rel=1e-12)
    # surface 4 pi r^2 carrying density e^{-r^2/2} / (2 pi)^{3/2}
    p_raw = 4.0 * math.pi * r * r * math.exp(-0.5 * r * r) / (2.0 * math.pi) ** 1.5
    assert g.p_hat == pytest.approx(math.sqrt(2.0 * math.pi) * math.exp(4.5) * p_raw, rel=1e-12)


def test_degenerate_measure_is_flagged_not_crashed():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    g = geometry(HalfSpace(-41.0), ctx)
    assert g.degenerate
    assert g.measure == 0.0


def test_degenerate_constructions_rejected():
    with pytest.raises(DegenerateSetError):
        Interval1D(0.5, 2.0)
    with pytest.raises(DegenerateSetError):
        Interval1D(-1.0, -0.5)
    with pytest.raises(DegenerateSetError):
        Interval1D(-math.inf, 2.0)
    with pytest.raises(DegenerateSetError):
        Interval1D(math.nan, 2.0)
    with pytest.raises(DegenerateSetError):
        Ball(-1.0)
    with pytest.raises(DegenerateSetError):
        Ball(1.0, dimension=4)
    with pytest.raises(DegenerateSetError):
        SymmetricStrip(0.0)
    with pytest.raises(DegenerateSetError):
        SymmetricStrip(-2.0)
    with pytest.raises(DegenerateSetError):
        HalfSpace(math.inf)
    with pytest.raises(DegenerateSetError):
        HalfSpace(1.0, direction=(0.0, 0.0))


def test_reduced_line_weight_cancellation_free_form():
    for s, u in [(3.0, 2.0), (10.0, 10.5), (20.0, 19.9), (40.0, 40.02)]:
        exact = float(mp.e ** ((mp.mpf(s) ** 2 - mp.mpf(u) ** 2) / 2))
        assert rel_err(reduced_line_weight(s, u), exact) <= 1e-14


@settings(max_examples=80, deadline=None)
@given(
    st.floats(min_value=-8.0, max_value=-0.01),
    st.floats(min_value=0.01, max_value=8.0),
)
def test_barycenter_never_exceeds_perimeter(left, right):
    ctx = ProblemContext(s=3.0, eps0=1.3)
    g = geometry(Interval1D(left, right), ctx)
    assert g.b_hat_norm <= g.p_hat * (1.0 + 1e-14)


def test_minimizing_candidates_have_moderate_perimeter():
    # both canonical competitors keep p_hat within [1/4, 1 + 1/s^2]
    for s in np.linspace(1.0, 40.0, 40):
        ctx = ProblemContext(s=float(s), eps0=1.3)
        ph_h = geometry(HalfSpace(float(s)), ctx).p_hat
        ph_d = geometry(SymmetricStrip(a_of_s(float(s))), ctx).p_hat
        for ph in (ph_h, ph_d):
            assert 0.25 <= ph <= 1.0 + 1.0 / (s * s) + 1e-12


# ---------------------------------------------------------- membership test


def test_cell_inequality_half_space_closed_forms():
    s = 3.0
    ctx = ProblemContext(s=s, eps0=1.3)
    normal = caccioppoli_check(HalfSpace(s), ctx, omega=(1.0, 0.0))
    assert normal.applicable and normal.holds and normal.centered_holds
    assert normal.lhs == pytest.approx(s * s, rel=1e-13)
    assert normal.rhs == pytest.approx((s + 2.0) ** 2 + 8.0, rel=1e-13)
    assert normal.centered_lhs == pytest.approx(0.0, abs=1e-13)
    assert normal.centered_rhs == pytest.approx(8.0, rel=1e-13)

    tang = caccioppoli_check(HalfSpace(s), ctx, omega=(0.0, 1.0))
    assert tang.holds
    assert tang.lhs == pytest.approx(1.0, rel=1e-13)  # unit second moment along the line
    assert tang.rhs == pytest.approx(8.0, rel=1e-13)


def test_cell_inequality_strip_closed_forms():
    s = 3.0
    ctx = ProblemContext(s=s, eps0=1.3)
    a = a_of_s(s)
    p_d = 2.0 * reduced_line_weight(s, a)
    rep = caccioppoli_check(SymmetricStrip(a), ctx, omega=(1.0, 0.0))
    assert rep.applicable and rep.holds and rep.centered_holds
    assert rep.lhs == pytest.approx(a * a * p_d, rel=1e-13)
    assert rep.rhs == pytest.approx(((s + 2.0) ** 2 + 8.0) * p_d, rel=1e-13)
    # the strip barycenter sits at the origin: centering changes nothing
    assert rep.centered_lhs == pytest.approx(rep.lhs, rel=1e-13)
    assert rep.centered_rhs == pytest.approx(rep.rhs, rel=1e-13)


def test_cell_inequality_not_applicable_off_family():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    assert not caccioppoli_check(Ball(1.0), ctx, omega=(1.0, 0.0)).applicable
    assert not caccioppoli_check(Interval1D(-1.0, 1.0), ctx, omega=(1.0, 0.0)).applicable
