"""Reduced energy, phase threshold, and ball-versus-strip comparisons."""

import math

import numpy as np
import pytest
from mpmath import mp

from barylab.candidates import (
    Ball,
    HalfSpace,
    Interval1D,
    ProblemContext,
    SymmetricStrip,
    a_of_s,
)
from barylab.energy import (
    ball_strip_crossover,
    disk_p_hat_equal_volume,
    disk_strip_log_gap,
    evaluate,
    half_space_f_hat,
    quantitative_constant,
    strip_p_hat,
    strip_p_hat_minus_1,
    strong_asymmetry,
    threshold_eps0,
    volume_deficit_hat,
)
from barylab.errors import DomainError

from conftest import mp_a_of_s, mp_mills, mp_phi, mp_tail, rel_err

SQRT_2PI = math.sqrt(2.0 * math.pi)


def mp_reduced_total(candidate, s, eps0):
    """Independent 50-digit evaluation of the reduced energy of an interval
    or half-line, from the raw Gaussian quantities: perimeter as a sum of
    density values, barycenter as the exact first-moment integral, volume
    through the CDF, all rescaled by sqrt(2*pi) e^{s^2/2} afterwards."""
    s = mp.mpf(s)
    scale = mp.e ** (s * s / 2)
    if isinstance(candidate, HalfSpace):
        pieces = [(mp.mpf("-inf"), mp.mpf(candidate.level))]
    else:
        pieces = [(mp.mpf(candidate.left), mp.mpf(candidate.right))]
    dens = lambda x: mp.e ** (-x * x / 2) / mp.sqrt(2 * mp.pi)
    perim = mp.mpf(0)
    bary = mp.mpf(0)
    measure = mp.mpf(0)
    for lo, hi in pieces:
        for endpoint in (lo, hi):
            if mp.isfinite(endpoint):
                perim += dens(endpoint)
        # integral of t * density over (lo, hi)
        lo_term = dens(lo) if mp.isfinite(lo) else mp.mpf(0)
        hi_term = dens(hi) if mp.isfinite(hi) else mp.mpf(0)
        bary += lo_term - hi_term
        measure += mp_phi(hi) - mp_phi(lo)
    p_hat = mp.sqrt(2 * mp.pi) * scale * perim
    b_hat = mp.sqrt(2 * mp.pi) * scale * bary
    v_hat = mp.sqrt(2 * mp.pi) * scale * (measure - mp_phi(s))
    return p_hat + eps0 * b_hat * b_hat / (2 * s * s) + (s + 1) * abs(v_hat)


# ------------------------------------------------------------ evaluate


def test_half_space_energy_closed_form():
    for s in (1.0, 3.0, 10.0, 40.0):
        ctx = ProblemContext(s=s, eps0=1.3)
        br = evaluate(HalfSpace(s), ctx)
        assert br.p_hat == pytest.approx(1.0, rel=1e-14)
        assert br.volume_deficit == 0.0
        assert br.penalty == 0.0
        assert br.total == pytest.approx(1.0 + 1.3 / (2.0 * s * s), rel=1e-14)
        assert br.total == pytest.approx(half_space_f_hat(ctx), rel=1e-15)


def test_strip_energy_closed_form():
    for s in (1.0, 3.0, 10.0, 30.0):
        ctx = ProblemContext(s=s, eps0=1.3)
        br = evaluate(SymmetricStrip(a_of_s(s)), ctx)
        assert br.barycenter_term == 0.0
        assert abs(br.volume_deficit) <= 1e-11  # exact-volume strip, no cancellation
        assert br.total == pytest.approx(strip_p_hat(s), rel=1e-11)


def test_reduction_identity_against_raw_quantities():
    # the reduced breakdown must agree with a 50-digit evaluation built
    # from raw (unscaled) perimeter, barycenter, and measure
    for s, eps0 in [(1.0, 0.7), (3.0, 1.3), (5.0, 1.4)]:
        ctx = ProblemContext(s=s, eps0=eps0)
        for cand in [
            HalfSpace(s),
            HalfSpace(s - 0.4),
            Interval1D(-a_of_s(s), a_of_s(s)),
            Interval1D(-s - 1.0, s + 0.5),
            Interval1D(-2.0, math.inf),
        ]:
            expected = float(mp_reduced_total(cand, s, eps0))
            assert rel_err(evaluate(cand, ctx).total, expected) <= 1e-11


def test_breakdown_components_sum_to_total():
    ctx = ProblemContext(s=3.0, eps0=1.3)
    for cand in [HalfSpace(2.5), Interval1D(-2.0, 4.0), Ball(1.2), SymmetricStrip(1.0)]:
        br = evaluate(cand, ctx)
        assert br.total == pytest.approx(
            br.p_hat + br.barycenter_term + br.penalty, rel=1e-14
        )
        assert br.penalty == pytest.approx((3.0 + 1.0) * abs(br.volume_deficit), rel=1e-14)


def test_volume_deficit_cancellation_free_far_out():
    # at s = 30 the raw tails underflow; the signed deficit must still
    # come out at its true reduced scale instead of collapsing to 0 or noise
    s = 30.0
    ctx = ProblemContext(s=s, eps0=1.3)
    d = volume_deficit_hat(HalfSpace(s + 0.01), ctx)
    # Phi(s + h) - Phi(s) = (T(s) - T(s + h)) / sqrt(2 pi); going through
    # the CDF directly would itself cancel at 50 digits
    expected = float(mp.e ** (mp.mpf(s) ** 2 / 2) * (mp_tail(s) - mp_tail(s + 0.01)))
    assert rel_err(d, expected) <= 1e-11
    assert volume_deficit_hat(HalfSpace(s), ctx) == 0.0


def test_penalty_pushes_toward_correct_volume():
    # along a path of intervals approaching the exact volume from below,
    # the energy strictly decreases: the linear penalty dominates the
    # perimeter and barycenter variations
    s = 3.0
    ctx = ProblemContext(s=s, eps0=1.3)
    a = a_of_s(s)
    rights = np.linspace(a - 0.8, a, 9)
    totals = [evaluate(Interval1D(-a, float(r)), ctx).total for r in rights]
    assert all(t2 < t1 for t1, t2 in zip(totals, totals[1:]))


# ------------------------------------------------ strip excess and threshold


def test_strip_excess_matches_mills_ratio_oracle():
    for s in (1.0, 10.0, 20.0, 40.0):
        excess = strip_p_hat_minus_1(s)
        expected = float(mp_mills(s) / mp_mills(mp_a_of_s(s)) - 1)
        assert rel_err(excess, expected) <= 1e-12
        assert excess > 0.0


def test_threshold_identity_and_window():
    for s in (10.0, 20.0, 40.0):
        th = threshold_eps0(s)
        assert th == pytest.approx(2.0 * s * s * strip_p_hat_minus_1(s), rel=1e-14)
        # at the threshold the two closed-form energies coincide
        ctx = ProblemContext(s=s, eps0=th)
        hs = evaluate(HalfSpace(s), ctx).total
        strip = evaluate(SymmetricStrip(a_of_s(s)), ctx).total
        assert abs(hs - strip) <= 1e-12 * hs


def test_energy_order_flips_exactly_at_threshold():
    # below the threshold the half-space is cheaper (strip - half_space > 0),
    # above it the strip takes over; the difference is (th - eps0)/(2 s^2)
    s = 10.0
    th = threshold_eps0(s)
    for eps0, sign in [(th - 1e-3, 1.0), (th + 1e-3, -1.0)]:
        ctx = ProblemContext(s=s, eps0=eps0)
        diff = evaluate(SymmetricStrip(a_of_s(s)), ctx).total - evaluate(HalfSpace(s), ctx).total
        assert math.copysign(1.0, diff) == sign
        assert diff == pytest.approx((th - eps0) / (2.0 * s * s), rel=1e-9)


def test_quantitative_constant_identity_and_positivity():
    s_grid = np.linspace(1.0, 40.0, 40)
    for s in s_grid:
        c = quantitative_constant(float(s))
        assert c > 0.0
        assert c == pytest.approx(SQRT_2PI * strip_p_hat_minus_1(float(s)), rel=1e-14)


def test_strong_asymmetry_of_canonical_candidates():
    ctx = ProblemContext(s=10.0, eps0=1.3)
    assert strong_asymmetry(HalfSpace(10.0), ctx) == pytest.approx(0.0, abs=1e-14)
    assert strong_asymmetry(SymmetricStrip(a_of_s(10.0)), ctx) == pytest.approx(1.0, rel=1e-14)


# ------------------------------------------------------ ball versus strip


def test_disk_perimeter_at_half_volume():
    # volume-1/2 disk: r = sqrt(2 log 2), reduced perimeter sqrt(2 pi) r e^{-r^2/2}
    r = math.sqrt(2.0 * math.log(2.0))
    expected = SQRT_2PI * r * 0.5
    assert disk_p_hat_equal_volume(0.0) == pytest.approx(expected, rel=1e-13)


def test_disk_strip_log_gap_sign_change():
    star = ball_strip_crossover()
    assert 0.0 < star < 1.0
    assert disk_strip_log_gap(star - 0.05) * disk_strip_log_gap(star + 0.05) < 0.0
    assert abs(disk_strip_log_gap(star)) <= 1e-10


def test_disk_loses_to_strip_for_moderate_s():
    # beyond the crossover the disk has the larger perimeter
    for s in (0.5, 1.0, 3.0):
        assert disk_strip_log_gap(s) > 0.0


def test_guards_reject_unusable_scales():
    with pytest.raises(DomainError):
        strip_p_hat(0.0)
    with pytest.raises(DomainError):
        threshold_eps0(-1.0)
    with pytest.raises(DomainError):
        disk_p_hat_equal_volume(36.0)
    with pytest.raises(DomainError):
        evaluate(HalfSpace(1.0), ProblemContext(s=0.0, eps0=1.3))
