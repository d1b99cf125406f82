"""Reduced evaluation of the penalized functional and its derived constants.

The functional on sets of Gaussian volume phi(s) is

    F(E) = P_gamma(E) + eps * sqrt(pi/2) * |b(E)|^2
         + Lambda * sqrt(2*pi) * |gamma(E) - phi(s)|,  Lambda = s + 1,

with eps carried as eps0 via eps = eps0 * sqrt(2*pi) * exp(s^2/2) / s^2.
Multiplying through by exp(s^2/2) gives the reduced form actually computed:

    F_hat = p_hat + eps0 * |b_hat|^2 / (2 s^2) + (s + 1) * |v_hat|,

where v_hat = sqrt(2*pi) * exp(s^2/2) * (gamma(E) - phi(s)) is the signed
reduced volume deficit.  The reduction identity
eps * sqrt(pi/2) * |b|^2 = eps0 * |b_hat|^2 * exp(-s^2/2) / (2 s^2) is pinned
by a unit test against an unscaled evaluation at small s.

Anchors: a half-space at level s has F_hat = 1 + eps0/(2 s^2) exactly; the
symmetric strip has F_hat = p_hat_D.  Equating the two defines the threshold
eps0(s) = 2 s^2 (p_hat_D - 1) -> 2 ln 2, and the gap p_hat_D - 1 also gives
the sharp constant c_s = sqrt(2*pi) (p_hat_D - 1) of the quantitative
inequality p_hat(E) - 1 >= (c_s / sqrt(2*pi)) * beta_hat(E).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq

from . import gaussian
from .candidates import (
    Ball,
    CandidateSet,
    HalfSpace,
    Interval1D,
    ProblemContext,
    ReducedGeometry,
    SymmetricStrip,
    a_of_s,
    geometry,
    reduced_line_weight,
)
from .errors import DomainError

__all__ = [
    "EnergyBreakdown",
    "evaluate",
    "volume_deficit_hat",
    "strip_p_hat_minus_1",
    "strip_p_hat",
    "threshold_eps0",
    "quantitative_constant",
    "strong_asymmetry",
    "half_space_f_hat",
    "disk_p_hat_equal_volume",
    "disk_strip_log_gap",
    "ball_strip_crossover",
]


@dataclass(frozen=True)
class EnergyBreakdown:
    """Reduced energy terms: total = p_hat + barycenter_term + penalty."""

    p_hat: float
    barycenter_term: float
    volume_deficit: float  # v_hat, signed
    penalty: float  # (s + 1) * |v_hat|
    total: float


def _reduced_tail(s: float, x: float) -> float:
    """T_hat(x) = exp(s^2/2) * T(x) = m(x) * exp((s-x)(s+x)/2)."""
    if math.isinf(x):
        return 0.0 if x > 0 else math.exp(gaussian.LOG_SQRT_2PI + 0.5 * s * s)
    if x > -30.0:
        return gaussian.mills(x) * reduced_line_weight(s, x)
    return math.exp(0.5 * s * s + gaussian.log_tail(x))


def volume_deficit_hat(candidate: CandidateSet, ctx: ProblemContext) -> float:
    """v_hat = sqrt(2*pi) * exp(s^2/2) * (gamma(E) - phi(s)), cancellation-free.

    Written through reduced tails T_hat so that candidates near the exact
    volume give v_hat near 0 without forming the difference of two
    quantities that are both within rounding of phi(s).
    """
    s = ctx.s
    m_s = gaussian.mills(s)
    if isinstance(candidate, HalfSpace):
        return m_s - _reduced_tail(s, candidate.level)
    if isinstance(candidate, SymmetricStrip):
        return m_s - 2.0 * _reduced_tail(s, candidate.half_width)
    if isinstance(candidate, Interval1D):
        return m_s - _reduced_tail(s, -candidate.left) - _reduced_tail(s, candidate.right)
    if isinstance(candidate, Ball):
        r = candidate.radius
        w_r = reduced_line_weight(s, r)
        if candidate.dimension == 2:
            inside = gaussian.SQRT_2PI * w_r  # sqrt(2*pi) e^{(s^2-r^2)/2}
        else:
            # Upper chi^2_3 mass: Q(r) = sqrt(2/pi) r e^{-r^2/2} + 2 T(r)/sqrt(2*pi).
            inside = 2.0 * (r + gaussian.mills(r)) * w_r
        if not candidate.complement:
            return m_s - inside
        # gamma(E^c) - phi(s) = T(s)/sqrt(2*pi) - gamma(B); huge for large s.
        g = geometry(candidate, ctx)
        scale = 0.5 * s * s + gaussian.LOG_SQRT_2PI
        inside_measure = 1.0 - g.measure
        if scale > 700.0:  # exp overflows; the deficit is astronomically negative
            return -math.inf
        return m_s - math.exp(scale) * inside_measure
    raise DomainError(f"unsupported candidate type: {type(candidate).__name__}")


def evaluate(candidate: CandidateSet, ctx: ProblemContext) -> EnergyBreakdown:
    """EnergyBreakdown of a candidate set in reduced units."""
    geo: ReducedGeometry = geometry(candidate, ctx)
    s = ctx.s
    if s == 0.0:
        raise DomainError("the reduced barycenter term requires s > 0")
    v_hat = volume_deficit_hat(candidate, ctx)
    bary = ctx.eps0 * geo.b_hat_norm**2 / (2.0 * s * s)
    penalty = ctx.lambda_cap * abs(v_hat)
    return EnergyBreakdown(
        p_hat=geo.p_hat,
        barycenter_term=bary,
        volume_deficit=v_hat,
        penalty=penalty,
        total=geo.p_hat + bary + penalty,
    )


def strip_p_hat_minus_1(s: float) -> float:
    """p_hat_D(s) - 1 without cancellation.

    From 2 T(a) = T(s) one gets p_hat_D = 2 exp((s^2-a^2)/2) = m(s)/m(a)
    exactly, so the gap is expm1(log m(s) - log m(a)); this keeps full
    relative precision even though the gap decays like ln(2)/s^2.
    """
    if not (math.isfinite(s) and s > 0.0):
        raise DomainError(f"s must be finite and > 0, got {s}")
    a = a_of_s(s)
    return math.expm1(gaussian.log_mills(s) - gaussian.log_mills(a))


def strip_p_hat(s: float) -> float:
    """Reduced perimeter p_hat_D(s) of the volume-matched symmetric strip."""
    return 1.0 + strip_p_hat_minus_1(s)


def threshold_eps0(s: float) -> float:
    """eps0 at which the half-space and strip energies tie: 2 s^2 (p_hat_D - 1).

    Tends to 2 ln 2 as s -> infinity and lies in (6/5, 7/5) on s in [10, 40].
    """
    return 2.0 * s * s * strip_p_hat_minus_1(s)


def quantitative_constant(s: float) -> float:
    """Sharp constant c_s = sqrt(2*pi) (p_hat_D(s) - 1) > 0."""
    return gaussian.SQRT_2PI * strip_p_hat_minus_1(s)


def half_space_f_hat(ctx: ProblemContext) -> float:
    """F_hat of the half-space at level s: exactly 1 + eps0 / (2 s^2)."""
    if ctx.s <= 0.0:
        raise DomainError("requires s > 0")
    return 1.0 + ctx.eps0 / (2.0 * ctx.s * ctx.s)


def disk_strip_log_gap(s: float) -> float:
    """ln p_hat(disk) - ln p_hat(strip) at equal Gaussian volume Phi(-s).

    The planar disk of measure Phi(-s) has radius r with e^{-r^2/2} = Phi(s),
    i.e. r^2 = -2 log Phi(s), evaluated through log_ndtr so no digits are
    lost as Phi(s) -> 1.  Working with logarithms keeps the comparison
    finite for every s even though p_hat(disk) itself grows like e^{s^2/4}.
    """
    if not (math.isfinite(s) and s >= 0.0):
        raise DomainError(f"s must be finite and >= 0, got {s}")
    log_phi = gaussian.log_tail(-s) - gaussian.LOG_SQRT_2PI
    r2 = -2.0 * log_phi
    log_disk = gaussian.LOG_SQRT_2PI + 0.5 * math.log(r2) + 0.5 * (s * s - r2)
    a = a_of_s(s) if s > 0.0 else gaussian.phi_inv(0.75)
    log_strip = math.log(2.0) + 0.5 * (s - a) * (s + a)
    return log_disk - log_strip


def disk_p_hat_equal_volume(s: float) -> float:
    """Reduced perimeter of the planar disk with Gaussian measure Phi(-s)."""
    if s > 35.0:
        raise DomainError("disk p_hat overflows for s > 35; use disk_strip_log_gap")
    a = a_of_s(s) if s > 0.0 else gaussian.phi_inv(0.75)
    log_strip = math.log(2.0) + 0.5 * (s - a) * (s + a)
    return math.exp(disk_strip_log_gap(s) + log_strip)


def ball_strip_crossover(s_lo: float = 1e-3, s_hi: float = 6.0) -> float:
    """The s beyond which the strip beats the equal-volume planar disk.

    At volume 1/2 the disk has smaller reduced perimeter; as the volume
    shrinks the disk's perimeter blows up while the strip's stays near 1,
    so the sign of disk_strip_log_gap changes exactly once on [s_lo, s_hi].
    """
    lo = disk_strip_log_gap(s_lo)
    hi = disk_strip_log_gap(s_hi)
    if not (lo < 0.0 < hi):
        raise DomainError(
            f"no sign change of the disk-strip gap on [{s_lo}, {s_hi}]"
        )
    return float(brentq(disk_strip_log_gap, s_lo, s_hi, xtol=1e-12))


def strong_asymmetry(candidate: CandidateSet, ctx: ProblemContext) -> float:
    """Reduced barycenter distance to the half-space family.

    beta(E) = min over unit omega of |b(E) - b(H_omega,s)| reduces to
    beta_hat = | |b_hat(E)| - 1 | because every half-space at level s has
    |b_hat| = 1 and the direction is free.  The returned beta_hat is the
    log-safe representation; the raw distance is
    beta = beta_hat * exp(-s^2/2) / sqrt(2*pi), which underflows at large s.
    """
    geo = geometry(candidate, ctx)
    return abs(geo.b_hat_norm - 1.0)
