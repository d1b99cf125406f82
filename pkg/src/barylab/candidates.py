"""Candidate families and their closed-form reduced geometry.

The functional under study compares a half-space H = {<x, omega> < s}, the
symmetric strip D = {|<x, omega>| < a(s)} of equal Gaussian volume, single
intervals on the line, and centered balls.  Perimeters and barycenters of
all of these are elementary, but they live at scale exp(-s^2/2); everything
here is therefore carried in *reduced units*:

    p_hat = exp(s^2/2) * P_gamma(E)
    b_hat = sqrt(2*pi) * exp(s^2/2) * b(E)

with P_gamma the Gaussian perimeter (normalization (2*pi)^(-(n-1)/2)) and
b(E) = integral_E x dgamma the unnormalized barycenter.  Exponent
differences are always computed as (s - u)(s + u)/2, never as s^2/2 - u^2/2,
to avoid catastrophic cancellation at large s.

The divergence theorem gives |b_hat| <= p_hat for every set, with equality
exactly for half-spaces; that identity is the backbone of the energy
comparisons downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

from . import gaussian
from .errors import DegenerateSetError, DomainError

__all__ = [
    "ProblemContext",
    "HalfSpace",
    "SymmetricStrip",
    "Interval1D",
    "Ball",
    "ReducedGeometry",
    "CaccioppoliReport",
    "a_of_s",
    "geometry",
    "caccioppoli_check",
    "reduced_line_weight",
]


def _unit(direction) -> tuple[float, float]:
    v = np.asarray(direction, dtype=float)
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise DegenerateSetError(f"direction must be a finite 2-vector, got {direction!r}")
    n = float(np.hypot(v[0], v[1]))
    if n == 0.0:
        raise DegenerateSetError("direction must be nonzero")
    return (float(v[0] / n), float(v[1] / n))


@dataclass(frozen=True)
class ProblemContext:
    """The pair (s, eps0) in reduced units; fixes every scaling.

    The raw repulsion strength is eps = eps0 * sqrt(2*pi) * exp(s^2/2) / s^2;
    it is never materialized above s ~ 35 because it overflows while eps0
    stays O(1).  The volume penalty weight is lambda_cap = s + 1.
    """

    s: float
    eps0: float
    lambda_cap: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if not (math.isfinite(self.s) and self.s >= 0.0):
            raise DomainError(f"s must be finite and >= 0, got {self.s}")
        if not (math.isfinite(self.eps0) and self.eps0 >= 0.0):
            raise DomainError(f"eps0 must be finite and >= 0, got {self.eps0}")
        if self.lambda_cap is None:
            object.__setattr__(self, "lambda_cap", self.s + 1.0)
        elif self.lambda_cap != self.s + 1.0:
            raise DomainError("lambda_cap must equal s + 1")

    @property
    def in_working_window(self) -> bool:
        """Whether eps0 lies in the window [6/5, 7/5] of the analysis."""
        return 1.2 <= self.eps0 <= 1.4

    def eps_raw(self) -> float:
        """Raw eps = eps0 * sqrt(2*pi) * exp(s^2/2) / s^2 (small s only)."""
        if self.s > 35.0:
            raise DomainError("raw eps overflows for s > 35; stay in reduced units")
        if self.s == 0.0:
            raise DomainError("raw eps is undefined at s = 0")
        return self.eps0 * gaussian.SQRT_2PI * math.exp(0.5 * self.s * self.s) / (self.s * self.s)


@dataclass(frozen=True)
class HalfSpace:
    """{<x, direction> < level}."""

    level: float
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not math.isfinite(self.level):
            raise DegenerateSetError(f"level must be finite, got {self.level}")
        object.__setattr__(self, "direction", _unit(self.direction))


@dataclass(frozen=True)
class SymmetricStrip:
    """{|<x, direction>| < half_width}."""

    half_width: float
    direction: tuple[float, float] = (1.0, 0.0)

    def __post_init__(self):
        if not (math.isfinite(self.half_width) and self.half_width > 0.0):
            raise DegenerateSetError(f"half_width must be > 0, got {self.half_width}")
        object.__setattr__(self, "direction", _unit(self.direction))


@dataclass(frozen=True)
class Interval1D:
    """(left, right) on the line with left < 0 < right; right may be +inf.

    The embedded barycenter points along the +axis (first coordinate).
    """

    left: float
    right: float

    def __post_init__(self):
        if math.isnan(self.left) or math.isnan(self.right):
            raise DegenerateSetError("endpoints must not be NaN")
        if not (self.left < 0.0 < self.right):
            raise DegenerateSetError(
                f"endpoints must satisfy left < 0 < right, got ({self.left}, {self.right})"
            )
        if math.isinf(self.left):
            raise DegenerateSetError("left endpoint must be finite (mirror the set instead)")


@dataclass(frozen=True)
class Ball:
    """Centered ball of given radius in R^2 or R^3; complement flips it."""

    radius: float
    dimension: int = 2
    complement: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.radius) and self.radius > 0.0):
            raise DegenerateSetError(f"radius must be > 0, got {self.radius}")
        if self.dimension not in (2, 3):
            raise DegenerateSetError(f"dimension must be 2 or 3, got {self.dimension}")


CandidateSet = HalfSpace | SymmetricStrip | Interval1D | Ball


@dataclass(frozen=True)
class ReducedGeometry:
    """measure = gamma(E); p_hat, b_hat in reduced units (see module docstring)."""

    measure: float
    p_hat: float
    b_hat: tuple[float, float]

    @property
    def b_hat_norm(self) -> float:
        return float(np.hypot(self.b_hat[0], self.b_hat[1]))

    @property
    def degenerate(self) -> bool:
        """Zero or full measure to working precision."""
        return self.measure <= 0.0 or self.measure >= 1.0 or self.p_hat == 0.0


def reduced_line_weight(s: float, u: float) -> float:
    """exp((s^2 - u^2)/2), computed cancellation-free as (s-u)(s+u)/2."""
    return math.exp(0.5 * (s - u) * (s + u))


@lru_cache(maxsize=4096)
def a_of_s(s: float) -> float:
    """Half-width a > s of the symmetric strip with volume phi(s).

    Solves 2*T(a) = T(s) in log form for the gap delta = a - s:

        h(delta) = ln 2 + log m(s + delta) - log m(s) - delta*(s + delta/2)

    which is strictly decreasing (h' = -1/m), bracketed on [0, 2] for every
    s >= 0.  Working in delta keeps the residual at relative scale even when
    T(s) underflows.  Asymptotically a(s) = s + ln(2)/s + o(1/s).
    """
    if not (math.isfinite(s) and s >= 0.0):
        raise DomainError(f"s must be finite and >= 0, got {s}")
    log_m_s = gaussian.log_mills(s)

    def h(delta: float) -> float:
        return math.log(2.0) + gaussian.log_mills(s + delta) - log_m_s - delta * (s + 0.5 * delta)

    delta = optimize.brentq(h, 0.0, 2.0, xtol=5e-16, rtol=4 * np.finfo(float).eps)
    return s + delta


def _interval_geometry(s: float, x: float, y: float) -> ReducedGeometry:
    # x = |left| > 0; y may be +inf.
    measure = float(gaussian.phi(y) - gaussian.phi(-x)) if math.isfinite(y) else float(
        1.0 - gaussian.phi(-x)
    )
    e_x = reduced_line_weight(s, x)
    e_y = reduced_line_weight(s, y) if math.isfinite(y) else 0.0
    return ReducedGeometry(measure=measure, p_hat=e_x + e_y, b_hat=(e_x - e_y, 0.0))


def _ball_measure_r3(r: float) -> float:
    # gamma_3(B_r) by adaptive radial quadrature of the weighted area element.
    val, err = integrate.quad(
        lambda rho: rho * rho * math.exp(-0.5 * rho * rho), 0.0, r, epsabs=1e-13, epsrel=1e-13
    )
    if err > 1e-10:
        raise DomainError(f"radial quadrature failed to converge (err={err:g})")
    return math.sqrt(2.0 / math.pi) * val


def geometry(candidate: CandidateSet, ctx: ProblemContext) -> ReducedGeometry:
    """Closed-form reduced geometry of a candidate set.

    All fields stay finite in reduced units even at s = 40.  Degenerate
    results (measure 0 or 1 to working precision) are returned explicitly,
    never as NaN.
    """
    s = ctx.s
    if isinstance(candidate, HalfSpace):
        u = candidate.level
        w = reduced_line_weight(s, u)
        ox, oy = candidate.direction
        return ReducedGeometry(
            measure=float(gaussian.phi(u)), p_hat=w, b_hat=(-w * ox, -w * oy)
        )
    if isinstance(candidate, SymmetricStrip):
        a = candidate.half_width
        w = reduced_line_weight(s, a)
        return ReducedGeometry(
            measure=float(2.0 * gaussian.phi(a) - 1.0), p_hat=2.0 * w, b_hat=(0.0, 0.0)
        )
    if isinstance(candidate, Interval1D):
        return _interval_geometry(s, -candidate.left, candidate.right)
    if isinstance(candidate, Ball):
        r = candidate.radius
        if candidate.dimension == 2:
            measure = float(-math.expm1(-0.5 * r * r))
            p_hat = gaussian.SQRT_2PI * r * reduced_line_weight(s, r)
        else:
            measure = _ball_measure_r3(r)
            p_hat = 2.0 * r * r * reduced_line_weight(s, r)
        if candidate.complement:
            measure = 1.0 - measure
        return ReducedGeometry(measure=measure, p_hat=p_hat, b_hat=(0.0, 0.0))
    raise DomainError(f"unsupported candidate type: {type(candidate).__name__}")


@dataclass(frozen=True)
class CaccioppoliReport:
    """Both sides of the boundary-moment inequalities, in reduced units.

    Raw form:       int x_omega^2  <=  (s+2)^2 int nu_omega^2 + 8 P
    Centered form:  int (x_omega - mean)^2 <= (s+2)^2 int (nu_omega - mean)^2 + 8 P

    with all integrals over the boundary against the Gaussian surface
    measure and means taken against the same measure.
    """

    applicable: bool
    lhs: float = math.nan
    rhs: float = math.nan
    holds: bool = False
    centered_lhs: float = math.nan
    centered_rhs: float = math.nan
    centered_holds: bool = False


def _boundary_lines(candidate: CandidateSet) -> tuple[tuple[float, float], list[tuple[float, float]]]:
    """Axis direction and (offset, outward sign) per boundary line."""
    if isinstance(candidate, HalfSpace):
        return candidate.direction, [(candidate.level, +1.0)]
    if isinstance(candidate, SymmetricStrip):
        a = candidate.half_width
        return candidate.direction, [(a, +1.0), (-a, -1.0)]
    raise DomainError("boundary lines are defined for HalfSpace and SymmetricStrip only")


def caccioppoli_check(candidate: CandidateSet, ctx: ProblemContext, omega) -> CaccioppoliReport:
    """Evaluate the boundary-moment inequalities for straight-line boundaries.

    On a line {<x, axis> = u} the weighted length is exp(-u^2/2) per unit
    Gaussian transverse weight and the transverse second moment is 1, so both
    sides reduce to closed forms.  Unsupported variants yield an
    inapplicable report rather than an error.
    """
    try:
        axis, lines = _boundary_lines(candidate)
    except DomainError:
        return CaccioppoliReport(applicable=False)
    w_unit = _unit(omega)
    # Decompose omega along the candidate axis and its orthogonal complement.
    c = w_unit[0] * axis[0] + w_unit[1] * axis[1]
    d2 = max(0.0, 1.0 - c * c)

    s = ctx.s
    weights = np.array([reduced_line_weight(s, u) for u, _ in lines])
    offsets = np.array([u for u, _ in lines])
    signs = np.array([sg for _, sg in lines])
    total = float(weights.sum())  # p_hat

    x2 = float(np.dot(weights, c * c * offsets**2 + d2))
    nu2 = float(np.dot(weights, c * c * signs**2))
    rhs = (s + 2.0) ** 2 * nu2 + 8.0 * total

    x_mean = c * float(np.dot(weights, offsets)) / total
    nu_mean = c * float(np.dot(weights, signs)) / total
    x2_centered = float(np.dot(weights, (c * offsets - x_mean) ** 2 + d2))
    nu2_centered = float(np.dot(weights, (c * signs - nu_mean) ** 2))
    rhs_centered = (s + 2.0) ** 2 * nu2_centered + 8.0 * total

    slack = 1e-12 * max(1.0, abs(rhs), abs(x2))
    return CaccioppoliReport(
        applicable=True,
        lhs=x2,
        rhs=rhs,
        holds=x2 <= rhs + slack,
        centered_lhs=x2_centered,
        centered_rhs=rhs_centered,
        centered_holds=x2_centered <= rhs_centered + slack,
    )
