"""The one-dimensional problem: interval family, census, and global solve.

On the line, a set of Gaussian volume phi(s) that is a single interval can
be written as E_t = (-alpha(t), t) with the left magnitude alpha(t) >= s
determined by the volume constraint, equivalently T(alpha) = T(s) - T(t).
The reduced energy of the family is

    f_hat(t) = e_t + e_alpha + (eps0 / 2 s^2) * (e_alpha - e_t)^2,
    e_x = exp((s - x)(s + x)/2),

whose derivative is f_hat'(t) = e_t * G(t) with
G(t) = -(t - alpha) + (eps0/s^2) (t + alpha) b_t and b_t = e_alpha - e_t.
Critical points satisfy (eps0/s^2)(t + alpha) b_t = t - alpha, and the
second derivative at a critical point equals e_t * g(t) with

    g(t) = -(1 - eps b_t) + alpha'(t) (1 + eps b_t)
           + (eps0/s^2) (t + alpha)^2 e_t,        eps b_t := (eps0/s^2) b_t,

where alpha'(t) = -e_t / e_alpha in (-1, 0).  The search window is
[a(s), s + 8/s]: the symmetric interval sits at the left endpoint and the
family tends to the half-line (energy 1 + eps0/(2 s^2)) as t -> infinity.

The census walks g and f_hat' over the window to certify that the symmetric
interval is the only interior local minimum candidate; the global solve then
compares half-line, symmetric interval, and any family critical points.  A
brute-force union-of-intervals search (exact-volume projection, coordinate
descent over endpoints) provides an independent oracle at small s for the
claim that minimizers are single intervals or half-lines.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import gaussian
from .candidates import ProblemContext, a_of_s
from .energy import half_space_f_hat, strip_p_hat, threshold_eps0
from .errors import DomainError, InfeasibleVolumeError

__all__ = [
    "IntervalFamilyPoint",
    "alpha_of_t",
    "family_point",
    "f_hat",
    "f_hat_prime",
    "g_value",
    "GCensusReport",
    "g_census",
    "Minimize1DResult",
    "minimize1d",
    "BruteForceResult",
    "brute_force_unions",
]

_WINDOW_SLACK = 1e-9


def window(ctx: ProblemContext) -> tuple[float, float]:
    """Search window [a(s), s + 8/s] for the right endpoint t."""
    a = a_of_s(ctx.s)
    if ctx.s <= 0.0:
        raise DomainError("the interval family requires s > 0")
    return a, ctx.s + 8.0 / ctx.s


def _alpha_delta(t: np.ndarray, ctx: ProblemContext) -> np.ndarray:
    """Solve the volume constraint for delta = alpha(t) - s, vectorized.

    With rho = T(t)/T(s) (rho <= 1/2 on the window), the constraint
    T(s + delta) = T(s)(1 - rho) becomes

        q(delta) = log m(s+delta) - log m(s) - delta (s + delta/2)
                   - log(1 - rho) = 0,

    q strictly decreasing with q' = -1/m(s+delta).  A bracketed Newton
    iteration on [0, a - s] converges in a few steps to |q| < 5e-13, the
    evaluation floor of the log-Mills difference itself, i.e. volume
    residual at relative scale ~1e-13 even where T underflows.
    """
    s = ctx.s
    a = a_of_s(s)
    delta_a = a - s
    log_m_s = gaussian.log_mills(s)
    d = t - s
    log_rho = gaussian.log_mills(t) - log_m_s - d * (s + 0.5 * d)
    rho = np.exp(log_rho)
    target = np.log1p(-rho)

    lo = np.zeros_like(t)
    hi = np.full_like(t, delta_a)
    # Initial iterate: drop the slowly varying log-Mills drift, leaving
    # delta (s + delta/2) = -log(1 - rho), which solves in closed form.
    guess = np.sqrt(s * s - 2.0 * target) - s
    delta = np.clip(guess, 0.0, delta_a)
    for _ in range(100):
        q = gaussian.log_mills(s + delta) - log_m_s - delta * (s + 0.5 * delta) - target
        pos = q > 0.0
        lo = np.where(pos, delta, lo)
        hi = np.where(pos, hi, delta)
        if np.all(np.abs(q) < 5e-13):
            break
        m = gaussian.mills(s + delta)
        step = q * m  # Newton: delta - q/q' with q' = -1/m
        nxt = delta + step
        # Bisect only on strict overshoot; a step landing exactly on a
        # bracket edge is the boundary solution (t = a), not a failure.
        bad = (nxt < lo) | (nxt > hi)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        if np.all(nxt == delta):
            break
        delta = nxt
    return delta


def _validated_t(t, ctx: ProblemContext) -> tuple[np.ndarray, bool, float]:
    arr = np.asarray(t, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr).astype(float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"t must be finite, got {t!r}")
    a = a_of_s(ctx.s)
    if np.any(arr < a - _WINDOW_SLACK):
        raise DomainError(f"t must be >= a(s) = {a!r}; the family is undefined below it")
    arr = np.maximum(arr, a)
    return arr, scalar, a


def alpha_of_t(t, ctx: ProblemContext):
    """Left magnitude alpha(t) with alpha(a(s)) = a(s) and alpha -> s."""
    arr, scalar, _ = _validated_t(t, ctx)
    out = ctx.s + _alpha_delta(arr, ctx)
    return float(out[0]) if scalar else out


def _family_terms(arr: np.ndarray, ctx: ProblemContext):
    s = ctx.s
    delta = _alpha_delta(arr, ctx)
    alpha = s + delta
    d = arr - s
    e_t = np.exp(-d * (s + 0.5 * d))
    e_a = np.exp(-delta * (s + 0.5 * delta))
    b_t = e_a - e_t
    return alpha, e_t, e_a, b_t


def f_hat(t, ctx: ProblemContext):
    """Reduced energy of E_t = (-alpha(t), t)."""
    arr, scalar, _ = _validated_t(t, ctx)
    _, e_t, e_a, b_t = _family_terms(arr, ctx)
    out = e_t + e_a + ctx.eps0 * b_t * b_t / (2.0 * ctx.s * ctx.s)
    return float(out[0]) if scalar else out


def f_hat_prime(t, ctx: ProblemContext):
    """d f_hat / dt = e_t * [-(t - alpha) + (eps0/s^2)(t + alpha) b_t]."""
    arr, scalar, _ = _validated_t(t, ctx)
    alpha, e_t, _, b_t = _family_terms(arr, ctx)
    c = ctx.eps0 / (ctx.s * ctx.s)
    out = e_t * (-(arr - alpha) + c * (arr + alpha) * b_t)
    return float(out[0]) if scalar else out


def g_value(t, ctx: ProblemContext):
    """Second-derivative proxy: f_hat'' = e_t * g at critical points."""
    arr, scalar, _ = _validated_t(t, ctx)
    alpha, e_t, e_a, b_t = _family_terms(arr, ctx)
    c = ctx.eps0 / (ctx.s * ctx.s)
    alpha_prime = -e_t / e_a
    eb = c * b_t
    out = -(1.0 - eb) + alpha_prime * (1.0 + eb) + c * (arr + alpha) ** 2 * e_t
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class IntervalFamilyPoint:
    """Snapshot of the family at one right endpoint t."""

    t: float
    alpha: float
    z: float  # substitution coordinate, t = s + ln(z)/s
    f_hat: float
    fprime_hat: float
    g_value: float


def family_point(t: float, ctx: ProblemContext) -> IntervalFamilyPoint:
    arr, _, _ = _validated_t(t, ctx)
    alpha, e_t, e_a, b_t = _family_terms(arr, ctx)
    c = ctx.eps0 / (ctx.s * ctx.s)
    tt, al = float(arr[0]), float(alpha[0])
    et, ea, bt = float(e_t[0]), float(e_a[0]), float(b_t[0])
    fp = et * (-(tt - al) + c * (tt + al) * bt)
    g = -(1.0 - c * bt) + (-et / ea) * (1.0 + c * bt) + c * (tt + al) ** 2 * et
    return IntervalFamilyPoint(
        t=tt,
        alpha=al,
        z=math.exp(ctx.s * (tt - ctx.s)),
        f_hat=et + ea + 0.5 * c * bt * bt,
        fprime_hat=fp,
        g_value=g,
    )


@dataclass(frozen=True)
class GCensusReport:
    window: tuple[float, float]
    g_at_a: float
    decreasing: bool
    sign_changes: int
    interior_minima: tuple[float, ...]
    warning: bool  # parameters outside s >= 10, eps0 in [6/5, 7/5]


def _interior_critical_points(ctx: ProblemContext, n_grid: int) -> list[tuple[float, float]]:
    """Roots of f_hat' strictly inside the window, with their g values.

    Scans the smooth factor G(t) = f_hat'/e_t on the grid (skipping the left
    endpoint, an exact critical point) and refines each sign change by
    bracketed root-finding.
    """
    a, right = window(ctx)
    t = np.linspace(a, right, n_grid)
    alpha, e_t, _, b_t = _family_terms(t, ctx)
    c = ctx.eps0 / (ctx.s * ctx.s)
    big_g = -(t - alpha) + c * (t + alpha) * b_t

    roots: list[tuple[float, float]] = []
    sgn = np.sign(big_g[1:])
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        lo, hi = t[1 + i], t[2 + i]
        root = optimize.brentq(lambda x: f_hat_prime(x, ctx), lo, hi, xtol=1e-13)
        roots.append((root, g_value(root, ctx)))
    return roots


def g_census(ctx: ProblemContext, n_grid: int = 10_000) -> GCensusReport:
    """Sign structure of g and the local-minimum census of f_hat.

    Outside the regime s >= 10, eps0 in [6/5, 7/5] the census is still
    computed but flagged with warning=True.
    """
    a, right = window(ctx)
    warning = not (ctx.s >= 10.0 and ctx.in_working_window)
    t = np.linspace(a, right, n_grid)
    g = g_value(t, ctx)
    diffs = np.diff(g)
    decreasing = bool(np.all(diffs < 1e-12 * np.maximum(1.0, np.abs(g[:-1]))))
    sgn = np.sign(g)
    sign_changes = int(np.count_nonzero(sgn[:-1] * sgn[1:] < 0))
    minima = tuple(root for root, gr in _interior_critical_points(ctx, n_grid) if gr > 0.0)
    return GCensusReport(
        window=(a, right),
        g_at_a=float(g[0]),
        decreasing=decreasing,
        sign_changes=sign_changes,
        interior_minima=minima,
        warning=warning,
    )


@dataclass(frozen=True)
class Minimize1DResult:
    winner: str  # "half_line" | "symmetric_interval" | "interval" | "tie"
    t_star: float | None
    energies: dict[str, float]
    family_min_t: float
    family_min_f: float
    family_min_at_boundary: bool
    threshold: float
    warning: bool


_TIE_RTOL = 5e-13


def minimize1d(ctx: ProblemContext, n_grid: int = 10_000) -> Minimize1DResult:
    """Global 1D minimum among half-line, symmetric interval, and the family.

    The half-line energy 1 + eps0/(2 s^2) is compared in the same reduced
    units rather than as a t -> infinity limit.  A family minimum sitting at
    the window's upper boundary is reported as such (it shadows the
    half-line), never silently promoted to a winner.
    """
    a, right = window(ctx)
    warning = not ctx.s >= 10.0
    e_half = half_space_f_hat(ctx)
    e_strip = strip_p_hat(ctx.s)

    t = np.linspace(a, right, n_grid)
    f = f_hat(t, ctx)
    i_min = int(np.argmin(f))
    family_t, family_f = float(t[i_min]), float(f[i_min])
    interior = [
        (root, float(f_hat(root, ctx)))
        for root, gr in _interior_critical_points(ctx, n_grid)
        if gr > 0.0
    ]
    at_boundary = i_min >= n_grid - 2
    for root, froot in interior:
        if froot < family_f:
            family_t, family_f, at_boundary = root, froot, False

    energies = {"half_line": e_half, "symmetric_interval": e_strip, "family_best": family_f}
    scale = max(abs(e_half), abs(e_strip))
    best_interior = min(interior, key=lambda p: p[1]) if interior else None
    if best_interior is not None and best_interior[1] < min(e_half, e_strip) - _TIE_RTOL * scale:
        return Minimize1DResult(
            winner="interval",
            t_star=best_interior[0],
            energies=energies,
            family_min_t=family_t,
            family_min_f=family_f,
            family_min_at_boundary=at_boundary,
            threshold=threshold_eps0(ctx.s),
            warning=warning,
        )
    if abs(e_half - e_strip) <= _TIE_RTOL * scale:
        winner, t_star = "tie", None
    elif e_half < e_strip:
        winner, t_star = "half_line", None
    else:
        winner, t_star = "symmetric_interval", None
    return Minimize1DResult(
        winner=winner,
        t_star=t_star,
        energies=energies,
        family_min_t=family_t,
        family_min_f=family_f,
        family_min_at_boundary=at_boundary,
        threshold=threshold_eps0(ctx.s),
        warning=warning,
    )


# ---------------------------------------------------------------------------
# Brute-force oracle over unions of intervals (small s only)


@dataclass(frozen=True)
class BruteForceResult:
    intervals: tuple[tuple[float, float], ...]
    energy: float  # p_hat + barycenter term at exact volume
    p_hat: float
    b_hat: float
    n_intervals: int
    is_single_interval: bool
    is_half_line: bool
    starts_tried: int = field(default=0, compare=False)


def _e_weight(s: float, x: float) -> float:
    if math.isinf(x):
        return 0.0
    return math.exp(0.5 * (s - x) * (s + x))


def _union_energy(s: float, eps0: float, endpoints: list[float]) -> tuple[float, float, float]:
    p_hat = 0.0
    b_hat = 0.0
    for i in range(0, len(endpoints), 2):
        l, r = endpoints[i], endpoints[i + 1]
        el, er = _e_weight(s, l), _e_weight(s, r)
        p_hat += el + er
        b_hat += el - er
    bary = eps0 * b_hat * b_hat / (2.0 * s * s)
    return p_hat + bary, p_hat, b_hat


def _phi_ext(x: float) -> float:
    if math.isinf(x):
        return 0.0 if x < 0 else 1.0
    return float(gaussian.phi(x))


class _VolumeSolver:
    """Exact-volume projection: the rightmost endpoint absorbs the residual."""

    def __init__(self, ctx: ProblemContext, saturation: float):
        self.s = ctx.s
        self.eps0 = ctx.eps0
        self.mass = float(gaussian.phi(ctx.s))
        self.saturation = saturation

    def close(self, free: list[float]) -> list[float] | None:
        """Append the dependent endpoint; None if the volume is infeasible."""
        free = list(free)
        if free[0] <= -self.saturation:
            free[0] = -math.inf
        acc = 0.0
        for i in range(0, len(free) - 1, 2):
            acc += _phi_ext(free[i + 1]) - _phi_ext(free[i])
        last_left = free[-1]
        needed = self.mass - acc
        available = 1.0 - _phi_ext(last_left)
        if needed <= 1e-15 or needed > available + 1e-15:
            return None
        upper = available - needed  # mass beyond the dependent endpoint
        if upper <= 1e-15:
            return free + [math.inf]
        y = float(gaussian.phi_inv_upper(upper)) if upper < 0.5 else float(
            gaussian.phi_inv(needed + _phi_ext(last_left))
        )
        if y <= last_left:
            return None
        if y >= self.saturation:
            return free + [math.inf]
        return free + [y]

    # Finite sentinel for infeasible configurations: keeps the bounded
    # scalar minimizer's parabolic interpolation free of inf - inf = nan.
    INFEASIBLE = 1e100

    def energy(self, free: list[float]) -> float:
        closed = self.close(free)
        if closed is None:
            return self.INFEASIBLE
        for i in range(len(closed) - 1):
            if not closed[i] < closed[i + 1]:
                return self.INFEASIBLE
        return _union_energy(self.s, self.eps0, closed)[0]


def brute_force_unions(
    ctx: ProblemContext, k: int, grid_resolution: int = 9
) -> BruteForceResult:
    """Best union of at most k disjoint intervals at exact volume phi(s).

    Direct-quadrature regime (s <= 5).  Each interval count k' = 1..k is
    searched separately and the overall best kept: the exact-volume closure
    pins the number of intervals, so a k'-interval configuration cannot
    collapse to fewer intervals during polishing and "at most k" has to be
    realized by comparison across counts.  For each k' the 2k'-1 free
    endpoints are seeded on a coarse grid (all increasing combinations of
    `grid_resolution` points), each feasible start is polished by cyclic
    bounded line searches with the dependent endpoint re-solved at every
    evaluation, and the best configuration is cleaned up (zero-width
    intervals dropped, touching ones merged).  Endpoints reaching the
    saturation level s + 10/s are promoted to infinite rays, which is how
    half-lines are discovered.
    """
    if not 1 <= k <= 3:
        raise DomainError(f"k must be in 1..3, got {k}")
    if ctx.s > 5.0:
        raise DomainError("brute force is restricted to the direct regime s <= 5")
    if ctx.s <= 0.0:
        raise DomainError("requires s > 0")
    sat = ctx.s + 10.0 / max(ctx.s, 1.0)
    solver = _VolumeSolver(ctx, saturation=sat)
    if solver.mass >= 1.0:
        raise InfeasibleVolumeError("volume phi(s) indistinguishable from 1")

    grid = np.linspace(-sat, sat, grid_resolution)
    a = a_of_s(ctx.s)
    best_free: list[float] | None = None
    best_energy = math.inf
    starts_tried = 0
    for count in range(1, k + 1):
        n_free = 2 * count - 1
        starts = [list(c) for c in itertools.combinations(grid, n_free)]
        # Seeded starts: symmetric interval, near-half-line, family midpoint.
        seeds = [[-a], [-sat + 0.1], [-(ctx.s + 1.0 / ctx.s)]]
        for seed in seeds:
            pad = seed + [seed[-1] + (i + 1.0) * 1.7 for i in range(n_free - 1)]
            starts.append(pad[:n_free])
        starts_tried += len(starts)

        for start in starts:
            free = [float(v) for v in start]
            energy = solver.energy(free)
            if energy >= solver.INFEASIBLE:
                continue
            for _ in range(40):
                improved = False
                for j in range(n_free):
                    lo = free[j - 1] + 1e-9 if j > 0 else -sat - 2.0
                    hi = free[j + 1] - 1e-9 if j + 1 < n_free else sat

                    def along(x: float, j=j) -> float:
                        trial = list(free)
                        trial[j] = x
                        return solver.energy(trial)

                    if hi - lo < 1e-8:
                        continue
                    res = optimize.minimize_scalar(
                        along, bounds=(lo, hi), method="bounded",
                        options={"xatol": 1e-10},
                    )
                    if res.fun < energy - 1e-14:
                        free[j] = float(res.x)
                        energy = float(res.fun)
                        improved = True
                if not improved:
                    break
            if energy < best_energy:
                best_energy = energy
                best_free = free

    if best_free is None:
        raise InfeasibleVolumeError(f"no feasible union of {k} intervals found")
    closed = solver.close(best_free)
    assert closed is not None

    # Cleanup: drop zero-width intervals, merge touching ones.
    pairs = [(closed[i], closed[i + 1]) for i in range(0, len(closed), 2)]
    pairs = [p for p in pairs if (p[1] - p[0]) > 1e-7]
    merged: list[list[float]] = []
    for l, r in sorted(pairs):
        if merged and l - merged[-1][1] < 1e-7:
            merged[-1][1] = r
        else:
            merged.append([l, r])
    flat = [v for pair in merged for v in pair]
    energy, p_hat, b_hat = _union_energy(ctx.s, ctx.eps0, flat)
    return BruteForceResult(
        intervals=tuple((l, r) for l, r in merged),
        energy=energy,
        p_hat=p_hat,
        b_hat=b_hat,
        n_intervals=len(merged),
        is_single_interval=len(merged) == 1 and all(math.isfinite(v) for v in flat),
        is_half_line=len(merged) == 1 and any(math.isinf(v) for v in flat),
        starts_tried=starts_tried,
    )
