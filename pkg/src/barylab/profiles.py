"""Planar graph profiles: quadrature energies and preconditioned descent.

A planar set bounded by one graph, E = {x1 < u(x2)}, or two,
E = {u_minus(x2) < x1 < u_plus(x2)}, is discretized by nodal values on a
uniform grid over [-T, T].  With the Gaussian factor exp(-t^2/2) below
1.3e-14 outside |t| = 8, the truncated integrals carry the full energy; all
integrands are assembled in log domain, exponent (s^2 - u^2 - t^2)/2 first.
In reduced units (hats = exp(s^2/2) scaling, T_hat(x) = exp(s^2/2) T(x)):

    p_hat = (1/sqrt(2 pi)) int e^{(s^2-u^2-t^2)/2} sqrt(1+u'^2) dt   (per graph)
    v_hat = (1/sqrt(2 pi)) int [T_hat(s) - T_hat(u)] e^{-t^2/2} dt   (single)
            (1/sqrt(2 pi)) int [T_hat(s) - T_hat(u_plus) - T_hat(-u_minus)] ...
    b_hat = first-moment analogues,

so a profile at the reference shape gives v_hat = 0 pointwise, with no
cancellation against the total mass.  Quadrature is trapezoid on the fixed
window: for Gaussian-decaying smooth integrands it is spectrally accurate
(Euler-Maclaurin boundary terms ~ e^{-T^2/2}), and a grid-halving
cross-check estimates the residual error; a grid too coarse for 1e-8
relative accuracy raises QuadratureRefinementError.

Descent minimizes the penalized reduced energy with three ingredients on
top of backtracking gradient descent, all changing the path but not the
minimizers:

* a Gaussian-weighted H1 preconditioner (mass + stiffness, i.e. the inverse
  of 1 + Ornstein-Uhlenbeck), which undoes the e^{-t^2/2} degeneracy so
  far-tail nodes relax at the same rate as central ones;
* steps projected tangent to the volume constraint, followed by an exact
  constant-shift volume restoration (Newton), keeping the penalty at
  rounding level throughout;
* a rotation gauge: tilted lines u = c + t tan(theta) form an exactly
  energy-degenerate family, so the Gaussian-weighted linear-in-t component
  is removed every iteration.  Converged profiles are flat outright, not
  merely flat up to a rotation.

Line searches certify decrease up to a 1e-15-scale roundoff allowance; the
recorded energy history is nonincreasing to that tolerance.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from . import gaussian
from .candidates import ProblemContext, a_of_s
from .energy import EnergyBreakdown
from .errors import DomainError, QuadratureRefinementError

__all__ = [
    "Profile",
    "profile_energy",
    "profile_measure",
    "first_variation",
    "volume_gradient",
    "euler_residual",
    "EulerReport",
    "descend",
    "DescentResult",
    "perturbed_profile",
    "save_profile",
    "load_profile",
]

MIN_NODES = 64
MIN_HALF_WIDTH = 8.0
GAP_MIN = 1e-6
DELTA_SMOOTH = 1e-10
SLOPE_MAX = 2.0
_SQ = gaussian.SQRT_2PI


@dataclass(frozen=True)
class Profile:
    """Nodal values of one or two graphs over a uniform grid on [-T, T].

    values has shape (1, N) for topology "single" (the graph u) and (2, N)
    for "double" (rows: u_minus, u_plus with u_plus - u_minus >= GAP_MIN).
    """

    topology: str
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.topology not in ("single", "double"):
            raise DomainError(f"topology must be 'single' or 'double', got {self.topology!r}")
        grid = np.asarray(self.grid, dtype=float)
        values = np.atleast_2d(np.asarray(self.values, dtype=float))
        n = grid.size
        if n < MIN_NODES:
            raise DomainError(f"need at least {MIN_NODES} nodes, got {n}")
        t_half = -grid[0]
        if not (t_half >= MIN_HALF_WIDTH and abs(grid[-1] - t_half) < 1e-9 * t_half):
            raise DomainError(f"grid must span [-T, T] with T >= {MIN_HALF_WIDTH}")
        steps = np.diff(grid)
        if steps.min() <= 0 or steps.max() - steps.min() > 1e-9 * steps.mean():
            raise DomainError("grid must be uniform and increasing")
        expected = 1 if self.topology == "single" else 2
        if values.shape != (expected, n):
            raise DomainError(f"values must have shape ({expected}, {n}), got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise DomainError("profile values must be finite")
        if self.topology == "double" and np.any(values[1] - values[0] < GAP_MIN):
            raise DomainError(f"double profile needs u_plus - u_minus >= {GAP_MIN}")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    # -- constructors ------------------------------------------------------
    @staticmethod
    def _grid(half_width: float, n_nodes: int) -> np.ndarray:
        return np.linspace(-half_width, half_width, n_nodes)

    @classmethod
    def single(cls, values, half_width: float = 8.0, n_nodes: int | None = None) -> "Profile":
        if callable(values):
            grid = cls._grid(half_width, n_nodes or 257)
            vals = np.asarray([values(t) for t in grid], dtype=float)[None, :]
        else:
            vals = np.atleast_2d(np.asarray(values, dtype=float))
            grid = cls._grid(half_width, vals.shape[1])
        return cls("single", grid, vals)

    @classmethod
    def double(cls, lower, upper, half_width: float = 8.0, n_nodes: int | None = None) -> "Profile":
        if callable(lower) or callable(upper):
            grid = cls._grid(half_width, n_nodes or 257)
            lo = np.asarray([lower(t) for t in grid], dtype=float)
            hi = np.asarray([upper(t) for t in grid], dtype=float)
        else:
            lo = np.asarray(lower, dtype=float)
            hi = np.asarray(upper, dtype=float)
            grid = cls._grid(half_width, lo.size)
        return cls("double", grid, np.stack([lo, hi]))

    @classmethod
    def flat(
        cls, ctx: ProblemContext, topology: str, half_width: float = 8.0, n_nodes: int = 257
    ) -> "Profile":
        """Reference profile: u = s (single) or u = +-a(s) (double)."""
        grid = cls._grid(half_width, n_nodes)
        if topology == "single":
            return cls("single", grid, np.full((1, grid.size), ctx.s))
        a = a_of_s(ctx.s)
        return cls("double", grid, np.stack([np.full(grid.size, -a), np.full(grid.size, a)]))

    # -- accessors ---------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return self.grid.size

    @property
    def half_width(self) -> float:
        return float(self.grid[-1])

    @property
    def u(self) -> np.ndarray:
        if self.topology != "single":
            raise DomainError("u is defined for single profiles; use u_minus/u_plus")
        return self.values[0]

    @property
    def u_minus(self) -> np.ndarray:
        if self.topology != "double":
            raise DomainError("u_minus is defined for double profiles")
        return self.values[0]

    @property
    def u_plus(self) -> np.ndarray:
        if self.topology != "double":
            raise DomainError("u_plus is defined for double profiles")
        return self.values[1]

    def with_values(self, values: np.ndarray) -> "Profile":
        return Profile(self.topology, self.grid, values)

    def flatness(self) -> float:
        """max over graphs of ||u - mean(u)||_inf."""
        return float(
            max(np.max(np.abs(row - row.mean())) for row in self.values)
        )


# ---------------------------------------------------------------------------
# quadrature assembly


def _trap_weights(grid: np.ndarray) -> np.ndarray:
    h = grid[1] - grid[0]
    w = np.full(grid.size, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _derivative(vals: np.ndarray, h: float) -> np.ndarray:
    """Central differences with reflected ghosts: u' = 0 at both ends."""
    up = np.empty_like(vals)
    up[1:-1] = (vals[2:] - vals[:-2]) / (2.0 * h)
    up[0] = 0.0
    up[-1] = 0.0
    return up


def _reduced_tail_vec(s: float, x: np.ndarray) -> np.ndarray:
    return np.exp(0.5 * s * s + gaussian.log_tail(x))


class _Terms:
    """All quadrature ingredients of one profile at one context.

    The area integrand w * sqrt(1 + u'^2) is discretized in split form:
    the potential part int w dt by the nodal trapezoid rule and the slope
    excess int w (sqrt(1 + u'^2) - 1) dt per grid cell, with the slope
    constant on each cell (piecewise-linear elements) and w averaged over
    the cell's endpoints.  The split keeps exactly-flat profiles exact
    stationary points of the discrete energy (the potential gradient is
    then nodewise proportional to the volume gradient), while the
    cell-based slope makes node-scale oscillation pay its full stiffness
    (2c/h)^2.  A nodal centered-difference slope is blind to the
    alternating component, which would hand the discrete energy a band of
    spurious near-null descent directions.
    """

    def __init__(self, p: Profile, ctx: ProblemContext):
        self.p = p
        self.ctx = ctx
        t = p.grid
        s = ctx.s
        self.h = float(t[1] - t[0])
        self.W = _trap_weights(t)
        self.gw = np.exp(-0.5 * t * t)
        self.t = t
        self.m_s = gaussian.mills(s)
        self.wp = []  # e^{(s^2-u^2-t^2)/2} per graph, at nodes
        self.slope = []  # (u_{i+1} - u_i) / h per cell
        self.rootc = []  # sqrt(1 + slope^2) per cell
        self.excess = []  # rootc - 1, computed without cancellation
        for row in p.values:
            self.wp.append(np.exp(0.5 * (s - row) * (s + row) - 0.5 * t * t))
            sl = np.diff(row) / self.h
            rc = np.sqrt(1.0 + sl * sl)
            self.slope.append(sl)
            self.rootc.append(rc)
            self.excess.append(sl * sl / (1.0 + rc))

    def _area(self, half: bool) -> float:
        """Reduced surface-area integral, full grid or every other node."""
        if not half:
            total = 0.0
            for g, wp in enumerate(self.wp):
                total += float(np.dot(self.W, wp))
                wavg = 0.5 * (wp[:-1] + wp[1:])
                total += self.h * float(np.dot(wavg, self.excess[g]))
            return total / _SQ
        idx = self._half_idx
        tc = self.t[idx]
        dt = np.diff(tc)
        total = 0.0
        for g, wp in enumerate(self.wp):
            wc = wp[idx]
            row = self.p.values[g][idx]
            sl = np.diff(row) / dt
            ex = sl * sl / (1.0 + np.sqrt(1.0 + sl * sl))
            total += float(np.trapezoid(wc, x=tc))
            total += float(np.dot(dt * 0.5 * (wc[:-1] + wc[1:]), ex))
        return total / _SQ

    def integrals(self, half: bool = False) -> tuple[float, float, float, float]:
        """(p_hat, v_hat, b1_hat, b2_hat), optionally on the halved grid."""
        p = self.p
        s = self.ctx.s
        t, gw = self.t, self.gw
        quad = self.half_grid if half else self.trap
        p_hat = self._area(half)
        if p.topology == "single":
            u = p.values[0]
            tu = _reduced_tail_vec(s, u)
            v_hat = quad((self.m_s - tu) * gw) / _SQ
            b1 = -quad(self.wp[0]) / _SQ
            b2 = -quad(t * tu * gw) / _SQ
            return p_hat, v_hat, b1, b2
        tp = _reduced_tail_vec(s, p.values[1])
        tm = _reduced_tail_vec(s, -p.values[0])
        v_hat = quad((self.m_s - tp - tm) * gw) / _SQ
        b1 = quad(self.wp[0] - self.wp[1]) / _SQ
        b2 = -quad(t * (tm + tp) * gw) / _SQ
        return p_hat, v_hat, b1, b2

    def trap(self, vals: np.ndarray) -> float:
        return float(np.dot(self.W, vals))

    def half_grid(self, vals: np.ndarray) -> float:
        """Trapezoid on every other node (both endpoints kept)."""
        idx = self._half_idx
        return float(np.trapezoid(vals[idx], x=self.t[idx]))

    @property
    def _half_idx(self) -> np.ndarray:
        idx = np.arange(0, self.t.size, 2)
        if idx[-1] != self.t.size - 1:
            idx = np.append(idx, self.t.size - 1)
        return idx

    def breakdown(self, half: bool = False) -> EnergyBreakdown:
        ctx = self.ctx
        p_hat, v_hat, b1, b2 = self.integrals(half)
        bary = ctx.eps0 * (b1 * b1 + b2 * b2) / (2.0 * ctx.s * ctx.s)
        penalty = ctx.lambda_cap * abs(v_hat)
        return EnergyBreakdown(
            p_hat=p_hat,
            barycenter_term=bary,
            volume_deficit=v_hat,
            penalty=penalty,
            total=p_hat + bary + penalty,
        )


def _breakdown_fast(p: Profile, ctx: ProblemContext) -> EnergyBreakdown:
    terms = _Terms(p, ctx)
    return terms.breakdown()


def profile_energy(p: Profile, ctx: ProblemContext) -> EnergyBreakdown:
    """Reduced EnergyBreakdown of a profile, with a quadrature error check.

    The error estimate is a grid-halving comparison: the same integrals on
    every other node, with the cell slopes of the area term recomputed at
    the doubled spacing.  For Gaussian-decaying smooth integrands the
    trapezoid rule converges faster than any power of the spacing, so a
    half-grid discrepancy beyond 1e-8 * p_hat signals a genuinely
    under-resolved profile — unresolved window tails or node-scale
    oscillation, which the coarse slopes see head-on — and raises
    QuadratureRefinementError.  (A same-grid Simpson cross-check would be
    bounded below by Simpson's own O(h^4) error and reject accurate
    results.)
    """
    if ctx.s <= 0.0:
        raise DomainError("requires s > 0")
    terms = _Terms(p, ctx)
    bd = terms.breakdown()
    bd_half = terms.breakdown(half=True)
    est = abs(bd.total - bd_half.total)
    if est > 1e-8 * max(bd.p_hat, 1e-12):
        raise QuadratureRefinementError(
            f"estimated quadrature error {est:.3e} exceeds 1e-8 * p_hat = "
            f"{1e-8 * bd.p_hat:.3e}; refine the grid (N={p.n_nodes}, T={p.half_width})"
        )
    return bd


def profile_measure(p: Profile, ctx: ProblemContext) -> float:
    """Absolute Gaussian measure of the set described by the profile."""
    t = p.grid
    w = _trap_weights(t)
    gw = np.exp(-0.5 * t * t)
    if p.topology == "single":
        frac = gaussian.phi(p.values[0])
    else:
        frac = gaussian.phi(p.values[1]) - gaussian.phi(p.values[0])
    return float(np.dot(w, frac * gw)) / _SQ


def volume_gradient(p: Profile, ctx: ProblemContext) -> np.ndarray:
    """Exact gradient of v_hat with respect to nodal values, shape like values."""
    terms = _Terms(p, ctx)
    out = np.empty_like(p.values)
    if p.topology == "single":
        out[0] = terms.W * terms.wp[0] / _SQ
        return out
    out[0] = -terms.W * terms.wp[0] / _SQ
    out[1] = terms.W * terms.wp[1] / _SQ
    return out


def _perimeter_gradient(terms: _Terms) -> np.ndarray:
    p = terms.p
    h = terms.h
    out = np.empty_like(p.values)
    for g, row in enumerate(p.values):
        wp = terms.wp[g]
        slope, rootc, excess = terms.slope[g], terms.rootc[g], terms.excess[g]
        grad = terms.W * (-row * wp) / _SQ
        half_ex = 0.5 * h * excess / _SQ
        grad[:-1] -= row[:-1] * wp[:-1] * half_ex
        grad[1:] -= row[1:] * wp[1:] * half_ex
        q = 0.5 * (wp[:-1] + wp[1:]) * slope / rootc / _SQ
        grad[1:] += q
        grad[:-1] -= q
        out[g] = grad
    return out


def _barycenter_gradients(terms: _Terms) -> tuple[np.ndarray, np.ndarray]:
    p = terms.p
    t = terms.t
    g1 = np.empty_like(p.values)
    g2 = np.empty_like(p.values)
    if p.topology == "single":
        w = terms.W * terms.wp[0] / _SQ
        g1[0] = p.values[0] * w
        g2[0] = t * w
        return g1, g2
    wm = terms.W * terms.wp[0] / _SQ
    wp_ = terms.W * terms.wp[1] / _SQ
    g1[0] = -p.values[0] * wm
    g1[1] = p.values[1] * wp_
    g2[0] = -t * wm
    g2[1] = t * wp_
    return g1, g2


def first_variation(p: Profile, ctx: ProblemContext) -> np.ndarray:
    """Exact gradient of the penalized reduced energy wrt nodal values.

    Differentiates the discrete quadrature expressions themselves, so the
    result matches central finite differences of profile_energy to rounding
    (the |v_hat| factor contributes sign(v_hat), valid away from the kink).
    """
    if ctx.s <= 0.0:
        raise DomainError("requires s > 0")
    terms = _Terms(p, ctx)
    p_hat, v_hat, b1, b2 = terms.integrals()
    grad = _perimeter_gradient(terms)
    g1, g2 = _barycenter_gradients(terms)
    cfac = ctx.eps0 / (ctx.s * ctx.s)
    grad += cfac * (b1 * g1 + b2 * g2)
    # |v| smoothed as sqrt(v^2 + delta^2) - delta for the gradient only;
    # equals sign(v) away from the kink, 0 exactly on the constraint.
    kink = v_hat / math.hypot(v_hat, DELTA_SMOOTH) if v_hat != 0.0 else 0.0
    if kink != 0.0:
        grad += ctx.lambda_cap * kink * volume_gradient(p, ctx)
    return grad


@dataclass(frozen=True)
class EulerReport:
    """Pointwise residual of H - <x,nu> + eps<b,x> = lambda on each graph."""

    lam: float
    residual: np.ndarray  # shape like values
    weighted_norm: float  # sqrt(int residual^2 dH / int dH)


def euler_residual(p: Profile, ctx: ProblemContext) -> EulerReport:
    terms = _Terms(p, ctx)
    _, _, b1, b2 = terms.integrals()
    cfac = ctx.eps0 / (ctx.s * ctx.s)
    h = terms.h
    t = terms.t
    raw = np.empty_like(p.values)
    for g, row in enumerate(p.values):
        upp = np.empty_like(row)
        upp[1:-1] = (row[2:] - 2.0 * row[1:-1] + row[:-2]) / (h * h)
        upp[0] = 2.0 * (row[1] - row[0]) / (h * h)
        upp[-1] = 2.0 * (row[-2] - row[-1]) / (h * h)
        up = _derivative(row, h)
        root = np.sqrt(1.0 + up * up)
        lower = p.topology == "double" and g == 0
        curv = (upp if lower else -upp) / root**3
        xnu = ((-row + t * up) if lower else (row - t * up)) / root
        raw[g] = curv - xnu + cfac * (b1 * row + b2 * t)
    measure = np.stack([terms.W * wp for wp in terms.wp])
    lam = float((raw * measure).sum() / measure.sum())
    residual = raw - lam
    norm = math.sqrt(float((residual**2 * measure).sum() / measure.sum()))
    return EulerReport(lam=lam, residual=residual, weighted_norm=norm)


# ---------------------------------------------------------------------------
# descent


def _precond_factor(p: Profile, ctx: ProblemContext):
    """Per-graph scaled Cholesky of the profile-weighted H1 operator.

    Tridiagonal B_g = M_g + K_g built from the graph's own area weight
    w_g(t) = e^{(s^2 - u_g(t)^2 - t^2)/2}: M_g = diag(trapezoid weight *
    w_g) and K_g the three-point stiffness of -d/dt (w_g d/dt).  This is
    the H1 energy of the area term linearized at the current graph, so
    B^{-1} equilibrates the raw gradient to deviation scale even far from
    the flat reference: a tail node displaced inward by d sits at weight
    e^{s d} times the flat value, and a factor frozen at the flat profile
    would misjudge the local stiffness by that ratio (x200 at d = 0.5,
    s = 10) and overshoot by the same factor.  Entries span the full
    dynamic range of the weight (14+ decades at T = 8), so each graph is
    factored in symmetrically scaled form D^{-1/2} B D^{-1/2} (unit
    diagonal, condition ~ 1/h^2); the scaling is exact in real arithmetic
    and keeps descent-direction curvatures g.d accurate near convergence.
    The exponent is clipped on both sides so extreme graphs can neither
    overflow (|u| << s at large s) nor underflow to a singular factor
    (|u| >> s); the clip only distorts mobility at nodes whose energy
    contribution is below 1e-130, preserving positivity.
    """
    grid = p.grid
    h = float(grid[1] - grid[0])
    w = _trap_weights(grid)
    s2 = ctx.s * ctx.s
    factors = []
    for row in p.values:
        wp = np.exp(np.clip(0.5 * (s2 - row * row - grid * grid), -300.0, 300.0))
        mid = 0.5 * (wp[1:] + wp[:-1]) / h
        diag = w * wp
        diag[:-1] += mid
        diag[1:] += mid
        dhalf = np.sqrt(diag)
        ab = np.zeros((2, grid.size))
        ab[0, 1:] = -mid / (dhalf[:-1] * dhalf[1:])
        ab[1] = 1.0
        factors.append((linalg.cholesky_banded(ab, lower=False), dhalf, diag, mid))
    return tuple(factors)


def _apply_precond_inv(factor, vecs: np.ndarray) -> np.ndarray:
    out = np.empty_like(vecs)
    for i, row in enumerate(vecs):
        cb, dhalf = factor[i][0], factor[i][1]
        out[i] = linalg.cho_solve_banded((cb, False), row / dhalf) / dhalf
    return out


def _apply_precond(factor, vecs: np.ndarray) -> np.ndarray:
    out = np.empty_like(vecs)
    for i, row in enumerate(vecs):
        diag, mid = factor[i][2], factor[i][3]
        r = diag * row
        r[:-1] -= mid * row[1:]
        r[1:] -= mid * row[:-1]
        out[i] = r
    return out


@dataclass(frozen=True)
class _Deflation:
    """Slow-subspace direction for the per-graph affine modes.

    The preconditioner B treats smooth low modes at their B-metric
    curvature, which for the antisymmetric tilt of a double profile (the
    lowest stability mode of the flat minimizer) is ~ 1e-3 -- small enough
    that plain preconditioned descent needs thousands of steps.  The
    affine-per-graph subspace span{1, t} x graphs contains these modes;
    measuring their curvature block E by finite differences of the
    gradient at the flat reference gives the scaled-inverse multiplier G
    and the subspace direction V G V^T grad (V a B-orthonormal basis).
    descend line-searches this direction separately from the bulk one:
    the amplification ~ target/lambda is what the quadratic basin needs,
    but early on the iterate follows a curved near-level valley where
    such a step must be shortened -- with a shared step size that
    shortening would strangle the bulk modes too.  Directions whose
    measured curvature is degenerate or negative keep the plain
    B-preconditioned scale, so the correction cannot destabilize.
    """

    basis: np.ndarray  # (k, graphs, N), B-orthonormal columns
    newton: np.ndarray  # (k, k), symmetric scaled inverse of the block

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        c = np.einsum("krn,rn->k", self.basis, vecs)
        return np.einsum("k,krn->rn", self.newton @ c, self.basis)


_DEFLATE_FD = 1e-5
_DEFLATE_EIG_FLOOR = 1e-4
_DEFLATE_TARGET = 0.25


def _tangent_gradient_at(p: Profile, ctx: ProblemContext, shift: np.ndarray) -> np.ndarray:
    """Volume-tangent energy gradient at a volume-restored shifted profile."""
    q = _restore_volume(p.with_values(p.values + shift), ctx)
    g = first_variation(q, ctx)
    nq = volume_gradient(q, ctx)
    return g - (float((nq * g).sum()) / float((nq * nq).sum())) * nq


def _affine_deflation(p: Profile, ctx: ProblemContext, factor) -> _Deflation | None:
    """Build the slow-subspace curvature correction at a reference profile.

    descend measures this once at the exactly flat reference of the target
    topology, where the volume-projected gradient vanishes identically and
    the finite-difference curvatures are clean, then keeps the correction
    fixed.  (Re-measuring at rough mid-descent profiles is tempting but
    poisonous: off the quadratic basin the measured block can assign a
    slow-mode gain to a direction that is fast at the current point, and
    the shared line-search step then collapses for every mode at once.  A
    fixed symmetric-positive correction is simply a valid preconditioner,
    wherever the iterate happens to be.)
    """
    t = p.grid
    rows = len(p.values)
    w = _trap_weights(t) * np.exp(-0.5 * t * t)
    n = volume_gradient(p, ctx)
    nn = float((n * n).sum())
    tau = np.tile(t, (rows, 1))
    tau_w = rows * float(np.dot(w, t * t))

    candidates = []
    for r in range(rows):
        for base in (np.ones_like(t), t):
            v = np.zeros((rows, t.size))
            v[r] = base
            candidates.append(v)

    basis: list[np.ndarray] = []
    for v in candidates:
        # remove the rotation gauge (the component _derotate resets) and the
        # volume normal (so finite differences stay on the constraint, away
        # from the penalty kink)
        theta = sum(float(np.dot(w, t * row)) for row in v) / tau_w
        v = v - theta * tau
        v = v - (float((n * v).sum()) / nn) * n
        norm0 = float((v * _apply_precond(factor, v)).sum())
        for u in basis:
            v = v - float((_apply_precond(factor, u) * v).sum()) * u
        norm = float((v * _apply_precond(factor, v)).sum())
        if norm > 1e-10 * max(norm0, 1e-30):
            basis.append(v / math.sqrt(norm))
    if not basis:
        return None

    V = np.array(basis)
    k = len(basis)
    E = np.empty((k, k))
    for j in range(k):
        # The gradient on the constraint manifold carries a multiplier
        # component lambda * n(u) whose variation lambda * dn/du (~ s) would
        # swamp the mode curvatures (~ 1e-3).  Restoring volume keeps each
        # probe on the manifold and projecting its gradient tangentially at
        # the probe's own normal cancels that term, leaving the reduced
        # Hessian that constrained descent actually experiences.  The probe
        # length is normalized per column so the step stays in the linear
        # response regime pointwise, not just in the B norm.
        delta = _DEFLATE_FD / max(1.0, float(np.max(np.abs(V[j]))))
        E[:, j] = np.einsum(
            "krn,rn->k",
            V,
            (_tangent_gradient_at(p, ctx, delta * V[j])
             - _tangent_gradient_at(p, ctx, -delta * V[j]))
            / (2.0 * delta),
        )
    E = 0.5 * (E + E.T)
    lam, Q = np.linalg.eigh(E)
    # Scale curvatures toward _DEFLATE_TARGET rather than 1: a full Newton
    # step diverges under line-search steps alpha > 2 whenever the mode's
    # energy signal sits below rounding (the Armijo test cannot reject the
    # overshoot), while target 1/4 is deadbeat at alpha = 4 and stable for
    # alpha < 8.  Degenerate or negative measured curvatures keep the plain
    # preconditioned scale 1.
    inv = np.where(lam > _DEFLATE_EIG_FLOOR, _DEFLATE_TARGET / np.maximum(lam, _DEFLATE_EIG_FLOOR), 1.0)
    return _Deflation(basis=V, newton=(Q * inv) @ Q.T)


def _derotate(p: Profile) -> Profile:
    """Remove the Gaussian-weighted linear-in-t component (rotation gauge).

    Tilts below 1e-9 are left alone: a residual that small contributes
    ~ 1e-8 to flatness, while removing it would move the profile by a
    fixed amount independent of the descent step and change the discrete
    energy at the window-truncation scale e^{-T^2/2} (~ 1e-14 at T = 8),
    which would poison arbitrarily small line-search trials.
    """
    t = p.grid
    w = _trap_weights(t) * np.exp(-0.5 * t * t)
    tt = float(np.dot(w, t * t))
    theta = sum(float(np.dot(w, t * row)) for row in p.values) / (len(p.values) * tt)
    if abs(theta) <= 1e-9:
        return p
    return p.with_values(p.values - theta * t)


def _restore_volume(p: Profile, ctx: ProblemContext) -> Profile:
    """Exact-volume projection by a constant outward shift (Newton)."""
    vals = p.values.copy()
    for _ in range(12):
        q = p.with_values(vals)
        terms = _Terms(q, ctx)
        _, v_hat, _, _ = terms.integrals()
        # Drive v_hat to the rounding floor so the leftover penalty
        # lambda_cap * |v_hat| stays below the line-search noise allowance.
        if abs(v_hat) <= 1e-16 * max(1.0, terms.m_s):
            return q
        if p.topology == "single":
            slope = float(np.dot(terms.W, terms.wp[0])) / _SQ
            vals = vals - v_hat / slope
        else:
            slope = float(np.dot(terms.W, terms.wp[0] + terms.wp[1])) / _SQ
            shift = v_hat / slope
            vals = np.stack([vals[0] + shift, vals[1] - shift])
    return p.with_values(vals)


@dataclass(frozen=True)
class DescentResult:
    profile: Profile
    history: tuple[float, ...]
    converged: bool
    line_search_failed: bool
    steps: int
    grad_norm: float
    flatness: float
    energy: EnergyBreakdown


def _max_slope(p: Profile) -> float:
    h = float(p.grid[1] - p.grid[0])
    return float(np.max(np.abs(np.diff(p.values, axis=1)))) / h


def descend(
    p0: Profile,
    ctx: ProblemContext,
    max_steps: int = 5000,
    grad_tol: float = 1e-8,
    step_tol: float = 5e-9,
) -> DescentResult:
    """Preconditioned, volume-projected, gauge-fixed energy descent.

    Each iteration alternates two volume-tangent phases, each with Armijo
    backtracking on the composite map (step -> derotate -> restore volume)
    and its own step-size memory: a bulk phase along the B-preconditioned
    gradient, with B rebuilt from the current profile's weights each
    iteration (see _precond_factor; a tridiagonal refactor costs O(N)), and
    a slow phase along the curvature-corrected direction of the per-graph
    affine subspace (see _Deflation; the correction is measured once at the
    flat reference, with the reference B).  Separate step sizes matter: far
    from flat the slow direction follows a curved, nearly level valley and
    must be shortened, and under a shared step size that shortening would
    throttle the bulk modes to a crawl.  Terminate when the combined
    projected gradient norm drops below grad_tol AND both directions' sup
    norms drop below step_tol.  The recorded energy history is
    nonincreasing up to a 1e-15-scale roundoff allowance.

    Both exit conditions are needed.  The gradient norm certifies the
    energy-visible residual but is blind to far-tail deviations: a bump of
    height 1e-4 at |t| ~ 8 costs ~ gamma * h * 1e-8 ~ 1e-22 energy, below
    rounding.  The preconditioner restores O(1) mobility there, so the
    direction amplitude tracks the pointwise deviation itself and its sup
    norm certifies flatness; the Armijo slack lets these energy-invisible
    flattening steps through.

    The line search additionally rejects trial profiles whose maximum slope
    exceeds SLOPE_MAX.  Beyond |u'| ~ 1/h the scheme under-resolves
    near-vertical walls and acquires a spurious descending valley in which
    negligible-weight far-tail nodes run away (an O(1e-9) discretization
    artifact; the continuum energy is flat there only below rounding).
    Flattening descents live far inside the guard, which never binds on a
    resolved path.
    """
    reference = Profile.flat(
        ctx, p0.topology, half_width=p0.half_width, n_nodes=p0.n_nodes
    )
    deflation = _affine_deflation(reference, ctx, _precond_factor(reference, ctx))
    cur = _restore_volume(_derotate(p0), ctx)
    f_cur = _breakdown_fast(cur, ctx).total
    history = [f_cur]
    alphas = [1.0, 1.0]  # independent step memories: bulk, slow subspace
    converged = False
    failed = False
    gnorm = math.inf
    step_count = 0

    def directions(point):
        """Volume-tangent (direction, g.d, sup) for the bulk and slow phases."""
        cb = _precond_factor(point, ctx)
        g = first_variation(point, ctx)
        n = volume_gradient(point, ctx)
        bn = _apply_precond_inv(cb, n)
        nbn = float((n * bn).sum())
        out = []
        for phase in range(2):
            if phase == 0:
                d = _apply_precond_inv(cb, g)
            elif deflation is None:
                out.append(None)
                continue
            else:
                # Project the constraint multiplier out of the gradient at
                # the *current* point before amplifying: the subspace basis
                # is normal-orthogonal only at the reference profile, so the
                # multiplier component lambda * n(cur) (|lambda| ~ s) would
                # otherwise leak into the subspace coordinates and be scaled
                # by up to target/lambda_min, swamping the actual residual.
                gt = g - (float((n * g).sum()) / float((n * n).sum())) * n
                d = deflation.apply(gt)
            d_t = d - (float((n * d).sum()) / nbn) * bn
            gd = max(float((g * d_t).sum()), 0.0)
            out.append((d_t, gd, float(np.max(np.abs(d_t)))))
        return out

    def try_step(point, f_point, d_t, gd, alpha):
        """One Armijo backtracking run on the composite map."""
        slack = 5e-15 * max(1.0, abs(f_point))
        alpha = min(4.0, alpha * 1.5)
        for _ in range(40):
            try:
                trial = _restore_volume(
                    _derotate(point.with_values(point.values - alpha * d_t)), ctx
                )
            except DomainError:
                # Overshooting trial left the admissible region (e.g. the two
                # graphs of a double profile collided); treat like a failed
                # sufficient-decrease test and shorten.
                alpha *= 0.5
                continue
            f_trial = _breakdown_fast(trial, ctx).total
            if (
                f_trial <= f_point - 1e-4 * alpha * gd + slack
                and _max_slope(trial) <= SLOPE_MAX
            ):
                return True, trial, f_trial, alpha
            alpha *= 0.5
        return False, point, f_point, alpha

    for step_count in range(1, max_steps + 1):
        dirs = directions(cur)
        gnorm = math.sqrt(sum(info[1] for info in dirs if info))
        dt_sup = max((info[2] for info in dirs if info), default=0.0)
        if gnorm <= grad_tol and dt_sup <= step_tol:
            converged = True
            break
        moved = False
        for phase in (0, 1):
            info = dirs[phase]
            if info is None:
                continue
            if phase == 1 and moved:
                # the bulk move changed the subspace residual; re-measure
                info = directions(cur)[1]
            d_t, gd, sup = info
            if sup <= step_tol and gd <= 0.25 * grad_tol * grad_tol:
                continue
            ok, cur, f_cur, alphas[phase] = try_step(cur, f_cur, d_t, gd, alphas[phase])
            if ok:
                moved = True
                history.append(f_cur)
        if not moved:
            if dt_sup <= step_tol:
                converged = True
            else:
                failed = True
            break

    return DescentResult(
        profile=cur,
        history=tuple(history),
        converged=converged,
        line_search_failed=failed,
        steps=step_count,
        grad_norm=gnorm,
        flatness=cur.flatness(),
        energy=profile_energy(cur, ctx),
    )


def perturbed_profile(
    ctx: ProblemContext,
    topology: str,
    seed: int,
    amplitude: float = 0.1,
    half_width: float = 8.0,
    n_nodes: int = 257,
) -> Profile:
    """Reference profile plus a smooth random perturbation (4 Fourier modes).

    Each graph gets an independent perturbation rescaled to sup norm
    `amplitude`; deterministic in `seed`.

    The default amplitude targets the flat profile's local basin.  This
    matters for double profiles: the flat double is only a local minimizer
    (a half-space has lower energy below the phase threshold and remains a
    local attractor above it, reachable inside the double family by
    sending one graph to infinity), and perturbations of sup norm ~ 0.15+
    intermittently carry enough excess energy to slide into that channel,
    where the descent then follows a genuine downhill run away from the
    strip (the energy creeps toward the half-space value while one graph
    translates without bound).  At 0.1 every tested seed stays in-basin.
    """
    if amplitude < 0.0:
        raise DomainError("amplitude must be >= 0")
    rng = np.random.default_rng(seed)
    base = Profile.flat(ctx, topology, half_width=half_width, n_nodes=n_nodes)
    t = base.grid
    vals = base.values.copy()
    for row in vals:
        pert = np.zeros_like(t)
        for m in range(1, 5):
            c, d = rng.normal(size=2) / m
            pert += c * np.cos(m * math.pi * t / half_width) + d * np.sin(
                m * math.pi * t / half_width
            )
        peak = np.max(np.abs(pert))
        if peak > 0:
            row += amplitude * pert / peak
    return base.with_values(vals)


def save_profile(path: str, p: Profile) -> None:
    """Plain-text snapshot: columns t, u (single) or t, u_minus, u_plus."""
    lines = [f"# topology {p.topology}"]
    if p.topology == "single":
        lines.append("# columns t u")
        for t, u in zip(p.grid, p.values[0]):
            lines.append(f"{t:.17g} {u:.17g}")
    else:
        lines.append("# columns t u_minus u_plus")
        for t, lo, hi in zip(p.grid, p.values[0], p.values[1]):
            lines.append(f"{t:.17g} {lo:.17g} {hi:.17g}")
    text = "\n".join(lines) + "\n"
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".profile-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def load_profile(path: str) -> Profile:
    topology = None
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if parts[:1] == ["topology"]:
                    topology = parts[1]
                continue
            rows.append([float(v) for v in line.split()])
    if topology is None or not rows:
        raise DomainError(f"not a profile snapshot: {path}")
    data = np.asarray(rows, dtype=float)
    grid = data[:, 0]
    if topology == "single":
        return Profile("single", grid, data[:, 1][None, :])
    return Profile("double", grid, np.stack([data[:, 1], data[:, 2]]))
