"""Second-variation quadratic form on straight boundaries, spectrally exact.

For a critical set E whose boundary is a union of lines {x1 = u_l} in the
plane, the second variation acts on scalar fields phi on the boundary with
zero Gaussian average:

    Q[phi] = sum_l int (|phi'|^2 - |B|^2 phi^2 + eps<b,nu_l> phi^2 - phi^2) dH_l
             + (eps/sqrt(2*pi)) | sum_l int phi x dH_l |^2,

where dH_l is the Gaussian length measure on line l and |B| = 0 on lines.
In the probabilists' Hermite basis h_k (orthonormal for N(0,1)) the local
part per line is exactly diagonal with entries (k - 1) times the line
weight: the Ornstein-Uhlenbeck spectrum shifted by the -phi^2 term.  The
nonlocal barycenter term sees only the moments int phi dH (mode 0) and
int phi t dH (mode 1), so it is a positive semidefinite matrix of rank at
most 2.  In reduced units (weights w_l = exp((s^2-u_l^2)/2)):

    Q_hat[phi] = sum_l w_l [ sum_k (k-1) c_lk^2 + (eps0/s^2)(b.nu_l) sum_k c_lk^2 ]
                 + (eps0/s^2) |M_hat|^2,
    M_hat = ( sum_l w_l u_l c_l0 , sum_l w_l c_l1 ).

Two structural directions must be handled explicitly: the volume constraint
(zero Gaussian mean) and the generator of rotations about the origin, which
is an exact zero mode of the form because the functional is rotation
invariant.  Eigenvalues are reported on the mean-zero subspace; the
headline minimum eigenvalue additionally projects out the rotation
generator, where the translation mode of the strip crosses zero at

    eps0_stab(s) = s^2 / (a(s)^2 * p_hat_D(s)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .candidates import (
    CandidateSet,
    HalfSpace,
    ProblemContext,
    SymmetricStrip,
    a_of_s,
    geometry,
    reduced_line_weight,
)
from .energy import strip_p_hat
from .errors import DomainError

__all__ = [
    "BoundaryLine",
    "boundary_lines",
    "FormEvaluation",
    "quadratic_form",
    "strip_stability_threshold",
    "SpectralReport",
    "min_eigenvalue",
]


@dataclass(frozen=True)
class BoundaryLine:
    """One boundary line {x.axis = offset} with its reduced weighted length."""

    offset: float
    reduced_weight: float
    outward_sign: float  # sign of nu relative to the candidate axis
    b_dot_nu_hat: float  # reduced <b_hat, nu>; eps<b,nu> = (eps0/s^2) * this

    def __post_init__(self):
        if not self.reduced_weight > 0.0:
            raise DomainError("reduced_weight must be > 0")


def boundary_lines(candidate: CandidateSet, ctx: ProblemContext) -> list[BoundaryLine]:
    """Boundary lines of a half-space or symmetric strip, in reduced units."""
    geo = geometry(candidate, ctx)
    if isinstance(candidate, HalfSpace):
        u = candidate.level
        w = reduced_line_weight(ctx.s, u)
        ox, oy = candidate.direction
        b_dot_nu = geo.b_hat[0] * ox + geo.b_hat[1] * oy
        return [BoundaryLine(offset=u, reduced_weight=w, outward_sign=1.0, b_dot_nu_hat=b_dot_nu)]
    if isinstance(candidate, SymmetricStrip):
        a = candidate.half_width
        w = reduced_line_weight(ctx.s, a)
        return [
            BoundaryLine(offset=a, reduced_weight=w, outward_sign=1.0, b_dot_nu_hat=0.0),
            BoundaryLine(offset=-a, reduced_weight=w, outward_sign=-1.0, b_dot_nu_hat=0.0),
        ]
    raise DomainError("spectra are defined for HalfSpace and SymmetricStrip only")


@dataclass(frozen=True)
class FormEvaluation:
    value: float
    projected: bool  # input had nonzero mean and was projected


def _coeff_array(coeffs, n_lines: int) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 1 and n_lines == 1:
        c = c[None, :]
    if c.ndim != 2 or c.shape[0] != n_lines or c.shape[1] < 1:
        raise DomainError(
            f"coefficients must have shape (n_lines={n_lines}, basis_size), got {c.shape}"
        )
    if not np.all(np.isfinite(c)):
        raise DomainError("coefficients must be finite")
    return c.copy()


def quadratic_form(
    candidate: CandidateSet,
    coeffs,
    ctx: ProblemContext,
    include_nonlocal: bool = True,
) -> FormEvaluation:
    """Evaluate the reduced second-variation form on Hermite coefficients.

    `coeffs[l, k]` multiplies h_k on line l.  Inputs with nonzero Gaussian
    mean are projected onto the mean-zero subspace (flagged in the result);
    the projection subtracts a constant, so the returned value is invariant
    under adding constants beforehand.  With include_nonlocal=False only the
    local (Ornstein-Uhlenbeck) part is evaluated, which is the operator
    L[phi] pairing <L phi, phi>.
    """
    if ctx.s <= 0.0:
        raise DomainError("requires s > 0")
    lines = boundary_lines(candidate, ctx)
    c = _coeff_array(coeffs, len(lines))
    w = np.array([ln.reduced_weight for ln in lines])
    mean = float(np.dot(w, c[:, 0]))
    projected = abs(mean) > 1e-13 * max(1.0, float(np.max(np.abs(c))))
    c[:, 0] -= mean / w.sum()

    k = np.arange(c.shape[1], dtype=float)
    cfac = ctx.eps0 / (ctx.s * ctx.s)
    value = 0.0
    for i, ln in enumerate(lines):
        local = float(np.dot(k - 1.0, c[i] ** 2))
        value += ln.reduced_weight * (local + cfac * ln.b_dot_nu_hat * float(np.dot(c[i], c[i])))
    if include_nonlocal:
        m1 = float(np.dot(w, np.array([ln.offset for ln in lines]) * c[:, 0]))
        m2 = float(np.dot(w, c[:, 1])) if c.shape[1] > 1 else 0.0
        value += cfac * (m1 * m1 + m2 * m2)
    return FormEvaluation(value=value, projected=projected)


def strip_stability_threshold(s: float) -> float:
    """eps0 where the strip's translation mode changes sign.

    The mode phi = +c on one line, -c on the other has form value
    2 c^2 w (eps0 a^2 p_hat_D / s^2 - 1), hence the threshold
    eps0_stab(s) = s^2 / (a(s)^2 p_hat_D(s)) -> 1 as s -> infinity, below
    the working window [6/5, 7/5] for s >= 10.
    """
    if not (math.isfinite(s) and s > 0.0):
        raise DomainError(f"s must be finite and > 0, got {s}")
    a = a_of_s(s)
    return s * s / (a * a * strip_p_hat(s))


@dataclass(frozen=True)
class SpectralReport:
    basis_size: int
    eigenvalues: tuple[float, ...]  # mean-zero subspace, ascending
    min_eigenvalue: float  # rotation generator projected out
    rotation_eigenvalue: float  # Rayleigh quotient of the rotation mode (~0)
    critical_eps0: float | None
    converged: bool
    doubling_change: float


def _assemble(candidate: CandidateSet, ctx: ProblemContext, basis_size: int):
    """Dense symmetric matrix in the weight-scaled basis psi_lk = h_k/sqrt(w_l).

    The scaling makes the L^2(H_gamma) mass matrix the identity, so the
    form's matrix eigenvalues are Rayleigh quotients directly.
    """
    lines = boundary_lines(candidate, ctx)
    nl = len(lines)
    n = nl * basis_size
    w = np.array([ln.reduced_weight for ln in lines])
    sq = np.sqrt(w)
    cfac = ctx.eps0 / (ctx.s * ctx.s)

    diag = np.empty(n)
    for i, ln in enumerate(lines):
        k = np.arange(basis_size, dtype=float)
        diag[i * basis_size : (i + 1) * basis_size] = (k - 1.0) + cfac * ln.b_dot_nu_hat
    mat = np.diag(diag)

    v1 = np.zeros(n)
    v2 = np.zeros(n)
    for i, ln in enumerate(lines):
        v1[i * basis_size] = sq[i] * ln.offset
        if basis_size > 1:
            v2[i * basis_size + 1] = sq[i]
    mat += cfac * (np.outer(v1, v1) + np.outer(v2, v2))

    mean_vec = np.zeros(n)
    rot_vec = np.zeros(n)
    for i, ln in enumerate(lines):
        mean_vec[i * basis_size] = sq[i]
        if basis_size > 1:
            # Rotation about the origin tilts each line by -theta * t * sign(nu).
            rot_vec[i * basis_size + 1] = -sq[i] * ln.outward_sign
    return mat, mean_vec, rot_vec


def _spectrum(candidate, ctx, basis_size):
    mat, mean_vec, rot_vec = _assemble(candidate, ctx, basis_size)
    n = mat.shape[0]

    def complement_basis(*constraints):
        c = np.stack(constraints, axis=1)
        q, _ = np.linalg.qr(c, mode="complete")
        return q[:, c.shape[1] :]

    b_mean = complement_basis(mean_vec)
    eigs_meanzero = linalg.eigh(b_mean.T @ mat @ b_mean, eigvals_only=True)

    rot_unit = rot_vec / np.linalg.norm(rot_vec)
    rot_rayleigh = float(rot_unit @ mat @ rot_unit)
    b_both = complement_basis(mean_vec, rot_vec)
    eigs_reduced = linalg.eigh(b_both.T @ mat @ b_both, eigvals_only=True)
    return np.sort(eigs_meanzero), float(np.min(eigs_reduced)), rot_rayleigh


def min_eigenvalue(
    candidate: CandidateSet,
    ctx: ProblemContext,
    basis_size: int = 16,
    locate_critical: bool = True,
) -> SpectralReport:
    """Spectral report of the second-variation form on the mean-zero subspace.

    `eigenvalues` lists the full mean-zero spectrum (the rotation zero mode
    is visible there); `min_eigenvalue` is taken on the complement of the
    rotation generator, the structurally neutral direction of the
    rotation-invariant functional.  Convergence is certified by doubling the
    basis; the form is polynomial in this basis, so the change is ~0.
    `critical_eps0` is the bracketed sign change of min_eigenvalue in eps0
    over [0.05, 2.5], if one exists.
    """
    if basis_size < 4:
        raise DomainError(f"basis_size must be >= 4, got {basis_size}")
    eigs, min_eig, rot = _spectrum(candidate, ctx, basis_size)
    _, min_eig2, _ = _spectrum(candidate, ctx, 2 * basis_size)
    change = abs(min_eig2 - min_eig)
    converged = change <= 1e-8

    def min_eig_at(eps0: float) -> float:
        trial = ProblemContext(ctx.s, eps0)
        return _spectrum(candidate, trial, basis_size)[1]

    critical = None
    if locate_critical:
        lo, hi = 0.05, 2.5
        f_lo, f_hi = min_eig_at(lo), min_eig_at(hi)
        if f_lo * f_hi < 0.0:
            critical = float(optimize.brentq(min_eig_at, lo, hi, xtol=1e-10))

    return SpectralReport(
        basis_size=basis_size,
        eigenvalues=tuple(float(v) for v in eigs),
        min_eigenvalue=min_eig,
        rotation_eigenvalue=rot,
        critical_eps0=critical,
        converged=converged,
        doubling_change=change,
    )
