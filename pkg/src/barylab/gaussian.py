"""One-dimensional Gaussian primitives, stable far into the tails.

Every quantity in this package ultimately reduces to the unnormalized upper
tail

    T(s) = integral_s^inf exp(-t^2/2) dt,

its logarithm, the CDF phi(s) = 1 - T(s)/sqrt(2*pi), and the Mills ratio

    m(s) = exp(s^2/2) * T(s).

The comparisons of interest all happen at scale exp(-s^2/2) with s as large
as 40, so T(s) itself underflows long before the mathematics becomes
degenerate.  The rule followed here is: never form exp(s^2/2) and T(s) as
separate factors.  Tails are evaluated through the scaled complementary
error function (erfcx) and log-domain bookkeeping, which keeps log_tail and
the Mills ratio accurate for |s| up to 45 and beyond.

All functions accept scalars or array_likes and are pure.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import special

from .errors import DomainError

SQRT_2PI = math.sqrt(2.0 * math.pi)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
SQRT_HALF_PI = math.sqrt(0.5 * math.pi)
_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def _as_finite_array(x, name: str) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite, got {x!r}")
    return arr, arr.ndim == 0


def _maybe_scalar(out: np.ndarray, scalar: bool):
    return float(out) if scalar else out


def tail(s):
    """Unnormalized Gaussian upper tail T(s) = integral_s^inf exp(-t^2/2) dt.

    Underflows gracefully to 0.0 for s above ~37.6; use log_tail there.
    """
    arr, scalar = _as_finite_array(s, "s")
    out = SQRT_HALF_PI * special.erfc(arr * _INV_SQRT2)
    return _maybe_scalar(out, scalar)


def log_tail(s):
    """log T(s), finite and accurate to ~1e-14 relative for |s| <= 45."""
    arr, scalar = _as_finite_array(s, "s")
    out = LOG_SQRT_2PI + special.log_ndtr(-arr)
    return _maybe_scalar(out, scalar)


def mills(s):
    """Mills ratio m(s) = exp(s^2/2) * T(s).

    Strictly decreasing, with s/(s^2+1) <= m(s) <= 1/s for s >= 1.
    Overflows for s below about -37.6 (where T is essentially sqrt(2*pi)).
    """
    arr, scalar = _as_finite_array(s, "s")
    out = SQRT_HALF_PI * special.erfcx(arr * _INV_SQRT2)
    return _maybe_scalar(out, scalar)


def log_mills(s):
    """log m(s) = log_tail(s) + s^2/2, finite for all finite s."""
    arr, scalar = _as_finite_array(s, "s")
    out = LOG_SQRT_2PI + special.log_ndtr(-arr) + 0.5 * arr * arr
    return _maybe_scalar(out, scalar)


def phi(s):
    """Standard normal CDF, phi(s) = 1 - T(s)/sqrt(2*pi)."""
    arr, scalar = _as_finite_array(s, "s")
    return _maybe_scalar(special.ndtr(arr), scalar)


def phi_inv(p):
    """Inverse of phi on (0, 1).

    A rational-approximation initial guess (ndtri) is polished by one
    safeguarded Newton step on phi wherever the density is large enough for
    the step to carry information.  Near p = 1 the float64 representation of
    p itself limits the attainable accuracy; the lower tail is fully
    accurate because small p retains relative precision.
    """
    arr, scalar = _as_finite_array(p, "p")
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"p must lie strictly inside (0, 1), got {p!r}")
    x = special.ndtri(arr)
    density = np.exp(-0.5 * x * x) / SQRT_2PI
    # Below ~1e-12 the Newton correction is pure rounding noise.
    safe = density > 1e-12
    step = np.where(safe, (special.ndtr(x) - arr) / np.where(safe, density, 1.0), 0.0)
    x = x - np.clip(step, -1.0, 1.0)
    return _maybe_scalar(x, scalar)


def phi_inv_upper(q):
    """x with upper mass 1 - phi(x) = q; accurate for tiny q.

    Complementary channel of phi_inv: q = T(x)/sqrt(2*pi) keeps full
    relative precision where 1 - q would round to 1.
    """
    arr, scalar = _as_finite_array(q, "q")
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"q must lie strictly inside (0, 1), got {q!r}")
    return _maybe_scalar(-special.ndtri(arr), scalar)
