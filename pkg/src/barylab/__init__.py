"""barylab: a numerical laboratory for Gaussian isoperimetry with barycenter repulsion.

The functional under study assigns to a set E of fixed Gaussian measure the
energy  F(E) = P_gamma(E) + eps * sqrt(pi/2) * |b(E)|^2,  where P_gamma is
the Gaussian perimeter and b(E) the (non-renormalized) Gaussian barycenter.
Everything is computed in reduced units that stay O(1) at large level s:
perimeters are scaled by e^{s^2/2}, barycenters by sqrt(2*pi) e^{s^2/2},
and the repulsion strength enters as eps0 with
eps = eps0 * sqrt(2*pi) * e^{s^2/2} / s^2.

Module map:

* gaussian     - high-precision tails, Mills ratio, quantile
* candidates   - candidate sets, reduced geometry, boundary-moment checks
* energy       - reduced energies, threshold eps0(s), asymmetry constants
* solver1d     - reduced 1D minimization and the interval-family census
* stability    - second-variation spectra on strip/half-space boundaries
* profiles     - planar graph profiles, quadrature energies, descent
* sweeps       - batch grids, consistency checks, CSV/JSON artifacts
* api          - FastAPI service wrapping all of the above
* cli          - thin command-line client (plus `serve`)
"""

from ._version import __version__
from .candidates import (
    Ball,
    HalfSpace,
    Interval1D,
    ProblemContext,
    SymmetricStrip,
    a_of_s,
    geometry,
)
from .energy import (
    evaluate,
    half_space_f_hat,
    quantitative_constant,
    strip_p_hat,
    threshold_eps0,
)
from .errors import (
    BarylabError,
    ConsistencyError,
    DegenerateSetError,
    DomainError,
    InfeasibleVolumeError,
    QuadratureRefinementError,
)
from .profiles import Profile, descend, profile_energy
from .solver1d import brute_force_unions, g_census, minimize1d
from .stability import min_eigenvalue, strip_stability_threshold

__all__ = [
    "__version__",
    "ProblemContext",
    "HalfSpace",
    "SymmetricStrip",
    "Interval1D",
    "Ball",
    "a_of_s",
    "geometry",
    "evaluate",
    "strip_p_hat",
    "threshold_eps0",
    "quantitative_constant",
    "half_space_f_hat",
    "minimize1d",
    "g_census",
    "brute_force_unions",
    "min_eigenvalue",
    "strip_stability_threshold",
    "Profile",
    "profile_energy",
    "descend",
    "BarylabError",
    "DomainError",
    "DegenerateSetError",
    "InfeasibleVolumeError",
    "QuadratureRefinementError",
    "ConsistencyError",
]
