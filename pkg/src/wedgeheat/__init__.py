"""Numerical laboratory for heat flow on planar angular domains.

The package evaluates the Dirichlet heat kernel on a wedge of opening angle
kappa0 via its Bessel eigenfunction series, computes weighted L_p norms of
deterministic and stochastic heat convolutions, and provides experiment
drivers that probe the sharp weight-parameter threshold at the vertex.
"""

__version__ = "0.1.0"

from .errors import NonConvergentError, NonFiniteError
from .geometry import AngularDomain, GridSpec, PolarPoint, graded_polar_grid

__all__ = [
    "AngularDomain",
    "GridSpec",
    "NonConvergentError",
    "NonFiniteError",
    "PolarPoint",
    "graded_polar_grid",
    "__version__",
]
