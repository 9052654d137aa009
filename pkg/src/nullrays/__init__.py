"""Numerical toolkit for the space of light rays of a conformal class.

The package builds conformally flat model spacetimes, integrates null
geodesics, propagates Jacobi fields and reduces them to tangent vectors
of the ray space, represents rays in Cauchy-slice charts, and evaluates
the canonical contact structure on those tangents.  Every claimed
geometric property is backed by a registered numerical check
(:mod:`nullrays.checks`), runnable through the CLI (``nullrays
check-all``) or scenario files (``nullrays run``).
"""

from . import checks, cli, contact, errors, expressions, geodesics, jacobi, lightrays, rng, spacetime
from .errors import NullraysError, ParseError
from .geodesics import (
    NullGeodesic,
    Pregeodesic,
    integrate_geodesic,
    make_null,
    reparametrize_to_geodesic,
)
from .jacobi import (
    JacobiClass,
    JacobiField,
    JacobiInit,
    class_distance,
    class_from_ray_family,
    integrate_jacobi,
    mod_gamma_reduce,
)
from .lightrays import (
    CauchyChart,
    LightRay,
    RayCoords,
    build_chart,
    chart_to_ray,
    coords_to_ray,
    ray_coords,
    ray_to_chart,
    tangent_from_ray_curve,
)
from .spacetime import SpacetimeModel, conformal_flat, conformal_rescale, get_model, minkowski

__version__ = "0.1.0"

__all__ = [
    "checks", "cli", "contact", "errors", "expressions", "geodesics",
    "jacobi", "lightrays", "rng", "spacetime",
    "NullraysError", "ParseError",
    "NullGeodesic", "Pregeodesic", "integrate_geodesic", "make_null",
    "reparametrize_to_geodesic",
    "JacobiClass", "JacobiField", "JacobiInit", "class_distance",
    "class_from_ray_family", "integrate_jacobi", "mod_gamma_reduce",
    "CauchyChart", "LightRay", "RayCoords", "build_chart", "chart_to_ray",
    "coords_to_ray", "ray_coords", "ray_to_chart", "tangent_from_ray_curve",
    "SpacetimeModel", "conformal_flat", "conformal_rescale", "get_model",
    "minkowski",
    "__version__",
]
