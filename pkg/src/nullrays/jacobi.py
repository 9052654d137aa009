"""Jacobi fields along null geodesics and their classes modulo the tangent.

A field J along a geodesic with tangent v solves J'' + R(J, v)v = 0 (primes
are covariant derivatives in the affine parameter).  Fields are propagated
as the first-order coordinate system

    dJ^k/dt = K^k - Gamma^k_ij v^i J^j
    dK^k/dt = -(R(J,v)v)^k - Gamma^k_ij v^i K^j

with K the covariant derivative DJ/dt, using the same fixed-step scheme and
the same node/midpoint grid as the base geodesic (coefficients are
precomputed in batch at the stored nodes and cached per trajectory).

The pairing g(J, v) of any solution is an affine function a + b t of the
parameter; b = 0 characterizes the fields that come from variations by
light rays.  Two exact identities are used throughout:

* b = g(K(0), v(0)) — the slope is readable off the initial data, because
  g(J'', v) = -g(R(J,v)v, v) = 0;
* the quotient by fields (a + b t) v is realized concretely by splitting
  initial data along span{v} + {T}^perp, which is direct since g(v,T) != 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BaseMismatch, GridMismatch, NotLightRayField, NotNormalized
from .geodesics import NullGeodesic, integrate_geodesic, make_null
from .spacetime import (
    SpacetimeModel,
    christoffel_batch,
    metric_at,
    riemann_matrix_batch,
)

__all__ = [
    "JacobiInit",
    "JacobiField",
    "JacobiClass",
    "JacobiPropagator",
    "integrate_jacobi",
    "affine_pairing_fit",
    "is_lightray_jacobi",
    "mod_gamma_reduce",
    "class_distance",
    "RayFamily",
    "class_from_ray_family",
    "variation_jacobi_oracle",
    "VariationOracle",
    "jacobi_rows",
]

# Scale-aware slope tolerance for membership in the variations-by-light-rays
# family: |b| <= MEMBER_TOL * (1 + |a|).
MEMBER_TOL = 1e-6


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass
class JacobiInit:
    """Initial values J(0) and DJ/dt(0) for a field along a geodesic."""

    J0: np.ndarray
    J0dot: np.ndarray

    def __post_init__(self):
        self.J0 = _vec(self.J0)
        self.J0dot = _vec(self.J0dot)
        if not (np.all(np.isfinite(self.J0)) and np.all(np.isfinite(self.J0dot))):
            raise ValueError("non-finite initial data")


class JacobiField:
    """Dense samples (t, J, DJ/dt) co-gridded with the base geodesic."""

    def __init__(self, geodesic: NullGeodesic, Js: np.ndarray, Kdots: np.ndarray):
        self.geodesic = geodesic
        self.ts = geodesic.ts
        self.Js = _vec(Js)
        self.Kdots = _vec(Kdots)

    def pairing(self) -> np.ndarray:
        """g(J(t), v(t)) at every node."""
        return self.geodesic.pairing_with_tangent(self.Js)

    @property
    def init(self) -> JacobiInit:
        return JacobiInit(self.Js[0], self.Kdots[0])


class JacobiPropagator:
    """Precomputed propagation coefficients along one geodesic.

    Building the connection/curvature arrays once per trajectory makes
    repeated field propagation (linearity sweeps, bases of the solution
    space) cheap, and guarantees all fields see identical coefficients.
    """

    def __init__(self, geodesic: NullGeodesic):
        if not geodesic.has_mid_cache:
            raise GridMismatch(
                "geodesic has no integrator-produced midpoint grid; "
                "field propagation needs the dense output of integrate_geodesic"
            )
        self.geo = geodesic
        model = geodesic.model
        gam_n = christoffel_batch(model, geodesic.xs)
        self.C_nodes = np.einsum("nkij,ni->nkj", gam_n, geodesic.vs)
        self.M_nodes = riemann_matrix_batch(model, geodesic.xs, geodesic.vs)
        if geodesic.n_nodes > 1:
            gam_m = christoffel_batch(model, geodesic.mid_xs)
            self.C_mids = np.einsum("nkij,ni->nkj", gam_m, geodesic.mid_vs)
            self.M_mids = riemann_matrix_batch(model, geodesic.mid_xs, geodesic.mid_vs)
        else:
            self.C_mids = np.empty((0,) + self.C_nodes.shape[1:])
            self.M_mids = np.empty((0,) + self.M_nodes.shape[1:])

    def integrate(self, init: JacobiInit) -> JacobiField:
        ts = self.geo.ts
        J = init.J0.copy()
        K = init.J0dot.copy()
        Js = [J]
        Ks = [K]

        def rhs(C, M, Jv, Kv):
            return Kv - C @ Jv, -(M @ Jv) - C @ Kv

        for i in range(len(ts) - 1):
            h = ts[i + 1] - ts[i]
            c0, m0 = self.C_nodes[i], self.M_nodes[i]
            cm, mm = self.C_mids[i], self.M_mids[i]
            c1, m1 = self.C_nodes[i + 1], self.M_nodes[i + 1]
            k1 = rhs(c0, m0, J, K)
            k2 = rhs(cm, mm, J + 0.5 * h * k1[0], K + 0.5 * h * k1[1])
            k3 = rhs(cm, mm, J + 0.5 * h * k2[0], K + 0.5 * h * k2[1])
            k4 = rhs(c1, m1, J + h * k3[0], K + h * k3[1])
            J = J + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
            K = K + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
            Js.append(J)
            Ks.append(K)
        return JacobiField(self.geo, np.array(Js), np.array(Ks))


def _propagator(geodesic: NullGeodesic) -> JacobiPropagator:
    cached = getattr(geodesic, "_field_propagator", None)
    if cached is None:
        cached = JacobiPropagator(geodesic)
        geodesic._field_propagator = cached
    return cached


def integrate_jacobi(geodesic: NullGeodesic, init: JacobiInit) -> JacobiField:
    """Propagate a field with the given initial values along the geodesic."""
    return _propagator(geodesic).integrate(init)


def affine_pairing_fit(field: JacobiField):
    """Least-squares line a + b t through g(J(t), v(t)).

    Returns (a, b, residual) with residual the max absolute deviation of
    the samples from the fitted line.
    """
    ts = field.ts
    if len(ts) < 8:
        raise ValueError("need at least 8 samples for the pairing fit")
    p = field.pairing()
    slope, intercept = np.polyfit(ts, p, 1)
    residual = float(np.max(np.abs(p - (intercept + slope * ts))))
    return float(intercept), float(slope), residual


def is_lightray_jacobi(field: JacobiField, tol: float | None = None) -> bool:
    """True when the pairing slope vanishes: |b| <= tol (inclusive).

    Default tolerance is scale-aware: MEMBER_TOL * (1 + |a|).
    """
    a, b, _ = affine_pairing_fit(field)
    if tol is None:
        tol = MEMBER_TOL * (1.0 + abs(a))
    return abs(b) <= tol


class JacobiClass:
    """Canonical representative (w0, w0dot) of a field class modulo (a+bt)v.

    Both vectors are g-orthogonal to T at the base event; the base ray
    tangent v is stored for pairing evaluations.
    """

    def __init__(self, model: SpacetimeModel, x: np.ndarray, v: np.ndarray,
                 w0: np.ndarray, w0dot: np.ndarray):
        self.model = model
        self.x = _vec(x)
        self.v = _vec(v)
        self.w0 = _vec(w0)
        self.w0dot = _vec(w0dot)
        g = metric_at(model, self.x)
        T = model.T(self.x)
        scale = 1.0 + float(np.linalg.norm(self.w0) + np.linalg.norm(self.w0dot))
        for label, w in (("w0", self.w0), ("w0dot", self.w0dot)):
            r = abs(float(w @ g @ T))
            if r > 1e-10 * scale:
                raise ValueError(f"{label} not T-orthogonal: residual {r:.3e}")

    def as_pair(self):
        return self.w0.copy(), self.w0dot.copy()


def _split_off_tangent(g: np.ndarray, T: np.ndarray, v: np.ndarray, u: np.ndarray):
    """Decompose u = c v + w with g(w, T) = 0; valid since g(v, T) != 0."""
    c = float(u @ g @ T) / float(v @ g @ T)
    return c, u - c * v


def mod_gamma_reduce(geodesic: NullGeodesic, init: JacobiInit) -> JacobiClass:
    """Quotient a field by the pure-reparametrization family (a + bt)v.

    Requires the geodesic normalized g(v(0), T) = -1 and the field to come
    from a variation by light rays (pairing slope zero).  The slope is an
    exact function of the initial data, b = g(DJ/dt(0), v(0)), so
    membership is decided algebraically without propagating the field.
    """
    model = geodesic.model
    x0 = geodesic.xs[0]
    v0 = geodesic.vs[0]
    g = metric_at(model, x0)
    T = model.T(x0)
    if abs(float(v0 @ g @ T) + 1.0) > 1e-10:
        raise NotNormalized(f"g(v, T) = {float(v0 @ g @ T)!r}, expected -1")
    a = float(init.J0 @ g @ v0)
    b = float(init.J0dot @ g @ v0)
    if abs(b) > MEMBER_TOL * (1.0 + abs(a)):
        raise NotLightRayField(
            f"pairing slope b = {b:.3e} exceeds {MEMBER_TOL:.0e}*(1+|a|); "
            "field is not a variation by light rays"
        )
    _, w0 = _split_off_tangent(g, T, v0, init.J0)
    _, w0dot = _split_off_tangent(g, T, v0, init.J0dot)
    return JacobiClass(model, x0, v0, w0, w0dot)


def class_distance(c1: JacobiClass, c2: JacobiClass) -> float:
    """max Euclidean distance between the canonical pairs (test metric)."""
    if c1.x.shape != c2.x.shape or not np.allclose(c1.x, c2.x, atol=1e-9, rtol=0.0):
        raise BaseMismatch("classes sit at different base events")
    return float(max(np.linalg.norm(c1.w0 - c2.w0),
                     np.linalg.norm(c1.w0dot - c2.w0dot)))


# ---------------------------------------------------------------------------
# Classes from explicit one-parameter families of rays
# ---------------------------------------------------------------------------


@dataclass
class RayFamily:
    """One-parameter family of normalized rays s -> (point, spatial direction).

    ``slide`` moves the anchor of ray s along itself by an affine parameter
    t0(s), and ``scale`` rescales its tangent by lambda(s) — gauges that
    change the family's parametrization but not the underlying curve of
    rays.  Both must be trivial at s = 0 so the base state stays normalized.
    """

    q: callable
    direction: callable
    slide: callable = field(default=lambda s: 0.0)
    scale: callable = field(default=lambda s: 1.0)


def _family_state(model: SpacetimeModel, family: RayFamily, s: float,
                  slide_steps: int = 64):
    point = _vec(family.q(s))
    v = make_null(model, point, _vec(family.direction(s))).comps
    t0 = float(family.slide(s))
    if t0 != 0.0:
        geo = integrate_geodesic(model, point, v, (0.0, t0), n_steps=slide_steps)
        point, v = geo.xs[-1], geo.vs[-1]
    return point, float(family.scale(s)) * v


def class_from_ray_family(model: SpacetimeModel, family: RayFamily,
                          ds: float = 1e-4,
                          connection_model: SpacetimeModel | None = None,
                          richardson: bool = False) -> JacobiClass:
    """Class of the field generated by a family of rays, differenced at s=0.

    J(0) is the central difference of the anchor points; DJ/dt(0) is the
    covariant s-derivative of the tangent field along the anchor curve,
    taken with ``connection_model``'s connection (defaults to ``model``).
    Comparing families built in conformally related metrics requires a
    common reference — covariant derivatives in different metrics differ
    by terms that do not lie along the ray tangent, so mixing them is
    *not* gauge-innocent.  When a reference is given, the result is also
    expressed in the reference convention: the two metrics normalize the
    same ray's generator differently (v_ref = v / mu with
    mu = -g_ref(v, T)), and moving to the reference parametrization
    rescales the derivative part of the class by 1/mu while leaving the
    positional part untouched.

    With ``richardson`` the central differences at ds and ds/2 are combined
    to cancel the leading O(ds^2) error.
    """
    if float(family.slide(0.0)) != 0.0 or float(family.scale(0.0)) != 1.0:
        raise ValueError("family gauges must be trivial at s = 0")
    conn = connection_model if connection_model is not None else model
    x0, v0 = _family_state(model, family, 0.0)

    def diffs(step: float):
        xp, vp = _family_state(model, family, +step)
        xm, vm = _family_state(model, family, -step)
        return (xp - xm) / (2.0 * step), (vp - vm) / (2.0 * step)

    J0, dv = diffs(ds)
    if richardson:
        J0_h, dv_h = diffs(ds / 2.0)
        J0 = (4.0 * J0_h - J0) / 3.0
        dv = (4.0 * dv_h - dv) / 3.0

    gamma = christoffel_batch(conn, x0)
    J0dot = dv + np.einsum("kij,i,j->k", gamma, J0, v0)

    stub = NullGeodesic(model, [0.0], [x0], [v0], "interval_end",
                        mid_ts=[], mid_xs=np.empty((0, model.dim)),
                        mid_vs=np.empty((0, model.dim)))
    cls = mod_gamma_reduce(stub, JacobiInit(J0, J0dot))
    if conn is not model:
        g_ref = metric_at(conn, x0)
        T = conn.T(x0)
        mu = -float(cls.v @ g_ref @ T)
        cls = JacobiClass(conn, x0, cls.v / mu, cls.w0, cls.w0dot / mu)
    return cls


# ---------------------------------------------------------------------------
# Finite-difference variation oracle
# ---------------------------------------------------------------------------


@dataclass
class VariationOracle:
    """Central-difference field of a geodesic variation, with its initial data."""

    ts: np.ndarray
    Js: np.ndarray
    J0: np.ndarray
    J0dot: np.ndarray


def variation_jacobi_oracle(model: SpacetimeModel, lam, W, ds: float,
                            t_span=(0.0, 1.0), n_steps: int | None = None) -> VariationOracle:
    """Field of the variation x(s, t) = exp_{lam(s)}(t W(s)) by differencing.

    Integrates the two geodesics at s = +-ds on a shared parameter grid and
    returns J(t) ~ [x(ds, t) - x(-ds, t)] / (2 ds), together with the
    initial values encoded by the family at the same step: J(0) the central
    difference of lam, DJ/dt(0) the covariant central difference of W along
    lam.  Completely independent of the field propagator — this is the
    oracle the propagator is tested against.
    """
    lam0 = _vec(lam(0.0))
    W0 = _vec(W(0.0))
    geo_p = integrate_geodesic(model, _vec(lam(+ds)), _vec(W(+ds)), t_span, n_steps=n_steps)
    geo_m = integrate_geodesic(model, _vec(lam(-ds)), _vec(W(-ds)), t_span, n_steps=n_steps)
    if geo_p.termination != "interval_end" or geo_m.termination != "interval_end":
        raise GridMismatch("variation geodesics left the domain; shrink the interval")
    if geo_p.n_nodes != geo_m.n_nodes:
        raise GridMismatch("variation geodesics produced different grids")
    Js = (geo_p.xs - geo_m.xs) / (2.0 * ds)
    J0 = (_vec(lam(+ds)) - _vec(lam(-ds))) / (2.0 * ds)
    dW = (_vec(W(+ds)) - _vec(W(-ds))) / (2.0 * ds)
    gamma = christoffel_batch(model, lam0)
    J0dot = dW + np.einsum("kij,i,j->k", gamma, J0, W0)
    return VariationOracle(ts=geo_p.ts, Js=Js, J0=J0, J0dot=J0dot)


def jacobi_rows(field: JacobiField) -> np.ndarray:
    """Rows (t, J components..., DJ/dt components..., pairing) for CSV export."""
    return np.hstack([
        field.ts[:, None], field.Js, field.Kdots, field.pairing()[:, None]
    ])
