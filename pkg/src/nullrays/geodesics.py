"""Null geodesic integration and reparametrization.

Geodesics are integrated with a classical fixed-step 4th-order scheme so
that runs are deterministic and cheap to reason about.  Each trajectory
stores its nodes *and* a midpoint cache (the state half-way through every
step, obtained by an RK4 half-step from the left node); field equations
propagated along the trajectory can then evaluate their RK4 mid-stages on
the same grid without re-integrating the base curve.

Termination is recorded explicitly: a trajectory ends because the
requested interval ended, because it left the model's domain box (the
desk-scale stand-in for maximality), or because it passed within the
exclusion radius of a removed event.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .errors import (
    GridMismatch,
    NotFuture,
    NotNull,
    NotPregeodesic,
    OutOfDomain,
)
from .spacetime import (
    EXCLUSION_RADIUS,
    SpacetimeModel,
    TangentVector,
    christoffel_batch,
    metric_at,
)

__all__ = [
    "TOL_NULL",
    "DEFAULT_STEPS_PER_UNIT",
    "GeodesicState",
    "NullGeodesic",
    "Pregeodesic",
    "spray_rhs",
    "integrate_geodesic",
    "exp_map",
    "make_null",
    "reparametrize_to_geodesic",
    "geodesic_residual",
    "state_at_parameter",
    "trajectory_rows",
]

# Relative tolerance for accepting a vector as null: |g(v,v)| <= TOL_NULL * |v|^2.
TOL_NULL = 1e-8
DEFAULT_STEPS_PER_UNIT = 800


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass
class GeodesicState:
    """Position and velocity on the tangent bundle."""

    x: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.x = _vec(self.x)
        self.v = _vec(self.v)


class NullGeodesic:
    """Dense output of one integrated null geodesic.

    nodes:      ts[i], xs[i], vs[i]             (i = 0..N)
    midpoints:  mid_ts[i], mid_xs[i], mid_vs[i] (i = 0..N-1), states at the
                middle of step i; absent for resampled curves.
    """

    def __init__(self, model, ts, xs, vs, termination, mid_ts=None, mid_xs=None, mid_vs=None):
        self.model = model
        self.ts = _vec(ts)
        self.xs = _vec(xs)
        self.vs = _vec(vs)
        self.termination = termination
        self.mid_ts = None if mid_ts is None else _vec(mid_ts)
        self.mid_xs = None if mid_xs is None else _vec(mid_xs)
        self.mid_vs = None if mid_vs is None else _vec(mid_vs)

    @property
    def n_nodes(self) -> int:
        return len(self.ts)

    @property
    def has_mid_cache(self) -> bool:
        return self.mid_xs is not None and len(self.mid_xs) == self.n_nodes - 1

    def state(self, i: int) -> GeodesicState:
        return GeodesicState(self.xs[i], self.vs[i])

    @property
    def initial_state(self) -> GeodesicState:
        return self.state(0)

    @property
    def final_state(self) -> GeodesicState:
        return self.state(-1)

    def null_drift(self) -> float:
        """max over nodes of |g(v,v)| — monitors cone drift, no projection."""
        g = metric_at(self.model, self.xs)
        vals = np.einsum("nij,ni,nj->n", g, self.vs, self.vs)
        return float(np.max(np.abs(vals)))

    def pairing_with_tangent(self, fields: np.ndarray) -> np.ndarray:
        """g(field, v) at every node for co-gridded field samples (N, m)."""
        g = metric_at(self.model, self.xs)
        return np.einsum("nij,ni,nj->n", g, fields, self.vs)


def _spray(model: SpacetimeModel, x: np.ndarray, v: np.ndarray):
    gamma = model.metric.christoffel_analytic(x) if model.metric.analytic_christoffel \
        else christoffel_batch(model, x)
    acc = -np.einsum("kij,i,j->k", gamma, v, v)
    return v, acc


def spray_rhs(model: SpacetimeModel, state: GeodesicState):
    """Geodesic spray right-hand side: (dx, dv) = (v, -Gamma(v, v))."""
    model.ensure_in_domain(state.x)
    return _spray(model, state.x, state.v)


def _rk4_step(model, x, v, h, k1=None):
    """One RK4 step of the spray system; returns new (x, v) and stage k1."""
    if k1 is None:
        k1 = _spray(model, x, v)
    k2 = _spray(model, x + 0.5 * h * k1[0], v + 0.5 * h * k1[1])
    k3 = _spray(model, x + 0.5 * h * k2[0], v + 0.5 * h * k2[1])
    k4 = _spray(model, x + h * k3[0], v + h * k3[1])
    x_new = x + (h / 6.0) * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
    v_new = v + (h / 6.0) * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
    return x_new, v_new, k1


def _segment_exclusion_cut(x0, x1, excluded):
    """Fraction s in (0,1] at which segment x0->x1 should stop short of an
    excluded point, or None if the segment stays clear.

    The cut lands where the segment first reaches distance EXCLUSION_RADIUS
    from the excluded point (linear geometry; exact for straight segments,
    second-order accurate otherwise).
    """
    delta = x1 - x0
    seg2 = float(np.dot(delta, delta))
    if seg2 == 0.0:
        return None
    best = None
    for e in excluded:
        s_star = float(np.clip(np.dot(e - x0, delta) / seg2, 0.0, 1.0))
        closest = x0 + s_star * delta
        d_min = float(np.linalg.norm(closest - e))
        if d_min < EXCLUSION_RADIUS:
            back = np.sqrt(max(EXCLUSION_RADIUS**2 - d_min**2, 0.0)) / np.sqrt(seg2)
            s_cut = max(s_star - back, 0.0)
            best = s_cut if best is None else min(best, s_cut)
    return best


def check_null_future(model: SpacetimeModel, p, v):
    """Validate that v is null (to TOL_NULL, scale-aware) and future at p."""
    p, v = _vec(p), _vec(v)
    g = metric_at(model, p)
    vv = float(v @ g @ v)
    norm2 = float(np.dot(v, v))
    if abs(vv) > TOL_NULL * max(norm2, 1e-300):
        raise NotNull(f"|g(v,v)| = {abs(vv):.3e} exceeds {TOL_NULL:.0e} * |v|^2")
    vt = float(v @ g @ model.T(p))
    if vt >= 0.0:
        raise NotFuture(f"g(v, T) = {vt:.3e} >= 0: vector is not future-pointing")


def integrate_geodesic(model: SpacetimeModel, p, v, t_span, n_steps: int | None = None) -> NullGeodesic:
    """Integrate the spray from (p, v) over t_span with fixed steps.

    Stops early (recording why) when the next node would leave the domain
    or when a step's segment passes within the exclusion radius of a
    removed event; in the latter case a shortened final step is taken so
    the last stored node sits just outside the exclusion ball.
    """
    p, v = _vec(p), _vec(v)
    model.ensure_in_domain(p)
    check_null_future(model, p, v)
    t0, t1 = float(t_span[0]), float(t_span[1])
    span = abs(t1 - t0)
    if n_steps is None:
        n_steps = max(int(np.ceil(DEFAULT_STEPS_PER_UNIT * span)), 16)
    if n_steps < 16:
        raise ValueError("n_steps must be at least 16")
    if span == 0.0:
        return NullGeodesic(model, [t0], [p], [v], "interval_end",
                            mid_ts=[], mid_xs=np.empty((0, len(p))), mid_vs=np.empty((0, len(p))))

    h = (t1 - t0) / n_steps
    ts, xs, vs = [t0], [p], [v]
    mid_ts, mid_xs, mid_vs = [], [], []
    termination = "interval_end"

    x_cur, v_cur = p, v
    for i in range(n_steps):
        t_cur = t0 + i * h
        x_next, v_next, k1 = _rk4_step(model, x_cur, v_cur, h)

        s_cut = _segment_exclusion_cut(x_cur, x_next, model.excluded_points)
        if s_cut is not None:
            h_cut = s_cut * h
            if h_cut != 0.0:
                x_mid, v_mid, _ = _rk4_step(model, x_cur, v_cur, 0.5 * h_cut, k1=k1)
                x_end, v_end, _ = _rk4_step(model, x_cur, v_cur, h_cut, k1=k1)
                mid_ts.append(t_cur + 0.5 * h_cut)
                mid_xs.append(x_mid)
                mid_vs.append(v_mid)
                ts.append(t_cur + h_cut)
                xs.append(x_end)
                vs.append(v_end)
            termination = "exclusion_hit"
            break

        if not model.in_domain(x_next):
            termination = "domain_exit"
            break

        x_mid, v_mid, _ = _rk4_step(model, x_cur, v_cur, 0.5 * h, k1=k1)
        mid_ts.append(t_cur + 0.5 * h)
        mid_xs.append(x_mid)
        mid_vs.append(v_mid)
        ts.append(t_cur + h)
        xs.append(x_next)
        vs.append(v_next)
        x_cur, v_cur = x_next, v_next

    return NullGeodesic(model, ts, xs, vs, termination,
                        mid_ts=mid_ts, mid_xs=np.array(mid_xs).reshape(-1, len(p)),
                        mid_vs=np.array(mid_vs).reshape(-1, len(p)))


def exp_map(model: SpacetimeModel, p, w, t: float, n_steps: int | None = None) -> np.ndarray:
    """Endpoint of the geodesic from p with initial velocity w at parameter t."""
    p, w = _vec(p), _vec(w)
    if t == 0.0:
        model.ensure_in_domain(p)
        return p.copy()
    geo = integrate_geodesic(model, p, w, (0.0, t), n_steps=n_steps)
    if geo.termination != "interval_end":
        raise OutOfDomain(f"geodesic left the domain before t={t} ({geo.termination})")
    return geo.xs[-1].copy()


def make_null(model: SpacetimeModel, p, spatial_dir) -> TangentVector:
    """Future null vector at p with g(v, T) = -1 and given spatial direction.

    The direction (length m-1) is completed to the g-unit vector s_hat
    orthogonal to T; the null vector is v = a T + b s_hat with a, b solved
    from g(v,v) = 0 and g(v,T) = -1.
    """
    p = _vec(p)
    model.ensure_in_domain(p)
    d = _vec(spatial_dir)
    if d.shape != (model.dim - 1,) or not np.any(d != 0.0):
        raise ValueError("spatial_dir must be a nonzero vector of length m-1")
    g = metric_at(model, p)
    T = model.T(p)
    w = np.concatenate(([0.0], d))
    alpha = float(T @ g @ T)
    s_raw = w - (float(w @ g @ T) / alpha) * T
    s_norm = float(np.sqrt(s_raw @ g @ s_raw))
    s_hat = s_raw / s_norm
    a = -1.0 / alpha
    b = 1.0 / np.sqrt(-alpha)
    return TangentVector(p, a * T + b * s_hat)


# ---------------------------------------------------------------------------
# Pregeodesics and affine reparametrization
# ---------------------------------------------------------------------------


class Pregeodesic:
    """Dense samples of a curve with proportional covariant acceleration.

    Samples (ts, xs, xdots) with D_t xdot = f(t) * xdot; f given as samples
    aligned with ts.
    """

    def __init__(self, ts, xs, xdots, f_samples):
        self.ts = _vec(ts)
        self.xs = _vec(xs)
        self.xdots = _vec(xdots)
        self.f_samples = _vec(f_samples)
        n = len(self.ts)
        if not (len(self.xs) == len(self.xdots) == len(self.f_samples) == n):
            raise ValueError("sample arrays must share a common length")
        if n < 5:
            raise ValueError("need at least 5 samples")

    @staticmethod
    def from_functions(model, t_grid, x_fn, xdot_fn, f_fn) -> "Pregeodesic":
        ts = _vec(t_grid)
        xs = np.stack([_vec(x_fn(t)) for t in ts])
        xdots = np.stack([_vec(xdot_fn(t)) for t in ts])
        fs = np.array([float(f_fn(t)) for t in ts])
        return Pregeodesic(ts, xs, xdots, fs)


def covariant_acceleration(model: SpacetimeModel, ts, xs, xdots) -> np.ndarray:
    """D_t xdot at each sample: finite-difference xdot derivative + Gamma(xdot, xdot)."""
    ts, xs, xdots = _vec(ts), _vec(xs), _vec(xdots)
    dv = np.gradient(xdots, ts, axis=0)
    gamma = christoffel_batch(model, xs)
    return dv + np.einsum("nkij,ni,nj->nk", gamma, xdots, xdots)


def pregeodesic_residual(model: SpacetimeModel, pre: Pregeodesic) -> float:
    """max |D_t xdot - f * xdot| over interior samples."""
    acc = covariant_acceleration(model, pre.ts, pre.xs, pre.xdots)
    target = pre.f_samples[:, None] * pre.xdots
    errs = np.linalg.norm(acc - target, axis=1)
    return float(np.max(errs[1:-1]))


def reparametrize_to_geodesic(model: SpacetimeModel, pre: Pregeodesic,
                              tol_pre: float = 1e-3):
    """Affine reparametrization of a pregeodesic.

    Computes the new parameter tau(t) = integral_0^t exp(integral_0^x f dy) dx
    (lower limits at the first sample) by nested Simpson quadrature,
    resamples the curve on a uniform tau grid, and rescales velocities by
    dt/dtau.  Returns (tau samples aligned with pre.ts, resampled curve).

    The resampled curve is a NullGeodesic without a midpoint cache — it was
    not produced by the integrator, so field propagation along it is
    rejected (GridMismatch) rather than silently degraded.
    """
    residual = pregeodesic_residual(model, pre)
    if residual > tol_pre:
        raise NotPregeodesic(
            f"covariant acceleration deviates from f*xdot by {residual:.3e} > {tol_pre:.0e}"
        )
    ts = pre.ts
    inner = cumulative_simpson(pre.f_samples, x=ts, initial=0.0)
    integrand = np.exp(inner)
    tau = cumulative_simpson(integrand, x=ts, initial=0.0)

    # invert tau(t) and resample on a uniform affine grid
    n = len(ts)
    tau_uniform = np.linspace(tau[0], tau[-1], n)
    t_of_tau = CubicSpline(tau, ts)
    t_query = t_of_tau(tau_uniform)
    t_query[0], t_query[-1] = ts[0], ts[-1]

    x_spline = CubicSpline(ts, pre.xs, axis=0)
    v_spline = CubicSpline(ts, pre.xdots, axis=0)
    g_spline = CubicSpline(ts, integrand)
    xs_new = x_spline(t_query)
    # dx/dtau = xdot(t) * dt/dtau = xdot(t) / exp(inner)(t)
    vs_new = v_spline(t_query) / g_spline(t_query)[:, None]

    curve = NullGeodesic(model, tau_uniform, xs_new, vs_new, "interval_end")
    return tau, curve


def geodesic_residual(model: SpacetimeModel, ts, xs) -> float:
    """max |x'' + Gamma(x', x')| over interior samples of a curve.

    Zero (to discretization error) exactly when the curve is an affinely
    parametrized geodesic.
    """
    ts, xs = _vec(ts), _vec(xs)
    if len(ts) < 5:
        raise ValueError("need at least 5 samples")
    xdot = np.gradient(xs, ts, axis=0)
    xddot = np.gradient(xdot, ts, axis=0)
    gamma = christoffel_batch(model, xs)
    acc = xddot + np.einsum("nkij,ni,nj->nk", gamma, xdot, xdot)
    errs = np.linalg.norm(acc, axis=1)
    return float(np.max(errs[2:-2]))


def state_at_parameter(geo: NullGeodesic, t: float, substeps: int = 8) -> GeodesicState:
    """State at an off-node parameter, re-integrated from the nearest node.

    Takes the closest stored node on the initial side of t and advances it
    with a few RK4 substeps; accuracy matches the trajectory itself.
    """
    ts = geo.ts
    direction = 1.0 if ts[-1] >= ts[0] else -1.0
    rel = direction * (ts - t)
    candidates = np.where(rel <= 1e-15)[0]
    idx = int(candidates[-1]) if len(candidates) else 0
    x, v = geo.xs[idx].copy(), geo.vs[idx].copy()
    dt = t - ts[idx]
    if dt == 0.0:
        return GeodesicState(x, v)
    h = dt / substeps
    for _ in range(substeps):
        x, v, _ = _rk4_step(geo.model, x, v, h)
    return GeodesicState(x, v)


def trajectory_rows(geo: NullGeodesic):
    """Rows (t, x components..., v components...) for CSV export."""
    return np.hstack([geo.ts[:, None], geo.xs, geo.vs])
