"""Charts for the space of unparametrized null rays.

Over a coordinate sub-box V with a spacelike time slice C = {x0 = c0}, a
ray is represented by the event where it crosses C together with its
tangent there, normalized against the reference field T by g(v, T) = -1.
That pair is a chart point; splitting the tangent's spatial direction into
angles in an orthonormal frame gives 2m-3 real coordinates, and curves of
chart points differentiate into Jacobi classes (tangent vectors of the ray
space).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    BaseMismatch,
    MultipleCrossings,
    NoCrossing,
    NotNormalized,
    NotNull,
    NotSpacelike,
    OutOfDomain,
    SliceOutsideBox,
)
from .geodesics import (
    NullGeodesic,
    integrate_geodesic,
    state_at_parameter,
)
from .jacobi import JacobiClass, RayFamily, class_from_ray_family
from .spacetime import SpacetimeModel, metric_at

__all__ = [
    "CauchyChart",
    "LightRay",
    "RayCoords",
    "build_chart",
    "ray_to_chart",
    "chart_to_ray",
    "ray_coords",
    "coords_to_ray",
    "ray_set_rows",
    "ray_set_from_rows",
    "tangent_from_ray_curve",
    "unit_to_angles",
    "angles_to_unit",
    "induced_slice_metric",
    "slice_is_spacelike",
]


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def induced_slice_metric(g: np.ndarray) -> np.ndarray:
    """Metric induced on a coordinate time slice: the spatial block of g."""
    return g[1:, 1:]


def slice_is_spacelike(g: np.ndarray, tol: float = 1e-12) -> bool:
    """True when the induced slice metric is positive definite."""
    eigs = np.linalg.eigvalsh(induced_slice_metric(g))
    scale = max(float(np.max(np.abs(eigs))), 1.0)
    return bool(np.min(eigs) > tol * scale)


class CauchyChart:
    """Time slice {x0 = c0} of a sub-box V, with an orthonormal frame field.

    The frame at a point is (e0_hat, e1, ..., e_{m-1}): the g-unit version
    of T followed by the Gram-Schmidt completion of the coordinate axes,
    starting from x1 so the frame is deterministic.
    """

    def __init__(self, model: SpacetimeModel, v_lo, v_hi, c0: float):
        self.model = model
        self.v_lo = _vec(v_lo)
        self.v_hi = _vec(v_hi)
        self.c0 = float(c0)

    @property
    def dim(self) -> int:
        return self.model.dim

    def spatial_box(self):
        return self.v_lo[1:], self.v_hi[1:]

    def contains_surface_point(self, q) -> bool:
        q = _vec(q)
        lo, hi = self.spatial_box()
        return bool(np.all(q >= lo) and np.all(q <= hi))

    def event_of(self, q) -> np.ndarray:
        """Full event coordinates of a surface point."""
        return np.concatenate(([self.c0], _vec(q)))

    def frame_at(self, x) -> np.ndarray:
        """Rows: g-orthonormal frame [T_unit, e1, ..., e_{m-1}] at event x."""
        x = _vec(x)
        g = metric_at(self.model, x)
        T = self.model.T(x)
        e0 = T / np.sqrt(-float(T @ g @ T))
        frame = [e0]
        m = self.dim
        for axis in range(1, m):
            u = np.zeros(m)
            u[axis] = 1.0
            # remove the timelike component (note the sign: g(e0,e0) = -1)
            u = u + float(u @ g @ e0) * e0
            for b in frame[1:]:
                u = u - float(u @ g @ b) * b
            norm = np.sqrt(float(u @ g @ u))
            if norm < 1e-12:
                raise NotSpacelike(f"coordinate frame degenerates at {x.tolist()}")
            frame.append(u / norm)
        return np.vstack(frame)

    def same_chart(self, other: "CauchyChart") -> bool:
        return (self.model is other.model and self.c0 == other.c0
                and np.array_equal(self.v_lo, other.v_lo)
                and np.array_equal(self.v_hi, other.v_hi))


def build_chart(model: SpacetimeModel, v_lo, v_hi, c0: float,
                samples_per_axis: int = 10) -> CauchyChart:
    """Construct a chart after validating the slice.

    Checks that V sits inside the model's box, that c0 is interior to V's
    time extent, and that the induced metric on the slice is positive
    definite on a samples_per_axis^(m-1) grid.
    """
    v_lo, v_hi = _vec(v_lo), _vec(v_hi)
    if np.any(v_lo < model.box_lo) or np.any(v_hi > model.box_hi):
        raise SliceOutsideBox("chart sub-box exceeds the model domain box")
    if not (v_lo[0] <= c0 <= v_hi[0]):
        raise SliceOutsideBox(f"slice level {c0} outside the sub-box time extent")
    m = model.dim
    axes = [np.linspace(v_lo[i], v_hi[i], samples_per_axis) for i in range(1, m)]
    grids = np.meshgrid(*axes, indexing="ij") if axes else []
    pts = np.stack([np.full(grids[0].shape, c0)] + list(grids), axis=-1).reshape(-1, m)
    g = metric_at(model, pts)
    induced = g[:, 1:, 1:]
    eigs = np.linalg.eigvalsh(induced)
    scale = max(float(np.max(np.abs(eigs))), 1.0)
    if float(np.min(eigs)) <= 1e-12 * scale:
        raise NotSpacelike(f"slice x0 = {c0} is not spacelike for model {model.name!r}")
    return CauchyChart(model, v_lo, v_hi, c0)


class LightRay:
    """Chart point: crossing event on the slice + normalized null tangent."""

    def __init__(self, chart: CauchyChart, q, v):
        self.chart = chart
        self.q = _vec(q)
        self.v = _vec(v)
        model = chart.model
        if self.q.shape != (chart.dim - 1,):
            raise ValueError("surface point must have m-1 coordinates")
        if not chart.contains_surface_point(self.q):
            raise OutOfDomain(f"surface point {self.q.tolist()} outside the chart sub-box")
        event = self.event
        model.ensure_in_domain(event)
        g = metric_at(model, event)
        vv = float(self.v @ g @ self.v)
        if abs(vv) > 1e-10 * max(float(self.v @ self.v), 1e-300):
            raise NotNull(f"|g(v,v)| = {abs(vv):.3e} above the chart-point tolerance")
        vt = float(self.v @ g @ model.T(event))
        if abs(vt + 1.0) > 1e-10:
            raise NotNormalized(f"g(v,T) = {vt!r}, expected -1 for a chart point")

    @property
    def event(self) -> np.ndarray:
        return self.chart.event_of(self.q)

    @property
    def model(self) -> SpacetimeModel:
        return self.chart.model


@dataclass
class RayCoords:
    """Chart coordinates: m-1 surface coordinates followed by m-2 angles."""

    values: np.ndarray
    dim: int

    def __post_init__(self):
        self.values = _vec(self.values)
        expected = 2 * self.dim - 3
        if self.values.shape != (expected,):
            raise ValueError(f"ray coordinates must have length {expected} for m={self.dim}")

    @property
    def surface(self) -> np.ndarray:
        return self.values[: self.dim - 1]

    @property
    def angles(self) -> np.ndarray:
        return self.values[self.dim - 1:]


def unit_to_angles(u: np.ndarray) -> np.ndarray:
    """Angles of a unit vector of length m-1 (m-2 angles).

    m=2: no angles (the chart fixes the direction family; see coords_to_ray).
    m=3: (atan2(u2, u1),)
    m=4: (arccos(u1), atan2(u3, u2))
    """
    u = _vec(u)
    n = len(u)
    if n == 1:
        return np.array([])
    if n == 2:
        return np.array([np.arctan2(u[1], u[0])])
    if n == 3:
        phi1 = np.arccos(np.clip(u[0], -1.0, 1.0))
        phi2 = np.arctan2(u[2], u[1])
        return np.array([phi1, phi2])
    raise ValueError("direction angles implemented for m in {2,3,4}")


def angles_to_unit(dim: int, angles: np.ndarray) -> np.ndarray:
    """Inverse of unit_to_angles; for m=2 returns the +x1 direction."""
    angles = _vec(angles)
    if dim == 2:
        return np.array([1.0])
    if dim == 3:
        (phi,) = angles
        return np.array([np.cos(phi), np.sin(phi)])
    if dim == 4:
        phi1, phi2 = angles
        return np.array([
            np.cos(phi1),
            np.sin(phi1) * np.cos(phi2),
            np.sin(phi1) * np.sin(phi2),
        ])
    raise ValueError("direction angles implemented for m in {2,3,4}")


def ray_to_chart(chart: CauchyChart, geo: NullGeodesic) -> LightRay:
    """Chart point of an integrated trajectory.

    Locates the unique parameter with x0(t) = c0 (cubic-interpolant
    bisection on the bracketing step, then Newton polish against
    re-integrated states, tolerance 1e-12 in t) and normalizes the tangent
    there to g(v, T) = -1.
    """
    if geo.model is not chart.model:
        raise BaseMismatch("trajectory and chart belong to different models")
    d = geo.xs[:, 0] - chart.c0
    zero_nodes = list(np.where(d == 0.0)[0])
    sign_flips = list(np.where(d[:-1] * d[1:] < 0.0)[0])
    n_crossings = len(zero_nodes) + len(sign_flips)
    if n_crossings == 0:
        raise NoCrossing(
            f"trajectory never meets the slice x0 = {chart.c0} "
            f"(x0 range [{geo.xs[:, 0].min()}, {geo.xs[:, 0].max()}])"
        )
    if n_crossings > 1:
        raise MultipleCrossings(
            f"trajectory meets the slice x0 = {chart.c0} {n_crossings} times"
        )

    if zero_nodes:
        t_star = float(geo.ts[zero_nodes[0]])
    else:
        i = sign_flips[0]
        t_lo, t_hi = float(geo.ts[i]), float(geo.ts[i + 1])
        h = t_hi - t_lo
        f0, f1 = float(d[i]), float(d[i + 1])
        df0, df1 = float(geo.vs[i, 0]), float(geo.vs[i + 1, 0])

        def hermite(t):
            s = (t - t_lo) / h
            h00 = (1 + 2 * s) * (1 - s) ** 2
            h10 = s * (1 - s) ** 2
            h01 = s * s * (3 - 2 * s)
            h11 = s * s * (s - 1)
            return h00 * f0 + h10 * h * df0 + h01 * f1 + h11 * h * df1

        a, b = t_lo, t_hi
        fa = f0
        for _ in range(80):
            mid = 0.5 * (a + b)
            fm = hermite(mid)
            if fa * fm <= 0.0:
                b = mid
            else:
                a, fa = mid, fm
        t_star = 0.5 * (a + b)
        for _ in range(3):
            st = state_at_parameter(geo, t_star)
            step = (st.x[0] - chart.c0) / st.v[0]
            t_star -= step
            if abs(step) < 1e-14 * max(abs(t_star), 1.0):
                break

    st = state_at_parameter(geo, t_star)
    g = metric_at(chart.model, st.x)
    scale = -float(st.v @ g @ chart.model.T(st.x))
    v_norm = st.v / scale
    q = st.x[1:]
    return LightRay(chart, q, v_norm)


def chart_to_ray(ray: LightRay, t_span, n_steps: int | None = None) -> NullGeodesic:
    """Integrate the trajectory of a chart point over t_span."""
    return integrate_geodesic(ray.model, ray.event, ray.v, t_span, n_steps=n_steps)


def ray_coords(ray: LightRay) -> RayCoords:
    """Chart coordinates of a ray: surface point + direction angles."""
    frame = ray.chart.frame_at(ray.event)
    g = metric_at(ray.model, ray.event)
    spatial = frame[1:]
    s = np.array([float(ray.v @ g @ e) for e in spatial])
    a = -float(ray.v @ g @ frame[0])
    u = s / a
    u = u / np.linalg.norm(u)
    return RayCoords(np.concatenate([ray.q, unit_to_angles(u)]), ray.chart.dim)


def coords_to_ray(chart: CauchyChart, coords: RayCoords) -> LightRay:
    """Chart point from coordinates; inverse of ray_coords.

    For m=2 there are no angles and the chart covers the +x1 direction
    family (the demo scenarios only need that family).
    """
    if coords.dim != chart.dim:
        raise BaseMismatch("coordinate dimension does not match the chart")
    q = coords.surface
    event = chart.event_of(q)
    frame = chart.frame_at(event)
    u = angles_to_unit(chart.dim, coords.angles)
    direction_vec = np.einsum("i,ij->j", u, frame[1:])
    # All catalog metrics are diagonal, so the spatial frame legs carry no
    # time component and the spatial part determines the direction.
    if abs(direction_vec[0]) > 1e-12:
        raise NotSpacelike("frame produced a direction with a time component")
    from .geodesics import make_null

    v = make_null(chart.model, event, direction_vec[1:]).comps
    return LightRay(chart, q, v)


def ray_set_rows(rays) -> np.ndarray:
    """CSV rows (surface coords..., angles...) of a set of chart points."""
    return np.stack([ray_coords(r).values for r in rays])


def ray_set_from_rows(chart: CauchyChart, rows) -> list:
    """Inverse of ray_set_rows on a given chart."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    return [coords_to_ray(chart, RayCoords(row, chart.dim)) for row in rows]


def tangent_from_ray_curve(chart: CauchyChart, ray_fn, ds: float = 1e-3,
                           richardson: bool = False,
                           connection_model: SpacetimeModel | None = None) -> JacobiClass:
    """Jacobi class of a curve of chart points s -> LightRay.

    Differences the crossing events and normalized tangents at s = 0; the
    result is the tangent vector of the ray space that the curve traces.
    """
    center = ray_fn(0.0)
    if not chart.same_chart(center.chart):
        raise BaseMismatch("ray curve does not live on the given chart")

    family = RayFamily(
        q=lambda s: ray_fn(s).event,
        direction=lambda s: ray_fn(s).v[1:],
    )
    return class_from_ray_family(chart.model, family, ds=ds,
                                 connection_model=connection_model,
                                 richardson=richardson)
