"""Registry of numerical property checks with coverage accounting.

Each check targets one or more named invariants from ``INVARIANT_MANIFEST``.
``assert_coverage`` fails loudly if any manifest entry is not claimed by a
registered check, so silently dropping a property from the suite is
impossible.  A few extra checks (``covers=()``) are planted-bug controls:
they deliberately sabotage one computation path and pass only if the
sabotage is *detected*, demonstrating that the honest checks have teeth.

Record semantics: every check reports a ``residual`` and a ``tolerance``
and passes iff ``residual <= tolerance``.  For "must exceed a threshold"
assertions (detection magnitudes, convergence orders) the residual is
``required - actual`` with tolerance ``0.0``.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from . import contact as ct
from . import geodesics as ge
from . import jacobi as ja
from . import lightrays as lr
from . import spacetime as st
from .rng import stream

__all__ = [
    "CheckRecord",
    "CheckSpec",
    "INVARIANT_MANIFEST",
    "REGISTRY",
    "assert_coverage",
    "run_registered_checks",
]


# --------------------------------------------------------------------------
# record / registry plumbing
# --------------------------------------------------------------------------


def digest_inputs(inputs: dict) -> str:
    """Short stable digest of a check's input configuration."""
    blob = json.dumps(inputs, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class CheckRecord:
    """Outcome of one named check: passes iff residual <= tolerance."""

    check_id: str
    residual: float
    tolerance: float
    passed: bool
    inputs_digest: str = ""
    details: dict = dc_field(default_factory=dict)

    @classmethod
    def from_residual(cls, check_id: str, residual: float, tolerance: float, **details) -> "CheckRecord":
        residual = float(residual)
        return cls(check_id, residual, float(tolerance), bool(residual <= tolerance),
                   details=dict(details))


@dataclass(frozen=True)
class CheckSpec:
    """A registered check function and the invariant ids it covers."""

    check_id: str
    covers: tuple
    fn: object  # callable(seed: int) -> list[CheckRecord]


INVARIANT_MANIFEST = (
    "spacetime.metric_wellformed",
    "spacetime.christoffel_fd_order",
    "spacetime.flat_curvature_vanishes",
    "spacetime.index_roundtrip",
    "geodesics.null_drift",
    "geodesics.affine_rescale",
    "geodesics.rk_convergence",
    "geodesics.reparametrization_residual",
    "jacobi.uniqueness_linearity",
    "jacobi.pairing_affine",
    "jacobi.dimension_bookkeeping",
    "jacobi.conformal_class_invariance",
    "jacobi.reparametrization_invariance",
    "jacobi.variation_oracle",
    "lightrays.chart_dimension",
    "lightrays.ray_chart_invariance",
    "lightrays.tangent_linearity",
    "lightrays.variation_independence",
    "contact.representative_independence",
    "contact.nondegeneracy",
    "contact.kernel_separation",
    "contact.hyperplane_invariance",
    "contact.spray_kernel",
    "contact.theta0_two_path",
    "cli.determinism",
    "cli.coverage",
)

REGISTRY: list = []


def register(check_id: str, covers=()):
    def wrap(fn):
        REGISTRY.append(CheckSpec(check_id=check_id, covers=tuple(covers), fn=fn))
        return fn

    return wrap


def assert_coverage() -> CheckRecord:
    """Every manifest invariant must be claimed by at least one check."""
    claimed = set()
    for spec in REGISTRY:
        claimed.update(spec.covers)
    unknown = sorted(claimed - set(INVARIANT_MANIFEST))
    if unknown:
        raise AssertionError(f"checks claim unknown invariant ids: {unknown}")
    missing = sorted(set(INVARIANT_MANIFEST) - claimed)
    if missing:
        raise AssertionError(f"invariants with no registered check: {missing}")
    return CheckRecord.from_residual(
        "cli.coverage",
        residual=len(missing),
        tolerance=0.0,
        manifest_size=len(INVARIANT_MANIFEST),
        registered_checks=len(REGISTRY),
    )


def run_registered_checks(seed: int = 0) -> list:
    """Run every registered check; returns records sorted by check id."""
    records = []
    for spec in REGISTRY:
        out = spec.fn(seed)
        records.extend(out if isinstance(out, list) else [out])
    for rec in records:
        if not rec.inputs_digest:
            rec.inputs_digest = digest_inputs({"check_id": rec.check_id, "seed": seed})
    records.sort(key=lambda r: r.check_id)
    return records


# --------------------------------------------------------------------------
# shared fixtures
# --------------------------------------------------------------------------

CURVED2_SIGMA = "0.2*sin(x1)"
CURVED3_SIGMA = "0.2*sin(x1)"
CURVED4_SIGMA = "0.15*sin(x1) + 0.1*sin(x3)"


def flat_model(dim: int) -> st.SpacetimeModel:
    return st.minkowski(dim)


def curved_model(dim: int) -> st.SpacetimeModel:
    sigma = {2: CURVED2_SIGMA, 3: CURVED3_SIGMA, 4: CURVED4_SIGMA}[dim]
    return st.conformal_flat(dim, sigma)


def sample_point(model: st.SpacetimeModel, rng: np.random.Generator, radius: float = 1.5) -> np.ndarray:
    """Random event comfortably inside the model box (rejection sampled)."""
    for _ in range(256):
        x = rng.uniform(-radius, radius, size=model.dim)
        if model.in_domain(x):
            return x
    raise RuntimeError("could not sample a domain point")


def sample_direction(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.standard_normal(n)
    return u / np.linalg.norm(u)


def sample_null_state(model: st.SpacetimeModel, rng: np.random.Generator):
    """Random (point, normalized future null velocity)."""
    x = sample_point(model, rng)
    v = ge.make_null(model, x, sample_direction(rng, model.dim - 1)).comps
    return x, v


def fit_order(hs, errs) -> float:
    """Least-squares convergence order of errs ~ C * hs**p."""
    hs = np.asarray(hs, dtype=float)
    errs = np.maximum(np.asarray(errs, dtype=float), 1e-300)
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


# --------------------------------------------------------------------------
# spacetime checks
# --------------------------------------------------------------------------


@register("spacetime.metric_wellformed", covers=["spacetime.metric_wellformed"])
def check_metric_wellformed(seed: int):
    rng = stream(seed, "spacetime.metric_wellformed")
    models = [
        flat_model(2),
        flat_model(3),
        flat_model(4),
        curved_model(3),
        curved_model(4),
        st.punctured_minkowski2(),
        st.minkowski_ball3(),
    ]
    worst_sym = 0.0
    signature_failures = 0
    timelike_failures = 0
    for model in models:
        radius = 0.6 if model.name == "minkowski_ball3" else 1.5
        pts = np.stack([sample_point(model, rng, radius=radius) for _ in range(60)])
        for p in pts:
            st.eval_metric(model, p)  # raises on any symmetry/signature defect
        g = st.metric_at(model, pts)
        worst_sym = max(worst_sym, float(np.max(np.abs(g - np.swapaxes(g, -1, -2)))))
        eigs = np.linalg.eigvalsh(g)
        signature_failures += int(np.sum(np.sum(eigs < 0.0, axis=-1) != 1))
        T = np.stack([model.T(p) for p in pts])
        gTT = np.einsum("ni,nij,nj->n", T, g, T)
        timelike_failures += int(np.sum(gTT >= 0.0))
    return CheckRecord.from_residual(
        "spacetime.metric_wellformed",
        residual=worst_sym + signature_failures + timelike_failures,
        tolerance=1e-12,
        models=[m.name for m in models],
        signature_failures=signature_failures,
        timelike_failures=timelike_failures,
    )


@register("spacetime.christoffel_fd_order", covers=["spacetime.christoffel_fd_order"])
def check_christoffel_fd_order(seed: int):
    rng = stream(seed, "spacetime.christoffel_fd_order")
    model = curved_model(3)
    pts = np.stack([sample_point(model, rng) for _ in range(5)])
    exact = st.christoffel_batch(model, pts)
    hs = [4e-3, 2e-3, 1e-3]
    errs = []
    for h in hs:
        fd = np.stack([st.christoffel_fd(model, pts[i], h=h) for i in range(len(pts))])
        errs.append(float(np.max(np.abs(fd - exact))))
    order = fit_order(hs, errs)
    return CheckRecord.from_residual(
        "spacetime.christoffel_fd_order",
        residual=1.9 - order,
        tolerance=0.0,
        order=order,
        step_sizes=hs,
        errors=errs,
    )


@register("spacetime.flat_curvature_vanishes", covers=["spacetime.flat_curvature_vanishes"])
def check_flat_curvature(seed: int):
    rng = stream(seed, "spacetime.flat_curvature_vanishes")
    worst = 0.0
    for model in (flat_model(3), st.conformal_flat(3, "0.3"), flat_model(4)):
        for _ in range(20):
            x = sample_point(model, rng)
            v = rng.standard_normal(model.dim)
            J = rng.standard_normal(model.dim)
            worst = max(worst, float(np.max(np.abs(st.riemann_matrix(model, x, v) @ J))))
            worst = max(worst, float(np.max(np.abs(st.riemann_op(model, x, J, v, v)))))
    return CheckRecord.from_residual(
        "spacetime.flat_curvature_vanishes", residual=worst, tolerance=1e-9
    )


@register("spacetime.index_roundtrip", covers=["spacetime.index_roundtrip"])
def check_index_roundtrip(seed: int):
    rng = stream(seed, "spacetime.index_roundtrip")
    worst = 0.0
    for model in (flat_model(2), curved_model(3), curved_model(4)):
        for _ in range(20):
            x = sample_point(model, rng)
            v = st.TangentVector(x, rng.standard_normal(model.dim))
            p = st.lower_index(model, v)
            back = st.raise_index(model, x, p)
            worst = max(worst, float(np.max(np.abs(back.comps - v.comps))))
    return CheckRecord.from_residual("spacetime.index_roundtrip", residual=worst, tolerance=1e-12)


# --------------------------------------------------------------------------
# geodesic checks
# --------------------------------------------------------------------------


def _standard_rays(model, rng, count, t_span=(0.0, 1.5)):
    rays = []
    for _ in range(count):
        x, v = sample_null_state(model, rng)
        rays.append(ge.integrate_geodesic(model, x, v, t_span))
    return rays


@register("geodesics.null_drift", covers=["geodesics.null_drift"])
def check_null_drift(seed: int):
    rng = stream(seed, "geodesics.null_drift")
    worst = 0.0
    for model in (flat_model(3), curved_model(2), curved_model(3), curved_model(4)):
        for geo in _standard_rays(model, rng, 5):
            v0 = geo.vs[0]
            scale = float(np.dot(v0, v0))
            worst = max(worst, geo.null_drift() / scale)
    return CheckRecord.from_residual("geodesics.null_drift", residual=worst, tolerance=1e-8)


@register("geodesics.affine_rescale", covers=["geodesics.affine_rescale"])
def check_affine_rescale(seed: int):
    rng = stream(seed, "geodesics.affine_rescale")
    model = curved_model(3)
    worst = 0.0
    for lam in (0.5, 2.0):
        x, v = sample_null_state(model, rng)
        n = 400
        geo_a = ge.integrate_geodesic(model, x, lam * v, (0.0, 1.0), n_steps=n)
        geo_b = ge.integrate_geodesic(model, x, v, (0.0, lam), n_steps=n)
        worst = max(worst, float(np.max(np.abs(geo_a.xs - geo_b.xs))))
        worst = max(worst, float(np.max(np.abs(geo_a.vs - lam * geo_b.vs))))
    return CheckRecord.from_residual("geodesics.affine_rescale", residual=worst, tolerance=1e-9)


@register("geodesics.rk_convergence", covers=["geodesics.rk_convergence"])
def check_rk_convergence(seed: int):
    rng = stream(seed, "geodesics.rk_convergence")
    model = curved_model(3)
    x = sample_point(model, rng)
    # keep a strong direction component along the conformal gradient (x1);
    # nearly orthogonal directions make the spray almost exactly integrable
    # and push the discretization error to roundoff, where no order is
    # measurable
    u = sample_direction(rng, model.dim - 1)
    while abs(u[0]) < 0.6:
        u = sample_direction(rng, model.dim - 1)
    v = ge.make_null(model, x, u).comps
    t_end = 3.0
    ends = {}
    ns = (100, 200, 400, 800)
    for n in ns:
        geo = ge.integrate_geodesic(model, x, v, (0.0, t_end), n_steps=n)
        if geo.termination != "interval_end":
            raise RuntimeError("convergence fixture left the domain")
        ends[n] = geo.xs[-1]
    diffs = [float(np.linalg.norm(ends[n] - ends[2 * n])) for n in ns[:-1]]
    hs = [t_end / n for n in ns[:-1]]
    order = fit_order(hs, diffs)
    return CheckRecord.from_residual(
        "geodesics.rk_convergence",
        residual=3.9 - order,
        tolerance=0.0,
        order=order,
        step_sizes=hs,
        self_errors=diffs,
    )


@register("geodesics.reparametrization_residual", covers=["geodesics.reparametrization_residual"])
def check_reparametrization(seed: int):
    rng = stream(seed, "geodesics.reparametrization_residual")
    worst = 0.0
    details = {}
    n_samples = 1601

    # flat fixtures with closed-form acceleration factor f
    model = flat_model(3)
    x0, v0 = sample_null_state(model, rng)
    us = np.linspace(0.0, 1.0, n_samples)
    for fname, warp, dwarp, f_const in (
        ("f_zero", lambda u: u, lambda u: np.ones_like(u), 0.0),
        ("f_one", lambda u: np.expm1(u), lambda u: np.exp(u), 1.0),
        ("f_half", lambda u: 2.0 * np.expm1(0.5 * u), lambda u: np.exp(0.5 * u), 0.5),
    ):
        xs = x0[None, :] + warp(us)[:, None] * v0[None, :]
        xdots = dwarp(us)[:, None] * v0[None, :]
        pre = ge.Pregeodesic(us, xs, xdots, np.full(n_samples, f_const))
        tau, geo = ge.reparametrize_to_geodesic(model, pre)
        res = ge.geodesic_residual(model, geo.ts, geo.xs)
        details[fname] = res
        worst = max(worst, res)
        # the affine parameter must match its closed form t or (e^{ct}-1)/c
        tau_err = float(np.max(np.abs(tau - warp(us))))
        details[fname + "_tau_vs_closed_form"] = tau_err
        worst = max(worst, tau_err)
        # affine image of a straight line must match p + tau*v
        straight = x0[None, :] + np.linspace(tau[0], tau[-1], n_samples)[:, None] * v0[None, :]
        worst = max(worst, float(np.max(np.abs(geo.xs - straight))))

    # curved fixture: deliberately warped true geodesic, f = 0.4 constant
    model = curved_model(3)
    x0, v0 = sample_null_state(model, rng)
    base = ge.integrate_geodesic(model, x0, v0, (0.0, 1.2))
    if base.termination != "interval_end":
        raise RuntimeError("curved reparametrization fixture left the domain")
    a = 0.4
    u_max = math.log1p(a * 1.1) / a  # warp(u_max) = 1.1 < 1.2
    us = np.linspace(0.0, u_max, n_samples)
    h = np.expm1(a * us) / a
    hdot = np.exp(a * us)
    states = [ge.state_at_parameter(base, t) for t in h]
    xs = np.stack([s.x for s in states])
    xdots = np.stack([s.v for s in states]) * hdot[:, None]
    pre = ge.Pregeodesic(us, xs, xdots, np.full(n_samples, a))
    details["f_const_curved_pregeodesic_residual"] = ge.pregeodesic_residual(model, pre)
    tau, geo = ge.reparametrize_to_geodesic(model, pre)
    res = ge.geodesic_residual(model, geo.ts, geo.xs)
    details["f_const_curved"] = res
    worst = max(worst, res)
    # recovered affine parameter must match the analytic warp
    worst = max(worst, float(np.max(np.abs(tau - h))))
    return CheckRecord.from_residual(
        "geodesics.reparametrization_residual", residual=worst, tolerance=1e-6, **details
    )


# --------------------------------------------------------------------------
# jacobi checks
# --------------------------------------------------------------------------


@register("jacobi.uniqueness_linearity", covers=["jacobi.uniqueness_linearity"])
def check_jacobi_linearity(seed: int):
    rng = stream(seed, "jacobi.uniqueness_linearity")
    model = curved_model(3)
    x, v = sample_null_state(model, rng)
    geo = ge.integrate_geodesic(model, x, v, (0.0, 1.0))
    m = model.dim

    u = ja.JacobiInit(rng.standard_normal(m), rng.standard_normal(m))
    w = ja.JacobiInit(rng.standard_normal(m), rng.standard_normal(m))
    a, b = 0.7, -1.3
    mix = ja.JacobiInit(a * u.J0 + b * w.J0, a * u.J0dot + b * w.J0dot)
    fu = ja.integrate_jacobi(geo, u)
    fw = ja.integrate_jacobi(geo, w)
    fm = ja.integrate_jacobi(geo, mix)
    lin = float(np.max(np.abs(fm.Js - (a * fu.Js + b * fw.Js))))
    lin = max(lin, float(np.max(np.abs(fm.Kdots - (a * fu.Kdots + b * fw.Kdots)))))

    zero = ja.integrate_jacobi(geo, ja.JacobiInit(np.zeros(m), np.zeros(m)))
    zero_norm = float(np.max(np.abs(zero.Js)) + np.max(np.abs(zero.Kdots)))

    # 2m basis solutions stay independent along the ray
    endpoints = []
    for i in range(2 * m):
        init = np.zeros(2 * m)
        init[i] = 1.0
        f = ja.integrate_jacobi(geo, ja.JacobiInit(init[:m], init[m:]))
        endpoints.append(np.concatenate([f.Js[-1], f.Kdots[-1]]))
    svals = np.linalg.svd(np.stack(endpoints), compute_uv=False)
    cond_ok = svals[-1] / svals[0]

    return CheckRecord.from_residual(
        "jacobi.uniqueness_linearity",
        residual=max(lin, zero_norm, 1e-8 - cond_ok),
        tolerance=1e-9,
        linearity=lin,
        zero_solution=zero_norm,
        endpoint_min_sv_ratio=float(cond_ok),
    )


@register("jacobi.pairing_affine", covers=["jacobi.pairing_affine"])
def check_pairing_affine(seed: int):
    rng = stream(seed, "jacobi.pairing_affine")
    worst_fit = 0.0
    count = 0
    models = [
        curved_model(2),
        curved_model(3),
        st.conformal_flat(3, "0.15*sin(x0) + 0.1*x1"),
        curved_model(4),
    ]
    for model in models:
        for _ in range(5):
            x, v = sample_null_state(model, rng)
            geo = ge.integrate_geodesic(model, x, v, (0.0, 1.0))
            if geo.termination != "interval_end":
                continue
            for _ in range(5):
                init = ja.JacobiInit(
                    rng.standard_normal(model.dim), rng.standard_normal(model.dim)
                )
                fld = ja.integrate_jacobi(geo, init)
                a, b, resid = ja.affine_pairing_fit(fld)
                # slope must equal the initial pairing of the derivative
                slope_err = abs(b - float(np.dot(st.metric_at(model, x) @ v, init.J0dot)))
                worst_fit = max(worst_fit, resid, slope_err)
                count += 1
    return CheckRecord.from_residual(
        "jacobi.pairing_affine", residual=worst_fit, tolerance=1e-7, triples=count
    )


@register("jacobi.dimension_bookkeeping", covers=["jacobi.dimension_bookkeeping"])
def check_dimension_bookkeeping(seed: int):
    rng = stream(seed, "jacobi.dimension_bookkeeping")
    model = curved_model(3)
    m = model.dim
    x, v = sample_null_state(model, rng)
    geo = ge.integrate_geodesic(model, x, v, (0.0, 1.0))
    g = st.metric_at(model, x)
    gv = g @ v

    def numerical_rank(mat):
        svals = np.linalg.svd(mat, compute_uv=False)
        return int(np.sum(svals > 1e-10 * max(svals[0], 1.0)))

    # full solution space has dimension 2m
    raw = rng.standard_normal((2 * m, 2 * m))
    rank_full = numerical_rank(raw)

    # the light-ray subspace (pairing slope zero) has dimension 2m - 1;
    # kill the slope b = g(J0dot, v) along T, which has g(T, v) = -1 != 0
    T = model.T(x)
    constrained = raw.copy()
    for row in constrained:
        J0dot = row[m:]
        row[m:] = J0dot - (np.dot(gv, J0dot) / np.dot(gv, T)) * T
    rank_member = numerical_rank(constrained)
    member_ok = all(
        ja.is_lightray_jacobi(ja.integrate_jacobi(geo, ja.JacobiInit(r[:m], r[m:])))
        for r in constrained[:4]
    )

    # tangential fields reduce to the zero class
    zero_residual = 0.0
    for _ in range(5):
        a, b = rng.standard_normal(2)
        cls = ja.mod_gamma_reduce(geo, ja.JacobiInit(a * v, b * v))
        zero_residual = max(
            zero_residual, float(np.max(np.abs(cls.w0))), float(np.max(np.abs(cls.w0dot)))
        )

    # reduced representation has dimension 2m - 3
    reduced = []
    for row in constrained:
        cls = ja.mod_gamma_reduce(geo, ja.JacobiInit(row[:m], row[m:]))
        reduced.append(np.concatenate([cls.w0, cls.w0dot]))
    rank_reduced = numerical_rank(np.stack(reduced))

    ok = (
        rank_full == 2 * m
        and rank_member == 2 * m - 1
        and rank_reduced == 2 * m - 3
        and member_ok
        and zero_residual <= 1e-12
    )
    return CheckRecord.from_residual(
        "jacobi.dimension_bookkeeping",
        residual=0.0 if ok else 1.0,
        tolerance=0.0,
        rank_full=rank_full,
        rank_member=rank_member,
        rank_reduced=rank_reduced,
        expected=[2 * m, 2 * m - 1, 2 * m - 3],
        tangential_zero_residual=zero_residual,
    )


def _random_family(model, rng, radius=1.0):
    """Smooth one-parameter family of (event, spatial direction) seeds."""
    q0 = sample_point(model, rng, radius=radius)
    dq = 0.5 * rng.standard_normal(model.dim)
    d0 = sample_direction(rng, model.dim - 1)
    dd = 0.5 * rng.standard_normal(model.dim - 1)

    def q(s):
        return q0 + s * dq

    def direction(s):
        u = d0 + s * dd
        return u / np.linalg.norm(u)

    return ja.RayFamily(q=q, direction=direction), dq, d0, dd


@register("jacobi.conformal_class_invariance", covers=["jacobi.conformal_class_invariance"])
def check_conformal_invariance(seed: int):
    rng = stream(seed, "jacobi.conformal_class_invariance")
    rescales = {
        2: ["0.25*sin(x0)", "0.1*x1", "0.2*sin(x1) + 0.1*x0"],
        3: ["0.25*sin(x0)", "0.1*x1", "0.2*sin(x2)", "0.15*sin(x1) + 0.1*x0"],
        4: ["0.25*sin(x0)", "0.1*x2", "0.2*sin(x3)"],
    }
    worst_class = 0.0
    fixtures = 0
    for dim in (2, 3, 4):
        for base in (flat_model(dim), curved_model(dim)):
            for extra in rescales[dim]:
                model_resc = st.conformal_rescale(base, extra)
                family, _, _, _ = _random_family(base, rng)
                cls_base = ja.class_from_ray_family(base, family)
                cls_resc = ja.class_from_ray_family(
                    model_resc, family, connection_model=base
                )
                worst_class = max(worst_class, ja.class_distance(cls_base, cls_resc))
                fixtures += 1

    # same unparametrized path: rescaled-metric geodesic, reparametrized in the
    # base metric, must land on the base-metric geodesic through the same seed.
    worst_path = 0.0
    for dim in (2, 3):
        base = curved_model(dim)
        model_resc = st.conformal_rescale(base, "0.2*sin(x0)")
        x = sample_point(base, rng, radius=1.0)
        v = ge.make_null(model_resc, x, sample_direction(rng, dim - 1)).comps
        # dense grid: the double-difference residual estimator below has an
        # O(h^2) floor, so the step must be well under the 1e-6 tolerance
        geo_r = ge.integrate_geodesic(model_resc, x, v, (0.0, 1.0), n_steps=4800)
        if geo_r.termination != "interval_end":
            raise RuntimeError("conformal path fixture left the domain")
        # measured acceleration factor: project the base-metric covariant
        # acceleration onto the velocity (it must be tangential)
        gammas = st.christoffel_batch(base, geo_r.xs)
        acc = np.gradient(geo_r.vs, geo_r.ts, axis=0, edge_order=2)
        acc = acc + np.einsum("nkij,ni,nj->nk", gammas, geo_r.vs, geo_r.vs)
        f_samples = np.einsum("nk,nk->n", acc, geo_r.vs) / np.einsum(
            "nk,nk->n", geo_r.vs, geo_r.vs
        )
        pre = ge.Pregeodesic(geo_r.ts, geo_r.xs, geo_r.vs, f_samples)
        tau, geo_fixed = ge.reparametrize_to_geodesic(base, pre)
        worst_path = max(
            worst_path, ge.geodesic_residual(base, geo_fixed.ts, geo_fixed.xs)
        )
        direct = ge.integrate_geodesic(
            base, x, v, (0.0, float(tau[-1])), n_steps=len(tau) - 1
        )
        worst_path = max(worst_path, float(np.max(np.abs(direct.xs - geo_fixed.xs))))

    return CheckRecord.from_residual(
        "jacobi.conformal_class_invariance",
        residual=max(worst_class, worst_path),
        tolerance=1e-6,
        fixtures=fixtures,
        worst_class_distance=worst_class,
        worst_path_residual=worst_path,
    )


@register("jacobi.reparametrization_invariance", covers=["jacobi.reparametrization_invariance"])
def check_reparametrization_invariance(seed: int):
    rng = stream(seed, "jacobi.reparametrization_invariance")
    worst = 0.0
    for model in (flat_model(3), curved_model(3), curved_model(2)):
        family, _, _, _ = _random_family(model, rng)
        plain = ja.class_from_ray_family(model, family)
        gauged = ja.RayFamily(
            q=family.q,
            direction=family.direction,
            slide=lambda s: 0.2 * s,
            scale=lambda s: 1.0 + 0.3 * s,
        )
        cls_gauged = ja.class_from_ray_family(model, gauged)
        worst = max(worst, ja.class_distance(plain, cls_gauged))
    return CheckRecord.from_residual(
        "jacobi.reparametrization_invariance", residual=worst, tolerance=1e-6
    )


@register("jacobi.variation_oracle", covers=["jacobi.variation_oracle"])
def check_variation_oracle(seed: int):
    rng = stream(seed, "jacobi.variation_oracle")
    model = curved_model(3)
    x0 = sample_point(model, rng, radius=1.0)
    dq = np.array([0.1, 0.3, -0.2])
    d0 = sample_direction(rng, model.dim - 1)
    dd = np.array([0.25, -0.15])

    def lam(s):
        return x0 + s * dq

    def W(s):
        u = d0 + s * dd
        u = u / np.linalg.norm(u)
        return (1.0 + 0.2 * s) * ge.make_null(model, lam(s), u).comps

    # reference initial data via a tiny Richardson stencil (effectively exact)
    h = 1e-6
    J0_ref = dq
    dW_ref = (8.0 * (W(h) - W(-h)) - (W(2 * h) - W(-2 * h))) / (12.0 * h)

    J0dot_ref = dW_ref + _gamma_term(model, x0, dq, W(0.0))
    base_geo = ge.integrate_geodesic(model, x0, W(0.0), (0.0, 1.0))
    ds_ladder = [2e-2, 1e-2, 5e-3, 2.5e-3]
    field_errs = []
    init_errs = []
    for ds in ds_ladder:
        oracle = ja.variation_jacobi_oracle(model, lam, W, ds, t_span=(0.0, 1.0))
        ode = ja.integrate_jacobi(base_geo, ja.JacobiInit(oracle.J0, oracle.J0dot))
        field_errs.append(float(np.max(np.abs(oracle.Js - ode.Js))))
        init_errs.append(
            float(
                max(
                    np.max(np.abs(oracle.J0 - J0_ref)),
                    np.max(np.abs(oracle.J0dot - J0dot_ref)),
                )
            )
        )
    order_field = fit_order(ds_ladder, field_errs)
    order_init = fit_order(ds_ladder, [max(e, 1e-14) for e in init_errs])
    finest = field_errs[-1]
    return CheckRecord.from_residual(
        "jacobi.variation_oracle",
        residual=max(1.9 - order_field, (finest - 1e-5) / 1e-5),
        tolerance=0.0,
        order_field=order_field,
        order_init=order_init,
        field_errors=field_errs,
        init_errors=init_errs,
    )


def _gamma_term(model, x, J0, v0):
    gamma = st.christoffel(model, x)
    return np.einsum("kij,i,j->k", gamma, J0, v0)


# --------------------------------------------------------------------------
# light-ray space checks
# --------------------------------------------------------------------------


def _chart_for(model, half=2.0, c0=0.0):
    lo = np.full(model.dim, -half)
    hi = np.full(model.dim, half)
    return lr.build_chart(model, lo, hi, c0)


def _random_ray(chart, rng):
    m = chart.model.dim
    q = rng.uniform(-1.0, 1.0, size=m - 1)
    u = sample_direction(rng, m - 1)
    coords = lr.RayCoords(np.concatenate([q, lr.unit_to_angles(u)]), dim=m)
    return lr.coords_to_ray(chart, coords)


@register("lightrays.chart_dimension", covers=["lightrays.chart_dimension"])
def check_chart_dimension(seed: int):
    rng = stream(seed, "lightrays.chart_dimension")
    ok = True
    sizes = {}
    for dim in (2, 3, 4):
        model = curved_model(dim)
        chart = _chart_for(model)
        ray = _random_ray(chart, rng)
        coords = lr.ray_coords(ray)
        sizes[dim] = len(coords.values)
        ok = ok and len(coords.values) == 2 * dim - 3
        ok = ok and len(coords.surface) == dim - 1
        ok = ok and len(coords.angles) == dim - 2
        if dim >= 3:
            frame = ct.contact_frame(ray)
            ok = ok and frame.size == 2 * dim - 4
    return CheckRecord.from_residual(
        "lightrays.chart_dimension",
        residual=0.0 if ok else 1.0,
        tolerance=0.0,
        coord_sizes=sizes,
    )


@register("lightrays.ray_chart_invariance", covers=["lightrays.ray_chart_invariance"])
def check_ray_chart_invariance(seed: int):
    rng = stream(seed, "lightrays.ray_chart_invariance")
    worst = 0.0
    for model in (flat_model(3), curved_model(3)):
        chart = _chart_for(model)
        for lam in (0.5, 3.0):
            ray = _random_ray(chart, rng)
            geo = lr.chart_to_ray(ray, (0.0, 0.9))
            if geo.termination != "interval_end":
                continue
            mid = ge.state_at_parameter(geo, 0.4)
            # same unparametrized ray: shifted start point, rescaled velocity,
            # integrated backwards across the slice
            geo2 = ge.integrate_geodesic(
                model, mid.x, lam * mid.v, (0.0, -0.8 / lam)
            )
            ray2 = lr.ray_to_chart(chart, geo2)
            worst = max(worst, float(np.max(np.abs(ray2.q - ray.q))))
            worst = max(worst, float(np.max(np.abs(ray2.v - ray.v))))
            coords = lr.ray_coords(ray)
            coords2 = lr.ray_coords(ray2)
            worst = max(worst, float(np.max(np.abs(coords.values - coords2.values))))
    return CheckRecord.from_residual(
        "lightrays.ray_chart_invariance", residual=worst, tolerance=1e-9
    )


def _chart_curve(chart, rng):
    """Smooth curve of rays through the chart, plus its seed data."""
    m = chart.model.dim
    q0 = rng.uniform(-0.8, 0.8, size=m - 1)
    dq = 0.4 * rng.standard_normal(m - 1)
    u0 = sample_direction(rng, m - 1)
    du = 0.4 * rng.standard_normal(m - 1)

    def ray_fn(s):
        q = q0 + s * dq
        u = u0 + s * du
        u = u / np.linalg.norm(u)
        coords = lr.RayCoords(np.concatenate([q, lr.unit_to_angles(u)]), dim=m)
        return lr.coords_to_ray(chart, coords)

    return ray_fn


@register("lightrays.tangent_linearity", covers=["lightrays.tangent_linearity"])
def check_tangent_linearity(seed: int):
    rng = stream(seed, "lightrays.tangent_linearity")
    worst = 0.0
    for model in (flat_model(3), curved_model(3)):
        chart = _chart_for(model)
        ray_fn = _chart_curve(chart, rng)
        base = lr.tangent_from_ray_curve(chart, ray_fn, ds=1e-3)
        for a in (-1.0, 2.0):
            sped = lr.tangent_from_ray_curve(
                chart, lambda s, a=a: ray_fn(a * s), ds=1e-3
            )
            scaled = ja.JacobiClass(
                base.model, base.x, base.v, a * base.w0, a * base.w0dot
            )
            worst = max(worst, ja.class_distance(sped, scaled))
    return CheckRecord.from_residual(
        "lightrays.tangent_linearity", residual=worst, tolerance=1e-5
    )


@register("lightrays.variation_independence", covers=["lightrays.variation_independence"])
def check_variation_independence(seed: int):
    rng = stream(seed, "lightrays.variation_independence")
    worst = 0.0
    for model in (flat_model(3), curved_model(3), curved_model(2)):
        chart = _chart_for(model)
        ray_fn = _chart_curve(chart, rng)
        plain = lr.tangent_from_ray_curve(chart, ray_fn, ds=1e-3)
        # a differently gauged variation realizing the same chart curve
        family = ja.RayFamily(
            q=lambda s: ray_fn(s).event,
            direction=lambda s: ray_fn(s).v[1:],
            slide=lambda s: 0.15 * s,
            scale=lambda s: 1.0 - 0.2 * s,
        )
        gauged = ja.class_from_ray_family(model, family, ds=1e-3)
        worst = max(worst, ja.class_distance(plain, gauged))
    return CheckRecord.from_residual(
        "lightrays.variation_independence", residual=worst, tolerance=1e-6
    )


# --------------------------------------------------------------------------
# contact structure checks
# --------------------------------------------------------------------------


@register("contact.representative_independence", covers=["contact.representative_independence"])
def check_representative_independence(seed: int):
    rng = stream(seed, "contact.representative_independence")
    model = curved_model(3)
    chart = _chart_for(model)
    worst = 0.0
    for _ in range(5):
        ray = _random_ray(chart, rng)
        frame = ct.contact_frame(ray)
        c1, c2 = frame.classes[0], frame.classes[-1]
        geo = lr.chart_to_ray(ray, (0.0, 1e-3), n_steps=16)
        v = ray.v
        g = st.metric_at(model, ray.event)
        th_ref = ct.theta0(ray, c1)
        om_ref = ct.omega0(ray, c1, c2)
        for a in (-1.0, 0.7):
            for b in (0.5, -1.2):
                # shift both representatives along the tangential gauge
                r1 = ja.JacobiInit(c1.w0 + a * v, c1.w0dot + b * v)
                r2 = ja.JacobiInit(c2.w0 - b * v, c2.w0dot + a * v)
                red1 = ja.mod_gamma_reduce(geo, r1)
                red2 = ja.mod_gamma_reduce(geo, r2)
                worst = max(worst, ja.class_distance(red1, c1))
                worst = max(worst, ja.class_distance(red2, c2))
                worst = max(worst, abs(float(np.dot(g @ v, r1.J0)) - th_ref))
                om_raw = float(np.dot(g @ r1.J0, r2.J0dot) - np.dot(g @ r2.J0, r1.J0dot))
                worst = max(worst, abs(om_raw - om_ref))
    return CheckRecord.from_residual(
        "contact.representative_independence", residual=worst, tolerance=1e-10
    )


@register("contact.nondegeneracy", covers=["contact.nondegeneracy"])
def check_nondegeneracy(seed: int):
    rng = stream(seed, "contact.nondegeneracy")
    worst_margin = np.inf
    flat_gram_err = 0.0
    for dim in (3, 4):
        for model in (flat_model(dim), curved_model(dim)):
            chart = _chart_for(model)
            for _ in range(10):
                ray = _random_ray(chart, rng)
                frame = ct.contact_frame(ray)
                det, min_sv, ok = ct.nondegeneracy_report(frame)
                worst_margin = min(worst_margin, min_sv)
                if model.name == "minkowski3":
                    target = np.array([[0.0, 1.0], [-1.0, 0.0]])
                    flat_gram_err = max(
                        flat_gram_err, float(np.max(np.abs(frame.gram - target)))
                    )
                    flat_gram_err = max(flat_gram_err, abs(det - 1.0))
    return CheckRecord.from_residual(
        "contact.nondegeneracy",
        residual=max(ct.TOL_CONTACT - worst_margin, flat_gram_err - 1e-10),
        tolerance=0.0,
        min_singular_value=float(worst_margin),
        flat_gram_error=flat_gram_err,
    )


@register("contact.kernel_separation", covers=["contact.kernel_separation"])
def check_kernel_separation(seed: int):
    rng = stream(seed, "contact.kernel_separation")
    ok = True
    min_theta = np.inf
    worst_pairing = 0.0
    for dim in (3, 4):
        model = curved_model(dim)
        chart = _chart_for(model)
        for _ in range(5):
            ray = _random_ray(chart, rng)
            rep = ct.kernel_separation_report(ray)
            ok = ok and rep["euclidean_rank"] == 2 * dim - 4
            ok = ok and rep["euclidean_rank_extended"] == 2 * dim - 3
            ok = ok and rep["gram_rank"] == 2 * dim - 4
            ok = ok and rep["gram_rank_extended"] == 2 * dim - 4
            worst_pairing = max(worst_pairing, rep["kernel_pairing_residual"])
            min_theta = min(min_theta, abs(rep["theta0_of_kernel_class"]))
    ok = ok and worst_pairing <= 1e-12 and min_theta >= 1e-3
    return CheckRecord.from_residual(
        "contact.kernel_separation",
        residual=0.0 if ok else 1.0,
        tolerance=0.0,
        kernel_pairing_residual=worst_pairing,
        min_kernel_theta0=float(min_theta),
    )


@register("contact.hyperplane_invariance", covers=["contact.hyperplane_invariance"])
def check_hyperplane_invariance(seed: int):
    rng = stream(seed, "contact.hyperplane_invariance")
    worst = 0.0
    for dim in (3, 4):
        model = curved_model(dim)
        chart = _chart_for(model)
        for _ in range(5):
            ray = _random_ray(chart, rng)
            frame = ct.contact_frame(ray)
            for lam in (0.5, 3.0):
                worst = max(
                    worst, ct.scale_invariance_check(ray, lam, extra_classes=frame.classes)
                )
            # conformally rescaled tangent sees the same hyperplane
            resc = st.conformal_rescale(model, "0.2*sin(x0)")
            g_resc = st.metric_at(resc, ray.event)
            v_resc = ray.v / float(-(g_resc @ ray.v) @ model.T(ray.event))
            for cls in frame.classes:
                worst = max(worst, abs(float(np.dot(g_resc @ v_resc, cls.w0))))
    return CheckRecord.from_residual(
        "contact.hyperplane_invariance", residual=worst, tolerance=1e-10
    )


@register("contact.spray_kernel", covers=["contact.spray_kernel"])
def check_spray_kernel(seed: int):
    rng = stream(seed, "contact.spray_kernel")
    worst_tan = 0.0
    min_ctrl = np.inf
    for model in (flat_model(3), curved_model(3), curved_model(4)):
        for _ in range(5):
            x, v = sample_null_state(model, rng)
            rep = ct.spray_kernel_check(model, x, v, trials=10, rng=rng)
            worst_tan = max(worst_tan, rep["max_tangent_residual"])
            min_ctrl = min(min_ctrl, rep["min_control_residual"])
    return CheckRecord.from_residual(
        "contact.spray_kernel",
        residual=max(worst_tan - 1e-8, 1e-3 - min_ctrl),
        tolerance=0.0,
        max_tangent_residual=worst_tan,
        min_control_residual=float(min_ctrl),
    )


@register("contact.theta0_two_path", covers=["contact.theta0_two_path"])
def check_theta0_two_path(seed: int):
    rng = stream(seed, "contact.theta0_two_path")
    worst = 0.0
    count = 0
    for dim in (3, 4):
        for model in (flat_model(dim), curved_model(dim)):
            chart = _chart_for(model)
            for _ in range(5):
                ray = _random_ray(chart, rng)
                frame = ct.contact_frame(ray)
                for cls in frame.classes:
                    direct = ct.theta0(ray, cls)
                    lifted = ct.theta0_via_tm(ray, cls)
                    worst = max(worst, abs(direct - lifted))
                    count += 1
                # also a class with nonzero pairing against the kernel leg
                mix = ja.JacobiClass(
                    model,
                    ray.event,
                    ray.v,
                    frame.classes[0].w0 + 0.3 * frame.classes[-1].w0,
                    frame.classes[0].w0dot - 0.7 * frame.classes[-1].w0dot,
                )
                worst = max(worst, abs(ct.theta0(ray, mix) - ct.theta0_via_tm(ray, mix)))
                count += 1
    return CheckRecord.from_residual(
        "contact.theta0_two_path", residual=worst, tolerance=1e-8, pairs=count
    )


# --------------------------------------------------------------------------
# planted-bug controls (covers=() — extra assurance, not manifest entries)
# --------------------------------------------------------------------------


class _FlippedChristoffelMetric(st.MetricField):
    """Test sabotage: connection coefficients with the wrong overall sign."""

    def christoffel_analytic(self, points):
        return -super().christoffel_analytic(points)

    def christoffel_deriv_analytic(self, points):
        return -super().christoffel_deriv_analytic(points)


@register("controls.gamma_sign_mutation", covers=[])
def check_gamma_sign_mutation(seed: int):
    rng = stream(seed, "controls.gamma_sign_mutation")
    model = curved_model(3)
    x0 = sample_point(model, rng, radius=1.0)
    d0 = sample_direction(rng, model.dim - 1)
    dq = np.array([0.2, 0.3, -0.1])

    def lam(s):
        return x0 + s * dq

    def W(s):
        return ge.make_null(model, lam(s), d0).comps

    ds = 5e-3
    oracle = ja.variation_jacobi_oracle(model, lam, W, ds, t_span=(0.0, 1.0))
    geo = ge.integrate_geodesic(model, x0, W(0.0), (0.0, 1.0))
    honest = ja.integrate_jacobi(geo, ja.JacobiInit(oracle.J0, oracle.J0dot))
    honest_err = float(np.max(np.abs(oracle.Js - honest.Js)))

    # sabotaged propagation coefficients on the *same honest ray*
    bad_model = st.SpacetimeModel(
        name=model.name + "+flipped_gamma",
        metric=_FlippedChristoffelMetric(model.dim, model.metric.sigma),
        box_lo=model.box_lo,
        box_hi=model.box_hi,
    )
    bad_geo = ge.NullGeodesic(
        bad_model,
        geo.ts,
        geo.xs,
        geo.vs,
        termination=geo.termination,
        mid_ts=geo.mid_ts,
        mid_xs=geo.mid_xs,
        mid_vs=geo.mid_vs,
    )
    sabotaged = ja.integrate_jacobi(bad_geo, ja.JacobiInit(oracle.J0, oracle.J0dot))
    sabotaged_err = float(np.max(np.abs(oracle.Js - sabotaged.Js)))
    return CheckRecord.from_residual(
        "controls.gamma_sign_mutation",
        residual=max(honest_err - 1e-4, 1e-3 - sabotaged_err),
        tolerance=0.0,
        honest_disagreement=honest_err,
        sabotaged_disagreement=sabotaged_err,
    )


@register("controls.omega0_symmetrized_mutation", covers=[])
def check_omega0_mutation(seed: int):
    rng = stream(seed, "controls.omega0_symmetrized_mutation")
    model = curved_model(3)
    chart = _chart_for(model)
    ray = _random_ray(chart, rng)
    frame = ct.contact_frame(ray)
    g = st.metric_at(model, ray.event)
    cls = frame.classes[0]
    mixed = ja.JacobiClass(model, ray.event, ray.v, cls.w0, cls.w0.copy())

    honest_self = abs(ct.omega0(ray, mixed, mixed))

    def symmetrized(c1, c2):  # the planted bug: + instead of -
        return float(np.dot(g @ c1.w0, c2.w0dot) + np.dot(g @ c2.w0, c1.w0dot))

    sabotaged_self = abs(symmetrized(mixed, mixed))
    return CheckRecord.from_residual(
        "controls.omega0_symmetrized_mutation",
        residual=max(honest_self - 1e-12, 1e-3 - sabotaged_self),
        tolerance=0.0,
        honest_self_pairing=honest_self,
        sabotaged_self_pairing=sabotaged_self,
    )


# --------------------------------------------------------------------------
# extra structural checks (not tied to manifest entries)
# --------------------------------------------------------------------------


@register("contact.hamiltonian_intertwine", covers=[])
def check_hamiltonian_intertwine(seed: int):
    rng = stream(seed, "contact.hamiltonian_intertwine")
    worst_flat = 0.0
    model = flat_model(3)
    for _ in range(5):
        x, v = sample_null_state(model, rng)
        rep = ct.hamiltonian_intertwine_check(model, x, v, delta=1e-3)
        worst_flat = max(worst_flat, rep["r_scaling"], rep["r_spray"])

    model = curved_model(3)
    deltas = [4e-3, 2e-3, 1e-3]
    errs = []
    x, v = sample_null_state(model, rng)
    for d in deltas:
        rep = ct.hamiltonian_intertwine_check(model, x, v, delta=d)
        errs.append(max(rep["r_scaling"], rep["r_spray"]))
    order = fit_order(deltas, [max(e, 1e-16) for e in errs])
    return CheckRecord.from_residual(
        "contact.hamiltonian_intertwine",
        residual=max(worst_flat - 1e-12, 1.9 - order if errs[0] > 1e-12 else 0.0),
        tolerance=0.0,
        flat_residual=worst_flat,
        curved_order=order,
        curved_errors=errs,
    )


@register("contact.liouville", covers=[])
def check_liouville(seed: int):
    rng = stream(seed, "contact.liouville")
    worst = 0.0
    for model in (flat_model(3), curved_model(3)):
        x, v = sample_null_state(model, rng)
        for s in (0.1, 0.5, -0.3):
            worst = max(worst, ct.liouville_check(model, x, v, s, rng=rng, trials=10))
    return CheckRecord.from_residual("contact.liouville", residual=worst, tolerance=1e-12)


# Coverage accounting is itself a registered check, and determinism is
# asserted at the command-line layer (the scenario runner writes two reports
# and compares byte content) — the implementation lives next to the report
# writer it exercises, behind a deferred import to avoid a cycle.


@register("cli.coverage", covers=["cli.coverage"])
def check_coverage(seed: int):
    return assert_coverage()


@register("cli.determinism", covers=["cli.determinism"])
def check_cli_determinism(seed: int):
    from . import cli  # deferred to avoid an import cycle

    return cli.determinism_records(seed)
