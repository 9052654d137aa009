"""Lorentzian metric models on coordinate charts.

A model is a conformally flat metric g = e^{2 sigma(x)} eta on an
axis-aligned coordinate box, together with a global future-timelike
reference field T (the constant coordinate time direction for every
catalog entry).  Curvature is exercised entirely through the conformal
exponent sigma, which lives in the small expression language of
:mod:`nullrays.expressions` and therefore has exact first and second
derivatives.

Two independent derivative paths are kept side by side on purpose:

* analytic — closed conformal formulas fed by exact sigma derivatives;
* finite differences — central differences of the metric / Christoffel
  evaluators with step ``h_fd``.

Tests cross-check one against the other.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain, SignatureError, WrongMetric
from .expressions import Const, Expr, parse_expr

__all__ = [
    "H_FD",
    "EXCLUSION_RADIUS",
    "TangentVector",
    "MetricField",
    "SpacetimeModel",
    "eval_metric",
    "metric_at",
    "christoffel",
    "christoffel_fd",
    "christoffel_batch",
    "riemann_op",
    "riemann_tensor",
    "riemann_matrix",
    "riemann_matrix_batch",
    "conformal_rescale",
    "lower_index",
    "raise_index",
    "minkowski",
    "conformal_flat",
    "punctured_minkowski2",
    "minkowski_ball3",
    "get_model",
    "model_catalog",
]

# Default finite-difference step for metric/Christoffel derivatives.
H_FD = 1e-5
# Radius around an excluded point inside which evaluation raises OutOfDomain.
EXCLUSION_RADIUS = 1e-9


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def flat_eta(dim: int) -> np.ndarray:
    """Flat metric diag(-1, 1, ..., 1)."""
    eta = np.eye(dim)
    eta[0, 0] = -1.0
    return eta


@dataclass
class TangentVector:
    """A vector attached to a chart point."""

    base: np.ndarray
    comps: np.ndarray

    def __post_init__(self):
        self.base = _vec(self.base)
        self.comps = _vec(self.comps)
        if self.base.shape != self.comps.shape or self.base.ndim != 1:
            raise ValueError("base and comps must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(self.base)) and np.all(np.isfinite(self.comps))):
            raise ValueError("non-finite tangent vector data")


class MetricField:
    """Conformally flat metric e^{2 sigma} eta with exact sigma derivatives.

    ``analytic_christoffel`` controls whether :func:`christoffel` uses the
    closed conformal formula (default) or falls back to central finite
    differences of the metric components; the finite-difference path stays
    available unconditionally through :func:`christoffel_fd`.
    """

    def __init__(self, dim: int, sigma: Expr | None = None, analytic_christoffel: bool = True):
        if dim < 2:
            raise ValueError("dimension must be at least 2")
        self.dim = int(dim)
        self.sigma = sigma if sigma is not None else Const(0.0)
        self.analytic_christoffel = bool(analytic_christoffel)
        self.eta = flat_eta(self.dim)
        self.eta_inv = flat_eta(self.dim)  # diag metric is its own inverse
        self._grad = [self.sigma.grad(i) for i in range(self.dim)]
        self._hess = [[self._grad[i].grad(j) for j in range(self.dim)] for i in range(self.dim)]

    def without_analytic_christoffel(self) -> "MetricField":
        return MetricField(self.dim, self.sigma, analytic_christoffel=False)

    # -- batched field evaluation (points: (..., m)) ------------------------

    def sigma_at(self, points: np.ndarray) -> np.ndarray:
        return self.sigma.evaluate(points)

    def sigma_grad(self, points: np.ndarray) -> np.ndarray:
        points = _vec(points)
        out = np.empty(points.shape[:-1] + (self.dim,))
        for i in range(self.dim):
            out[..., i] = self._grad[i].evaluate(points)
        return out

    def sigma_hess(self, points: np.ndarray) -> np.ndarray:
        points = _vec(points)
        out = np.empty(points.shape[:-1] + (self.dim, self.dim))
        for i in range(self.dim):
            for j in range(self.dim):
                out[..., i, j] = self._hess[i][j].evaluate(points)
        return out

    def components(self, points: np.ndarray) -> np.ndarray:
        """Metric matrices, shape (..., m, m).  No domain checks."""
        points = _vec(points)
        factor = np.exp(2.0 * self.sigma_at(points))
        return factor[..., None, None] * self.eta

    def components_deriv(self, points: np.ndarray) -> np.ndarray:
        """Exact coordinate derivatives, d g_ij / d x^k at index [..., i, j, k]."""
        points = _vec(points)
        factor = np.exp(2.0 * self.sigma_at(points))
        grad = self.sigma_grad(points)
        return 2.0 * factor[..., None, None, None] * self.eta[..., :, :, None] * grad[..., None, None, :]

    def christoffel_analytic(self, points: np.ndarray) -> np.ndarray:
        """Closed conformal formula, shape (..., k, i, j):

        Gamma^k_ij = d^k_i s_j + d^k_j s_i - eta_ij eta^{kl} s_l,  s = grad sigma.
        """
        points = _vec(points)
        s = self.sigma_grad(points)
        eye = np.eye(self.dim)
        term1 = np.einsum("ki,...j->...kij", eye, s)
        term2 = np.einsum("kj,...i->...kij", eye, s)
        s_up = np.einsum("kl,...l->...k", self.eta_inv, s)
        term3 = np.einsum("ij,...k->...kij", self.eta, s_up)
        return term1 + term2 - term3

    def christoffel_deriv_analytic(self, points: np.ndarray) -> np.ndarray:
        """Exact d Gamma^k_ij / d x^d at index [..., k, i, j, d]."""
        points = _vec(points)
        hess = self.sigma_hess(points)
        eye = np.eye(self.dim)
        term1 = np.einsum("ki,...jd->...kijd", eye, hess)
        term2 = np.einsum("kj,...id->...kijd", eye, hess)
        hess_up = np.einsum("kl,...ld->...kd", self.eta_inv, hess)
        term3 = np.einsum("ij,...kd->...kijd", self.eta, hess_up)
        return term1 + term2 - term3


class SpacetimeModel:
    """A metric field on a coordinate box with a global timelike field T.

    ``predicate`` optionally restricts the domain further (the open ball
    model); ``excluded_points`` puncture it at isolated events.
    """

    def __init__(self, name, metric, box_lo, box_hi, excluded_points=None,
                 predicate=None, predicate_desc=""):
        self.name = name
        self.metric = metric
        self.box_lo = _vec(box_lo)
        self.box_hi = _vec(box_hi)
        self.excluded_points = [_vec(p) for p in (excluded_points or [])]
        self.predicate = predicate
        self.predicate_desc = predicate_desc
        if self.box_lo.shape != (metric.dim,) or self.box_hi.shape != (metric.dim,):
            raise ValueError("box bounds must match metric dimension")
        for p in self.excluded_points:
            if not self.in_box(p):
                raise ValueError("excluded point lies outside the domain box")

    @property
    def dim(self) -> int:
        return self.metric.dim

    def T(self, x) -> np.ndarray:
        """Global future-timelike reference field (constant time direction)."""
        t = np.zeros(self.dim)
        t[0] = 1.0
        return t

    def in_box(self, x) -> bool:
        x = _vec(x)
        return bool(np.all(x >= self.box_lo) and np.all(x <= self.box_hi))

    def in_domain(self, x) -> bool:
        x = _vec(x)
        if not np.all(np.isfinite(x)):
            return False
        if not self.in_box(x):
            return False
        if self.predicate is not None and not self.predicate(x):
            return False
        for p in self.excluded_points:
            if np.linalg.norm(x - p) < EXCLUSION_RADIUS:
                return False
        return True

    def ensure_in_domain(self, x) -> None:
        if not self.in_domain(x):
            raise OutOfDomain(f"point {_vec(x).tolist()} outside domain of model {self.name!r}")


# ---------------------------------------------------------------------------
# Metric-level operations
# ---------------------------------------------------------------------------


def metric_at(model: SpacetimeModel, points: np.ndarray) -> np.ndarray:
    """Batched metric evaluation without domain/signature checks (inner loops)."""
    return model.metric.components(points)


def eval_metric(model: SpacetimeModel, x) -> np.ndarray:
    """Checked metric evaluation at a single chart point.

    Verifies domain membership, symmetry to 1e-12, and Lorentz signature
    (exactly one negative eigenvalue).
    """
    x = _vec(x)
    model.ensure_in_domain(x)
    g = model.metric.components(x)
    if not np.allclose(g, g.T, atol=1e-12, rtol=0.0):
        raise SignatureError(f"metric not symmetric at {x.tolist()}")
    eigs = np.linalg.eigvalsh(g)
    scale = float(np.max(np.abs(eigs)))
    if np.any(np.abs(eigs) <= 1e-12 * max(scale, 1.0)):
        raise SignatureError(f"degenerate metric at {x.tolist()}: eigenvalues {eigs.tolist()}")
    if int(np.sum(eigs < 0.0)) != 1:
        raise SignatureError(
            f"wrong signature at {x.tolist()}: eigenvalues {eigs.tolist()}"
        )
    return g


def christoffel(model: SpacetimeModel, x) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij at x, shape (m, m, m), index [k][i][j].

    Uses the analytic conformal formula when the metric carries one,
    otherwise central finite differences of the metric with step H_FD.
    """
    x = _vec(x)
    model.ensure_in_domain(x)
    if model.metric.analytic_christoffel:
        return model.metric.christoffel_analytic(x)
    return _christoffel_fd_raw(model, x, H_FD)


def christoffel_fd(model: SpacetimeModel, x, h: float = H_FD) -> np.ndarray:
    """Finite-difference Christoffel path (always FD, independent oracle)."""
    x = _vec(x)
    model.ensure_in_domain(x)
    return _christoffel_fd_raw(model, x, h)


def _christoffel_fd_raw(model: SpacetimeModel, x: np.ndarray, h: float) -> np.ndarray:
    m = model.dim
    # dg[i, j, k] = d g_ij / d x^k by central differences (no domain clamp:
    # the metric formula extends smoothly past the box edge).
    shifts = np.zeros((2 * m, m))
    for k in range(m):
        shifts[2 * k, k] = h
        shifts[2 * k + 1, k] = -h
    g_shift = model.metric.components(x[None, :] + shifts)
    dg = np.empty((m, m, m))
    for k in range(m):
        dg[:, :, k] = (g_shift[2 * k] - g_shift[2 * k + 1]) / (2.0 * h)
    g = model.metric.components(x)
    g_inv = np.linalg.inv(g)
    # Gamma^k_ij = 1/2 g^{kl} (dg[l,j,i] + dg[l,i,j] - dg[i,j,l])
    s = np.einsum("lji->lij", dg) + np.einsum("lij->lij", dg) - np.einsum("ijl->lij", dg)
    return 0.5 * np.einsum("kl,lij->kij", g_inv, s)


def christoffel_batch(model: SpacetimeModel, points: np.ndarray) -> np.ndarray:
    """Batched Christoffel symbols, shape (..., m, m, m).  No domain checks."""
    if model.metric.analytic_christoffel:
        return model.metric.christoffel_analytic(points)
    points = _vec(points)
    flat = points.reshape(-1, model.dim)
    out = np.stack([_christoffel_fd_raw(model, p, H_FD) for p in flat])
    return out.reshape(points.shape[:-1] + (model.dim,) * 3)


def _christoffel_deriv(model: SpacetimeModel, x: np.ndarray, h: float = H_FD) -> np.ndarray:
    """d Gamma^k_ij / d x^d at index [k, i, j, d]: exact when available."""
    if model.metric.analytic_christoffel:
        return model.metric.christoffel_deriv_analytic(x)
    m = model.dim
    out = np.empty((m, m, m, m))
    for d in range(m):
        step = np.zeros(m)
        step[d] = h
        out[..., d] = (
            _christoffel_fd_raw(model, x + step, h) - _christoffel_fd_raw(model, x - step, h)
        ) / (2.0 * h)
    return out


def riemann_tensor(model: SpacetimeModel, x) -> np.ndarray:
    """Curvature tensor R^l_kij with (R(X,Y)Z)^l = R^l_kij Z^k X^i Y^j.

    R^l_kij = d_i Gamma^l_jk - d_j Gamma^l_ik
              + Gamma^l_ia Gamma^a_jk - Gamma^l_ja Gamma^a_ik
    """
    x = _vec(x)
    model.ensure_in_domain(x)
    gamma = christoffel_batch(model, x)
    dgamma = _christoffel_deriv(model, x)
    term1 = np.einsum("ljki->lkij", dgamma)
    term2 = np.einsum("likj->lkij", dgamma)
    term3 = np.einsum("lia,ajk->lkij", gamma, gamma)
    term4 = np.einsum("lja,aik->lkij", gamma, gamma)
    return term1 - term2 + term3 - term4


def riemann_op(model: SpacetimeModel, x, J, v, h: float = H_FD) -> np.ndarray:
    """R(J, v)v by directional finite differences of the Christoffel field.

    Independent of :func:`riemann_tensor`: uses only Gamma evaluations at
    shifted points, never assembled tensor components,

        R(J,v)v = D_J Gamma(v,v) - D_v Gamma(J,v)
                  + Gamma(J, Gamma(v,v)) - Gamma(v, Gamma(J,v)).
    """
    x, J, v = _vec(x), _vec(J), _vec(v)
    model.ensure_in_domain(x)

    def gamma_bilinear(point, a, b):
        g = model.metric.christoffel_analytic(point) if model.metric.analytic_christoffel \
            else _christoffel_fd_raw(model, point, h)
        return np.einsum("kij,i,j->k", g, a, b)

    def directional(direction, a, b):
        step = h * direction
        return (gamma_bilinear(x + step, a, b) - gamma_bilinear(x - step, a, b)) / (2.0 * h)

    first = directional(J, v, v) - directional(v, J, v)
    gvv = gamma_bilinear(x, v, v)
    gJv = gamma_bilinear(x, J, v)
    second = gamma_bilinear(x, J, gvv) - gamma_bilinear(x, v, gJv)
    return first + second


def riemann_matrix(model: SpacetimeModel, x, v) -> np.ndarray:
    """Tidal matrix M with (R(J,v)v)^l = M[l,q] J^q, exact-linear in J."""
    R = riemann_tensor(model, x)
    v = _vec(v)
    return np.einsum("lkij,k,j->li", R, v, v)


def riemann_matrix_batch(model: SpacetimeModel, points: np.ndarray, vs: np.ndarray) -> np.ndarray:
    """Batched tidal matrices along a trajectory, shape (..., m, m).

    Assembled from the analytic conformal curvature data (or FD fallback),
    skipping per-point domain checks for inner-loop use.
    """
    points, vs = _vec(points), _vec(vs)
    gamma = christoffel_batch(model, points)
    if model.metric.analytic_christoffel:
        dgamma = model.metric.christoffel_deriv_analytic(points)
    else:
        flat = points.reshape(-1, model.dim)
        dgamma = np.stack([_christoffel_deriv(model, p) for p in flat]).reshape(
            points.shape[:-1] + (model.dim,) * 4
        )
    term1 = np.einsum("...ljki->...lkij", dgamma)
    term2 = np.einsum("...likj->...lkij", dgamma)
    term3 = np.einsum("...lia,...ajk->...lkij", gamma, gamma)
    term4 = np.einsum("...lja,...aik->...lkij", gamma, gamma)
    R = term1 - term2 + term3 - term4
    return np.einsum("...lkij,...k,...j->...li", R, vs, vs)


def conformal_rescale(model: SpacetimeModel, sigma) -> SpacetimeModel:
    """New model with metric e^{2 sigma} g, same domain and T.

    ``sigma`` may be an expression object or source text in the expression
    language.  Exponent additivity keeps the result in the same catalog
    family, so the analytic Christoffel formula stays installed.
    """
    if isinstance(sigma, str):
        sigma = parse_expr(sigma, model.dim)
    if not isinstance(sigma, Expr):
        raise WrongMetric("sigma must be an expression or expression text")
    new_sigma = model.metric.sigma + sigma
    new_metric = MetricField(model.dim, new_sigma,
                             analytic_christoffel=model.metric.analytic_christoffel)
    return SpacetimeModel(
        name=f"{model.name}+rescale",
        metric=new_metric,
        box_lo=model.box_lo,
        box_hi=model.box_hi,
        excluded_points=list(model.excluded_points),
        predicate=model.predicate,
        predicate_desc=model.predicate_desc,
    )


def lower_index(model: SpacetimeModel, v: TangentVector) -> np.ndarray:
    """Covector components g(v, .) at the vector's base point."""
    model.ensure_in_domain(v.base)
    g = model.metric.components(v.base)
    return g @ v.comps


def raise_index(model: SpacetimeModel, x, p) -> TangentVector:
    """Inverse of lower_index: vector with components g^{-1} p at x."""
    x, p = _vec(x), _vec(p)
    model.ensure_in_domain(x)
    g = model.metric.components(x)
    return TangentVector(x, np.linalg.solve(g, p))


# ---------------------------------------------------------------------------
# Model catalog
# ---------------------------------------------------------------------------


def minkowski(m: int = 3, half_width: float = 8.0) -> SpacetimeModel:
    """Flat model diag(-1, 1, ..., 1) on the box [-half_width, half_width]^m."""
    if m not in (2, 3, 4):
        raise WrongMetric(f"minkowski supports m in {{2,3,4}}, got {m}")
    metric = MetricField(m, Const(0.0))
    lo = -half_width * np.ones(m)
    hi = half_width * np.ones(m)
    return SpacetimeModel(name=f"minkowski{m}", metric=metric, box_lo=lo, box_hi=hi)


def conformal_flat(m: int, sigma, half_width: float = 8.0) -> SpacetimeModel:
    """Conformally flat model e^{2 sigma} eta on a symmetric box."""
    if m not in (2, 3, 4):
        raise WrongMetric(f"conformal_flat supports m in {{2,3,4}}, got {m}")
    if isinstance(sigma, str):
        sigma = parse_expr(sigma, m)
    metric = MetricField(m, sigma)
    lo = -half_width * np.ones(m)
    hi = half_width * np.ones(m)
    return SpacetimeModel(name=f"conformal_flat{m}", metric=metric, box_lo=lo, box_hi=hi)


def punctured_minkowski2() -> SpacetimeModel:
    """2-d flat model on [-4, 4]^2 with the single event (1, 1) removed."""
    metric = MetricField(2, Const(0.0))
    return SpacetimeModel(
        name="punctured_minkowski2",
        metric=metric,
        box_lo=[-4.0, -4.0],
        box_hi=[4.0, 4.0],
        excluded_points=[np.array([1.0, 1.0])],
    )


def minkowski_ball3() -> SpacetimeModel:
    """3-d flat model restricted to the open unit ball |x|^2 < 1."""
    metric = MetricField(3, Const(0.0))
    return SpacetimeModel(
        name="minkowski_ball3",
        metric=metric,
        box_lo=[-1.0, -1.0, -1.0],
        box_hi=[1.0, 1.0, 1.0],
        predicate=lambda x: float(np.dot(x, x)) < 1.0,
        predicate_desc="x0^2 + x1^2 + x2^2 < 1",
    )


def get_model(kind: str, params: dict | None = None) -> SpacetimeModel:
    """Build a catalog model from its scenario-file identifier."""
    params = dict(params or {})
    if kind == "minkowski":
        return minkowski(int(params.get("m", 3)))
    if kind == "conformal_flat":
        m = int(params.get("m", 3))
        sigma = params.get("sigma", "0")
        return conformal_flat(m, sigma)
    if kind == "punctured_minkowski2":
        return punctured_minkowski2()
    if kind == "minkowski_ball3":
        return minkowski_ball3()
    raise WrongMetric(f"unknown metric kind {kind!r}")


def model_catalog() -> dict:
    """Identifier -> short description for the CLI listing."""
    return {
        "minkowski": "flat diag(-1,1,...,1); params: m in {2,3,4}",
        "conformal_flat": "e^{2 sigma} * flat; params: m, sigma expression "
                          "(grammar: numbers, x<i>, +, -, *, sin, pi)",
        "punctured_minkowski2": "flat m=2 on [-4,4]^2 with event (1,1) removed",
        "minkowski_ball3": "flat m=3 on the open unit ball (domain predicate)",
    }
