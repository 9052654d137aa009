"""Contact and symplectic structure evaluations.

Upstairs, on the tangent bundle: the tautological form theta_g(xi) =
g(v, dx) and its exterior derivative packaged as omega_g(xi1, xi2) =
g(dx1, Du2) - g(dx2, Du1), with Du the covariant fibre derivative
dv + Gamma(dx, v).

Downstairs, on classes of Jacobi fields along a normalized ray: theta0
([J]) = g(J(0), v) and omega0([J1], [J2]) = g(J1(0), J2'(0)) -
g(J2(0), J1'(0)), evaluated on canonical representatives.  The
contact hyperplane is the zero set of theta0; frames for it are built
from an orthonormal basis of the spatial directions transverse to the
ray, and their omega0 Gram matrices witness nondegeneracy.

The reduction checks at the end verify, as numerical residuals: that the
geodesic spray spans the kernel of omega_g restricted to the null-cone
bundle; that index-lowering intertwines the spray and fibre-scaling
fields with their cotangent counterparts; and that the canonical
symplectic form scales exponentially along the fibre-scaling flow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BaseMismatch, NotNull
from .geodesics import check_null_future, integrate_geodesic
from .jacobi import JacobiClass
from .lightrays import LightRay, ray_coords
from .spacetime import (
    SpacetimeModel,
    TangentVector,
    christoffel_batch,
    lower_index,
    metric_at,
)

__all__ = [
    "TOL_CONTACT",
    "TMTangent",
    "ContactFrame",
    "theta_g",
    "theta_g_pullback",
    "omega_g",
    "omega_g_stokes",
    "theta0",
    "theta0_via_tm",
    "omega0",
    "contact_frame",
    "nondegeneracy_report",
    "kernel_separation_report",
    "scale_invariance_check",
    "spray_kernel_check",
    "make_cone_tangent",
    "hamiltonian_intertwine_check",
    "liouville_check",
]

# Minimum singular value threshold for accepting a frame Gram matrix as
# nondegenerate (conservative against finite-difference noise).
TOL_CONTACT = 1e-6


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass
class TMTangent:
    """Tangent vector of the tangent bundle: base (x, v), components (dx, dv)."""

    x: np.ndarray
    v: np.ndarray
    dx: np.ndarray
    dv: np.ndarray

    def __post_init__(self):
        self.x = _vec(self.x)
        self.v = _vec(self.v)
        self.dx = _vec(self.dx)
        self.dv = _vec(self.dv)


def _same_base(xi1: TMTangent, xi2: TMTangent) -> None:
    if not (np.allclose(xi1.x, xi2.x, atol=1e-12, rtol=0.0)
            and np.allclose(xi1.v, xi2.v, atol=1e-12, rtol=0.0)):
        raise BaseMismatch("tangent-bundle vectors sit at different base states")


def theta_g(model: SpacetimeModel, xi: TMTangent) -> float:
    """Tautological form pulled back to the tangent bundle: g(v, dx)."""
    model.ensure_in_domain(xi.x)
    g = metric_at(model, xi.x)
    return float(xi.v @ g @ xi.dx)


def theta_g_pullback(model: SpacetimeModel, xi: TMTangent) -> float:
    """Same value computed through the cotangent route: p . dx, p = g v.

    Independent code path (index lowering first), used as the two-path
    oracle for theta_g.
    """
    p = lower_index(model, TangentVector(xi.x, xi.v))
    return float(np.dot(p, xi.dx))


def _fibre_derivative(model: SpacetimeModel, xi: TMTangent) -> np.ndarray:
    """Covariant fibre component Du = dv + Gamma(dx, v)."""
    gamma = christoffel_batch(model, xi.x)
    return xi.dv + np.einsum("kij,i,j->k", gamma, xi.dx, xi.v)


def omega_g(model: SpacetimeModel, xi1: TMTangent, xi2: TMTangent) -> float:
    """Symplectic pairing g(dx1, Du2) - g(dx2, Du1)."""
    _same_base(xi1, xi2)
    model.ensure_in_domain(xi1.x)
    g = metric_at(model, xi1.x)
    du1 = _fibre_derivative(model, xi1)
    du2 = _fibre_derivative(model, xi2)
    return float(xi1.dx @ g @ du2 - xi2.dx @ g @ du1)


def omega_g_stokes(model: SpacetimeModel, xi1: TMTangent, xi2: TMTangent,
                   eps: float = 1e-4) -> float:
    """Independent oracle: minus the circulation of theta_g around the
    parallelogram spanned by eps*xi1, eps*xi2 and centered at the base
    point, divided by eps^2.

    Midpoint-rule line integrals around the centered loop make the
    discrete exterior derivative second-order accurate in eps.
    """
    _same_base(xi1, xi2)
    z = np.concatenate([xi1.x, xi1.v])
    d1 = eps * np.concatenate([xi1.dx, xi1.dv])
    d2 = eps * np.concatenate([xi2.dx, xi2.dv])
    m = len(xi1.x)

    def theta_at(point, along):
        xx, vv = point[:m], point[m:]
        g = metric_at(model, xx)
        return float(vv @ g @ along[:m])

    circ = 0.0
    circ += theta_at(z - 0.5 * d2, d1)
    circ += theta_at(z + 0.5 * d1, d2)
    circ -= theta_at(z + 0.5 * d2, d1)
    circ -= theta_at(z - 0.5 * d1, d2)
    return -circ / eps**2


# ---------------------------------------------------------------------------
# Reduced forms on Jacobi classes
# ---------------------------------------------------------------------------


def _check_class_at_ray(ray: LightRay, cls: JacobiClass) -> None:
    if not np.allclose(cls.x, ray.event, atol=1e-9, rtol=0.0):
        raise BaseMismatch("class and ray sit at different events")


def theta0(ray: LightRay, cls: JacobiClass) -> float:
    """Reduced contact form: g(J(0), v) on the canonical representative."""
    _check_class_at_ray(ray, cls)
    g = metric_at(ray.model, ray.event)
    return float(ray.v @ g @ cls.w0)


def theta0_via_tm(ray: LightRay, cls: JacobiClass) -> float:
    """theta0 through the restriction chain: lift the class to a
    tangent-bundle vector at (q, v) and evaluate theta_g there.

    The lift's positional part is the representative J(0); its fibre part
    is the coordinate derivative of the tangent field, recovered from the
    covariant representative by removing the connection term.
    """
    _check_class_at_ray(ray, cls)
    model = ray.model
    gamma = christoffel_batch(model, ray.event)
    dv_coord = cls.w0dot - np.einsum("kij,i,j->k", gamma, cls.w0, ray.v)
    xi = TMTangent(ray.event, ray.v, cls.w0, dv_coord)
    return theta_g(model, xi)


def omega0(ray: LightRay, c1: JacobiClass, c2: JacobiClass) -> float:
    """Reduced symplectic pairing g(J1(0), J2'(0)) - g(J2(0), J1'(0))."""
    _check_class_at_ray(ray, c1)
    _check_class_at_ray(ray, c2)
    g = metric_at(ray.model, ray.event)
    return float(c1.w0 @ g @ c2.w0dot - c2.w0 @ g @ c1.w0dot)


@dataclass
class ContactFrame:
    """Basis of the contact hyperplane at a ray, with its omega0 Gram matrix."""

    ray: LightRay
    classes: list
    gram: np.ndarray

    @property
    def size(self) -> int:
        return len(self.classes)


def _transverse_spatial_basis(ray: LightRay) -> list[np.ndarray]:
    """g-orthonormal basis of {T, v}^perp (m-2 vectors).

    Gram-Schmidt of the chart frame's spatial legs against the unit spatial
    direction of v; the two excluded directions are T and the ray itself.
    """
    model = ray.model
    event = ray.event
    g = metric_at(model, event)
    frame = ray.chart.frame_at(event)
    T = model.T(event)
    alpha = float(T @ g @ T)
    # unit spatial direction of v:  v = a T + b s_hat
    a = -1.0 / alpha
    s_hat = (ray.v - a * T) * np.sqrt(-alpha)
    basis = []
    for cand in frame[1:]:
        u = cand - float(cand @ g @ s_hat) * s_hat
        for b in basis:
            u = u - float(u @ g @ b) * b
        norm = np.sqrt(max(float(u @ g @ u), 0.0))
        if norm < 1e-8:
            continue
        basis.append(u / norm)
    if len(basis) != model.dim - 2:
        raise ValueError("failed to build the transverse spatial basis")
    return basis


def contact_frame(ray: LightRay) -> ContactFrame:
    """Frame of the contact hyperplane: classes (b_i, 0) and (0, b_i).

    The b_i run over an orthonormal basis of the spatial directions
    orthogonal to both T and the ray; all 2m-4 classes annihilate theta0.
    """
    model = ray.model
    basis = _transverse_spatial_basis(ray)
    zero = np.zeros(model.dim)
    classes = [JacobiClass(model, ray.event, ray.v, b, zero) for b in basis]
    classes += [JacobiClass(model, ray.event, ray.v, zero, b) for b in basis]
    n = len(classes)
    gram = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            val = omega0(ray, classes[i], classes[j])
            gram[i, j] = val
            gram[j, i] = -val
    return ContactFrame(ray=ray, classes=classes, gram=gram)


def nondegeneracy_report(frame: ContactFrame):
    """(det, min singular value, passed) of the frame's Gram matrix."""
    det = float(np.linalg.det(frame.gram))
    svals = np.linalg.svd(frame.gram, compute_uv=False)
    min_sv = float(svals[-1]) if len(svals) else 0.0
    return det, min_sv, bool(min_sv > TOL_CONTACT)


def kernel_separation_report(ray: LightRay) -> dict:
    """Separate the omega0 kernel from the contact hyperplane, concretely.

    Appends the one class outside the hyperplane's natural span — spatial
    direction of the ray itself, (s_hat, 0) — to the frame and reports:

    * euclidean rank of stacked representatives rises by exactly 1;
    * the extended Gram matrix keeps rank 2m-4 (the appended class is
      omega0-orthogonal to everything: it spans the kernel);
    * theta0 of the appended class is nonzero (kernel misses the
      hyperplane).
    """
    model = ray.model
    event = ray.event
    g = metric_at(model, event)
    T = model.T(event)
    alpha = float(T @ g @ T)
    a = -1.0 / alpha
    s_hat = (ray.v - a * T) * np.sqrt(-alpha)
    frame = contact_frame(ray)
    kernel_cls = JacobiClass(model, event, ray.v, s_hat, np.zeros(model.dim))

    reps = np.array([np.concatenate([c.w0, c.w0dot]) for c in frame.classes])
    reps_ext = np.vstack([reps, np.concatenate([kernel_cls.w0, kernel_cls.w0dot])])
    rank = int(np.linalg.matrix_rank(reps, tol=1e-8))
    rank_ext = int(np.linalg.matrix_rank(reps_ext, tol=1e-8))

    n = frame.size
    gram_ext = np.zeros((n + 1, n + 1))
    gram_ext[:n, :n] = frame.gram
    for i, c in enumerate(frame.classes):
        val = omega0(ray, c, kernel_cls)
        gram_ext[i, n] = val
        gram_ext[n, i] = -val
    svals = np.linalg.svd(frame.gram, compute_uv=False)
    svals_ext = np.linalg.svd(gram_ext, compute_uv=False)
    gram_rank = int(np.sum(svals > 1e-10))
    gram_rank_ext = int(np.sum(svals_ext > 1e-10))

    return {
        "euclidean_rank": rank,
        "euclidean_rank_extended": rank_ext,
        "gram_rank": gram_rank,
        "gram_rank_extended": gram_rank_ext,
        "kernel_pairing_residual": float(np.max(np.abs(gram_ext[:, n]))),
        "theta0_of_kernel_class": theta0(ray, kernel_cls),
    }


def scale_invariance_check(ray: LightRay, lam: float, extra_classes=()) -> float:
    """Hyperplane invariance under tangent rescaling v -> lam v.

    Returns the max residual over (a) |theta evaluated with lam*v| on the
    frame classes, where theta with v vanishes, and (b) |theta^{lam v} -
    lam * theta^{v}| on any supplied non-hyperplane classes.
    """
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    g = metric_at(ray.model, ray.event)
    v_scaled = lam * ray.v
    frame = contact_frame(ray)
    residual = 0.0
    for cls in frame.classes:
        residual = max(residual, abs(float(v_scaled @ g @ cls.w0)))
    for cls in extra_classes:
        lhs = float(v_scaled @ g @ cls.w0)
        rhs = lam * float(ray.v @ g @ cls.w0)
        residual = max(residual, abs(lhs - rhs))
    return residual


# ---------------------------------------------------------------------------
# Reduction identities on the (co)tangent bundle
# ---------------------------------------------------------------------------


def make_cone_tangent(model: SpacetimeModel, x, v, dx, dv, correct: bool = True) -> TMTangent:
    """TMTangent at a null state, corrected to be tangent to the null-cone
    bundle: the linearized cone condition

        (d g)(dx)(v, v) + 2 g(v, dv) = 0

    is enforced by shifting dv along T (T is transverse to the cone's
    level sets, unlike v itself, which is tangent to them).  With
    ``correct=False`` the raw vector is returned — the planted control.
    """
    x, v, dx, dv = _vec(x), _vec(v), _vec(dx), _vec(dv)
    if not correct:
        return TMTangent(x, v, dx, dv)
    g = metric_at(model, x)
    dg = model.metric.components_deriv(x)
    r = float(np.einsum("ijk,k,i,j->", dg, dx, v, v) + 2.0 * (v @ g @ dv))
    T = model.T(x)
    c = -r / (2.0 * float(v @ g @ T))
    return TMTangent(x, v, dx, dv + c * T)


def spray_kernel_check(model: SpacetimeModel, x, v, trials: int, rng) -> dict:
    """omega_g(X_spray, Y) over random cone-tangent vectors Y.

    Returns the max residual over corrected (tangent) samples and the
    minimum over planted non-tangent controls — the former should vanish,
    the latter must not.
    """
    x, v = _vec(x), _vec(v)
    check_null_future(model, x, v)
    gamma = christoffel_batch(model, x)
    spray = TMTangent(x, v, v, -np.einsum("kij,i,j->k", gamma, v, v))
    T = model.T(x)
    max_tangent = 0.0
    min_control = np.inf
    for _ in range(trials):
        dx = rng.standard_normal(model.dim)
        dv = rng.standard_normal(model.dim)
        y_tan = make_cone_tangent(model, x, v, dx, dv, correct=True)
        # planted control: leave the cone deliberately, by a unit bump along
        # T (a random uncorrected vector could be near-tangent by chance)
        y_bad = TMTangent(x, v, y_tan.dx, y_tan.dv + T)
        max_tangent = max(max_tangent, abs(omega_g(model, spray, y_tan)))
        min_control = min(min_control, abs(omega_g(model, spray, y_bad)))
    return {"max_tangent_residual": max_tangent, "min_control_residual": float(min_control)}


def _metric_hat(model: SpacetimeModel, x: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Index-lowering map on bundle coordinates: (x, u) -> (x, g(x) u)."""
    g = metric_at(model, x)
    return np.concatenate([x, g @ u])


def _pushforward_hat(model: SpacetimeModel, x, v, dx, dv, delta: float) -> np.ndarray:
    """Differential of the index-lowering map by central differences along
    the straight segment through (x, v) with direction (dx, dv)."""
    plus = _metric_hat(model, x + delta * dx, v + delta * dv)
    minus = _metric_hat(model, x - delta * dx, v - delta * dv)
    return (plus - minus) / (2.0 * delta)


def hamiltonian_intertwine_check(model: SpacetimeModel, x, v, delta: float = 1e-3,
                                 h_fd: float = 1e-5) -> dict:
    """Pushforwards of the fibre-scaling and spray fields under index lowering.

    r_scaling: |d(hat g)(0, v) - (0, p)| — the scaling field must map to the
    cotangent scaling field.
    r_spray:   |d(hat g)(X_spray) - X_H| with the Hamiltonian field assembled
    from finite-difference derivatives of the inverse metric:
    X_H = (g^{-1} p, -1/2 d_k(g^{ij}) p_i p_j).
    """
    x, v = _vec(x), _vec(v)
    model.ensure_in_domain(x)
    m = model.dim
    g = metric_at(model, x)
    p = g @ v

    push_scaling = _pushforward_hat(model, x, v, np.zeros(m), v, delta)
    target_scaling = np.concatenate([np.zeros(m), p])
    r_scaling = float(np.max(np.abs(push_scaling - target_scaling)))

    gamma = christoffel_batch(model, x)
    acc = -np.einsum("kij,i,j->k", gamma, v, v)
    push_spray = _pushforward_hat(model, x, v, v, acc, delta)

    dginv = np.empty((m, m, m))
    for k in range(m):
        step = np.zeros(m)
        step[k] = h_fd
        ginv_p = np.linalg.inv(metric_at(model, x + step))
        ginv_m = np.linalg.inv(metric_at(model, x - step))
        dginv[k] = (ginv_p - ginv_m) / (2.0 * h_fd)
    xh_x = np.linalg.solve(g, p)
    xh_p = -0.5 * np.einsum("kij,i,j->k", dginv, p, p)
    target_spray = np.concatenate([xh_x, xh_p])
    r_spray = float(np.max(np.abs(push_spray - target_spray)))
    return {"r_scaling": r_scaling, "r_spray": r_spray}


def liouville_check(model: SpacetimeModel, x, v, s: float, rng, trials: int = 10) -> float:
    """Exponential scaling of the canonical symplectic form under the
    cotangent fibre-scaling flow Phi_s(x, p) = (x, e^s p).

    Pushes random tangent pairs through the flow's differential and
    compares omega at the flowed point against e^s times omega at the
    start; returns the max absolute difference.  The canonical form has
    constant coefficients, so the flowed base point (x, e^s g v) does not
    enter the values — the identity holds exactly, and the check guards
    the flow/differential/sign conventions rather than a discretization.
    """
    x, v = _vec(x), _vec(v)
    model.ensure_in_domain(x)
    m = model.dim

    def canonical_omega(z1, z2):
        return float(np.dot(z1[:m], z2[m:]) - np.dot(z2[:m], z1[m:]))

    factor = np.exp(s)
    residual = 0.0
    for _ in range(trials):
        xi = rng.standard_normal(2 * m)
        eta = rng.standard_normal(2 * m)
        # differential of the flow: identity on dx, e^s on dp
        xi_f = np.concatenate([xi[:m], factor * xi[m:]])
        eta_f = np.concatenate([eta[:m], factor * eta[m:]])
        lhs = canonical_omega(xi_f, eta_f)
        rhs = factor * canonical_omega(xi, eta)
        residual = max(residual, abs(lhs - rhs))
    return residual
