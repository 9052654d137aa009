"""Tests for metric fields, models, Christoffel symbols, and curvature."""

import numpy as np
import pytest

from nullrays import spacetime as st
from nullrays.errors import OutOfDomain, SignatureError, WrongMetric
from nullrays.expressions import parse_expr
from nullrays.rng import stream


class TestTangentVector:
    def test_coerces_to_float_arrays(self):
        tv = st.TangentVector([0, 1], [1, 0])
        assert tv.base.dtype == float and tv.comps.dtype == float

    @pytest.mark.parametrize(
        "base, comps",
        [([0.0], [0.0, 1.0]), ([[0.0, 1.0]], [[1.0, 0.0]]), ([0.0, np.nan], [1.0, 0.0])],
    )
    def test_rejects_bad_data(self, base, comps):
        with pytest.raises(ValueError):
            st.TangentVector(base, comps)


class TestMetricField:
    def test_flat_components(self, flat3):
        g = st.eval_metric(flat3, [0.2, -0.4, 1.0])
        assert np.allclose(g, np.diag([-1.0, 1.0, 1.0]))

    def test_conformal_components(self):
        model = st.conformal_flat(2, "0.3*x1")
        g = st.eval_metric(model, [0.0, 2.0])
        factor = np.exp(2.0 * 0.3 * 2.0)
        assert np.allclose(g, factor * np.diag([-1.0, 1.0]))

    def test_components_deriv_matches_fd(self, curved3):
        rng = stream(1, "metric-deriv")
        h = 1e-6
        for _ in range(4):
            x = rng.uniform(-1.5, 1.5, size=3)
            exact = curved3.metric.components_deriv(x)
            for k in range(3):
                xp, xm = x.copy(), x.copy()
                xp[k] += h
                xm[k] -= h
                fd = (curved3.metric.components(xp) - curved3.metric.components(xm)) / (2 * h)
                assert np.allclose(exact[:, :, k], fd, atol=1e-8)

    def test_batched_components_shape(self, curved3):
        pts = np.zeros((4, 5, 3))
        assert st.metric_at(curved3, pts).shape == (4, 5, 3, 3)

    def test_dimension_floor(self):
        with pytest.raises(ValueError):
            st.MetricField(1)


class TestDomain:
    def test_box_membership(self, flat3):
        assert flat3.in_domain(np.zeros(3))
        assert not flat3.in_domain(np.array([9.0, 0.0, 0.0]))
        assert not flat3.in_domain(np.array([np.nan, 0.0, 0.0]))

    def test_eval_metric_raises_outside(self, flat3):
        with pytest.raises(OutOfDomain):
            st.eval_metric(flat3, [9.0, 0.0, 0.0])

    def test_excluded_point_is_punctured(self):
        model = st.punctured_minkowski2()
        assert not model.in_domain(np.array([1.0, 1.0]))
        assert not model.in_domain(np.array([1.0, 1.0 + 0.5 * st.EXCLUSION_RADIUS]))
        assert model.in_domain(np.array([1.0, 1.001]))

    def test_ball_predicate(self):
        model = st.minkowski_ball3()
        assert model.in_domain(np.zeros(3))
        # the ball constrains all coordinates, time included
        assert model.in_domain(np.array([0.0, 0.95, 0.0]))
        assert not model.in_domain(np.array([0.95, 0.4, 0.0]))

    def test_T_is_constant_time_direction(self, curved3):
        assert np.array_equal(curved3.T(np.array([0.3, 0.1, -0.2])), [1.0, 0.0, 0.0])


class TestChristoffel:
    def test_flat_vanishes(self, flat4):
        x = np.array([0.1, 0.2, 0.3, 0.4])
        assert np.allclose(st.christoffel(flat4, x), 0.0)

    def test_analytic_matches_fd(self, curved3):
        rng = stream(2, "gamma")
        for _ in range(5):
            x = rng.uniform(-1.5, 1.5, size=3)
            exact = st.christoffel(curved3, x)
            fd = st.christoffel_fd(curved3, x)
            assert np.allclose(exact, fd, atol=1e-8)

    def test_fd_fallback_path_agrees(self, curved3):
        x = np.array([0.3, -0.7, 1.1])
        noanalytic = st.SpacetimeModel(
            "fd", curved3.metric.without_analytic_christoffel(),
            curved3.box_lo, curved3.box_hi)
        assert np.allclose(st.christoffel(curved3, x),
                           st.christoffel(noanalytic, x), atol=1e-8)

    def test_symmetry_in_lower_indices(self, curved4):
        x = np.array([0.1, 0.4, -0.2, 0.9])
        gamma = st.christoffel(curved4, x)
        assert np.allclose(gamma, np.swapaxes(gamma, 1, 2))

    def test_batch_matches_loop(self, curved3):
        pts = stream(3, "gamma-batch").uniform(-1.0, 1.0, size=(6, 3))
        batch = st.christoffel_batch(curved3, pts)
        for i, p in enumerate(pts):
            assert np.allclose(batch[i], st.christoffel(curved3, p))


class TestRiemann:
    def test_flat_curvature_vanishes(self, flat3):
        x = np.array([0.5, -0.5, 0.25])
        assert np.allclose(st.riemann_tensor(flat3, x), 0.0, atol=1e-12)

    def test_riemann_op_contracts_tensor(self, curved3):
        rng = stream(4, "riemann")
        x = rng.uniform(-1.0, 1.0, size=3)
        v = rng.normal(size=3)
        J = rng.normal(size=3)
        R = st.riemann_tensor(curved3, x)
        want = np.einsum("kabc,a,b,c->k", R, v, J, v)
        got = st.riemann_op(curved3, x, J, v)
        assert np.allclose(got, want, atol=1e-6)

    def test_riemann_matrix_is_linear_slice(self, curved3):
        rng = stream(5, "riemann-mat")
        x = rng.uniform(-1.0, 1.0, size=3)
        v = rng.normal(size=3)
        M = st.riemann_matrix(curved3, x, v)
        for _ in range(3):
            J = rng.normal(size=3)
            assert np.allclose(M @ J, st.riemann_op(curved3, x, J, v), atol=1e-6)


class TestIndices:
    def test_lower_raise_roundtrip(self, curved3):
        rng = stream(6, "index")
        x = rng.uniform(-1.0, 1.0, size=3)
        v = st.TangentVector(x, rng.normal(size=3))
        p = st.lower_index(curved3, v)
        back = st.raise_index(curved3, x, p)
        assert np.allclose(back.comps, v.comps, atol=1e-12)

    def test_lower_index_is_metric_contraction(self, flat3):
        v = st.TangentVector(np.zeros(3), np.array([2.0, 3.0, -1.0]))
        assert np.allclose(st.lower_index(flat3, v), [-2.0, 3.0, -1.0])


class TestConformalRescale:
    def test_rescales_metric_pointwise(self, flat3):
        resc = st.conformal_rescale(flat3, "0.25*sin(x0)")
        x = np.array([0.9, 0.1, -0.3])
        g0 = st.eval_metric(flat3, x)
        g1 = st.eval_metric(resc, x)
        assert np.allclose(g1, np.exp(2 * 0.25 * np.sin(0.9)) * g0)

    def test_composes_sigmas(self):
        base = st.conformal_flat(2, "0.1*x1")
        resc = st.conformal_rescale(base, "0.2*x0")
        x = np.array([1.0, 2.0])
        want = np.exp(2 * (0.1 * 2.0 + 0.2 * 1.0)) * st.flat_eta(2)
        assert np.allclose(st.eval_metric(resc, x), want)

    def test_preserves_domain(self):
        model = st.punctured_minkowski2()
        resc = st.conformal_rescale(model, "0.3*sin(x0)")
        assert not resc.in_domain(np.array([1.0, 1.0]))
        assert resc.excluded_points and np.allclose(resc.excluded_points[0], [1.0, 1.0])

    def test_accepts_parsed_expression(self, flat3):
        resc = st.conformal_rescale(flat3, parse_expr("0.5*x2", 3))
        g = st.eval_metric(resc, np.array([0.0, 0.0, 1.0]))
        assert np.allclose(g, np.exp(1.0) * st.flat_eta(3))


class TestCatalog:
    def test_get_model_kinds(self):
        for kind in st.model_catalog():
            model = st.get_model(kind, {"m": 3} if kind in ("minkowski", "conformal_flat") else None)
            assert isinstance(model, st.SpacetimeModel)

    def test_conformal_flat_params(self):
        model = st.get_model("conformal_flat", {"m": 4, "sigma": "0.1*sin(x1)"})
        assert model.dim == 4

    def test_unknown_kind_raises(self):
        with pytest.raises(WrongMetric):
            st.get_model("nosuch")

    def test_dimension_guard(self):
        with pytest.raises(WrongMetric):
            st.minkowski(5)


def test_signature_guard():
    # A wild exponent overflowing to a degenerate matrix must be caught by
    # eval_metric's signature check rather than silently propagated.
    model = st.conformal_flat(2, "-400.0")
    with pytest.raises(SignatureError):
        st.eval_metric(model, np.zeros(2))
