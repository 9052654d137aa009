"""Tests for null geodesic construction, integration, and reparametrization."""

import numpy as np
import pytest

from nullrays import geodesics as ge
from nullrays import spacetime as st
from nullrays.errors import NotFuture, NotNull, NotPregeodesic, OutOfDomain
from nullrays.rng import stream


class TestMakeNull:
    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_null_future_normalized(self, dim):
        model = st.conformal_flat(dim, "0.2*sin(x1)")
        rng = stream(10, f"make-null-{dim}")
        for _ in range(5):
            x = rng.uniform(-1.0, 1.0, size=dim)
            d = rng.normal(size=dim - 1)
            v = ge.make_null(model, x, d)
            g = st.eval_metric(model, x)
            assert abs(v.comps @ g @ v.comps) < 1e-12
            assert v.comps @ g @ model.T(x) == pytest.approx(-1.0, abs=1e-12)
            ge.check_null_future(model, x, v.comps)

    def test_flat_closed_form(self, flat3):
        v = ge.make_null(flat3, np.zeros(3), [1.0, 0.0])
        assert np.allclose(v.comps, [1.0, 1.0, 0.0], atol=1e-15)

    def test_direction_validation(self, flat3):
        with pytest.raises(ValueError):
            ge.make_null(flat3, np.zeros(3), [0.0, 0.0])
        with pytest.raises(ValueError):
            ge.make_null(flat3, np.zeros(3), [1.0])

    def test_check_null_future_rejects(self, flat3):
        with pytest.raises(NotNull):
            ge.check_null_future(flat3, np.zeros(3), np.array([1.0, 0.5, 0.0]))
        with pytest.raises(NotFuture):
            ge.check_null_future(flat3, np.zeros(3), np.array([-1.0, 1.0, 0.0]))


class TestIntegrate:
    def test_flat_rays_are_straight(self, flat3):
        rng = stream(11, "straight")
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(flat3, x, rng.normal(size=2)).comps
        geo = ge.integrate_geodesic(flat3, x, v, (0.0, 2.0), n_steps=64)
        want = x[None, :] + geo.ts[:, None] * v[None, :]
        assert np.max(np.abs(geo.xs - want)) < 1e-12
        assert np.max(np.abs(geo.vs - v[None, :])) < 1e-12
        assert geo.termination == "interval_end"

    def test_null_drift_stays_small(self, curved3):
        rng = stream(12, "drift")
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(curved3, x, rng.normal(size=2)).comps
        geo = ge.integrate_geodesic(curved3, x, v, (0.0, 1.5))
        assert geo.null_drift() < 1e-8

    def test_backward_span(self, curved3):
        x = np.array([0.5, 0.2, -0.1])
        v = ge.make_null(curved3, x, [1.0, 0.3]).comps
        geo = ge.integrate_geodesic(curved3, x, v, (0.0, -1.0), n_steps=800)
        assert geo.ts[-1] == pytest.approx(-1.0)
        assert np.all(np.diff(geo.ts) < 0.0)
        assert geo.null_drift() < 1e-8

    def test_domain_exit_termination(self, flat3):
        x = np.array([0.0, 7.5, 0.0])
        v = ge.make_null(flat3, x, [1.0, 0.0]).comps
        geo = ge.integrate_geodesic(flat3, x, v, (0.0, 5.0), n_steps=100)
        assert geo.termination == "domain_exit"
        assert geo.ts[-1] < 5.0
        assert flat3.in_domain(geo.xs[-1])

    def test_exclusion_hit_termination(self):
        model = st.punctured_minkowski2()
        geo = ge.integrate_geodesic(model, [-1.0, -1.0], [1.0, 1.0], (0.0, 4.0),
                                    n_steps=3200)
        assert geo.termination == "exclusion_hit"
        # (1, 1) is 2 * (1, 1) away from the start, so the cut lands at t = 2
        assert geo.ts[-1] == pytest.approx(2.0, abs=1e-8)
        assert geo.ts[-1] < 2.0
        assert np.linalg.norm(geo.xs[-1] - np.array([1.0, 1.0])) >= st.EXCLUSION_RADIUS * (1 - 1e-9)

    def test_midpoint_cache_alignment(self, curved3):
        x = np.zeros(3)
        v = ge.make_null(curved3, x, [0.6, 0.8]).comps
        geo = ge.integrate_geodesic(curved3, x, v, (0.0, 0.5), n_steps=32)
        assert geo.has_mid_cache
        assert len(geo.mid_ts) == geo.n_nodes - 1
        assert np.allclose(geo.mid_ts, 0.5 * (geo.ts[:-1] + geo.ts[1:]))

    def test_zero_span(self, flat3):
        v = ge.make_null(flat3, np.zeros(3), [1.0, 0.0]).comps
        geo = ge.integrate_geodesic(flat3, np.zeros(3), v, (0.0, 0.0))
        assert geo.n_nodes == 1 and geo.termination == "interval_end"

    def test_minimum_steps(self, flat3):
        v = ge.make_null(flat3, np.zeros(3), [1.0, 0.0]).comps
        with pytest.raises(ValueError):
            ge.integrate_geodesic(flat3, np.zeros(3), v, (0.0, 1.0), n_steps=8)

    def test_rejects_non_null_start(self, flat3):
        with pytest.raises(NotNull):
            ge.integrate_geodesic(flat3, np.zeros(3), [1.0, 0.2, 0.0], (0.0, 1.0))

    def test_affine_rescale_covariance(self, curved3):
        # integrating with velocity c*v over span L/c traverses the same points
        x = np.zeros(3)
        v = ge.make_null(curved3, x, [0.8, -0.6]).comps
        geo1 = ge.integrate_geodesic(curved3, x, v, (0.0, 1.0), n_steps=200)
        geo2 = ge.integrate_geodesic(curved3, x, 2.0 * v, (0.0, 0.5), n_steps=200)
        assert np.max(np.abs(geo1.xs - geo2.xs)) < 1e-10
        assert np.max(np.abs(2.0 * geo1.vs - geo2.vs)) < 1e-9


class TestStateAtParameter:
    def test_matches_nodes(self, curved3):
        x = np.zeros(3)
        v = ge.make_null(curved3, x, [1.0, 0.2]).comps
        geo = ge.integrate_geodesic(curved3, x, v, (0.0, 1.0), n_steps=64)
        s = ge.state_at_parameter(geo, float(geo.ts[17]))
        assert np.allclose(s.x, geo.xs[17], atol=1e-14)

    def test_off_node_agrees_with_fine_run(self, curved3):
        x = np.zeros(3)
        v = ge.make_null(curved3, x, [1.0, 0.2]).comps
        coarse = ge.integrate_geodesic(curved3, x, v, (0.0, 1.0), n_steps=128)
        t_query = 0.3777
        got = ge.state_at_parameter(coarse, t_query)
        fine = ge.integrate_geodesic(curved3, x, v, (0.0, t_query), n_steps=2048)
        assert np.linalg.norm(got.x - fine.xs[-1]) < 1e-9


class TestExpMap:
    def test_flat_is_translation(self, flat3):
        p = np.array([0.1, -0.2, 0.3])
        w = ge.make_null(flat3, p, [0.0, 1.0]).comps
        q = ge.exp_map(flat3, p, w, 1.5)
        assert np.allclose(q, p + 1.5 * w, atol=1e-12)

    def test_raises_past_domain(self, flat3):
        p = np.array([0.0, 7.9, 0.0])
        w = ge.make_null(flat3, p, [1.0, 0.0]).comps
        with pytest.raises(OutOfDomain):
            ge.exp_map(flat3, p, w, 4.0)


class TestPregeodesic:
    def _curved_exp_pre(self, model, n=1601):
        """Flat-model exponential reparametrization fixture: x(t) = p + (e^t - 1) w."""
        p = np.zeros(model.dim)
        w = ge.make_null(model, p, np.ones(model.dim - 1)).comps
        ts = np.linspace(0.0, 1.0, n)
        return ge.Pregeodesic.from_functions(
            model, ts,
            lambda t: p + (np.exp(t) - 1.0) * w,
            lambda t: np.exp(t) * w,
            lambda t: 1.0,
        ), p, w

    def test_residual_identifies_f(self, flat3):
        pre, _, _ = self._curved_exp_pre(flat3)
        assert ge.pregeodesic_residual(flat3, pre) < 1e-6

    def test_not_pregeodesic_rejected(self, flat3):
        pre, _, _ = self._curved_exp_pre(flat3)
        bad = ge.Pregeodesic(pre.ts, pre.xs, pre.xdots, pre.f_samples + 0.5)
        with pytest.raises(NotPregeodesic):
            ge.reparametrize_to_geodesic(flat3, bad)

    def test_reparametrization_recovers_affine_curve(self, flat3):
        pre, p, w = self._curved_exp_pre(flat3)
        tau, curve = ge.reparametrize_to_geodesic(flat3, pre)
        # tau(t) = integral exp(t) = e^t - 1 for f = 1
        assert np.max(np.abs(tau - (np.exp(pre.ts) - 1.0))) < 1e-8
        want = p[None, :] + curve.ts[:, None] * w[None, :]
        assert np.max(np.abs(curve.xs - want)) < 1e-6
        assert ge.geodesic_residual(flat3, curve.ts, curve.xs) < 1e-6

    def test_resampled_curve_has_no_mid_cache(self, flat3):
        pre, _, _ = self._curved_exp_pre(flat3)
        _, curve = ge.reparametrize_to_geodesic(flat3, pre)
        assert not curve.has_mid_cache

    def test_sample_length_validation(self, flat3):
        ts = np.linspace(0.0, 1.0, 8)
        xs = np.zeros((8, 3))
        with pytest.raises(ValueError):
            ge.Pregeodesic(ts, xs, np.zeros((7, 3)), np.zeros(8))
        with pytest.raises(ValueError):
            ge.Pregeodesic(ts[:4], xs[:4], np.zeros((4, 3)), np.zeros(4))


class TestGeodesicResidual:
    def test_zero_on_integrated_curve(self, curved3):
        x = np.zeros(3)
        v = ge.make_null(curved3, x, [1.0, 0.1]).comps
        geo = ge.integrate_geodesic(curved3, x, v, (0.0, 1.0), n_steps=4800)
        assert ge.geodesic_residual(curved3, geo.ts, geo.xs) < 1e-6

    def test_large_on_non_geodesic(self, flat3):
        ts = np.linspace(0.0, 1.0, 201)
        xs = np.stack([ts, np.sin(ts), np.zeros_like(ts)], axis=1)
        assert ge.geodesic_residual(flat3, ts, xs) > 0.1


def test_trajectory_rows_shape(curved3):
    x = np.zeros(3)
    v = ge.make_null(curved3, x, [1.0, 0.0]).comps
    geo = ge.integrate_geodesic(curved3, x, v, (0.0, 0.5), n_steps=32)
    rows = ge.trajectory_rows(geo)
    assert rows.shape == (geo.n_nodes, 1 + 2 * 3)
    assert np.array_equal(rows[:, 0], geo.ts)
