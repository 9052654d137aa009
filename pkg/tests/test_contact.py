"""Tests for the tautological/symplectic forms and the reduced contact data."""

import numpy as np
import pytest

from nullrays import contact as ct
from nullrays import geodesics as ge
from nullrays import jacobi as ja
from nullrays import lightrays as lr
from nullrays import spacetime as st
from nullrays.errors import BaseMismatch
from nullrays.rng import stream

from conftest import make_ray


def random_tm_tangent(model, rng, x=None, v=None):
    if x is None:
        x = rng.uniform(-0.5, 0.5, size=model.dim)
    if v is None:
        v = rng.normal(size=model.dim)
    return ct.TMTangent(x, v, rng.normal(size=model.dim), rng.normal(size=model.dim))


class TestBundleForms:
    def test_theta_two_paths_agree(self, curved3, rng):
        for _ in range(10):
            xi = random_tm_tangent(curved3, rng)
            assert ct.theta_g(curved3, xi) == pytest.approx(
                ct.theta_g_pullback(curved3, xi), abs=1e-12)

    def test_theta_linear_in_dx(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = rng.normal(size=3)
        dx1, dx2 = rng.normal(size=3), rng.normal(size=3)
        dv = rng.normal(size=3)
        t1 = ct.theta_g(curved3, ct.TMTangent(x, v, dx1, dv))
        t2 = ct.theta_g(curved3, ct.TMTangent(x, v, dx2, dv))
        t12 = ct.theta_g(curved3, ct.TMTangent(x, v, 2.0 * dx1 + dx2, dv))
        assert t12 == pytest.approx(2.0 * t1 + t2, abs=1e-12)

    def test_omega_antisymmetric(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = rng.normal(size=3)
        xi1 = random_tm_tangent(curved3, rng, x, v)
        xi2 = random_tm_tangent(curved3, rng, x, v)
        assert ct.omega_g(curved3, xi1, xi2) == pytest.approx(
            -ct.omega_g(curved3, xi2, xi1), abs=1e-12)
        assert ct.omega_g(curved3, xi1, xi1) == pytest.approx(0.0, abs=1e-12)

    def test_omega_matches_stokes_oracle(self, curved3, rng):
        # d(theta) around shrinking parallelograms reproduces omega to O(eps^2)
        x = rng.uniform(-0.5, 0.5, size=3)
        v = rng.normal(size=3)
        xi1 = random_tm_tangent(curved3, rng, x, v)
        xi2 = random_tm_tangent(curved3, rng, x, v)
        direct = ct.omega_g(curved3, xi1, xi2)
        errs = [abs(ct.omega_g_stokes(curved3, xi1, xi2, eps) - direct)
                for eps in (4e-3, 2e-3, 1e-3)]
        assert errs[-1] < 1e-5
        # quadratic shrinkage (ratio 16 for eps halved twice, with slack)
        assert errs[0] / max(errs[2], 1e-14) > 8.0

    def test_base_mismatch_rejected(self, curved3, rng):
        xi1 = random_tm_tangent(curved3, rng)
        xi2 = random_tm_tangent(curved3, rng)
        with pytest.raises(BaseMismatch):
            ct.omega_g(curved3, xi1, xi2)


class TestReducedForms:
    def _frame_ray(self, chart, rng):
        return make_ray(chart, rng.uniform(-1.0, 1.0, size=chart.dim - 1),
                        rng.uniform(-3.0, 3.0, size=chart.dim - 2))

    def test_theta0_two_path(self, curved_chart3, curved3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        frame = ct.contact_frame(ray)
        for cls in frame.classes:
            assert ct.theta0(ray, cls) == pytest.approx(
                ct.theta0_via_tm(ray, cls), abs=1e-10)
        # a class with nonzero theta0 as well
        rep = ct.kernel_separation_report(ray)
        assert rep["theta0_of_kernel_class"] != 0.0

    def test_frame_annihilates_theta0(self, curved_chart3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        frame = ct.contact_frame(ray)
        assert frame.size == 2 * 3 - 4
        for cls in frame.classes:
            assert abs(ct.theta0(ray, cls)) < 1e-12

    def test_flat_m3_gram_closed_form(self, chart3, rng):
        ray = self._frame_ray(chart3, rng)
        frame = ct.contact_frame(ray)
        assert np.max(np.abs(frame.gram - np.array([[0.0, 1.0], [-1.0, 0.0]]))) < 1e-10

    def test_nondegeneracy(self, curved_chart3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        det, min_sv, ok = ct.nondegeneracy_report(ct.contact_frame(ray))
        assert ok and min_sv > 1e-6 and abs(det) > 1e-12

    def test_m4_frame_nondegenerate(self, curved4, rng):
        chart = lr.build_chart(curved4, [-2.0] * 4, [2.0] * 4, 0.0)
        ray = self._frame_ray(chart, rng)
        frame = ct.contact_frame(ray)
        assert frame.size == 2 * 4 - 4
        _, min_sv, ok = ct.nondegeneracy_report(frame)
        assert ok and min_sv > 1e-6

    def test_kernel_separation_ranks(self, curved_chart3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        rep = ct.kernel_separation_report(ray)
        m = 3
        assert rep["euclidean_rank"] == 2 * m - 4
        assert rep["euclidean_rank_extended"] == 2 * m - 3
        assert rep["gram_rank"] == 2 * m - 4
        assert rep["gram_rank_extended"] == 2 * m - 4
        assert rep["kernel_pairing_residual"] < 1e-12
        assert abs(rep["theta0_of_kernel_class"]) > 1e-3

    def test_omega0_antisymmetry(self, curved_chart3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        frame = ct.contact_frame(ray)
        c1, c2 = frame.classes[0], frame.classes[1]
        assert ct.omega0(ray, c1, c2) == pytest.approx(-ct.omega0(ray, c2, c1))

    def test_scale_invariance(self, curved_chart3, rng):
        ray = self._frame_ray(curved_chart3, rng)
        for lam in (0.5, 3.0):
            assert ct.scale_invariance_check(ray, lam) < 1e-10
        with pytest.raises(ValueError):
            ct.scale_invariance_check(ray, -1.0)

    def test_class_event_mismatch(self, curved_chart3, curved3, rng):
        ray1 = self._frame_ray(curved_chart3, rng)
        ray2 = self._frame_ray(curved_chart3, rng)
        cls = ct.contact_frame(ray2).classes[0]
        with pytest.raises(BaseMismatch):
            ct.theta0(ray1, cls)


class TestConeTangents:
    def test_correction_restores_cone_tangency(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(curved3, x, rng.normal(size=2)).comps
        dx, dv = rng.normal(size=3), rng.normal(size=3)
        xi = ct.make_cone_tangent(curved3, x, v, dx, dv, correct=True)
        # linearized cone condition holds after the shift along T
        g = st.metric_at(curved3, x)
        dg = curved3.metric.components_deriv(x)
        r = float(np.einsum("ijk,k,i,j->", dg, xi.dx, v, v) + 2.0 * (v @ g @ xi.dv))
        assert abs(r) < 1e-12
        raw = ct.make_cone_tangent(curved3, x, v, dx, dv, correct=False)
        assert np.array_equal(raw.dv, dv)

    def test_spray_kernel(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(curved3, x, rng.normal(size=2)).comps
        rep = ct.spray_kernel_check(curved3, x, v, trials=12, rng=rng)
        assert rep["max_tangent_residual"] < 1e-8
        assert rep["min_control_residual"] > 1e-3


class TestReductionIdentities:
    def test_hamiltonian_intertwine_flat_exact(self, flat3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(flat3, x, rng.normal(size=2)).comps
        rep = ct.hamiltonian_intertwine_check(flat3, x, v)
        assert rep["r_scaling"] < 1e-12
        assert rep["r_spray"] < 1e-12

    def test_hamiltonian_intertwine_curved_converges(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(curved3, x, rng.normal(size=2)).comps
        resids = [ct.hamiltonian_intertwine_check(curved3, x, v, delta=d)["r_spray"]
                  for d in (4e-3, 2e-3, 1e-3)]
        assert resids[-1] < 1e-6
        assert resids[0] / resids[-1] > (4.0 ** 1.9) / 2.0

    def test_liouville_scaling(self, curved3, rng):
        x = rng.uniform(-0.5, 0.5, size=3)
        v = ge.make_null(curved3, x, rng.normal(size=2)).comps
        for s in (0.1, 0.5, -0.3):
            assert ct.liouville_check(curved3, x, v, s, rng) < 1e-8
