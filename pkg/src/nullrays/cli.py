"""Scenario-driven command line for the toolkit.

Subcommands
-----------
``run <scenario.json> [--out DIR] [--seed N]``
    Parse a scenario file, run the suite it names, and write the artifact
    set into the output directory: ``report.json`` (summary + every check
    record), ``rays.csv`` (trajectories), ``jacobi.csv`` (field samples),
    ``residuals.csv`` (flat check table).  Exit code 0 when every check
    passed, 1 otherwise.

``check-all [--out DIR]``
    Run the full registered property-check suite (fixed seed 0) and write
    the same artifact set.

``list-metrics``
    Print the metric catalog and the scenario kinds.

Scenario files are JSON objects with fields:

* ``kind``       one of ``geodesic_demo``, ``jacobi_suite``,
  ``conformal_invariance``, ``contact_suite``, ``reduction_suite``,
  ``nonhausdorff_demo``  (required)
* ``metric``     ``{"kind": ..., "params": {...}}``  (required)
* ``chart``      ``{"v_lo": [...], "v_hi": [...], "c0": ...}``  (optional;
  defaults to the middle half of the model box, slice at ``x0 = 0``)
* ``integrator`` ``{"n_steps": ..., "ds": ..., "h_fd": ...}``  (optional)
* ``tolerances`` overrides for the per-check tolerances  (optional)
* ``seed``       base RNG seed, default 0
* ``rays``       a count, a list of per-ray seeds, or a list of explicit
  chart-coordinate rows  (optional, default 6)
* ``t_span``     integration window ``[t0, t1]``, default ``[0, 1]``
* ``rescale_sigma`` exponent expression for the conformal suite
* ``trials``     per-state sample count for the reduction suite

Determinism contract: two runs of the same scenario with the same seed
produce byte-identical reports (after zeroing the wall-time field) and
byte-identical CSV files.  All randomness flows through named
counter-based streams derived from the scenario seed.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import tempfile
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import checks as ck
from . import contact as ct
from . import geodesics as ge
from . import jacobi as ja
from . import lightrays as lr
from . import spacetime as st
from .checks import CheckRecord, digest_inputs
from .errors import NoCrossing, NullraysError, ParseError, WrongMetric
from .rng import stream

__all__ = [
    "SCHEMA_VERSION",
    "SCENARIO_KINDS",
    "DEFAULT_TOLERANCES",
    "Scenario",
    "parse_scenario",
    "parse_scenario_text",
    "run_scenario",
    "check_all",
    "determinism_records",
    "main",
]

SCHEMA_VERSION = 1

SCENARIO_KINDS = (
    "geodesic_demo",
    "jacobi_suite",
    "conformal_invariance",
    "contact_suite",
    "reduction_suite",
    "nonhausdorff_demo",
)

# Default tolerance for every scenario-level check; scenario files may
# override any entry (threshold-style checks store the required margin
# or order under the same mechanism).
DEFAULT_TOLERANCES = {
    "null_drift": 1e-8,
    "flat_exactness": 1e-12,
    "chart_roundtrip": 1e-9,
    "ray_set_roundtrip": 1e-9,
    "pairing_fit": 1e-7,
    "linearity": 1e-9,
    "conformal_class": 1e-6,
    "path_residual": 1e-6,
    "min_singular_value": 1e-6,
    "flat_gram": 1e-10,
    "theta0_two_path": 1e-8,
    "scale_invariance": 1e-10,
    "kernel_pairing": 1e-12,
    "kernel_theta0_margin": 1e-3,
    "spray_tangent": 1e-8,
    "spray_control_margin": 1e-3,
    "hamiltonian_exact": 1e-12,
    "hamiltonian_finest": 1e-6,
    "hamiltonian_order": 1.9,
    "liouville": 1e-8,
    "split_locate": 1e-3,
    "gap_guard": 1e-9,
}

_SCENARIO_FIELDS = {
    "kind", "name", "metric", "chart", "integrator", "tolerances",
    "seed", "rays", "t_span", "rescale_sigma", "trials",
}


@dataclass
class Scenario:
    """Validated scenario-file contents."""

    kind: str
    name: str
    metric_kind: str
    metric_params: dict
    chart: dict | None
    n_steps: int | None
    ds: float
    h_fd: float
    tolerances: dict
    seed: int
    rays: object  # int count | list of int seeds | list of coordinate rows
    t_span: tuple
    rescale_sigma: str
    trials: int
    raw: dict = dc_field(repr=False, default_factory=dict)


# ---------------------------------------------------------------------------
# scenario parsing
# ---------------------------------------------------------------------------


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _expect(cond: bool, message: str, field: str):
    if not cond:
        raise ParseError(message, field=field)


def parse_scenario_text(text: str, name: str = "<inline>") -> Scenario:
    """Parse and validate scenario JSON given as a string."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno) from e
    _expect(isinstance(raw, dict), "scenario must be a JSON object", field="<root>")

    for key in raw:
        _expect(key in _SCENARIO_FIELDS, f"unknown scenario field {key!r}", field=key)

    kind = raw.get("kind")
    _expect(isinstance(kind, str) and kind in SCENARIO_KINDS,
            f"kind must be one of {sorted(SCENARIO_KINDS)}", field="kind")

    sc_name = raw.get("name", name)
    _expect(isinstance(sc_name, str) and sc_name, "name must be a nonempty string", field="name")

    metric = raw.get("metric")
    _expect(isinstance(metric, dict), "metric must be an object with a 'kind'", field="metric")
    metric_kind = metric.get("kind")
    _expect(isinstance(metric_kind, str) and metric_kind,
            "metric.kind must be a nonempty string", field="metric.kind")
    metric_params = metric.get("params", {})
    _expect(isinstance(metric_params, dict), "metric.params must be an object", field="metric.params")
    for key in metric:
        _expect(key in {"kind", "params"}, f"unknown metric field {key!r}", field=f"metric.{key}")

    chart = raw.get("chart")
    if chart is not None:
        _expect(isinstance(chart, dict), "chart must be an object", field="chart")
        for key in chart:
            _expect(key in {"v_lo", "v_hi", "c0"}, f"unknown chart field {key!r}", field=f"chart.{key}")
        for key in ("v_lo", "v_hi"):
            val = chart.get(key)
            _expect(isinstance(val, list) and val and all(_is_number(x) for x in val),
                    f"chart.{key} must be a list of numbers", field=f"chart.{key}")
        _expect(_is_number(chart.get("c0")), "chart.c0 must be a number", field="chart.c0")
        _expect(len(chart["v_lo"]) == len(chart["v_hi"]),
                "chart.v_lo and chart.v_hi must have the same length", field="chart.v_hi")

    integrator = raw.get("integrator", {})
    _expect(isinstance(integrator, dict), "integrator must be an object", field="integrator")
    for key in integrator:
        _expect(key in {"n_steps", "ds", "h_fd"},
                f"unknown integrator field {key!r}", field=f"integrator.{key}")
    n_steps = integrator.get("n_steps")
    if n_steps is not None:
        _expect(_is_int(n_steps) and n_steps >= 16,
                "integrator.n_steps must be an integer >= 16", field="integrator.n_steps")
    ds = integrator.get("ds", 1e-4)
    _expect(_is_number(ds) and 0.0 < ds <= 0.1,
            "integrator.ds must be a number in (0, 0.1]", field="integrator.ds")
    h_fd = integrator.get("h_fd", 1e-5)
    _expect(_is_number(h_fd) and 0.0 < h_fd <= 0.1,
            "integrator.h_fd must be a number in (0, 0.1]", field="integrator.h_fd")

    tolerances = dict(DEFAULT_TOLERANCES)
    overrides = raw.get("tolerances", {})
    _expect(isinstance(overrides, dict), "tolerances must be an object", field="tolerances")
    for key, val in overrides.items():
        _expect(key in DEFAULT_TOLERANCES,
                f"unknown tolerance {key!r} (known: {sorted(DEFAULT_TOLERANCES)})",
                field=f"tolerances.{key}")
        _expect(_is_number(val) and np.isfinite(val) and val > 0.0,
                f"tolerance {key!r} must be a positive finite number",
                field=f"tolerances.{key}")
        tolerances[key] = float(val)

    seed = raw.get("seed", 0)
    _expect(_is_int(seed) and seed >= 0, "seed must be a nonnegative integer", field="seed")

    rays = raw.get("rays", 6)
    if _is_int(rays):
        _expect(rays >= 1, "rays count must be >= 1", field="rays")
    else:
        _expect(isinstance(rays, list) and rays,
                "rays must be a count, a list of seeds, or a list of coordinate rows",
                field="rays")
        if all(_is_int(x) for x in rays):
            pass  # explicit per-ray seeds
        elif all(isinstance(row, list) and row and all(_is_number(x) for x in row)
                 for row in rays):
            lengths = {len(row) for row in rays}
            _expect(len(lengths) == 1, "coordinate rows must all have the same length",
                    field="rays")
        else:
            raise ParseError("rays must be a count, a list of integer seeds, "
                             "or a list of numeric coordinate rows", field="rays")

    t_span = raw.get("t_span", [0.0, 1.0])
    _expect(isinstance(t_span, list) and len(t_span) == 2 and all(_is_number(x) for x in t_span),
            "t_span must be a list of two numbers", field="t_span")
    _expect(float(t_span[0]) != float(t_span[1]), "t_span must have nonzero length", field="t_span")

    rescale_sigma = raw.get("rescale_sigma", "0.25*sin(x0)")
    _expect(isinstance(rescale_sigma, str) and rescale_sigma,
            "rescale_sigma must be a nonempty expression string", field="rescale_sigma")

    trials = raw.get("trials", 12)
    _expect(_is_int(trials) and trials >= 1, "trials must be a positive integer", field="trials")

    return Scenario(
        kind=kind, name=sc_name, metric_kind=metric_kind, metric_params=metric_params,
        chart=chart, n_steps=n_steps, ds=float(ds), h_fd=float(h_fd),
        tolerances=tolerances, seed=seed, rays=rays,
        t_span=(float(t_span[0]), float(t_span[1])),
        rescale_sigma=rescale_sigma, trials=trials, raw=raw,
    )


def parse_scenario(path) -> Scenario:
    """Parse and validate a scenario file."""
    path = Path(path)
    return parse_scenario_text(path.read_text(encoding="utf-8"), name=path.stem)


# ---------------------------------------------------------------------------
# shared runner helpers
# ---------------------------------------------------------------------------


def _build_model(sc: Scenario) -> st.SpacetimeModel:
    return st.get_model(sc.metric_kind, sc.metric_params)


def _chart_from_scenario(model: st.SpacetimeModel, sc: Scenario) -> lr.CauchyChart:
    if sc.chart is None:
        span = model.box_hi - model.box_lo
        v_lo = model.box_lo + 0.25 * span
        v_hi = model.box_hi - 0.25 * span
        return lr.build_chart(model, v_lo, v_hi, 0.0)
    v_lo, v_hi = sc.chart["v_lo"], sc.chart["v_hi"]
    if len(v_lo) != model.dim:
        raise ParseError(f"chart box has length {len(v_lo)}, model dimension is {model.dim}",
                         field="chart.v_lo")
    return lr.build_chart(model, v_lo, v_hi, float(sc.chart["c0"]))


def _ray_from_stream(chart: lr.CauchyChart, rng: np.random.Generator) -> lr.LightRay:
    lo, hi = chart.spatial_box()
    mid, span = 0.5 * (lo + hi), hi - lo
    q = mid + rng.uniform(-0.25, 0.25, size=len(lo)) * span
    u = rng.standard_normal(chart.dim - 1)
    u = u / np.linalg.norm(u)
    coords = lr.RayCoords(np.concatenate([q, lr.unit_to_angles(u)]), chart.dim)
    return lr.coords_to_ray(chart, coords)


def _scenario_rays(chart: lr.CauchyChart, sc: Scenario, label: str) -> list:
    """Chart points from the scenario's rays value (count | seeds | rows)."""
    if isinstance(sc.rays, list) and sc.rays and isinstance(sc.rays[0], list):
        return lr.ray_set_from_rows(chart, np.asarray(sc.rays, dtype=float))
    if isinstance(sc.rays, list):
        return [_ray_from_stream(chart, stream(int(s), f"{label}.explicit_ray"))
                for s in sc.rays]
    return [_ray_from_stream(chart, stream(sc.seed, f"{label}.ray{i:03d}"))
            for i in range(sc.rays)]


def _n_fixtures(sc: Scenario) -> int:
    return len(sc.rays) if isinstance(sc.rays, list) else int(sc.rays)


def _fixture_stream(sc: Scenario, label: str, i: int) -> np.random.Generator:
    if isinstance(sc.rays, list) and sc.rays and not isinstance(sc.rays[0], list):
        return stream(int(sc.rays[i]), f"{label}.explicit")
    return stream(sc.seed, f"{label}.fixture{i:03d}")


def _is_const_exponent(model: st.SpacetimeModel) -> bool:
    from .expressions import Const

    return isinstance(model.metric.sigma, Const)


def _sample_state(model: st.SpacetimeModel, rng: np.random.Generator):
    radius = 0.6 if model.name == "minkowski_ball3" else 1.5
    x = ck.sample_point(model, rng, radius=radius)
    v = ge.make_null(model, x, ck.sample_direction(rng, model.dim - 1)).comps
    return x, v


def _rays_header(m: int) -> list:
    return ["ray_id", "t"] + [f"x{j}" for j in range(m)] + [f"v{j}" for j in range(m)]


def _jacobi_header(m: int) -> list:
    return (["ray_id", "init_id", "t"] + [f"J{j}" for j in range(m)]
            + [f"Jdot{j}" for j in range(m)] + ["pairing"])


def _trajectory_csv_rows(ray_id: int, geo: ge.NullGeodesic) -> list:
    return [[int(ray_id)] + [float(c) for c in row] for row in ge.trajectory_rows(geo)]


# ---------------------------------------------------------------------------
# suite runners: each returns (records, rays_table, jacobi_table, extra)
# where the tables are (header, rows) pairs
# ---------------------------------------------------------------------------


def _run_geodesic_demo(sc: Scenario, model: st.SpacetimeModel):
    tol = sc.tolerances
    chart = _chart_from_scenario(model, sc)
    rays = _scenario_rays(chart, sc, "geodesic_demo")
    m = model.dim

    records = []
    ray_rows = []
    worst_drift = 0.0
    worst_flat = 0.0
    worst_chart = 0.0
    terminations = []
    flat = _is_const_exponent(model)

    for i, ray in enumerate(rays):
        geo = lr.chart_to_ray(ray, sc.t_span, n_steps=sc.n_steps)
        terminations.append(geo.termination)
        worst_drift = max(worst_drift, geo.null_drift())
        if flat:
            straight = geo.xs[0][None, :] + (geo.ts - geo.ts[0])[:, None] * geo.vs[0][None, :]
            worst_flat = max(worst_flat,
                             float(np.max(np.abs(geo.xs - straight))),
                             float(np.max(np.abs(geo.vs - geo.vs[0][None, :]))))
        ray_back = lr.ray_to_chart(chart, geo)
        worst_chart = max(worst_chart,
                          float(np.max(np.abs(ray_back.q - ray.q))),
                          float(np.max(np.abs(ray_back.v - ray.v))))
        ray_rows.extend(_trajectory_csv_rows(i, geo))

    records.append(CheckRecord.from_residual(
        "scenario.null_drift", worst_drift, tol["null_drift"], rays=len(rays)))
    if flat:
        records.append(CheckRecord.from_residual(
            "scenario.flat_exactness", worst_flat, tol["flat_exactness"]))
    records.append(CheckRecord.from_residual(
        "scenario.chart_roundtrip", worst_chart, tol["chart_roundtrip"]))

    rows = lr.ray_set_rows(rays)
    rays_back = lr.ray_set_from_rows(chart, rows)
    rows_back = lr.ray_set_rows(rays_back)
    records.append(CheckRecord.from_residual(
        "scenario.ray_set_roundtrip", float(np.max(np.abs(rows - rows_back))),
        tol["ray_set_roundtrip"]))

    extra = {
        "chart": {"v_lo": chart.v_lo.tolist(), "v_hi": chart.v_hi.tolist(), "c0": chart.c0},
        "ray_set": rows.tolist(),
        "terminations": terminations,
    }
    return records, (_rays_header(m), ray_rows), (_jacobi_header(m), []), extra


def _run_jacobi_suite(sc: Scenario, model: st.SpacetimeModel):
    tol = sc.tolerances
    chart = _chart_from_scenario(model, sc)
    rays = _scenario_rays(chart, sc, "jacobi_suite")
    m = model.dim
    T_probe = 0.8  # size of the planted non-member component along T

    records = []
    ray_rows = []
    jac_rows = []
    worst_fit = 0.0
    worst_lin = 0.0
    n_member_fail = 0
    n_detect_fail = 0
    n_incomplete = 0

    for i, ray in enumerate(rays):
        geo = lr.chart_to_ray(ray, sc.t_span, n_steps=sc.n_steps)
        if geo.termination != "interval_end" or geo.n_nodes < 9:
            n_incomplete += 1
            continue
        ray_rows.extend(_trajectory_csv_rows(i, geo))
        rng = stream(sc.seed, f"jacobi_suite.fields{i:03d}")
        x0, v0 = geo.xs[0], geo.vs[0]
        g0 = st.metric_at(model, x0)
        T = model.T(x0)

        inits = []
        for _ in range(3):
            J0 = rng.uniform(-1.0, 1.0, size=m)
            J0dot = rng.uniform(-1.0, 1.0, size=m)
            # remove the pairing slope so the field is a light-ray variation
            b = float(J0dot @ g0 @ v0)
            J0dot = J0dot - (b / float(T @ g0 @ v0)) * T
            inits.append(ja.JacobiInit(J0, J0dot))

        fields = [ja.integrate_jacobi(geo, init) for init in inits]
        for k, fld in enumerate(fields):
            _, slope, residual = ja.affine_pairing_fit(fld)
            worst_fit = max(worst_fit, residual)
            if not ja.is_lightray_jacobi(fld):
                n_member_fail += 1
            for row in ja.jacobi_rows(fld):
                jac_rows.append([i, k] + [float(c) for c in row])

        # planted non-member: add a T component to the derivative, which
        # makes the pairing slope b = g(T, v) != 0
        bad = ja.JacobiInit(inits[0].J0, inits[0].J0dot + T_probe * T)
        if ja.is_lightray_jacobi(ja.integrate_jacobi(geo, bad)):
            n_detect_fail += 1

        a, b = 0.7, -1.3
        mix = ja.JacobiInit(a * inits[0].J0 + b * inits[1].J0,
                            a * inits[0].J0dot + b * inits[1].J0dot)
        fld_mix = ja.integrate_jacobi(geo, mix)
        worst_lin = max(
            worst_lin,
            float(np.max(np.abs(fld_mix.Js - (a * fields[0].Js + b * fields[1].Js)))),
            float(np.max(np.abs(fld_mix.Kdots - (a * fields[0].Kdots + b * fields[1].Kdots)))),
        )

    records.append(CheckRecord.from_residual(
        "scenario.trajectory_complete", float(n_incomplete), 0.0, rays=len(rays)))
    records.append(CheckRecord.from_residual(
        "scenario.pairing_affine_fit", worst_fit, tol["pairing_fit"]))
    records.append(CheckRecord.from_residual(
        "scenario.lightray_membership", float(n_member_fail + n_detect_fail), 0.0,
        member_failures=n_member_fail, detection_failures=n_detect_fail,
        planted_T_component=T_probe))
    records.append(CheckRecord.from_residual(
        "scenario.linearity", worst_lin, tol["linearity"]))

    extra = {"ray_set": lr.ray_set_rows(rays).tolist(), "fields_per_ray": 3}
    return records, (_rays_header(m), ray_rows), (_jacobi_header(m), jac_rows), extra


def _run_conformal_invariance(sc: Scenario, model: st.SpacetimeModel):
    tol = sc.tolerances
    m = model.dim
    model_resc = st.conformal_rescale(model, sc.rescale_sigma)
    n = _n_fixtures(sc)

    records = []
    worst_class = 0.0
    distances = []
    for i in range(n):
        rng = _fixture_stream(sc, "conformal_invariance", i)
        x0 = ck.sample_point(model, rng, radius=0.6 if model.predicate else 1.5)
        dq = rng.uniform(-0.3, 0.3, size=m)
        dd = rng.uniform(-0.5, 0.5, size=m - 1)
        base_dir = ck.sample_direction(rng, m - 1)
        family = ja.RayFamily(q=lambda s, x0=x0, dq=dq: x0 + s * dq,
                              direction=lambda s, d0=base_dir, dd=dd: d0 + s * dd)
        cls_base = ja.class_from_ray_family(model, family, ds=sc.ds)
        cls_resc = ja.class_from_ray_family(model_resc, family, ds=sc.ds,
                                            connection_model=model)
        dist = ja.class_distance(cls_base, cls_resc)
        distances.append(dist)
        worst_class = max(worst_class, dist)
    records.append(CheckRecord.from_residual(
        "scenario.conformal_class_invariance", worst_class, tol["conformal_class"],
        fixtures=n, rescale_sigma=sc.rescale_sigma))

    # Path-level statement: a null geodesic of the rescaled metric is a
    # pregeodesic of the base metric; reparametrizing it recovers a base
    # geodesic that matches direct integration.
    rng = stream(sc.seed, "conformal_invariance.path")
    x0, v0 = _sample_state(model_resc, rng)
    # dense grid: the double-difference residual estimator has an O(h^2)
    # floor, so the step must sit well under the path tolerance
    geo_r = ge.integrate_geodesic(model_resc, x0, v0, (0.0, 1.0), n_steps=4800)
    dvs = np.gradient(geo_r.vs, geo_r.ts, axis=0, edge_order=2)
    gam = st.christoffel_batch(model, geo_r.xs)
    acc = dvs + np.einsum("nkij,ni,nj->nk", gam, geo_r.vs, geo_r.vs)
    v2 = np.einsum("ni,ni->n", geo_r.vs, geo_r.vs)
    f_samples = np.einsum("nk,nk->n", acc, geo_r.vs) / v2
    pre = ge.Pregeodesic(geo_r.ts, geo_r.xs, geo_r.vs, f_samples)
    tau, geo_fixed = ge.reparametrize_to_geodesic(model, pre)
    path_residual = ge.geodesic_residual(model, geo_fixed.ts, geo_fixed.xs)

    direct = ge.integrate_geodesic(model, geo_fixed.xs[0], geo_fixed.vs[0],
                                   (float(geo_fixed.ts[0]), float(geo_fixed.ts[-1])),
                                   n_steps=geo_fixed.n_nodes - 1)
    node_err = float(np.max(np.abs(direct.xs - geo_fixed.xs)))
    records.append(CheckRecord.from_residual(
        "scenario.pregeodesic_path_residual", max(path_residual, node_err),
        tol["path_residual"], equation_residual=path_residual, node_mismatch=node_err))

    ray_rows = _trajectory_csv_rows(0, geo_r) + _trajectory_csv_rows(1, geo_fixed)
    extra = {
        "class_distances": distances,
        "rescaled_model": model_resc.name,
        "csv_ray_ids": {"0": "rescaled-metric geodesic", "1": "reparametrized base-metric geodesic"},
    }
    return records, (_rays_header(m), ray_rows), (_jacobi_header(m), []), extra


def _run_contact_suite(sc: Scenario, model: st.SpacetimeModel):
    tol = sc.tolerances
    if model.dim < 3:
        raise WrongMetric("contact_suite needs dimension >= 3 "
                          "(the contact hyperplane is empty for m = 2)")
    chart = _chart_from_scenario(model, sc)
    rays = _scenario_rays(chart, sc, "contact_suite")
    m = model.dim

    records = []
    ray_rows = []
    min_sv_all = np.inf
    worst_two_path = 0.0
    worst_scale = 0.0
    worst_kernel_pairing = 0.0
    min_kernel_theta0 = np.inf
    rank_mismatches = 0
    worst_gram_flat = 0.0

    for i, ray in enumerate(rays):
        ray_rows.append([i, 0.0] + [float(c) for c in ray.event] + [float(c) for c in ray.v])
        frame = ct.contact_frame(ray)
        _, min_sv, _ = ct.nondegeneracy_report(frame)
        min_sv_all = min(min_sv_all, min_sv)

        if model.name == "minkowski3":
            target = np.array([[0.0, 1.0], [-1.0, 0.0]])
            worst_gram_flat = max(worst_gram_flat, float(np.max(np.abs(frame.gram - target))))

        g = st.metric_at(model, ray.event)
        w = frame.classes[0].w0 if frame.classes else None
        probes = list(frame.classes)
        if w is not None:
            probes.append(ja.JacobiClass(model, ray.event, ray.v, w, w.copy()))
        for cls in probes:
            worst_two_path = max(worst_two_path,
                                 abs(ct.theta0(ray, cls) - ct.theta0_via_tm(ray, cls)))

        for lam in (0.5, 3.0):
            worst_scale = max(worst_scale, ct.scale_invariance_check(ray, lam))

        rep = ct.kernel_separation_report(ray)
        expected = {
            "euclidean_rank": 2 * m - 4,
            "euclidean_rank_extended": 2 * m - 3,
            "gram_rank": 2 * m - 4,
            "gram_rank_extended": 2 * m - 4,
        }
        for key, want in expected.items():
            if rep[key] != want:
                rank_mismatches += 1
        worst_kernel_pairing = max(worst_kernel_pairing, rep["kernel_pairing_residual"])
        min_kernel_theta0 = min(min_kernel_theta0, abs(rep["theta0_of_kernel_class"]))

    records.append(CheckRecord.from_residual(
        "scenario.nondegeneracy_margin", tol["min_singular_value"] - min_sv_all, 0.0,
        min_singular_value=min_sv_all, rays=len(rays)))
    if model.name == "minkowski3":
        records.append(CheckRecord.from_residual(
            "scenario.flat_gram_exact", worst_gram_flat, tol["flat_gram"]))
    records.append(CheckRecord.from_residual(
        "scenario.theta0_two_path", worst_two_path, tol["theta0_two_path"]))
    records.append(CheckRecord.from_residual(
        "scenario.scale_invariance", worst_scale, tol["scale_invariance"]))
    records.append(CheckRecord.from_residual(
        "scenario.kernel_ranks", float(rank_mismatches), 0.0))
    records.append(CheckRecord.from_residual(
        "scenario.kernel_pairing", worst_kernel_pairing, tol["kernel_pairing"]))
    records.append(CheckRecord.from_residual(
        "scenario.kernel_theta0_margin",
        tol["kernel_theta0_margin"] - min_kernel_theta0, 0.0,
        min_theta0=min_kernel_theta0))

    extra = {"ray_set": lr.ray_set_rows(rays).tolist(),
             "csv_note": "rays.csv holds the crossing state (t=0) of each chart point"}
    return records, (_rays_header(m), ray_rows), (_jacobi_header(m), []), extra


def _run_reduction_suite(sc: Scenario, model: st.SpacetimeModel):
    tol = sc.tolerances
    m = model.dim
    n = _n_fixtures(sc)
    flat = _is_const_exponent(model)

    records = []
    ray_rows = []
    worst_spray = 0.0
    min_control = np.inf
    worst_ham_exact = 0.0
    worst_ham_finest = 0.0
    worst_liouville = 0.0
    states = []

    for i in range(n):
        rng = _fixture_stream(sc, "reduction_suite", i)
        x, v = _sample_state(model, rng)
        states.append((x, v))
        ray_rows.append([i, 0.0] + [float(c) for c in x] + [float(c) for c in v])

        rep = ct.spray_kernel_check(model, x, v, trials=sc.trials, rng=rng)
        worst_spray = max(worst_spray, rep["max_tangent_residual"])
        min_control = min(min_control, rep["min_control_residual"])

        ham = ct.hamiltonian_intertwine_check(model, x, v, delta=1e-3, h_fd=sc.h_fd)
        val = max(ham["r_scaling"], ham["r_spray"])
        if flat:
            worst_ham_exact = max(worst_ham_exact, val)
        else:
            worst_ham_finest = max(worst_ham_finest, val)

        for s in (0.1, 0.5):
            worst_liouville = max(worst_liouville, ct.liouville_check(model, x, v, s, rng))

    records.append(CheckRecord.from_residual(
        "scenario.spray_tangent", worst_spray, tol["spray_tangent"], trials=sc.trials))
    records.append(CheckRecord.from_residual(
        "scenario.spray_control_margin", tol["spray_control_margin"] - min_control, 0.0,
        min_control_residual=min_control))
    if flat:
        records.append(CheckRecord.from_residual(
            "scenario.hamiltonian_exact", worst_ham_exact, tol["hamiltonian_exact"]))
    else:
        records.append(CheckRecord.from_residual(
            "scenario.hamiltonian_residual", worst_ham_finest, tol["hamiltonian_finest"]))
        # order of the finite-difference pushforward residual in the probe step
        x, v = states[0]
        deltas = [4e-3, 2e-3, 1e-3]
        errs = [max(ct.hamiltonian_intertwine_check(model, x, v, delta=d, h_fd=sc.h_fd)["r_spray"],
                    1e-300)
                for d in deltas]
        order = ck.fit_order(deltas, errs)
        records.append(CheckRecord.from_residual(
            "scenario.hamiltonian_order", tol["hamiltonian_order"] - order, 0.0,
            order=order, deltas=deltas, residuals=errs))
    records.append(CheckRecord.from_residual(
        "scenario.liouville", worst_liouville, tol["liouville"]))

    extra = {"states": [[x.tolist(), v.tolist()] for x, v in states],
             "csv_note": "rays.csv holds the sampled cone states (t=0)"}
    return records, (_rays_header(m), ray_rows), (_jacobi_header(m), []), extra


def _run_nonhausdorff_demo(sc: Scenario, model: st.SpacetimeModel):
    """Sequence of parallel trajectories whose limit splits in two.

    The trajectories lambda_n run diagonally through the punctured 2-d
    model, offset by tau_n = 2^-n from the diagonal through the removed
    event.  Every lambda_n crosses the whole window, but the diagonal
    itself breaks at the removed event into two maximal pieces; chart
    coordinates on slices below and above the break converge to the two
    distinct pieces with gaps bounded by tau_n, and neither piece meets
    the other slice — two distinct limits of one sequence.
    """
    tol = sc.tolerances
    if model.name != "punctured_minkowski2":
        raise WrongMetric(
            "nonhausdorff_demo requires metric kind 'punctured_minkowski2' "
            f"(got {model.name!r})")

    n_terms = 12
    taus = [2.0 ** -k for k in range(1, n_terms + 1)]
    n_steps = sc.n_steps if sc.n_steps is not None else 3200
    chart_lo = lr.build_chart(model, [-3.9, -3.9], [3.9, 3.9], 0.0)
    chart_hi = lr.build_chart(model, [-3.9, -3.9], [3.9, 3.9], 2.0)
    v = ge.make_null(model, np.array([-1.0, -1.0]), np.array([1.0])).comps

    records = []
    ray_rows = []
    coords_lo = []
    coords_hi = []
    n_not_single = 0
    for k, tau in enumerate(taus, start=1):
        start = np.array([-1.0, tau - 1.0])
        geo = ge.integrate_geodesic(model, start, v, (0.0, 4.0), n_steps=n_steps)
        if geo.termination != "interval_end":
            n_not_single += 1
        coords_lo.append(float(lr.ray_to_chart(chart_lo, geo).q[0]))
        coords_hi.append(float(lr.ray_to_chart(chart_hi, geo).q[0]))
        ray_rows.extend(_trajectory_csv_rows(k, geo))

    fwd = ge.integrate_geodesic(model, np.array([-1.0, -1.0]), v, (0.0, 4.0), n_steps=n_steps)
    bwd = ge.integrate_geodesic(model, np.array([3.0, 3.0]), v, (0.0, -4.0), n_steps=n_steps)
    ray_rows.extend(_trajectory_csv_rows(100, fwd))
    ray_rows.extend(_trajectory_csv_rows(101, bwd))

    records.append(CheckRecord.from_residual(
        "scenario.sequence_single_segment", float(n_not_single), 0.0,
        terms=n_terms, smallest_offset=taus[-1]))

    n_segments = int(fwd.termination == "exclusion_hit") + int(bwd.termination == "exclusion_hit")
    records.append(CheckRecord.from_residual(
        "scenario.limit_two_segments", float(2 - n_segments), 0.0,
        forward_termination=fwd.termination, backward_termination=bwd.termination))

    s_fwd_max = float(fwd.xs[-1, 0])
    s_bwd_min = float(bwd.xs[-1, 0])
    records.append(CheckRecord.from_residual(
        "scenario.limit_split_location",
        max(abs(s_fwd_max - 1.0), abs(s_bwd_min - 1.0)), tol["split_locate"],
        forward_range=[-1.0, s_fwd_max], backward_range=[s_bwd_min, 3.0]))
    records.append(CheckRecord.from_residual(
        "scenario.limit_segments_disjoint", s_fwd_max - s_bwd_min, 0.0))

    q_lo_limit = float(lr.ray_to_chart(chart_lo, fwd).q[0])
    q_hi_limit = float(lr.ray_to_chart(chart_hi, bwd).q[0])
    gaps_lo = [abs(q - q_lo_limit) for q in coords_lo]
    gaps_hi = [abs(q - q_hi_limit) for q in coords_hi]
    worst_excess = max(max(gl - tau, gh - tau)
                       for gl, gh, tau in zip(gaps_lo, gaps_hi, taus))
    records.append(CheckRecord.from_residual(
        "scenario.gap_bound", worst_excess, tol["gap_guard"],
        gaps_slice_lo=gaps_lo, gaps_slice_hi=gaps_hi))

    joint_crossings = 0
    for chart, geo in ((chart_hi, fwd), (chart_lo, bwd)):
        try:
            lr.ray_to_chart(chart, geo)
            joint_crossings += 1
        except NoCrossing:
            pass
    records.append(CheckRecord.from_residual(
        "scenario.no_joint_limit", float(joint_crossings), 0.0))

    extra = {
        "tau": taus,
        "coords_slice_lo": coords_lo,
        "coords_slice_hi": coords_hi,
        "limit_coords": {"slice_lo_forward": q_lo_limit, "slice_hi_backward": q_hi_limit},
        "segment_ranges": {"forward": [-1.0, s_fwd_max], "backward": [s_bwd_min, 3.0]},
        "csv_ray_ids": {"1..12": "offset trajectories", "100": "forward limit piece",
                        "101": "backward limit piece"},
        "slices": {"lo": 0.0, "hi": 2.0},
    }
    return records, (_rays_header(2), ray_rows), (_jacobi_header(2), []), extra


_RUNNERS = {
    "geodesic_demo": _run_geodesic_demo,
    "jacobi_suite": _run_jacobi_suite,
    "conformal_invariance": _run_conformal_invariance,
    "contact_suite": _run_contact_suite,
    "reduction_suite": _run_reduction_suite,
    "nonhausdorff_demo": _run_nonhausdorff_demo,
}


# ---------------------------------------------------------------------------
# report / artifact writing
# ---------------------------------------------------------------------------


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    return str(value)


def _record_dict(rec: CheckRecord) -> dict:
    return {
        "check_id": rec.check_id,
        "inputs_digest": rec.inputs_digest,
        "residual": float(rec.residual),
        "tolerance": float(rec.tolerance),
        "passed": bool(rec.passed),
        "details": _jsonable(rec.details),
    }


def _csv_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(c) for c in row])


def _residual_rows(records) -> list:
    return [[r.check_id, r.inputs_digest, float(r.residual), float(r.tolerance), bool(r.passed)]
            for r in records]


ARTIFACT_NAMES = {
    "report": "report.json",
    "rays": "rays.csv",
    "jacobi": "jacobi.csv",
    "residuals": "residuals.csv",
}


def _write_artifacts(out_dir: Path, report: dict, rays_table, jacobi_table, records) -> dict:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / ARTIFACT_NAMES["rays"], rays_table[0], rays_table[1])
    _write_csv(out_dir / ARTIFACT_NAMES["jacobi"], jacobi_table[0], jacobi_table[1])
    _write_csv(out_dir / ARTIFACT_NAMES["residuals"],
               ["check_id", "inputs_digest", "residual", "tolerance", "passed"],
               _residual_rows(records))
    with open(out_dir / ARTIFACT_NAMES["report"], "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return report


def _assemble_report(kind: str, name: str, scenario_echo: dict, seed: int,
                     model_name: str, records, wall_time: float, extra: dict) -> dict:
    checks = [_record_dict(r) for r in records]
    return _jsonable({
        "schema_version": SCHEMA_VERSION,
        "kind": kind,
        "name": name,
        "scenario": scenario_echo,
        "seed": seed,
        "model": model_name,
        "checks": checks,
        "n_checks": len(checks),
        "n_passed": sum(1 for c in checks if c["passed"]),
        "passed": all(c["passed"] for c in checks),
        "wall_time_s": wall_time,
        "artifacts": dict(ARTIFACT_NAMES),
        "extra": extra,
    })


def run_scenario(path, out_dir=None, seed: int | None = None) -> dict:
    """Run one scenario file and write the artifact set.

    ``seed`` overrides the scenario's own seed.  Returns the report dict
    (also written as ``report.json``).
    """
    path = Path(path)
    sc = parse_scenario(path)
    if seed is not None:
        sc.seed = int(seed)
    model = _build_model(sc)
    if out_dir is None:
        out_dir = Path(f"{path.stem}_out")

    start = time.perf_counter()
    runner = _RUNNERS[sc.kind]
    try:
        records, rays_table, jacobi_table, extra = runner(sc, model)
    except ParseError:
        raise
    except NullraysError as e:
        e.args = (f"scenario {sc.name!r} ({sc.kind}, model {model.name!r}): {e}",)
        raise
    wall = time.perf_counter() - start

    scenario_blob = json.dumps(sc.raw, sort_keys=True)
    for rec in records:
        if not rec.inputs_digest:
            rec.inputs_digest = digest_inputs(
                {"check_id": rec.check_id, "seed": sc.seed, "scenario": scenario_blob})
    records.sort(key=lambda r: r.check_id)

    report = _assemble_report(sc.kind, sc.name, sc.raw, sc.seed, model.name,
                              records, wall, extra)
    return _write_artifacts(Path(out_dir), report, rays_table, jacobi_table, records)


def check_all(out_dir=None, seed: int = 0) -> dict:
    """Run every registered property check and write the artifact set."""
    if out_dir is None:
        out_dir = Path("check_all_out")
    start = time.perf_counter()
    records = ck.run_registered_checks(seed)
    wall = time.perf_counter() - start
    report = _assemble_report(
        "check_all", "check_all", {"kind": "check_all", "seed": seed}, seed,
        "catalog", records, wall,
        {"manifest": list(ck.INVARIANT_MANIFEST), "registered": len(ck.REGISTRY)})
    return _write_artifacts(Path(out_dir), report,
                            (["ray_id", "t"], []), (["ray_id", "init_id", "t"], []),
                            records)


# ---------------------------------------------------------------------------
# determinism probe (registered as a check in checks.py)
# ---------------------------------------------------------------------------


def _canonical_run_bytes(out: Path) -> bytes:
    report = json.loads((out / ARTIFACT_NAMES["report"]).read_text(encoding="utf-8"))
    report["wall_time_s"] = 0.0
    blob = json.dumps(report, sort_keys=True).encode("utf-8")
    for key in ("rays", "jacobi", "residuals"):
        blob += (out / ARTIFACT_NAMES[key]).read_bytes()
    return blob


def determinism_records(seed: int = 0) -> list:
    """Run a small scenario twice; artifacts must agree byte for byte
    (wall time excluded)."""
    scenario = {
        "kind": "geodesic_demo",
        "name": "determinism-probe",
        "metric": {"kind": "conformal_flat", "params": {"m": 3, "sigma": "0.2*sin(x1)"}},
        "seed": seed,
        "rays": 3,
        "t_span": [0.0, 0.5],
        "integrator": {"n_steps": 400},
    }
    with tempfile.TemporaryDirectory() as td:
        td = Path(td)
        sc_path = td / "scenario.json"
        sc_path.write_text(json.dumps(scenario), encoding="utf-8")
        blobs = []
        for tag in ("a", "b"):
            out = td / tag
            run_scenario(sc_path, out_dir=out, seed=seed)
            blobs.append(_canonical_run_bytes(out))
    identical = blobs[0] == blobs[1]
    return [CheckRecord.from_residual(
        "cli.determinism", 0.0 if identical else 1.0, 0.0,
        probe_kind="geodesic_demo", bytes_compared=len(blobs[0]))]


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _print_summary(report: dict, out_dir: Path):
    for rec in report["checks"]:
        if not rec["passed"]:
            print(f"  FAIL {rec['check_id']}: residual={rec['residual']:.6e} "
                  f"> tolerance={rec['tolerance']:.6e}")
    print(f"{report['n_passed']}/{report['n_checks']} checks passed "
          f"[{report['wall_time_s']:.2f} s]")
    print(f"report: {Path(out_dir) / ARTIFACT_NAMES['report']}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="nullrays",
        description="Numerical toolkit for spaces of light rays: run scenario "
                    "suites or the full property-check registry.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario", help="path to a scenario JSON file")
    p_run.add_argument("--out", default=None, help="output directory "
                       "(default: <scenario-stem>_out)")
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario's seed")

    p_all = sub.add_parser("check-all", help="run the full check registry")
    p_all.add_argument("--out", default=None, help="output directory "
                       "(default: check_all_out)")

    sub.add_parser("list-metrics", help="print the metric catalog")

    args = parser.parse_args(argv)

    try:
        ck.assert_coverage()
    except AssertionError as e:
        print(f"coverage error: {e}", file=sys.stderr)
        return 2

    if args.command == "list-metrics":
        print("metric kinds:")
        for kind, desc in st.model_catalog().items():
            print(f"  {kind:24s} {desc}")
        print("scenario kinds:")
        for kind in SCENARIO_KINDS:
            print(f"  {kind}")
        return 0

    try:
        if args.command == "run":
            out_dir = Path(args.out) if args.out else Path(f"{Path(args.scenario).stem}_out")
            report = run_scenario(args.scenario, out_dir=out_dir, seed=args.seed)
        else:
            out_dir = Path(args.out) if args.out else Path("check_all_out")
            report = check_all(out_dir=out_dir)
    except ParseError as e:
        print(f"scenario error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except NullraysError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    _print_summary(report, out_dir)
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
