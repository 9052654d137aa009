"""Tests for scenario parsing, the runner, artifacts, and the entry point."""

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from nullrays import cli
from nullrays.errors import ParseError

REPO_SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def minimal_scenario(**overrides):
    base = {
        "kind": "geodesic_demo",
        "metric": {"kind": "minkowski", "params": {"m": 3}},
        "rays": 3,
        "t_span": [0.0, 0.5],
        "integrator": {"n_steps": 64},
    }
    base.update(overrides)
    return base


def write_scenario(tmp_path, obj, name="scn.json"):
    path = tmp_path / name
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


class TestParsing:
    def test_minimal_defaults(self):
        sc = cli.parse_scenario_text(json.dumps(
            {"kind": "geodesic_demo", "metric": {"kind": "minkowski"}}), name="n")
        assert sc.name == "n"
        assert sc.seed == 0
        assert sc.rays == 6
        assert sc.t_span == (0.0, 1.0)
        assert sc.n_steps is None
        assert sc.ds == 1e-4
        assert sc.tolerances == cli.DEFAULT_TOLERANCES
        assert sc.trials == 12

    def test_file_name_defaults_to_stem(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(), name="my_case.json")
        assert cli.parse_scenario(path).name == "my_case"

    def test_explicit_name_wins(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(name="custom"))
        assert cli.parse_scenario(path).name == "custom"

    def test_invalid_json_reports_line(self):
        with pytest.raises(ParseError) as err:
            cli.parse_scenario_text('{\n  "kind": oops\n}')
        assert err.value.line == 2

    def test_tolerance_override(self):
        sc = cli.parse_scenario_text(json.dumps(
            minimal_scenario(tolerances={"null_drift": 1e-5})))
        assert sc.tolerances["null_drift"] == 1e-5
        assert sc.tolerances["pairing_fit"] == cli.DEFAULT_TOLERANCES["pairing_fit"]

    @pytest.mark.parametrize(
        "mutation, field",
        [
            ({"kind": None}, "kind"),
            ({"kind": "nosuch_demo"}, "kind"),
            ({"name": ""}, "name"),
            ({"metric": None}, "metric"),
            ({"metric": {"kind": ""}}, "metric.kind"),
            ({"metric": {"kind": "minkowski", "params": 3}}, "metric.params"),
            ({"metric": {"kind": "minkowski", "extra": 1}}, "metric.extra"),
            ({"chart": [1, 2]}, "chart"),
            ({"chart": {"v_lo": [0], "v_hi": [1], "c0": 0, "x": 1}}, "chart.x"),
            ({"chart": {"v_lo": "a", "v_hi": [1], "c0": 0}}, "chart.v_lo"),
            ({"chart": {"v_lo": [0], "v_hi": [1, 2], "c0": 0}}, "chart.v_hi"),
            ({"chart": {"v_lo": [0], "v_hi": [1]}}, "chart.c0"),
            ({"integrator": {"n_steps": 8}}, "integrator.n_steps"),
            ({"integrator": {"n_steps": 64.5}}, "integrator.n_steps"),
            ({"integrator": {"ds": 0.0}}, "integrator.ds"),
            ({"integrator": {"h_fd": 2.0}}, "integrator.h_fd"),
            ({"integrator": {"solver": "rk4"}}, "integrator.solver"),
            ({"tolerances": {"nope": 1.0}}, "tolerances.nope"),
            ({"tolerances": {"null_drift": 0.0}}, "tolerances.null_drift"),
            ({"tolerances": {"null_drift": -1.0}}, "tolerances.null_drift"),
            ({"seed": -1}, "seed"),
            ({"seed": True}, "seed"),
            ({"rays": 0}, "rays"),
            ({"rays": []}, "rays"),
            ({"rays": [1, "a"]}, "rays"),
            ({"rays": [[0.1, 0.2], [0.3]]}, "rays"),
            ({"t_span": [0.0]}, "t_span"),
            ({"t_span": [1.0, 1.0]}, "t_span"),
            ({"rescale_sigma": ""}, "rescale_sigma"),
            ({"trials": 0}, "trials"),
            ({"surprise": 1}, "surprise"),
        ],
    )
    def test_field_validation(self, mutation, field):
        obj = minimal_scenario()
        obj.update(mutation)
        for key, val in list(obj.items()):
            if val is None:
                del obj[key]
        with pytest.raises(ParseError) as err:
            cli.parse_scenario_text(json.dumps(obj))
        assert err.value.field == field

    def test_rays_as_seed_list(self):
        sc = cli.parse_scenario_text(json.dumps(minimal_scenario(rays=[5, 9])))
        assert sc.rays == [5, 9]

    def test_rays_as_coordinate_rows(self):
        rows = [[0.1, 0.2, 0.5], [-0.3, 0.0, 1.0]]
        sc = cli.parse_scenario_text(json.dumps(minimal_scenario(rays=rows)))
        assert sc.rays == rows

    def test_repo_scenarios_parse(self):
        files = sorted(REPO_SCENARIOS.glob("*.json"))
        assert len(files) == 6
        kinds = {cli.parse_scenario(f).kind for f in files}
        assert kinds == set(cli.SCENARIO_KINDS)


class TestRunScenario:
    def test_artifacts_and_report(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(seed=4))
        out = tmp_path / "out"
        report = cli.run_scenario(path, out_dir=out)

        for fname in ("report.json", "rays.csv", "jacobi.csv", "residuals.csv"):
            assert (out / fname).exists()
        on_disk = json.loads((out / "report.json").read_text())
        assert on_disk == json.loads(json.dumps(report))

        assert report["schema_version"] == cli.SCHEMA_VERSION
        assert report["kind"] == "geodesic_demo"
        assert report["seed"] == 4
        assert report["model"] == "minkowski3"
        assert report["passed"] is True
        assert report["n_checks"] == len(report["checks"]) >= 4
        assert report["n_passed"] == report["n_checks"]
        ids = [c["check_id"] for c in report["checks"]]
        assert ids == sorted(ids)
        assert report["artifacts"]["report"] == "report.json"
        assert report["scenario"] == minimal_scenario(seed=4)

    def test_csv_contents(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario())
        out = tmp_path / "out"
        report = cli.run_scenario(path, out_dir=out)

        with open(out / "rays.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["ray_id", "t", "x0", "x1", "x2", "v0", "v1", "v2"]
        assert len(rows) > 3 * 64  # 3 rays, 64 steps each, plus headers/nodes
        ray_ids = {r[0] for r in rows[1:]}
        assert ray_ids == {"0", "1", "2"}

        with open(out / "residuals.csv", newline="") as fh:
            res_rows = list(csv.reader(fh))
        assert res_rows[0] == ["check_id", "inputs_digest", "residual",
                               "tolerance", "passed"]
        assert len(res_rows) - 1 == report["n_checks"]
        assert all(r[4] == "true" for r in res_rows[1:])
        # floats are written with repr and round-trip exactly
        for row, rec in zip(res_rows[1:], report["checks"]):
            assert row[0] == rec["check_id"]
            assert float(row[2]) == rec["residual"]

    def test_seed_override(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(seed=4))
        r1 = cli.run_scenario(path, out_dir=tmp_path / "a", seed=11)
        assert r1["seed"] == 11

    def test_determinism_across_out_dirs(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(
            metric={"kind": "conformal_flat",
                    "params": {"m": 3, "sigma": "0.2*sin(x1)"}}))
        cli.run_scenario(path, out_dir=tmp_path / "a")
        cli.run_scenario(path, out_dir=tmp_path / "b")
        assert (cli._canonical_run_bytes(tmp_path / "a")
                == cli._canonical_run_bytes(tmp_path / "b"))

    def test_explicit_coordinate_rows_are_used(self, tmp_path):
        rows = [[0.25, -0.5, 0.8], [-1.0, 0.3, 2.2]]
        path = write_scenario(tmp_path, minimal_scenario(rays=rows))
        report = cli.run_scenario(path, out_dir=tmp_path / "out")
        echoed = np.asarray(report["extra"]["ray_set"], dtype=float)
        assert np.allclose(echoed, np.asarray(rows), atol=1e-9)

    def test_rays_seed_list_count(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(rays=[3, 17, 29]))
        report = cli.run_scenario(path, out_dir=tmp_path / "out")
        assert len(report["extra"]["ray_set"]) == 3

    def test_error_carries_scenario_context(self, tmp_path):
        bad = minimal_scenario(kind="nonhausdorff_demo", name="badcase")
        path = write_scenario(tmp_path, bad)
        with pytest.raises(Exception) as err:
            cli.run_scenario(path, out_dir=tmp_path / "out")
        msg = str(err.value)
        assert "badcase" in msg and "nonhausdorff_demo" in msg

    def test_failing_tolerance_flips_exit_status(self, tmp_path):
        obj = minimal_scenario(
            metric={"kind": "conformal_flat",
                    "params": {"m": 3, "sigma": "0.2*sin(x1)"}},
            tolerances={"null_drift": 1e-300})
        path = write_scenario(tmp_path, obj)
        report = cli.run_scenario(path, out_dir=tmp_path / "out")
        assert report["passed"] is False
        failing = [c for c in report["checks"] if not c["passed"]]
        assert [c["check_id"] for c in failing] == ["scenario.null_drift"]


class TestJacobiCsv:
    def test_jacobi_rows_written_for_field_suite(self, tmp_path):
        obj = minimal_scenario(kind="jacobi_suite", rays=2,
                               metric={"kind": "conformal_flat",
                                       "params": {"m": 3, "sigma": "0.2*sin(x1)"}})
        path = write_scenario(tmp_path, obj)
        out = tmp_path / "out"
        report = cli.run_scenario(path, out_dir=out)
        assert report["passed"]
        with open(out / "jacobi.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["ray_id", "init_id", "t", "J0", "J1", "J2",
                           "Jdot0", "Jdot1", "Jdot2", "pairing"]
        assert len(rows) == 1 + 2 * 3 * 65  # rays * inits * nodes
        assert {r[1] for r in rows[1:]} == {"0", "1", "2"}


class TestMain:
    def test_run_exit_zero(self, tmp_path, capsys):
        path = write_scenario(tmp_path, minimal_scenario())
        code = cli.main(["run", str(path), "--out", str(tmp_path / "out")])
        assert code == 0
        out = capsys.readouterr().out
        assert "checks passed" in out

    def test_run_exit_one_on_failure(self, tmp_path, capsys):
        obj = minimal_scenario(
            metric={"kind": "conformal_flat",
                    "params": {"m": 3, "sigma": "0.2*sin(x1)"}},
            tolerances={"null_drift": 1e-300})
        path = write_scenario(tmp_path, obj)
        code = cli.main(["run", str(path), "--out", str(tmp_path / "out")])
        assert code == 1
        assert "FAIL scenario.null_drift" in capsys.readouterr().out

    def test_parse_error_exit_two(self, tmp_path, capsys):
        path = write_scenario(tmp_path, minimal_scenario(surprise=1))
        code = cli.main(["run", str(path), "--out", str(tmp_path / "out")])
        assert code == 2
        assert "scenario error" in capsys.readouterr().err

    def test_missing_file_exit_two(self, tmp_path, capsys):
        code = cli.main(["run", str(tmp_path / "nope.json"),
                         "--out", str(tmp_path / "out")])
        assert code == 2
        assert "i/o error" in capsys.readouterr().err

    def test_domain_error_exit_two(self, tmp_path, capsys):
        path = write_scenario(tmp_path, minimal_scenario(
            kind="nonhausdorff_demo", name="wrongmetric"))
        code = cli.main(["run", str(path), "--out", str(tmp_path / "out")])
        assert code == 2
        err = capsys.readouterr().err
        assert "error:" in err and "wrongmetric" in err

    def test_seed_flag(self, tmp_path):
        path = write_scenario(tmp_path, minimal_scenario(seed=1))
        out = tmp_path / "out"
        assert cli.main(["run", str(path), "--out", str(out), "--seed", "9"]) == 0
        assert json.loads((out / "report.json").read_text())["seed"] == 9

    def test_list_metrics(self, capsys):
        assert cli.main(["list-metrics"]) == 0
        out = capsys.readouterr().out
        assert "minkowski" in out
        assert "punctured_minkowski2" in out
        for kind in cli.SCENARIO_KINDS:
            assert kind in out


class TestCsvCells:
    def test_cell_formatting(self):
        assert cli._csv_cell(True) == "true"
        assert cli._csv_cell(False) == "false"
        assert cli._csv_cell(3) == "3"
        assert cli._csv_cell(np.int64(3)) == "3"
        x = 0.1 + 0.2
        assert float(cli._csv_cell(x)) == x
        assert cli._csv_cell("name") == "name"
