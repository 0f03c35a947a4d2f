import json
import subprocess
import sys
from pathlib import Path

import pytest

from driftlab.cli import combine_exit_codes, main
from driftlab.errors import ConfigError, MissingJob
from driftlab.report import RunManifest, check_expect, emit_plots, run_scenario, svg_line_plot
from driftlab.scenario import bundled_scenarios, load_scenario, scenario_hash

DATA = Path(__file__).parent / "data"

KERNEL = {
    "name": "tiny_kernel",
    "space": "euclidean3",
    "initial": "heat_kernel(0.5)",
    "grid": {"dr": 0.05, "R_max": 1.0, "pad": 3.0, "nt": 3},
    "time": {"T": 1.0, "cfl": 0.5},
}


def scenario(**jobs):
    return {**KERNEL, "jobs": [{"id": k, **v} for k, v in jobs.items()]}


def write(tmp_path, doc, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return path


class TestLoading:
    def test_bundled_scenarios_all_load(self):
        names = bundled_scenarios()
        assert "euclidean_kernel_liyau" in names
        for name in names:
            load_scenario(name)

    def test_malformed_expression_names_offset(self, tmp_path):
        with pytest.raises(ConfigError, match=r"nonlinearity.*offset 5"):
            load_scenario(write(tmp_path, {**KERNEL, "nonlinearity": "sinh("}))

    def test_invalid_json_has_position(self, tmp_path):
        with pytest.raises(ConfigError, match=r"line 1, column"):
            load_scenario(write(tmp_path, '{"name": '))

    def test_unknown_op(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown op"):
            load_scenario(write(tmp_path, scenario(a={"op": "nope"})))

    def test_duplicate_ids(self, tmp_path):
        doc = {**KERNEL, "jobs": [{"id": "a", "op": "mass_drift"}, {"id": "a", "op": "mass_drift"}]}
        with pytest.raises(ConfigError, match="duplicate"):
            load_scenario(write(tmp_path, doc))

    def test_unknown_grid_key(self, tmp_path):
        with pytest.raises(ConfigError, match="unknown grid keys"):
            load_scenario(write(tmp_path, {**KERNEL, "grid": {"dr": 0.1, "radius": 2}}))

    def test_job_without_solve(self, tmp_path):
        doc = {"name": "x", "space": "euclidean3", "jobs": [{"id": "m", "op": "mass_drift"}]}
        with pytest.raises(ConfigError, match="needs a solve block"):
            load_scenario(write(tmp_path, doc))

    def test_hash_is_canonical(self):
        assert scenario_hash({"a": 1, "b": [1, 2]}) == scenario_hash({"b": [1, 2], "a": 1})


class TestRun:
    def test_solver_only(self, tmp_path):
        manifest = run_scenario(load_scenario(KERNEL), out=tmp_path)
        assert manifest.jobs == {} and manifest.exit_code == 0
        assert set(manifest.solver["artifacts"]) == {"solution.csv"}
        assert (tmp_path / "solution.csv").exists()

    def test_bundled_li_yau_regression(self, tmp_path):
        manifest = run_scenario(load_scenario("euclidean_kernel_liyau"), out=tmp_path, workers=2)
        assert manifest.exit_code == 0
        for jid in manifest.jobs:
            result = json.loads((tmp_path / "jobs" / f"{jid}.json").read_text())["result"]
            assert result["margin"] > 0

    def test_deterministic(self, tmp_path):
        doc = scenario(
            ly={"op": "li_yau", "params": {"alpha": 2.0, "R": 1.0, "variant": "global"}},
            mass={"op": "mass_drift"},
            pairs={"op": "parabolic_harnack", "params": {"alpha": 1.5, "variant": "global", "R": 1.0, "random_pairs": {"count": 5, "seed": 1, "radius": 1.0}}},
        )
        a = run_scenario(load_scenario(doc), out=tmp_path / "a", workers=3)
        b = run_scenario(load_scenario(doc), out=tmp_path / "b", workers=1)
        da, db = a.to_dict(), b.to_dict()
        da.pop("timing"), db.pop("timing")
        assert da == db
        for f in sorted((tmp_path / "a" / "jobs").iterdir()):
            assert f.read_bytes() == (tmp_path / "b" / "jobs" / f.name).read_bytes()

    def test_precondition_failure_is_skipped(self, tmp_path):
        doc = {**scenario(ly={"op": "li_yau", "params": {"R": 0.5}}), "space": "gaussian3"}
        manifest = run_scenario(load_scenario(doc), out=tmp_path)
        assert manifest.jobs["ly"]["status"] == "skipped"
        assert "NeedFiniteM" in manifest.jobs["ly"]["reason"]
        assert manifest.exit_code == 0

    def test_margin_failure(self, tmp_path):
        doc = scenario(k={"op": "kernel_error", "params": {"levels": [0.1, 0.05], "ratio_band": [10, 20]}})
        assert run_scenario(load_scenario(doc), out=tmp_path).exit_code == 1

    def test_solver_abort(self, tmp_path):
        doc = {**scenario(m={"op": "mass_drift"}), "nonlinearity": "w^2", "initial": "50"}
        manifest = run_scenario(load_scenario(doc), out=tmp_path)
        assert manifest.exit_code == 3

    def test_expectations(self):
        summary = {"a": {"b": 0.5}, "kind": "p"}
        assert check_expect(summary, {"a.b": {"min": 0.4, "max": 0.6}, "kind": "p"}) == []
        assert len(check_expect(summary, {"a.b": {"equals": 1.0, "tol": 0.1}, "kind": {"in": ["w"]}})) == 2

    def test_manifest_reload(self, tmp_path):
        manifest = run_scenario(load_scenario(scenario(m={"op": "mass_drift"})), out=tmp_path)
        again = RunManifest.load(tmp_path / "manifest.json")
        assert again.jobs == manifest.jobs and again.reproducible


class TestPlots:
    def test_golden_svg(self):
        svg = svg_line_plot([1, 2, 3, 4], [1.0, 0.5, 0.25, 0.2], "t", "margin", "golden")
        assert svg == (DATA / "golden_line.svg").read_text()

    def test_one_svg_for_li_yau(self, tmp_path):
        doc = scenario(ly={"op": "li_yau", "params": {"alpha": 2.0, "R": 1.0, "variant": "global"}}, m={"op": "mass_drift"})
        manifest = run_scenario(load_scenario(doc), out=tmp_path)
        written = emit_plots(manifest, ["ly"])
        assert [p.name for p in written] == ["ly.svg"]
        assert written[0].read_text().startswith("<svg")

    def test_empty_selection(self, tmp_path):
        manifest = run_scenario(load_scenario(scenario(m={"op": "mass_drift"})), out=tmp_path)
        assert emit_plots(manifest, []) == []
        assert not (tmp_path / "plots").exists()

    def test_missing_job(self, tmp_path):
        manifest = run_scenario(load_scenario(scenario(m={"op": "mass_drift"})), out=tmp_path)
        with pytest.raises(MissingJob):
            emit_plots(manifest, ["nope"])


class TestCli:
    def test_exit_code_priority(self):
        assert combine_exit_codes([0, 1, 3, 2]) == 2
        assert combine_exit_codes([0, 1, 3]) == 3
        assert combine_exit_codes([0, 1]) == 1
        assert combine_exit_codes([0, 0]) == 0

    def test_run_bundled_with_trailing_global_flags(self, tmp_path, capsys):
        code = main(["run", "acc07_quadratic_lemma", "--out", str(tmp_path), "--workers", "2"])
        assert code == 0
        assert "quadratic_lemma: pass" in capsys.readouterr().out

    def test_list(self, capsys):
        assert main(["run", "--list"]) == 0
        assert "acc12_liouville_demo" in capsys.readouterr().out.split()

    def test_config_error_exit(self, tmp_path, capsys):
        path = write(tmp_path, {**KERNEL, "nonlinearity": "sinh("})
        assert main(["--out", str(tmp_path / "o"), "run", str(path)]) == 2
        assert "offset 5" in capsys.readouterr().err

    def test_estimate_subcommand(self, tmp_path):
        code = main([
            "estimate", "--kind", "li_yau", "--space", "euclidean3", "--initial", "heat_kernel(0.5)",
            "--dr", "0.05", "--R", "1", "--T", "1", "--nt", "3", "--pad", "3", "--cfl", "0.5",
            "--param", "variant=global", "--param", "R=1.0", "--out", str(tmp_path),
        ])
        assert code == 0
        assert json.loads((tmp_path / "jobs" / "li_yau.json").read_text())["result"]["margin"] > 0

    def test_cutoff_subcommand(self, tmp_path):
        assert main(["cutoff", "--kind", "spatial", "--density", "2000", "--out", str(tmp_path)]) == 0

    def test_liouville_subcommand(self, tmp_path):
        code = main(["liouville", "--theorem", "LiouvilleThmEx", "--nonlinearity", "w^0.5", "--out", str(tmp_path)])
        assert code == 0

    def test_plots_subcommand(self, tmp_path, capsys):
        main(["run", "acc01_solver_order", "--out", str(tmp_path)])
        capsys.readouterr()
        assert main(["plots", "--manifest", str(tmp_path / "manifest.json"), "--jobs", "kernel_error"]) == 0
        assert (tmp_path / "plots" / "kernel_error.svg").exists()
        assert main(["plots", "--manifest", str(tmp_path / "manifest.json"), "--jobs", "nope"]) == 2

    def test_module_entry_point(self):
        out = subprocess.run([sys.executable, "-m", "driftlab", "--version"], capture_output=True, text=True, check=True)
        assert out.stdout.startswith("driftlab ")
