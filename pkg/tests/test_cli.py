import json

import numpy as np
import pytest

from gabprate.cli import main
from gabprate.errors import ConfigError, NotWeaklyDominant
from gabprate.experiment import CSV_COLUMNS, ExperimentConfig, read_curves, run_experiment
from gabprate.generators import EXAMPLE1_D
from gabprate.mmio import write_matrix_market, write_vector
from gabprate.system import SparseSystem


def cfg(tmp_path, **kw):
    kw.setdefault("out", str(tmp_path / "out"))
    return ExperimentConfig(**kw)


def stderr_json(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


class TestConfig:
    def test_requires_one_source(self):
        with pytest.raises(ConfigError):
            ExperimentConfig()
        with pytest.raises(ConfigError):
            ExperimentConfig(input="a.mtx", generate="tree")

    @pytest.mark.parametrize(
        "kw",
        [
            {"rounds": 0},
            {"stop_tol": -1.0},
            {"bounds": ["theorem2"]},
            {"scaling": "best"},
            {"scaling": "file"},
            {"fit_window": [1, 2, 3]},
        ],
    )
    def test_invalid(self, kw):
        with pytest.raises(ConfigError):
            ExperimentConfig(generate="tree", **kw)

    def test_json_round_trip(self, tmp_path):
        c = ExperimentConfig(generate="example2", rounds=20, bounds=["rho"], seed=4)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(c.to_dict()))
        assert ExperimentConfig.from_json(p) == c

    def test_unknown_key(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"generate": "tree", "roundz": 3}')
        with pytest.raises(ConfigError, match="roundz"):
            ExperimentConfig.from_json(p)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text('{"generate": ')
        with pytest.raises(ConfigError, match="line 1"):
            ExperimentConfig.from_json(p)


class TestRunExperiment:
    def test_example2(self, tmp_path):
        res = run_experiment(cfg(tmp_path, generate="example2"))
        s = res.summary
        assert s["classification"] == "StrictDD"
        assert s["lambda_star"] == pytest.approx(0.9749, abs=1e-3)
        assert s["loops"] == 3
        assert s["rho"] == pytest.approx(0.9722, abs=1e-3)
        assert s["lambda_star_at_perron"] == pytest.approx(s["rho"], abs=1e-8)
        assert s["fit"]["rate"] == pytest.approx(0.8832, abs=2e-3)
        curves = read_curves(res.csv_path)
        assert list(curves) == list(CSV_COLUMNS)
        assert curves["round"].tolist() == list(range(101))
        assert np.isnan(curves["theorem1_bound_log10"][0])
        # bound columns dominate the error column row by row
        assert np.all(curves["log10_mse"][1:] <= curves["theorem1_bound_log10"][1:] + 1e-9)
        assert np.all(curves["log10_mse"] <= curves["rho_bound_log10"] + 1e-9)
        assert not np.any(np.isnan(curves["jacobi_log10_mse"]))

    def test_example1_perron_scaling(self, tmp_path):
        s = run_experiment(cfg(tmp_path, generate="example1", scaling="perron")).summary
        assert s["rho"] == pytest.approx(0.9535, abs=1e-3)
        assert s["lambda_star"] == pytest.approx(s["rho"], abs=1e-8)
        assert s["fit"]["rate"] == pytest.approx(0.8556, abs=2e-3)

    def test_example1_explicit_scaling_vector(self, tmp_path):
        s = run_experiment(cfg(tmp_path, generate="example1", scaling_vector=list(EXAMPLE1_D))).summary
        assert s["classification"] == "WeaklyDScaledDD"

    def test_scaling_file(self, tmp_path):
        write_vector(EXAMPLE1_D, tmp_path / "d.json")
        c = cfg(tmp_path, generate="example1", scaling="file", scaling_file=str(tmp_path / "d.json"))
        assert run_experiment(c).summary["varrho"][0] == pytest.approx(0.9948, abs=1e-12)

    def test_edge_bound_precondition(self, tmp_path):
        with pytest.raises(NotWeaklyDominant):
            run_experiment(cfg(tmp_path, generate="example1"))

    def test_tree_exact(self, tmp_path):
        s = run_experiment(cfg(tmp_path, generate="tree:n=25", seed=3, rounds=40)).summary
        assert s["acyclic"] and s["exact_at_diameter"]
        assert s["exact_round"] <= s["diameter"]
        assert s["fit"]["degenerate"]
        assert s["lambda_star"] == 0.0 and s["loops"] == 0

    def test_disabled_columns_are_empty(self, tmp_path):
        res = run_experiment(cfg(tmp_path, generate="example2", bounds=[], jacobi=False, rounds=5))
        rows = res.csv_path.read_text().splitlines()
        assert rows[0] == ",".join(CSV_COLUMNS)
        assert all(r.endswith(",,,") for r in rows[1:])
        assert "lambda_star" not in res.summary

    def test_stop_tol_shortens_run(self, tmp_path):
        res = run_experiment(cfg(tmp_path, generate="example2", stop_tol=1e-6, rounds=500))
        assert res.summary["termination"] == "converged"
        assert len(res.csv_path.read_text().splitlines()) == res.summary["rounds_executed"] + 2

    def test_seeded_determinism(self, tmp_path):
        a = run_experiment(cfg(tmp_path, generate="weakly_dominant:n=15", seed=9, out=str(tmp_path / "a"), bounds=["rho", "lambda_star"]))
        b = run_experiment(cfg(tmp_path, generate="weakly_dominant:n=15", seed=9, out=str(tmp_path / "b"), bounds=["rho", "lambda_star"]))
        assert a.csv_path.read_bytes() == b.csv_path.read_bytes()
        sa = json.loads(a.summary_path.read_text())
        sb = json.loads(b.summary_path.read_text())
        sa["config"].pop("out")
        sb["config"].pop("out")
        assert sa == sb

    def test_file_input_with_rhs(self, tmp_path):
        sys = SparseSystem.from_dense([[2.0, 0.5], [0.3, 1.0]], [1.0, 1.0])
        write_matrix_market(sys, tmp_path / "m.mtx", tmp_path / "m_rhs.mtx")
        s = run_experiment(cfg(tmp_path, input=str(tmp_path / "m.mtx"), rounds=5)).summary
        assert s["n"] == 2 and s["exact_round"] == 1


class TestCli:
    def test_analyze(self, capsys):
        assert main(["analyze", "--generate", "example2"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["varrho"] == pytest.approx([0.96, 0.99, 0.97, 0.98, 0.97], abs=1e-12)
        assert out["rho"] == pytest.approx(0.9722, abs=1e-3)

    def test_analyze_writes_file(self, tmp_path, capsys):
        assert main(["analyze", "--generate", "example1", "--out", str(tmp_path / "a.json")]) == 0
        assert json.loads((tmp_path / "a.json").read_text())["classification"] == "NotWeaklyDD"

    def test_solve(self, tmp_path, capsys):
        assert main(["solve", "--generate", "example2", "--rounds", "30", "--out", str(tmp_path)]) == 0
        curves = read_curves(tmp_path / "curves.csv")
        assert np.all(np.isnan(curves["theorem1_bound_log10"]))
        assert not np.any(np.isnan(curves["jacobi_log10_mse"]))

    def test_bounds_with_perron_scaling(self, tmp_path, capsys):
        code = main(["bounds", "--generate", "example1", "--scaling", "perron", "--out", str(tmp_path)])
        assert code == 0
        s = json.loads((tmp_path / "summary.json").read_text())
        assert s["rho"] == pytest.approx(0.9535, abs=1e-3)

    def test_not_dominant_exit_code(self, tmp_path, capsys):
        assert main(["bounds", "--generate", "example1", "--out", str(tmp_path)]) == 4
        err = stderr_json(capsys)
        assert err["error"] == "NotWeaklyDominant" and err["exit_code"] == 4

    def test_parse_error_exit_code(self, tmp_path, capsys):
        p = tmp_path / "h.mtx"
        p.write_text("%%MatrixMarket matrix coordinate real general\n")
        assert main(["solve", "--input", str(p), "--out", str(tmp_path)]) == 2
        err = stderr_json(capsys)
        assert err["error"] == "ParseError" and err["line"] == 1

    def test_missing_file(self, tmp_path, capsys):
        assert main(["solve", "--input", str(tmp_path / "nope.mtx")]) == 2

    def test_singular_exit_code(self, tmp_path, capsys):
        write_matrix_market(SparseSystem.from_dense([[1.0, 1.0], [1.0, 1.0]], [1, 2]), tmp_path / "s.mtx")
        assert main(["solve", "--input", str(tmp_path / "s.mtx"), "--out", str(tmp_path)]) == 3
        assert stderr_json(capsys)["error"] == "SingularMatrix"

    def test_divisor_collapse_exit_code(self, tmp_path, capsys):
        sys = SparseSystem.from_dense([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]], [1, 2, 3])
        write_matrix_market(sys, tmp_path / "c.mtx")
        assert main(["solve", "--input", str(tmp_path / "c.mtx"), "--out", str(tmp_path)]) == 3
        err = stderr_json(capsys)
        assert err["error"] == "NumericalFailure" and err["round"] == 1
        s = json.loads((tmp_path / "summary.json").read_text())
        assert s["termination"] == "numerical_failure" and s["failure"]["round"] == 1

    def test_config_file_with_override(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text(json.dumps({"generate": "example2", "rounds": 10, "bounds": ["rho"], "out": str(tmp_path / "o")}))
        assert main(["solve", "--config", str(p), "--rounds", "12"]) == 0
        s = json.loads((tmp_path / "o" / "summary.json").read_text())
        assert s["rounds_executed"] == 12 and s["config"]["bounds"] == ["rho"]

    def test_bad_config_exit_code(self, tmp_path, capsys):
        p = tmp_path / "c.json"
        p.write_text('{"generate": "tree", "rounds": 0}')
        assert main(["solve", "--config", str(p)]) == 2

    def test_unknown_generator(self, capsys):
        assert main(["analyze", "--generate", "grid"]) == 2

    def test_argparse_error(self, capsys):
        with pytest.raises(SystemExit) as info:
            main(["solve", "--scaling", "best"])
        assert info.value.code == 2

    def test_loops(self, capsys):
        assert main(["loops", "--generate", "example2"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert len(out["loops"]) == 3
        assert out["lambda_star"] == pytest.approx(0.9749, abs=1e-3)

    def test_treecheck(self, capsys):
        assert main(["treecheck", "--generate", "example2", "--root", "2", "--depth", "6"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["root_equivalent"] and out["tree_dominant"]

    def test_treecheck_bad_root(self, capsys):
        assert main(["treecheck", "--generate", "example2", "--root", "9"]) == 2

    def test_treecheck_not_dominant(self, capsys):
        assert main(["treecheck", "--generate", "example1", "--depth", "3"]) == 4

    @pytest.mark.parametrize("jobs", ["1", "2"])
    def test_bench(self, tmp_path, capsys, jobs):
        out = tmp_path / jobs
        args = ["bench", "--generate", "single_loop:n=8", "--seeds", "3", "--jobs", jobs, "--rounds", "30", "--out", str(out)]
        assert main(args) == 0
        rows = (out / "bench.csv").read_text().splitlines()
        assert len(rows) == 4 and rows[1].startswith("0,")
        assert (out / "seed_2" / "summary.json").exists()

    def test_bench_is_parallel_safe(self, tmp_path, capsys):
        args = ["bench", "--generate", "single_loop:n=8", "--seeds", "3", "--rounds", "30"]
        main(args + ["--jobs", "1", "--out", str(tmp_path / "s")])
        main(args + ["--jobs", "3", "--out", str(tmp_path / "p")])
        assert (tmp_path / "s" / "bench.csv").read_text() == (tmp_path / "p" / "bench.csv").read_text()

    def test_bench_requires_generator(self, tmp_path, capsys):
        p = tmp_path / "m.mtx"
        write_matrix_market(SparseSystem.from_dense(np.eye(2), [1, 2]), p)
        assert main(["bench", "--input", str(p)]) == 2
