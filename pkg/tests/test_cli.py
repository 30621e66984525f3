from unittest import mock

import numpy as np
import pytest
import yaml
from pydantic import ValidationError

from src.cases.scenarios import build_case, initial_state
from src.cli.config import OutputFormat, RunConfig, Scheme
from src.cli.output import SnapshotError, read_snapshot, snapshot_frame, snapshot_name, write_snapshot
from src.cli.simulation import integrate, run_comparison, run_convergence, run_simulation
from src.cli.validate import check_weno_exactness, run_validation
from src.core.errors import ConfigurationError
from src.integrator.imex import StepError
from src.main import build_parser, main, make_run_config
from src.utils.load_config import load_config


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for var in ("SOLVER_OUTPUT_DIR", "SOLVER_WORKERS", "SOLVER_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)


class TestRunConfig:
    def test_defaults(self):
        config = RunConfig(case="shocktube")
        assert config.scheme is Scheme.IMEX3
        assert config.format is OutputFormat.CSV
        assert config.scenario().grid.nx == 200

    def test_enum_from_string(self):
        config = RunConfig(case="accuracy1d", scheme="explicit_rk3", weights="linear", format="vtk")
        assert config.scheme is Scheme.EXPLICIT_RK3
        assert config.scenario().params.weights_mode.value == "linear"

    @pytest.mark.parametrize("kwargs", [
        {"case": "nowhere"},
        {"case": "shocktube", "nx": 0},
        {"case": "shocktube", "cfl": 1.5},
        {"case": "shocktube", "colour": "red"},
        {"case": "vortex", "eps": 0.3},
        {"case": "shocktube", "ny": 4},
    ])
    def test_rejected(self, kwargs):
        with pytest.raises(ValidationError):
            RunConfig(**kwargs)

    def test_manifest_is_plain_data(self, tmp_path):
        config = RunConfig(case="isothermal", out=tmp_path, perturbed=True)
        manifest = config.manifest()
        assert manifest["out"] == str(tmp_path)
        assert manifest["scheme"] == "imex3"
        assert yaml.safe_load(yaml.safe_dump(manifest)) == manifest


class TestLoadConfig:
    def test_environment_defaults(self, monkeypatch):
        monkeypatch.setenv("SOLVER_WORKERS", "3")
        monkeypatch.setenv("SOLVER_OUTPUT_DIR", "/tmp/runs")
        monkeypatch.setenv("SOLVER_LOG_LEVEL", "debug")
        config = load_config()
        assert config["workers"] == 3
        assert config["out"] == "/tmp/runs"
        assert config["log_level"] == "DEBUG"

    def test_invalid_environment_value(self, monkeypatch):
        monkeypatch.setenv("SOLVER_WORKERS", "many")
        with pytest.raises(ValueError, match="SOLVER_WORKERS"):
            load_config()

    def test_sections_are_flattened(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SOLVER_WORKERS", "3")
        path = tmp_path / "run.yaml"
        path.write_text("run:\n  case: accuracy1d\ngrid:\n  nx: 32\nnumerics:\n  eps: 0.5\n  workers: 2\n")
        config = load_config(path)
        assert config["case"] == "accuracy1d"
        assert config["nx"] == 32
        assert config["workers"] == 2

    @pytest.mark.parametrize("text", ["mesh:\n  nx: 4\n", "grid:\n  nz: 4\n", "- just a list\n", "grid: 4\n"])
    def test_bad_files(self, tmp_path, text):
        path = tmp_path / "bad.yaml"
        path.write_text(text)
        with pytest.raises(ValueError):
            load_config(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValueError, match="Cannot read"):
            load_config(tmp_path / "absent.yaml")

    def test_command_line_wins(self, tmp_path):
        path = tmp_path / "run.yaml"
        path.write_text("run:\n  case: accuracy1d\ngrid:\n  nx: 16\n")
        args = build_parser().parse_args(["run", "--config", str(path), "--nx", "32"])
        config = make_run_config(args)
        assert config.case == "accuracy1d"
        assert config.nx == 32

    def test_case_is_required(self):
        args = build_parser().parse_args(["run", "--nx", "32"])
        with pytest.raises(ValueError, match="No case"):
            make_run_config(args)


class TestSnapshots:
    def test_one_row_per_node(self, tmp_path):
        scenario = build_case("shocktube", nx=4)
        state = initial_state(scenario)
        path = write_snapshot(state, scenario.params, tmp_path / "tiny", "csv")
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 5
        assert lines[0] == "x,rho,qx,E,theta2,p,dtheta"

    def test_csv_roundtrip_is_bitwise(self, tmp_path):
        scenario = build_case("isothermal", nx=6, perturbed=True)
        state = initial_state(scenario)
        frame = snapshot_frame(state, scenario.params, scenario)
        path = write_snapshot(state, scenario.params, tmp_path / snapshot_name(0.1), "csv", scenario)
        assert path.name == "snapshot_1.00000000e-01.csv"
        back = read_snapshot(path)
        assert list(back.columns) == ["x", "y", "rho", "qx", "qy", "E", "theta2", "p", "dtheta"]
        for column in frame.columns:
            np.testing.assert_array_equal(back[column].to_numpy(dtype=float), frame[column].to_numpy())

    def test_vtk_layout(self, tmp_path):
        scenario = build_case("bubble", nx=5, ny=4)
        state = initial_state(scenario)
        path = write_snapshot(state, scenario.params, tmp_path / "final.csv", "vtk", scenario)
        assert path.suffix == ".vtk"
        lines = path.read_text().splitlines()
        assert "DIMENSIONS 5 4 1" in lines
        assert "POINT_DATA 20" in lines
        start = lines.index("SCALARS rho double 1") + 2
        rho = [float(v) for v in lines[start:start + 5]]
        np.testing.assert_array_equal(rho, scenario.grid.interior_view(state.rho)[:, 0])

    def test_dtheta_in_kelvin(self):
        scenario = build_case("bubble", nx=20)
        frame = snapshot_frame(initial_state(scenario), scenario.params, scenario)
        assert 0.4 < frame["dtheta"].max() <= 0.5

    def test_unknown_format(self, tmp_path):
        scenario = build_case("shocktube", nx=4)
        with pytest.raises(SnapshotError):
            write_snapshot(initial_state(scenario), scenario.params, tmp_path / "x", "hdf5")


class TestIntegrate:
    def test_last_step_lands_on_end_time(self):
        config = RunConfig(case="shocktube", nx=16, t_end=0.01, quiet=True)
        result = integrate(config.scenario(), config)
        assert result.time == pytest.approx(0.01, rel=1e-12)
        assert result.dts[-1] <= result.dts[0]
        assert result.steps == len(result.dts)

    def test_step_limit(self):
        config = RunConfig(case="shocktube", nx=16, max_steps=2, quiet=True)
        result = integrate(config.scenario(), config)
        assert result.steps == 2
        assert result.time < config.scenario().t_end

    def test_workers_give_identical_runs(self):
        runs = []
        for workers in (1, 2):
            config = RunConfig(case="isothermal", nx=10, perturbed=True, max_steps=2, workers=workers, quiet=True)
            runs.append(integrate(config.scenario(), config))
        np.testing.assert_array_equal(runs[0].state.data, runs[1].state.data)

    @pytest.mark.parametrize("scheme", ["imex1", "explicit_rk3"])
    def test_other_schemes_run(self, scheme):
        config = RunConfig(case="shocktube", nx=16, scheme=scheme, max_steps=2, quiet=True)
        result = integrate(config.scenario(), config)
        assert result.steps == 2
        assert np.all(np.isfinite(result.state.data))


class TestRunSimulation:
    def test_zero_end_time_reproduces_initial_state(self, tmp_path):
        config = RunConfig(case="accuracy1d", nx=16, t_end=0.0, out=tmp_path, quiet=True)
        result = run_simulation(config)
        assert result.steps == 0
        scenario = config.scenario()
        expected = snapshot_frame(initial_state(scenario), scenario.params, scenario)
        final = read_snapshot(tmp_path / "final.csv")
        for column in expected.columns:
            np.testing.assert_array_equal(final[column].to_numpy(dtype=float), expected[column].to_numpy())
        manifest = yaml.safe_load((tmp_path / "manifest.txt").read_text())
        assert manifest["status"] == "completed"
        assert manifest["steps"] == 0

    def test_artifacts(self, tmp_path):
        config = RunConfig(case="shocktube", nx=16, max_steps=3, snapshot_every=2, out=tmp_path, quiet=True)
        result = run_simulation(config)
        snapshots = sorted(p.name for p in tmp_path.glob("snapshot_*.csv"))
        assert len(snapshots) == 3
        diagnostics = read_snapshot(tmp_path / "diagnostics.csv")
        assert list(diagnostics["step"]) == [0, 1, 2, 3]
        manifest = yaml.safe_load((tmp_path / "manifest.txt").read_text())
        assert manifest["steps"] == result.steps == 3
        assert manifest["config"]["case"] == "shocktube"
        assert "numpy" in manifest["versions"]

    def test_failure_flushes_last_valid_state(self, tmp_path):
        config = RunConfig(case="shocktube", nx=16, out=tmp_path, quiet=True)
        with mock.patch("src.cli.simulation.advance_step", side_effect=StepError("pressure went negative")):
            with pytest.raises(StepError) as info:
                run_simulation(config)
        assert info.value.step == 1
        assert (tmp_path / "last_valid.csv").exists()
        manifest = yaml.safe_load((tmp_path / "manifest.txt").read_text())
        assert manifest["status"] == "failed"

    def test_other_solver_errors_flush_last_valid_state(self, tmp_path):
        config = RunConfig(case="shocktube", nx=16, out=tmp_path, quiet=True)
        failure = ConfigurationError("Implicit terms need (rho2, p2) perturbation fields")
        with mock.patch("src.cli.simulation.advance_step", side_effect=failure):
            with pytest.raises(ConfigurationError):
                run_simulation(config)
        assert (tmp_path / "last_valid.csv").exists()
        assert (tmp_path / "diagnostics.csv").exists()
        manifest = yaml.safe_load((tmp_path / "manifest.txt").read_text())
        assert manifest["status"] == "failed"


class TestStudies:
    def test_convergence_needs_exact_solution(self, tmp_path):
        config = RunConfig(case="shocktube", out=tmp_path, quiet=True)
        with pytest.raises(ConfigurationError):
            run_convergence(config, [16, 32])

    def test_convergence_table_file(self, tmp_path):
        config = RunConfig(case="accuracy1d", t_end=1e-3, out=tmp_path, quiet=True)
        frame = run_convergence(config, [8, 16], eps_values=[1.0, 0.1])
        assert list(frame["N"]) == [8, 16, 8, 16]
        assert list(frame["eps"]) == [1.0, 1.0, 0.1, 0.1]
        assert {"rho", "order_rho", "theta2"} <= set(frame.columns)
        assert (tmp_path / "convergence.csv").exists()

    def test_comparison(self, tmp_path):
        config = RunConfig(case="shocktube", nx=16, t_end=0.005, out=tmp_path, quiet=True)
        frame = run_comparison(config)
        assert list(frame["scheme"]) == ["imex3", "explicit_rk3"]
        explicit = frame.iloc[1]
        assert explicit["dt_ratio"] == pytest.approx(1.0)
        assert frame.iloc[0]["steps"] <= explicit["steps"]
        assert (tmp_path / "efficiency.csv").exists()


class TestMain:
    def test_list_cases(self, capsys):
        assert main(["list-cases"]) == 0
        out = capsys.readouterr().out
        assert "accuracy1d" in out and "igw" in out

    def test_validate(self, capsys):
        assert main(["validate"]) == 0
        assert "FAIL" not in capsys.readouterr().out

    def test_validate_seed_from_command_line(self):
        with mock.patch("src.main.run_validation", wraps=run_validation) as checks:
            assert main(["validate", "--seed", "7"]) == 0
        checks.assert_called_once_with(7)

    def test_validate_seed_from_config_file(self, tmp_path):
        path = tmp_path / "checks.yaml"
        path.write_text("run:\n  seed: 5\n")
        with mock.patch("src.main.run_validation", wraps=run_validation) as checks:
            assert main(["validate", "--config", str(path)]) == 0
        checks.assert_called_once_with(5)

    def test_invalid_configuration(self, tmp_path):
        assert main(["run", "--case", "bubble", "--eps", "0.5", "--out", str(tmp_path)]) == 2

    def test_run(self, tmp_path):
        code = main(["run", "--case", "shocktube", "--nx", "16", "--t-end", "0", "--out", str(tmp_path), "--quiet"])
        assert code == 0
        assert (tmp_path / "final.csv").exists()

    def test_failed_run_exit_code(self, tmp_path):
        with mock.patch("src.cli.simulation.advance_step", side_effect=StepError("boom")):
            code = main(["run", "--case", "shocktube", "--nx", "16", "--out", str(tmp_path), "--quiet"])
        assert code == 1


class TestValidation:
    def test_weno_check_is_reproducible_per_seed(self):
        first, again = check_weno_exactness(seed=3), check_weno_exactness(seed=3)
        assert first.ok and first.detail == again.detail
        assert "seed 3" in first.detail

    def test_seed_selects_the_polynomial(self):
        with mock.patch("src.cli.validate.np.random.default_rng", wraps=np.random.default_rng) as make_rng:
            run_validation(seed=11)
        make_rng.assert_called_once_with(11)
