import csv
import json

import pytest

from hybridkf import __main__ as cli
from hybridkf.settings import Benchmark, ExperimentConfig, FilterKind, ReportFormat


@pytest.fixture(autouse=True)
def quiet_logging(monkeypatch):
    monkeypatch.setattr(cli, "setup_logging", lambda debug=False: None)


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "experiment.toml"
    ExperimentConfig(
        filters=["EKF", "UKF", "NewKF"], mc_runs=3, horizon=30, seed=9, measure_timing=False
    ).save(path)
    return path


class TestArguments:
    def test_filters(self):
        assert cli.parse_filters("ekf, NewKF,,pf-ukf") == [
            FilterKind.EKF,
            FilterKind.NEWKF,
            FilterKind.PF_UKF,
        ]

    def test_overrides(self, config_path, tmp_path):
        args = cli.parse_arguments(
            [
                "run",
                "--config",
                str(config_path),
                "--runs",
                "2",
                "--seed",
                "4",
                "--format",
                "json",
                "--out",
                str(tmp_path / "report.json"),
                "--no-timing",
            ]
        )
        config = cli.build_config(args)
        assert config.mc_runs == 2
        assert config.seed == 4
        assert config.output.format == ReportFormat.JSON
        assert config.output.path == tmp_path / "report.json"
        assert not config.output.include_timing
        assert not config.measure_timing
        assert config.horizon == 30

    def test_benchmark_b_keeps_kalman_filters(self):
        config = cli.build_config(cli.parse_arguments(["run", "--benchmark", "b"]))
        assert config.benchmark == Benchmark.B
        assert config.filters == [FilterKind.EKF, FilterKind.UKF, FilterKind.NEWKF]

    def test_config_and_scenario_are_exclusive(self, config_path):
        with pytest.raises(SystemExit):
            cli.parse_arguments(
                ["run", "--config", str(config_path), "--scenario", "maglev-load-step"]
            )


class TestMain:
    def test_sweep(self, tmp_path):
        path = tmp_path / "sweep.csv"
        assert cli.main(["sweep", "--n", "1:5", "--out", str(path)]) == cli.EXIT_OK
        with path.open(encoding="utf-8") as stream:
            rows = list(csv.reader(stream))
        assert len(rows) == 6
        assert rows[1][:3] == ["1", "1", "10"]

    @pytest.mark.parametrize("value", ["", "5:1:0", "a:b"])
    def test_sweep_invalid_range(self, value):
        assert cli.main(["sweep", "--n", value]) == cli.EXIT_CONFIG

    def test_config_defaults(self):
        assert cli.main(["config", "--defaults"]) == cli.EXIT_OK

    def test_unknown_scenario(self):
        assert cli.main(["run", "--scenario", "missing"]) == cli.EXIT_CONFIG

    def test_invalid_config(self, tmp_path):
        path = tmp_path / "broken.toml"
        path.write_text("mc_runs = 0\n", encoding="utf-8")
        assert cli.main(["run", "--config", str(path)]) == cli.EXIT_CONFIG

    def test_scenario_failure(self, tmp_path):
        path = tmp_path / "light.toml"
        ExperimentConfig(
            benchmark="b",
            filters=["EKF"],
            mc_runs=1,
            measure_timing=False,
            scenario={"initial_mass": 5.0, "step_mass": 5.0},
        ).save(path)
        assert cli.main(["run", "--config", str(path)]) == cli.EXIT_SCENARIO

    def test_run_is_reproducible(self, config_path, tmp_path):
        outputs = []
        for name in ("first.csv", "second.csv"):
            path = tmp_path / name
            argv = ["run", "--config", str(config_path), "--no-timing", "--out", str(path)]
            assert cli.main(argv) == cli.EXIT_OK
            outputs.append(path.read_bytes())
        assert outputs[0] == outputs[1]
        assert outputs[0].startswith(b"filter,runs,failures,mean_mse,mse_standard_error")

    def test_run_writes_json_and_trace(self, config_path, tmp_path):
        path = tmp_path / "report.json"
        config = ExperimentConfig.from_file(config_path)
        config.output.trace_run = 1
        config.save(config_path)
        argv = ["run", "--config", str(config_path), "--format", "json", "--out", str(path)]
        assert cli.main(argv) == cli.EXIT_OK
        content = json.loads(path.read_text(encoding="utf-8"))
        assert [x["filter"] for x in content["results"]] == ["EKF", "UKF", "NewKF"]
        assert (tmp_path / "report-trace.csv").exists()

    def test_trace(self, config_path, tmp_path):
        path = tmp_path / "trace.csv"
        argv = ["trace", "--config", str(config_path), "--run-index", "2", "--out", str(path)]
        assert cli.main(argv) == cli.EXIT_OK
        with path.open(encoding="utf-8") as stream:
            assert len(list(csv.reader(stream))) == 1 + 3 * 30
