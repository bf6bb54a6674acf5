import pytest
from pydantic import ValidationError

from hybridkf.exceptions import ConfigError
from hybridkf.settings import (
    Benchmark,
    ExperimentConfig,
    FilterKind,
    JacobianMode,
    ReportFormat,
    default_config_path,
    list_scenarios,
)


class TestSettingsEnum:
    @pytest.mark.parametrize(
        ("value", "expected"),
        [("newkf", FilterKind.NEWKF), ("pf-ekf", FilterKind.PF_EKF), ("UKF", FilterKind.UKF)],
    )
    def test_load_ignores_case(self, value, expected):
        assert FilterKind.load(value) == expected

    def test_load_unknown(self):
        with pytest.raises(ValueError, match="isn't a valid FilterKind"):
            FilterKind.load("kalman")

    def test_str_and_order(self):
        assert str(ReportFormat.MARKDOWN) == "md"
        assert sorted([Benchmark.B, Benchmark.A]) == [Benchmark.A, Benchmark.B]

    def test_particle_kinds(self):
        assert [x for x in FilterKind if x.is_particle] == [
            FilterKind.PF,
            FilterKind.PF_EKF,
            FilterKind.PF_UKF,
            FilterKind.PF_NEWKF,
        ]


class TestExperimentConfig:
    def test_defaults(self):
        config = ExperimentConfig()
        assert config.benchmark == Benchmark.A
        assert config.filters == list(FilterKind)
        assert config.mc_runs == 1000
        assert config.horizon == 60
        assert config.timeseries.obs_noise_var == 1e-5
        assert config.particles.count == 200
        assert config.filter.jacobian_mode == JacobianMode.ANALYTIC
        assert config.scenario.steps == 2000

    def test_toml_round_trip(self, tmp_path):
        config = ExperimentConfig(
            benchmark="b", filters=["EKF", "NewKF"], seed=42, ut={"lambda": 1.0}
        )
        path = tmp_path / "experiment.toml"
        config.save(path)
        loaded = ExperimentConfig.from_file(path)
        assert loaded.model_dump() == config.model_dump()
        assert loaded.ut.lambda_ == 1.0
        assert 'lambda = 1.0' in path.read_text(encoding="utf-8")

    def test_load_writes_defaults(self):
        config = ExperimentConfig.load()
        assert default_config_path().exists()
        assert config.model_dump() == ExperimentConfig().model_dump()

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "experiment.toml"
        path.write_text("mc_runs = 10\nhorizons = 5\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)

    def test_invalid_toml(self, tmp_path):
        path = tmp_path / "experiment.toml"
        path.write_text("mc_runs = [\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.toml")

    def test_duplicate_filters_are_dropped(self):
        config = ExperimentConfig(filters=["UKF", "EKF", "UKF"])
        assert config.filters == [FilterKind.UKF, FilterKind.EKF]

    @pytest.mark.parametrize("filters", [["PF"], ["EKF", "SSUKF"], ["SPUKF"]])
    def test_maglev_runs_kalman_filters_only(self, filters):
        with pytest.raises(ValidationError):
            ExperimentConfig(benchmark="b", filters=filters)

    def test_particle_filters_need_process_noise(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(timeseries={"process_noise": False}, filters=["PF-NewKF"])

    @pytest.mark.parametrize("workers", [0, -2])
    def test_workers(self, workers):
        with pytest.raises(ValidationError):
            ExperimentConfig(workers=workers)

    def test_config_hash_ignores_output(self, tmp_path):
        base = ExperimentConfig()
        redirected = ExperimentConfig(output={"path": tmp_path / "out.json", "format": "json"})
        assert base.config_hash() == redirected.config_hash()
        assert base.config_hash() != ExperimentConfig(seed=1).config_hash()


class TestScenarios:
    def test_listed(self):
        assert "maglev-load-step" in list_scenarios()

    def test_load(self):
        config = ExperimentConfig.load_scenario("maglev-load-step")
        assert config.benchmark == Benchmark.B
        assert config.filters == [FilterKind.EKF, FilterKind.UKF, FilterKind.NEWKF]
        assert config.scenario.step_mass == 125.0

    def test_unknown(self):
        with pytest.raises(ConfigError, match="Unknown scenario"):
            ExperimentConfig.load_scenario("missing")
