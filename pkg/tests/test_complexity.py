import csv

import numpy as np
import pytest
from pydantic import ValidationError

from hybridkf.complexity import (
    CSV_HEADER,
    CostModelInput,
    CostReport,
    measured_cost,
    newkf_flops,
    parse_rule,
    reduction_ratio,
    sweep_grid,
    ukf_flops,
    write_sweep_csv,
)
from hybridkf.experiments import (
    initial_belief,
    measure_maglev,
    simulate_maglev_truth,
    system_model,
)
from hybridkf.gaussian import GaussianBelief
from hybridkf.settings import Benchmark, ExperimentConfig, FilterKind, ParticleSettings
from hybridkf.systems import TimeSeriesModel


class TestClosedFormCounts:
    def test_scalar_golden_values(self):
        cost = CostModelInput(n=1, m=1, j=5)
        assert ukf_flops(cost) == 117
        assert newkf_flops(cost) == 40
        assert reduction_ratio(cost) == pytest.approx(77 / 117)
        assert round(reduction_ratio(cost), 3) == 0.658

    def test_maglev_golden_values(self):
        cost = CostModelInput(n=4, m=1, j=30)
        assert ukf_flops(cost) == 1656
        assert newkf_flops(cost) == 823
        assert round(reduction_ratio(cost), 3) == 0.503

    def test_unit_cost(self):
        cost = CostModelInput(n=1, m=1, j=1)
        assert ukf_flops(cost) == 105
        assert newkf_flops(cost) == 28
        assert reduction_ratio(cost) == pytest.approx(1 - 28 / 105)

    def test_non_positive_sizes(self):
        with pytest.raises(ValidationError):
            CostModelInput(n=0, m=1, j=1)

    def test_report_row(self):
        report = CostReport.evaluate(CostModelInput(n=1, m=1, j=5))
        assert report.row() == (1, 1, 5, 117, 40, "0.658120")


class TestSweep:
    @pytest.mark.parametrize(("n", "expected"), [(50, 0.636), (100, 0.645), (200, 0.650)])
    def test_half_m_ten_n_j(self, n, expected):
        (report,) = sweep_grid([n], "n/2", "10n")
        assert (report.m, report.j) == (n // 2, 10 * n)
        assert report.reduction == pytest.approx(expected, abs=1e-3)

    def test_reduction_grows_with_n(self):
        reductions = [x.reduction for x in sweep_grid(range(1, 201), "n/2", "10n")]
        assert reductions[-1] > reductions[0]
        assert all(0.0 < x < 1.0 for x in reductions)

    def test_sizes_are_clamped_to_one(self):
        (report,) = sweep_grid([1], "0", "0")
        assert (report.m, report.j) == (1, 1)

    def test_empty_range(self):
        with pytest.raises(ValueError):
            sweep_grid([], "n/2", "10n")

    def test_csv(self, tmp_path):
        path = write_sweep_csv(sweep_grid(range(1, 6), "1", "5"), tmp_path / "sweep.csv")
        with path.open(encoding="utf-8") as stream:
            rows = list(csv.reader(stream))
        assert tuple(rows[0]) == CSV_HEADER
        assert len(rows) == 6
        assert rows[1] == ["1", "1", "5", "117", "40", "0.658120"]


class TestParseRule:
    @pytest.mark.parametrize(
        ("text", "n", "expected"),
        [("5", 7, 5), ("n", 7, 7), ("10n", 7, 70), ("10*n", 7, 70), ("n/2", 7, 4), (3, 7, 3)],
    )
    def test_rules(self, text, n, expected):
        assert parse_rule(text)(n) == expected

    @pytest.mark.parametrize("text", ["", "n^2", "n/0", "two"])
    def test_invalid_rules(self, text):
        with pytest.raises(ValueError):
            parse_rule(text)


class TestMeasuredCost:
    @pytest.fixture
    def model(self):
        return TimeSeriesModel()

    @pytest.fixture
    def belief(self):
        return GaussianBelief(mean=[1.0], cov=[[1e-3]])

    @pytest.mark.parametrize(
        ("kind", "f_calls"), [(FilterKind.UKF, 3), (FilterKind.NEWKF, 3), (FilterKind.EKF, 1)]
    )
    def test_counts_model_calls_per_step(self, kind, f_calls, model, belief):
        cost = measured_cost(kind, model, belief, steps=20, warmup=5)
        assert cost.steps == 20
        assert cost.calls["f"] == f_calls
        assert cost.median_seconds > 0
        assert cost.total_seconds >= cost.median_seconds

    def test_particle_filter(self, model, belief):
        cost = measured_cost(
            FilterKind.PF, model, belief, steps=10, warmup=2, particles=ParticleSettings(count=50)
        )
        assert cost.calls["f"] == 50

    def test_short_simulation(self, model, belief):
        simulation = model.simulate(belief.mean, 30, np.random.default_rng(0))
        cost = measured_cost(
            FilterKind.EKF, model, belief, steps=100, warmup=10, simulation=simulation
        )
        assert cost.steps == 20

    def test_invalid_steps(self, model, belief):
        with pytest.raises(ValueError):
            measured_cost(FilterKind.EKF, model, belief, steps=0)

    def test_maglev_hybrid_step_evaluates_one_jacobian(self):
        config = ExperimentConfig(
            benchmark=Benchmark.B, filters=[FilterKind.NEWKF], scenario={"duration": 0.1}
        )
        model = system_model(config)
        simulation = measure_maglev(config, 0, model, simulate_maglev_truth(config, model))
        cost = measured_cost(
            FilterKind.NEWKF,
            model,
            initial_belief(config, model),
            steps=50,
            warmup=10,
            simulation=simulation,
        )
        assert cost.calls["f"] == 9
        assert cost.calls["jac_f"] == 1
