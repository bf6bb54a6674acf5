__all__ = [
    "FunctionalModel",
    "GapController",
    "LinearModel",
    "MaglevModel",
    "Simulation",
    "SystemModel",
    "TimeSeriesModel",
    "maglev_derivative",
    "numeric_jacobian",
    "polynomial_test_model",
    "rk4_stages",
    "rk4_step",
    "timeseries_measure",
    "timeseries_process",
]

from hybridkf.systems._base import Simulation, SystemModel, numeric_jacobian, rk4_stages, rk4_step
from hybridkf.systems.functional import FunctionalModel, LinearModel, polynomial_test_model
from hybridkf.systems.maglev import GapController, MaglevModel, maglev_derivative
from hybridkf.systems.timeseries import TimeSeriesModel, timeseries_measure, timeseries_process
