import numpy as np
import pytest

from hybridkf.gaussian import GaussianBelief
from hybridkf.systems import LinearModel


@pytest.fixture(autouse=True)
def isolated_dirs(tmp_path, monkeypatch):
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path / "config"))
    monkeypatch.setenv("XDG_DATA_HOME", str(tmp_path / "data"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def random_cov(rng):
    def build(n: int, floor: float = 0.1) -> np.ndarray:
        factor = rng.standard_normal((n, n))
        return factor @ factor.T + floor * np.eye(n)

    return build


@pytest.fixture
def linear_model():
    return LinearModel(
        A=[[0.9, 0.1, 0.0], [0.0, 0.8, 0.1], [0.05, 0.0, 0.7]],
        C=[[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]],
        process_cov=0.1 * np.eye(3),
        measurement_cov=0.2 * np.eye(2),
    )


@pytest.fixture
def linear_belief():
    return GaussianBelief(mean=[1.0, -0.5, 0.25], cov=np.eye(3))
