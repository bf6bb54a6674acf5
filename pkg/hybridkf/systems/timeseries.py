from __future__ import annotations

__all__ = ["TimeSeriesModel", "timeseries_measure", "timeseries_process"]

import numpy as np
from scipy import stats

from hybridkf.exceptions import UnsupportedModelError
from hybridkf.gaussian import FloatArray
from hybridkf.settings import JacobianMode, TimeSeriesSettings
from hybridkf.systems._base import SystemModel


def timeseries_process(
    x: FloatArray | float, t: float, v: FloatArray | float, omega: float = 4e-2, phi: float = 0.5
) -> FloatArray | float:
    return 1.0 + np.sin(omega * np.pi * t) + phi * x + v


def timeseries_measure(
    x: FloatArray | float,
    t: float,
    noise: FloatArray | float,
    phi: float = 0.5,
    switch_time: int = 30,
) -> FloatArray | float:
    if t <= switch_time:
        return phi * x**2 + noise
    return phi * x - 2.0 + noise


class TimeSeriesModel(SystemModel):
    """Scalar growth model with Gamma process noise.

    The measurement switches from quadratic to linear after `switch_time`.

    The Gaussian filters see the Gamma noise through its first two moments: the mean is folded
    into `f` and the variance is `Q`, so the residual noise is zero-mean.
    """

    def __init__(
        self: TimeSeriesModel,
        omega: float = 4e-2,
        phi: float = 0.5,
        gamma_shape: float = 2.0,
        gamma_scale: float = 3.0,
        obs_noise_var: float = 1e-5,
        switch_time: int = 30,
        process_noise: bool = True,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ):
        if switch_time <= 0:
            raise ValueError(f"switch_time must be positive, got {switch_time}")
        if gamma_shape <= 0 or gamma_scale <= 0:
            raise ValueError("Gamma shape and scale must be positive")
        if obs_noise_var <= 0:
            raise ValueError("obs_noise_var must be positive")
        self.omega = omega
        self.phi = phi
        self.gamma_shape = gamma_shape
        self.gamma_scale = gamma_scale
        self.obs_noise_var = obs_noise_var
        self.switch_time = switch_time
        self.process_noise = process_noise
        self.noise_mean = gamma_shape * gamma_scale if process_noise else 0.0
        process_var = gamma_shape * gamma_scale**2 if process_noise else 0.0
        super().__init__(
            n=1,
            m=1,
            process_cov=[[process_var]],
            measurement_cov=[[obs_noise_var]],
            jacobian_mode=jacobian_mode,
        )

    @classmethod
    def from_settings(
        cls: type[TimeSeriesModel],
        settings: TimeSeriesSettings,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ) -> TimeSeriesModel:
        return cls(
            omega=settings.omega,
            phi=settings.phi,
            gamma_shape=settings.gamma_shape,
            gamma_scale=settings.gamma_scale,
            obs_noise_var=settings.obs_noise_var,
            switch_time=settings.switch_time,
            process_noise=settings.process_noise,
            jacobian_mode=jacobian_mode,
        )

    def _transition(
        self: TimeSeriesModel, x: FloatArray, u: object, t: float  # noqa: ARG002
    ) -> FloatArray:
        return timeseries_process(x, t, self.noise_mean, omega=self.omega, phi=self.phi)

    def _measure(self: TimeSeriesModel, x: FloatArray, t: float) -> FloatArray:
        return timeseries_measure(x, t, 0.0, phi=self.phi, switch_time=self.switch_time)

    def _transition_jacobian(
        self: TimeSeriesModel,
        x: FloatArray,
        u: object,  # noqa: ARG002
        t: float,  # noqa: ARG002
    ) -> FloatArray:
        return np.full((*x.shape, 1), self.phi)

    def _measure_jacobian(self: TimeSeriesModel, x: FloatArray, t: float) -> FloatArray:
        if t <= self.switch_time:
            return 2.0 * self.phi * x[..., None]
        return np.full((*x.shape, 1), self.phi)

    def sample_process_noise(
        self: TimeSeriesModel, rng: np.random.Generator, shape: tuple[int, ...] = ()
    ) -> FloatArray:
        if not self.process_noise:
            return np.zeros((*shape, 1))
        return rng.gamma(self.gamma_shape, self.gamma_scale, size=(*shape, 1)) - self.noise_mean

    def process_logpdf(
        self: TimeSeriesModel, x_next: FloatArray, x_prev: FloatArray, u: object, t: float
    ) -> FloatArray:
        if not self.process_noise:
            raise UnsupportedModelError("The noiseless time series has no transition density")
        drive = np.asarray(x_next, dtype=float) - self._transition(x_prev, u, t) + self.noise_mean
        return stats.gamma.logpdf(drive[..., 0], a=self.gamma_shape, scale=self.gamma_scale)
