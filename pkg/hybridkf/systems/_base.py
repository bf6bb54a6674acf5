from __future__ import annotations

__all__ = ["Simulation", "SystemModel", "numeric_jacobian", "rk4_stages", "rk4_step"]

import logging
from abc import ABC, abstractmethod
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from hybridkf.exceptions import IntegrationError, NumericJacobianError
from hybridkf.gaussian import (
    FloatArray,
    batch_size,
    covariance_factor,
    gaussian_logpdf,
    symmetrize,
)
from hybridkf.instrument import record
from hybridkf.settings import JacobianMode

LOGGER = logging.getLogger(__name__)

STEP_SCALE = np.cbrt(np.finfo(float).eps)

Derivative = Callable[[FloatArray, object, float], FloatArray]


def numeric_jacobian(fn: Callable[[FloatArray], FloatArray], x: FloatArray) -> FloatArray:
    """Central-difference Jacobian of `fn` at `x`, shape (..., dim fn(x), dim x).

    The step for coordinate i is cbrt(eps) * max(1, |x_i|).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    steps = STEP_SCALE * np.maximum(1.0, np.abs(x))
    columns = []
    for index in range(x.shape[-1]):
        offset = np.zeros_like(x)
        offset[..., index] = steps[..., index]
        forward = np.asarray(fn(x + offset), dtype=float)
        backward = np.asarray(fn(x - offset), dtype=float)
        if not (np.all(np.isfinite(forward)) and np.all(np.isfinite(backward))):
            raise NumericJacobianError(coordinate=index)
        columns.append((forward - backward) / (2.0 * steps[..., index, None]))
    return np.stack(columns, axis=-1)


def rk4_stages(
    deriv: Derivative, x: FloatArray, u: object, t: float, dt: float
) -> tuple[FloatArray, FloatArray]:
    """One RK4 step and the four states its stages were evaluated at, shape (..., 4, n)."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(x, dtype=float)
    half = 0.5 * dt
    stages = []
    states = []
    state = x
    for index, (offset, weight) in enumerate(((0.0, half), (half, half), (half, dt), (dt, 0.0))):
        stage = np.asarray(deriv(state, u, t + offset), dtype=float)
        if not np.all(np.isfinite(stage)):
            raise IntegrationError(f"Non-finite derivative in RK4 stage {index + 1}")
        stages.append(stage)
        states.append(state)
        state = x + weight * stage
    k1, k2, k3, k4 = stages
    return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4), np.stack(states, axis=-2)


def rk4_step(deriv: Derivative, x: FloatArray, u: object, t: float, dt: float) -> FloatArray:
    return rk4_stages(deriv, x, u, t, dt)[0]


@dataclass(frozen=True, eq=False)
class Simulation:
    states: FloatArray
    measurements: FloatArray
    controls: FloatArray | None = None

    @property
    def steps(self: Simulation) -> int:
        return self.measurements.shape[0]


def _checked_cov(value: object, size: int, name: str) -> FloatArray:
    cov = np.atleast_2d(np.asarray(value, dtype=float))
    if cov.shape != (size, size):
        raise ValueError(f"{name} must be {size}x{size}, got shape {cov.shape}")
    cov = symmetrize(cov)
    eigenvalues = np.linalg.eigvalsh(cov)
    if eigenvalues[0] < -1e-9 * max(eigenvalues[-1], 0.0):
        raise ValueError(f"{name} must be positive semi-definite")
    cov.setflags(write=False)
    return cov


class SystemModel(ABC):
    """Discrete-time model x_k = f(x_{k-1}, u, k-1) + w, y_k = h(x_k, k) + v.

    Subclasses implement `_transition` and `_measure` on arrays with arbitrary leading batch
    axes and may supply analytic Jacobians. The public methods count evaluated points with
    `hybridkf.instrument` and pick analytic or numeric Jacobians according to `jacobian_mode`.
    """

    def __init__(
        self: SystemModel,
        n: int,
        m: int,
        process_cov: object,
        measurement_cov: object,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ):
        self.n = n
        self.m = m
        self.Q = _checked_cov(process_cov, n, "Q")
        self.R = _checked_cov(measurement_cov, m, "R")
        self.jacobian_mode = jacobian_mode
        self._process_factor = covariance_factor(self.Q)
        self._measurement_factor = covariance_factor(self.R)

    @abstractmethod
    def _transition(self: SystemModel, x: FloatArray, u: object, t: float) -> FloatArray: ...

    @abstractmethod
    def _measure(self: SystemModel, x: FloatArray, t: float) -> FloatArray: ...

    def _transition_jacobian(
        self: SystemModel,
        x: FloatArray,  # noqa: ARG002
        u: object,  # noqa: ARG002
        t: float,  # noqa: ARG002
    ) -> FloatArray | None:
        return None

    def _measure_jacobian(
        self: SystemModel,
        x: FloatArray,  # noqa: ARG002
        t: float,  # noqa: ARG002
    ) -> FloatArray | None:
        return None

    @property
    def has_analytic_jacobians(self: SystemModel) -> bool:
        return (
            type(self)._transition_jacobian is not SystemModel._transition_jacobian
            and type(self)._measure_jacobian is not SystemModel._measure_jacobian
        )

    def f(self: SystemModel, x: FloatArray, u: object = None, t: float = 0) -> FloatArray:
        x = np.asarray(x, dtype=float)
        record("f", batch_size(x.shape[:-1]))
        return self._transition(x, u, t)

    def h(self: SystemModel, x: FloatArray, t: float = 0) -> FloatArray:
        x = np.asarray(x, dtype=float)
        record("h", batch_size(x.shape[:-1]))
        return self._measure(x, t)

    def jac_f(self: SystemModel, x: FloatArray, u: object = None, t: float = 0) -> FloatArray:
        x = np.asarray(x, dtype=float)
        record("jac_f", batch_size(x.shape[:-1]))
        if self.jacobian_mode == JacobianMode.ANALYTIC:
            jacobian = self._transition_jacobian(x, u, t)
            if jacobian is not None:
                return jacobian
        return numeric_jacobian(lambda z: self._transition(z, u, t), x)

    def f_with_jacobian(
        self: SystemModel, points: FloatArray, u: object = None, t: float = 0
    ) -> tuple[FloatArray, FloatArray]:
        """`f` at every point of `points` (..., k, n) and `jac_f` at the first point of each set.

        Models whose Jacobian reuses work of the transition override this.
        """
        points = np.asarray(points, dtype=float)
        return self.f(points, u, t), self.jac_f(points[..., 0, :], u, t)

    def jac_h(self: SystemModel, x: FloatArray, t: float = 0) -> FloatArray:
        x = np.asarray(x, dtype=float)
        record("jac_h", batch_size(x.shape[:-1]))
        if self.jacobian_mode == JacobianMode.ANALYTIC:
            jacobian = self._measure_jacobian(x, t)
            if jacobian is not None:
                return jacobian
        return numeric_jacobian(lambda z: self._measure(z, t), x)

    def propagate(self: SystemModel, x: FloatArray, u: object = None, t: float = 0) -> FloatArray:
        """Noise-free transition for truth trajectories, left out of the call counts."""
        return self._transition(np.asarray(x, dtype=float), u, t)

    def observe(self: SystemModel, x: FloatArray, t: float = 0) -> FloatArray:
        """Noise-free measurement for truth trajectories, left out of the call counts."""
        return self._measure(np.asarray(x, dtype=float), t)

    def sample_process_noise(
        self: SystemModel, rng: np.random.Generator, shape: tuple[int, ...] = ()
    ) -> FloatArray:
        noise = rng.standard_normal((*shape, self.n))
        return noise @ self._process_factor.T

    def sample_measurement_noise(
        self: SystemModel, rng: np.random.Generator, shape: tuple[int, ...] = ()
    ) -> FloatArray:
        noise = rng.standard_normal((*shape, self.m))
        return noise @ self._measurement_factor.T

    def process_logpdf(
        self: SystemModel, x_next: FloatArray, x_prev: FloatArray, u: object, t: float
    ) -> FloatArray:
        return gaussian_logpdf(x_next, self._transition(x_prev, u, t), self.Q)

    def measurement_logpdf(self: SystemModel, y: FloatArray, x: FloatArray, t: float) -> FloatArray:
        return gaussian_logpdf(np.asarray(y, dtype=float), self.h(x, t), self.R)

    def simulate(
        self: SystemModel,
        x0: FloatArray,
        steps: int,
        rng: np.random.Generator,
        controls: Sequence[object] | None = None,
    ) -> Simulation:
        """Draw a truth trajectory of `steps` transitions and the measurement of each new state."""
        states = np.empty((steps + 1, self.n))
        measurements = np.empty((steps, self.m))
        states[0] = np.asarray(x0, dtype=float)
        for k in range(steps):
            u = None if controls is None else controls[k]
            states[k + 1] = self.propagate(states[k], u, k) + self.sample_process_noise(rng)
            measurements[k] = self.observe(states[k + 1], k + 1) + self.sample_measurement_noise(
                rng
            )
        return Simulation(
            states=states,
            measurements=measurements,
            controls=None if controls is None else np.asarray(controls, dtype=float),
        )
