from __future__ import annotations

__all__ = ["GapController", "MaglevModel", "maglev_derivative"]

import logging
import math
from dataclasses import dataclass

import numpy as np

from hybridkf.exceptions import DomainError
from hybridkf.gaussian import FloatArray, batch_size
from hybridkf.instrument import record
from hybridkf.settings import JacobianMode, MaglevConstants, MaglevScenario
from hybridkf.systems._base import SystemModel, rk4_stages, rk4_step

LOGGER = logging.getLogger(__name__)


def _split(x: FloatArray) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray]:
    return x[..., 0], x[..., 1], x[..., 2], x[..., 3]


def maglev_derivative(x: FloatArray, u: object, model: MaglevModel) -> FloatArray:
    """Time derivative of the augmented state (air gap, velocity, coil current, mass)."""
    x = np.asarray(x, dtype=float)
    gap, velocity, current, mass = _split(x)
    if np.any(gap <= 0) or np.any(mass <= 0):
        raise DomainError("Air gap and mass must stay positive", state=x)
    voltage = np.asarray(0.0 if u is None else u, dtype=float)
    constants = model.constants
    span = 2.0 * gap + model.gap_offset
    flux = constants.n_turns * current - model.magnet_mmf
    acceleration = -model.force_coefficient * flux**2 / (mass * span**2) + constants.g
    current_rate = (
        velocity * current / gap
        - constants.r_coil * gap * current / constants.k_coeff
        + gap * voltage / constants.k_coeff
    )
    return np.stack([velocity, acceleration, current_rate, np.zeros_like(gap)], axis=-1)


def _derivative_jacobian(x: FloatArray, u: object, model: MaglevModel) -> FloatArray:
    gap, velocity, current, mass = _split(x)
    voltage = np.asarray(0.0 if u is None else u, dtype=float)
    constants = model.constants
    span = 2.0 * gap + model.gap_offset
    flux = constants.n_turns * current - model.magnet_mmf
    pull = model.force_coefficient * flux / (mass * span**2)
    r_over_k = constants.r_coil / constants.k_coeff

    jacobian = np.zeros((*x.shape, 4))
    jacobian[..., 0, 1] = 1.0
    jacobian[..., 1, 0] = 4.0 * pull * flux / span
    jacobian[..., 1, 2] = -2.0 * pull * constants.n_turns
    jacobian[..., 1, 3] = pull * flux / mass
    jacobian[..., 2, 0] = (
        -velocity * current / gap**2 - r_over_k * current + voltage / constants.k_coeff
    )
    jacobian[..., 2, 1] = current / gap
    jacobian[..., 2, 2] = velocity / gap - r_over_k * gap
    return jacobian


class MaglevModel(SystemModel):
    """Hybrid permanent-magnet suspension with the load mass appended to the state.

    `f` is one RK4 step of the continuous dynamics and `h` reads the air gap. The analytic
    transition Jacobian is carried through the four RK4 stages.
    """

    def __init__(
        self: MaglevModel,
        constants: MaglevConstants | None = None,
        dt: float = 1e-3,
        process_cov: object = None,
        gap_noise_var: float = 2.5e-9,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ):
        if dt <= 0:
            raise ValueError(f"dt must be positive, got {dt}")
        self.constants = constants or MaglevConstants()
        self.dt = dt
        c = self.constants
        self.force_coefficient = c.mu0 * c.a_ag
        self.magnet_mmf = c.h_c * c.l_pm
        self.gap_offset = (
            c.l_pm * c.a_ag / (c.mu_r * c.a_pm)
            + c.r_c * (c.h_geom / c.r_l + c.mu0 * c.a_ag)
            + c.h_geom * c.l_pm / (c.mu0 * c.mu_r * c.a_pm * c.r_l)
        )
        super().__init__(
            n=4,
            m=1,
            process_cov=np.zeros((4, 4)) if process_cov is None else process_cov,
            measurement_cov=[[gap_noise_var]],
            jacobian_mode=jacobian_mode,
        )

    @classmethod
    def from_settings(
        cls: type[MaglevModel],
        constants: MaglevConstants,
        scenario: MaglevScenario,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ) -> MaglevModel:
        return cls(
            constants=constants,
            dt=scenario.dt,
            process_cov=np.diag(
                [scenario.q_gap, scenario.q_velocity, scenario.q_current, scenario.q_mass]
            ),
            gap_noise_var=scenario.gap_noise_std**2,
            jacobian_mode=jacobian_mode,
        )

    def derivative(
        self: MaglevModel, x: FloatArray, u: object, t: float  # noqa: ARG002
    ) -> FloatArray:
        return maglev_derivative(x, u, self)

    def holding_current(
        self: MaglevModel, gap: float, mass: float, acceleration: float = 0.0
    ) -> float:
        """Coil current giving `acceleration` at `gap` for `mass`, on the attracting branch."""
        span = 2.0 * gap + self.gap_offset
        demand = max(self.constants.g - acceleration, 0.0)
        flux = span * math.sqrt(demand * mass / self.force_coefficient)
        return (flux + self.magnet_mmf) / self.constants.n_turns

    def _transition(self: MaglevModel, x: FloatArray, u: object, t: float) -> FloatArray:
        return rk4_step(self.derivative, x, u, t * self.dt, self.dt)

    def _measure(self: MaglevModel, x: FloatArray, t: float) -> FloatArray:  # noqa: ARG002
        return x[..., :1]

    def _chained_jacobian(self: MaglevModel, states: FloatArray, u: object) -> FloatArray:
        """Jacobian of one RK4 step from the (..., 4, n) states its stages were evaluated at."""
        dt = self.dt
        identity = np.eye(4)
        stage = _derivative_jacobian(states, u, self)
        j1 = stage[..., 0, :, :]
        j2 = stage[..., 1, :, :] @ (identity + 0.5 * dt * j1)
        j3 = stage[..., 2, :, :] @ (identity + 0.5 * dt * j2)
        j4 = stage[..., 3, :, :] @ (identity + dt * j3)
        return identity + dt / 6.0 * (j1 + 2.0 * j2 + 2.0 * j3 + j4)

    def _transition_jacobian(self: MaglevModel, x: FloatArray, u: object, t: float) -> FloatArray:
        _, states = rk4_stages(self.derivative, x, u, t * self.dt, self.dt)
        return self._chained_jacobian(states, u)

    def f_with_jacobian(
        self: MaglevModel, points: FloatArray, u: object = None, t: float = 0
    ) -> tuple[FloatArray, FloatArray]:
        """One batched RK4 pass; the Jacobian reuses the stage states of the first point."""
        if self.jacobian_mode != JacobianMode.ANALYTIC:
            return super().f_with_jacobian(points, u, t)
        points = np.asarray(points, dtype=float)
        record("f", batch_size(points.shape[:-1]))
        record("jac_f", batch_size(points.shape[:-2]))
        propagated, states = rk4_stages(self.derivative, points, u, t * self.dt, self.dt)
        return propagated, self._chained_jacobian(states[..., 0, :, :], u)

    def _measure_jacobian(self: MaglevModel, x: FloatArray, t: float) -> FloatArray:  # noqa: ARG002
        jacobian = np.zeros((*x.shape[:-1], 1, 4))
        jacobian[..., 0, 0] = 1.0
        return jacobian


@dataclass(frozen=True)
class GapController:
    """Voltage law that holds the truth plant near its set point.

    A PD loop on the gap asks for an acceleration, the magnet force for that acceleration is
    inverted for a current with a nominal mass, and an exact current loop picks the voltage.
    """

    model: MaglevModel
    reference_gap: float
    nominal_mass: float
    kp: float
    kd: float
    kc: float

    @classmethod
    def from_scenario(
        cls: type[GapController], model: MaglevModel, scenario: MaglevScenario
    ) -> GapController:
        return cls(
            model=model,
            reference_gap=scenario.reference_gap,
            nominal_mass=scenario.controller_mass,
            kp=scenario.kp,
            kd=scenario.kd,
            kc=scenario.kc,
        )

    def voltage(self: GapController, x: FloatArray) -> float:
        gap, velocity, current, _ = (float(v) for v in x)
        if gap <= 0:
            raise DomainError("Air gap must stay positive", state=x)
        desired = -self.kp * (gap - self.reference_gap) - self.kd * velocity
        target = self.model.holding_current(gap, self.nominal_mass, acceleration=desired)
        constants = self.model.constants
        return (constants.k_coeff / gap) * (
            self.kc * (target - current) - velocity * current / gap
        ) + constants.r_coil * current
