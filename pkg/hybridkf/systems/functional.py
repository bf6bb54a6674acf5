from __future__ import annotations

__all__ = ["FunctionalModel", "LinearModel", "polynomial_test_model"]

from collections.abc import Callable, Sequence

import numpy as np

from hybridkf.exceptions import UnsupportedModelError
from hybridkf.gaussian import FloatArray
from hybridkf.settings import JacobianMode
from hybridkf.systems._base import SystemModel

Transition = Callable[[FloatArray, object, float], FloatArray]
Measurement = Callable[[FloatArray, float], FloatArray]


class FunctionalModel(SystemModel):
    """System model built from plain callables.

    Every callable must accept states with leading batch axes, shape (..., n).
    """

    def __init__(
        self: FunctionalModel,
        transition: Transition,
        measurement: Measurement,
        process_cov: object,
        measurement_cov: object,
        transition_jacobian: Transition | None = None,
        measurement_jacobian: Measurement | None = None,
        jacobian_mode: JacobianMode = JacobianMode.ANALYTIC,
    ):
        process_cov = np.atleast_2d(np.asarray(process_cov, dtype=float))
        measurement_cov = np.atleast_2d(np.asarray(measurement_cov, dtype=float))
        super().__init__(
            n=process_cov.shape[0],
            m=measurement_cov.shape[0],
            process_cov=process_cov,
            measurement_cov=measurement_cov,
            jacobian_mode=jacobian_mode,
        )
        self.transition = transition
        self.measurement = measurement
        self.transition_jacobian = transition_jacobian
        self.measurement_jacobian = measurement_jacobian

    @property
    def has_analytic_jacobians(self: FunctionalModel) -> bool:
        return self.transition_jacobian is not None and self.measurement_jacobian is not None

    def _transition(self: FunctionalModel, x: FloatArray, u: object, t: float) -> FloatArray:
        return np.asarray(self.transition(x, u, t), dtype=float)

    def _measure(self: FunctionalModel, x: FloatArray, t: float) -> FloatArray:
        return np.asarray(self.measurement(x, t), dtype=float)

    def _transition_jacobian(
        self: FunctionalModel, x: FloatArray, u: object, t: float
    ) -> FloatArray | None:
        if self.transition_jacobian is None:
            return None
        return np.asarray(self.transition_jacobian(x, u, t), dtype=float)

    def _measure_jacobian(self: FunctionalModel, x: FloatArray, t: float) -> FloatArray | None:
        if self.measurement_jacobian is None:
            return None
        return np.asarray(self.measurement_jacobian(x, t), dtype=float)


class LinearModel(SystemModel):
    """x_k = A x_{k-1} + B u + w, y_k = C x_k + v."""

    def __init__(
        self: LinearModel,
        A: object,  # noqa: N803
        C: object,  # noqa: N803
        process_cov: object,
        measurement_cov: object,
        B: object | None = None,  # noqa: N803
    ):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.C = np.atleast_2d(np.asarray(C, dtype=float))
        self.B = None if B is None else np.atleast_2d(np.asarray(B, dtype=float))
        super().__init__(
            n=self.A.shape[0],
            m=self.C.shape[0],
            process_cov=process_cov,
            measurement_cov=measurement_cov,
        )
        if self.A.shape != (self.n, self.n) or self.C.shape[1] != self.n:
            raise ValueError(f"Incompatible shapes A {self.A.shape} and C {self.C.shape}")

    def _transition(
        self: LinearModel, x: FloatArray, u: object, t: float  # noqa: ARG002
    ) -> FloatArray:
        result = x @ self.A.T
        if self.B is not None and u is not None:
            result = result + np.atleast_1d(np.asarray(u, dtype=float)) @ self.B.T
        return result

    def _measure(self: LinearModel, x: FloatArray, t: float) -> FloatArray:  # noqa: ARG002
        return x @ self.C.T

    def _transition_jacobian(
        self: LinearModel,
        x: FloatArray,
        u: object,  # noqa: ARG002
        t: float,  # noqa: ARG002
    ) -> FloatArray:
        return np.broadcast_to(self.A, (*x.shape[:-1], self.n, self.n))

    def _measure_jacobian(self: LinearModel, x: FloatArray, t: float) -> FloatArray:  # noqa: ARG002
        return np.broadcast_to(self.C, (*x.shape[:-1], self.m, self.n))


def polynomial_test_model(
    degree: int,
    coeffs: Sequence[float],
    process_var: float = 0.0,
    measurement_var: float = 1.0,
) -> FunctionalModel:
    """Scalar model whose f and h are both the polynomial `coeffs`, highest power first."""
    if degree not in (1, 2, 3, 4):
        raise UnsupportedModelError(f"Polynomial degree must be 1 to 4, got {degree}")
    coefficients = np.asarray(coeffs, dtype=float)
    if coefficients.shape != (degree + 1,):
        raise ValueError(f"A degree {degree} polynomial takes {degree + 1} coefficients")
    derivative = np.polyder(coefficients)

    def value(x: FloatArray, *_: object) -> FloatArray:
        return np.polyval(coefficients, x)

    def slope(x: FloatArray, *_: object) -> FloatArray:
        return np.polyval(derivative, x)[..., None]

    return FunctionalModel(
        transition=value,
        measurement=value,
        process_cov=[[process_var]],
        measurement_cov=[[measurement_var]],
        transition_jacobian=slope,
        measurement_jacobian=slope,
    )
