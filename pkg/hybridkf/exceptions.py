from __future__ import annotations

__all__ = [
    "CardinalityError",
    "ConfigError",
    "DomainError",
    "FilterError",
    "HybridKFError",
    "InnovationCovarianceError",
    "IntegrationError",
    "ModelError",
    "NormalizationError",
    "NotPositiveSemiDefiniteError",
    "NumericJacobianError",
    "OracleNoiseError",
    "ParticleDegeneracyError",
    "ScenarioError",
    "UnsupportedModelError",
]


class HybridKFError(Exception):
    pass


class ConfigError(HybridKFError):
    pass


class NotPositiveSemiDefiniteError(HybridKFError, ValueError):
    def __init__(self: NotPositiveSemiDefiniteError, leading_minor: int):
        self.leading_minor = leading_minor
        super().__init__(
            f"Matrix is not positive semi-definite, leading minor of order {leading_minor} failed"
        )


class CardinalityError(HybridKFError, ValueError):
    pass


class NormalizationError(HybridKFError, ValueError):
    pass


class ModelError(HybridKFError):
    pass


class DomainError(ModelError):
    def __init__(self: DomainError, message: str, state: object = None):
        self.state = state
        super().__init__(message)


class IntegrationError(ModelError):
    pass


class NumericJacobianError(ModelError):
    def __init__(self: NumericJacobianError, coordinate: int):
        self.coordinate = coordinate
        super().__init__(f"Non-finite function output while perturbing coordinate {coordinate}")


class UnsupportedModelError(ModelError, ValueError):
    pass


class FilterError(HybridKFError):
    pass


class InnovationCovarianceError(FilterError):
    def __init__(self: InnovationCovarianceError, condition: float):
        self.condition = condition
        super().__init__(
            f"Innovation covariance is not invertible (condition estimate {condition:.3e})"
        )


class ParticleDegeneracyError(FilterError):
    pass


class OracleNoiseError(HybridKFError):
    pass


class ScenarioError(HybridKFError):
    pass
