from __future__ import annotations

__all__ = [
    "Benchmark",
    "ExperimentConfig",
    "FilterKind",
    "FilterSettings",
    "JacobianMode",
    "MaglevConstants",
    "MaglevScenario",
    "OutputSettings",
    "ParticleSettings",
    "ReportFormat",
    "SettingsEnum",
    "SettingsModel",
    "TimeSeriesSettings",
    "UtSettings",
    "default_config_path",
    "list_scenarios",
]

import hashlib
import json
import logging
from enum import Enum
from pathlib import Path
from typing import Any

import tomli_w as tomlwriter
from pydantic import (
    BaseModel,
    Field,
    NonNegativeFloat,
    PositiveFloat,
    PositiveInt,
    ValidationError,
    field_validator,
    model_validator,
)

from hybridkf import get_config_dir
from hybridkf.exceptions import ConfigError

try:
    import tomllib as tomlreader  # Python >= 3.11
except ModuleNotFoundError:
    import tomli as tomlreader  # Python < 3.11

LOGGER = logging.getLogger(__name__)

SCENARIO_DIR = Path(__file__).parent / "scenarios"


class SettingsEnum(Enum):
    @classmethod
    def _missing_(cls: type[SettingsEnum], value: object) -> SettingsEnum | None:
        if isinstance(value, str):
            for entry in cls:
                if entry.value.casefold() == value.casefold():
                    return entry
        return None

    @classmethod
    def load(cls: type[SettingsEnum], value: str) -> SettingsEnum:
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"`{value}` isn't a valid {cls.__name__}") from None

    def __lt__(self: SettingsEnum, other) -> int:  # noqa: ANN001
        if not isinstance(other, type(self)):
            raise NotImplementedError
        return self.value < other.value

    def __str__(self: SettingsEnum) -> str:
        return self.value


class Benchmark(SettingsEnum):
    A = "a"
    B = "b"


class FilterKind(SettingsEnum):
    EKF = "EKF"
    SSUKF = "SSUKF"
    SPUKF = "SPUKF"
    UKF = "UKF"
    NEWKF = "NewKF"
    PF = "PF"
    PF_EKF = "PF-EKF"
    PF_UKF = "PF-UKF"
    PF_NEWKF = "PF-NewKF"

    @property
    def is_particle(self: FilterKind) -> bool:
        return self.value.startswith("PF")


class ReportFormat(SettingsEnum):
    CSV = "csv"
    JSON = "json"
    MARKDOWN = "md"


class JacobianMode(SettingsEnum):
    ANALYTIC = "analytic"
    NUMERIC = "numeric"


class SettingsModel(
    BaseModel,
    populate_by_name=True,
    str_strip_whitespace=True,
    validate_assignment=True,
    extra="forbid",
):
    pass


class TimeSeriesSettings(SettingsModel):
    omega: float = Field(default=4e-2, description="Frequency of the forcing term (1/step)")
    phi: float = Field(default=0.5, description="State coefficient (dimensionless)")
    gamma_shape: PositiveFloat = Field(default=2.0, description="Process noise shape")
    gamma_scale: PositiveFloat = Field(default=3.0, description="Process noise scale")
    obs_noise_var: PositiveFloat = Field(default=1e-5, description="Measurement noise variance")
    switch_time: PositiveInt = Field(default=30, description="Last step of the quadratic branch")
    process_noise: bool = Field(default=True, description="Drive the truth with Gamma noise")
    x0: float = Field(default=1.0, description="Initial state")


class MaglevConstants(SettingsModel):
    mu0: PositiveFloat = Field(default=1.25663706212e-6, description="Vacuum permeability (H/m)")
    a_ag: PositiveFloat = Field(default=0.01, description="Air gap pole area (m^2)")
    n_turns: PositiveFloat = Field(default=500.0, description="Coil turns")
    h_c: float = Field(default=-9.0e5, description="Magnet coercivity (A/m), signed")
    l_pm: PositiveFloat = Field(default=0.01, description="Magnet length (m)")
    mu_r: PositiveFloat = Field(default=1.05, description="Magnet relative permeability")
    a_pm: PositiveFloat = Field(default=0.01, description="Magnet cross-section (m^2)")
    r_c: PositiveFloat = Field(default=1.0e4, description="Core reluctance term (A/Wb)")
    h_geom: PositiveFloat = Field(default=0.05, description="Core height (m)")
    r_l: PositiveFloat = Field(default=1.0e9, description="Leakage reluctance (A/Wb)")
    r_coil: PositiveFloat = Field(default=2.0, description="Coil resistance (ohm)")
    k_coeff: PositiveFloat = Field(default=1.5e-3, description="Inductance coefficient (H m)")
    g: PositiveFloat = Field(default=9.81, description="Gravitational acceleration (m/s^2)")


class MaglevScenario(SettingsModel):
    dt: PositiveFloat = Field(default=1e-3, description="Integration step (s)")
    duration: PositiveFloat = Field(default=2.0, description="Simulated time (s)")
    reference_gap: PositiveFloat = Field(default=0.01, description="Gap set point (m)")
    initial_mass: PositiveFloat = Field(default=110.0, description="True mass before the step (kg)")
    step_mass: PositiveFloat = Field(default=125.0, description="True mass after the step (kg)")
    step_time: NonNegativeFloat = Field(default=1.0, description="Time of the load step (s)")
    mass_estimate: PositiveFloat = Field(default=100.0, description="Initial mass estimate (kg)")
    gap_noise_std: PositiveFloat = Field(default=5e-5, description="Gap sensor noise std (m)")
    controller_mass: PositiveFloat = Field(default=100.0, description="Nominal control mass (kg)")
    kp: PositiveFloat = Field(default=900.0, description="Gap loop stiffness (1/s^2)")
    kd: PositiveFloat = Field(default=60.0, description="Gap loop damping (1/s)")
    kc: PositiveFloat = Field(default=300.0, description="Current loop bandwidth (1/s)")
    q_gap: NonNegativeFloat = Field(default=1e-12, description="Gap process variance (m^2)")
    q_velocity: NonNegativeFloat = Field(default=1e-8, description="Velocity variance (m^2/s^2)")
    q_current: NonNegativeFloat = Field(default=1e-6, description="Current variance (A^2)")
    q_mass: NonNegativeFloat = Field(default=1e-2, description="Mass random-walk variance (kg^2)")
    p0_gap: PositiveFloat = Field(default=1e-8, description="Initial gap variance (m^2)")
    p0_velocity: PositiveFloat = Field(default=1e-6, description="Initial velocity variance")
    p0_current: PositiveFloat = Field(default=1.0, description="Initial current variance (A^2)")
    p0_mass: PositiveFloat = Field(default=100.0, description="Initial mass variance (kg^2)")

    @property
    def steps(self: MaglevScenario) -> int:
        return round(self.duration / self.dt)


class UtSettings(SettingsModel):
    lambda_: float | None = Field(
        default=None, alias="lambda", description="Spread parameter, 3 - n when unset"
    )
    w0_simplex: float = Field(default=0.5, ge=0.0, lt=1.0, description="Simplex center weight")


class ParticleSettings(SettingsModel):
    count: PositiveInt = Field(default=200, description="Particles per filter")
    p0: PositiveFloat = Field(default=1e-3, description="Per-particle proposal variance")
    resample_threshold: float = Field(
        default=0.5, gt=0.0, le=1.0, description="Resample when ESS < threshold * N"
    )
    prior_share: float = Field(
        default=0.1,
        ge=0.0,
        lt=1.0,
        description="Share of Kalman-proposal particles drawn from the transition prior",
    )


class FilterSettings(SettingsModel):
    initial_variance: PositiveFloat = Field(default=1e-3, description="P0 for benchmark A")
    joseph_form: bool = True
    jacobian_mode: JacobianMode = JacobianMode.ANALYTIC
    condition_limit: PositiveFloat = 1e12
    newkf_redraw: bool = False


class OutputSettings(SettingsModel):
    path: Path | None = None
    format: ReportFormat = ReportFormat.CSV
    include_timing: bool = True
    trace_run: int | None = Field(default=None, ge=0)


class ExperimentConfig(SettingsModel):
    benchmark: Benchmark = Benchmark.A
    filters: list[FilterKind] = Field(default_factory=lambda: list(FilterKind), min_length=1)
    mc_runs: PositiveInt = 1000
    horizon: PositiveInt = 60
    seed: int = Field(default=0, ge=0, lt=2**63)
    workers: int = Field(default=1, description="Parallel processes, -1 for all cores")
    timing_steps: PositiveInt = 1000
    timing_warmup: int = Field(default=100, ge=0)
    measure_timing: bool = True
    timeseries: TimeSeriesSettings = TimeSeriesSettings()
    maglev: MaglevConstants = MaglevConstants()
    scenario: MaglevScenario = MaglevScenario()
    ut: UtSettings = UtSettings()
    particles: ParticleSettings = ParticleSettings()
    filter: FilterSettings = FilterSettings()
    output: OutputSettings = OutputSettings()

    @field_validator("filters", mode="after")
    def validate_filters(cls: type[ExperimentConfig], v: list[FilterKind]) -> list[FilterKind]:
        return list(dict.fromkeys(v))

    @field_validator("workers", mode="after")
    def validate_workers(cls: type[ExperimentConfig], v: int) -> int:
        if v == 0 or v < -1:
            raise ValueError("workers must be positive or -1")
        return v

    @model_validator(mode="after")
    def validate_benchmark(self: ExperimentConfig) -> ExperimentConfig:
        if self.benchmark == Benchmark.B:
            unsupported = [
                x
                for x in self.filters
                if x.is_particle or x in (FilterKind.SSUKF, FilterKind.SPUKF)
            ]
            if unsupported:
                names = ", ".join(map(str, unsupported))
                raise ValueError(f"Benchmark b runs EKF, UKF and NewKF only, got {names}")
        if not self.timeseries.process_noise and any(x.is_particle for x in self.filters):
            raise ValueError("Particle filters need process noise to weight their particles")
        return self

    @classmethod
    def from_file(cls: type[ExperimentConfig], path: Path) -> ExperimentConfig:
        try:
            with path.open("rb") as stream:
                content = tomlreader.load(stream)
        except OSError as err:
            raise ConfigError(f"Unable to read {path}: {err}") from err
        except tomlreader.TOMLDecodeError as err:
            raise ConfigError(f"{path} isn't valid TOML: {err}") from err
        try:
            return cls(**content)
        except ValidationError as err:
            raise ConfigError(f"{path} isn't a valid experiment config:\n{err}") from err

    @classmethod
    def load(cls: type[ExperimentConfig], path: Path | None = None) -> ExperimentConfig:
        if path is None:
            path = default_config_path()
            if not path.exists():
                LOGGER.info("Writing default config to %s", path)
                cls().save(path=path)
        return cls.from_file(path=path)

    @classmethod
    def load_scenario(cls: type[ExperimentConfig], name: str) -> ExperimentConfig:
        path = SCENARIO_DIR / f"{name}.toml"
        if not path.exists():
            raise ConfigError(
                f"Unknown scenario `{name}`, expected one of: {', '.join(list_scenarios())}"
            )
        return cls.from_file(path=path)

    def to_toml_dict(self: ExperimentConfig) -> dict[str, Any]:
        return self.model_dump(mode="json", by_alias=True, exclude_none=True)

    def dumps(self: ExperimentConfig) -> str:
        return tomlwriter.dumps(self.to_toml_dict())

    def save(self: ExperimentConfig, path: Path | None = None) -> ExperimentConfig:
        path = path or default_config_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as stream:
            tomlwriter.dump(self.to_toml_dict(), stream)
        return self

    def config_hash(self: ExperimentConfig) -> str:
        content = self.model_dump(mode="json", by_alias=True, exclude={"output"})
        canonical = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_config_path() -> Path:
    return get_config_dir() / "experiment.toml"


def list_scenarios() -> list[str]:
    return sorted(x.stem for x in SCENARIO_DIR.glob("*.toml"))
