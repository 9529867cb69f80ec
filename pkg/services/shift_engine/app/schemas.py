from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config.presets import DEFAULT_SNAPSHOT_BLOCKS, SETTING_DEFAULTS
from .core.objectives import Setting
from .worker import JobStatus

SCHEMA_VERSION = 1


class ThetaStarRule(str, Enum):
    HARMONIC = "harmonic"
    CUSTOM = "custom"


class InitialLaw(str, Enum):
    SUBSPACE = "subspace"
    AMBIENT = "ambient"


class RateModel(str, Enum):
    EXP_DECAY = "exp_decay"
    POLY_LOG = "poly_log"


def _split_list(value):
    if isinstance(value, str):
        items = [item.strip() for item in value.split(",")]
        return [item for item in items if item]
    return value


class ExperimentConfig(BaseModel):
    """One experiment; None fields are resolved from the per-setting defaults."""

    model_config = ConfigDict(extra="forbid")

    setting: Setting = Setting.REGRESSION
    d: int = Field(default=200, ge=1)
    subspace_rank: int = Field(default=100, ge=1)
    theta_star_rule: ThetaStarRule = ThetaStarRule.HARMONIC
    theta_star_custom: Optional[List[float]] = None
    gamma: Optional[float] = None
    n_particles: int = Field(default=100, ge=1)
    T: int = Field(default=40, ge=0)
    snapshots: Optional[List[int]] = None
    record_every: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)
    subspace_seed: Optional[int] = Field(default=None, ge=0)
    initial_law: Optional[InitialLaw] = None
    basin_c: float = Field(default=5.0, gt=0)
    learner_eta: Optional[float] = Field(default=None, ge=0)
    learner_steps: int = Field(default=1, ge=1)
    learner_samples: Optional[int] = Field(default=None, ge=1)
    learner_noise_free: bool = False
    with_learner: bool = False
    plateau_steps: int = Field(default=5000, ge=1)

    @field_validator("theta_star_custom", "snapshots", mode="before")
    @classmethod
    def _comma_lists(cls, value):
        return _split_list(value)

    @field_validator("gamma")
    @classmethod
    def _positive_step(cls, value):
        if value is not None and not value > 0:
            raise ValueError("step size must be positive")
        return value

    @model_validator(mode="after")
    def _resolve(self):
        defaults = SETTING_DEFAULTS[self.setting.value]
        if self.subspace_rank > self.d:
            raise ValueError("subspace_rank must not exceed d")
        if self.theta_star_rule is ThetaStarRule.CUSTOM:
            if not self.theta_star_custom or len(self.theta_star_custom) != self.d:
                raise ValueError("theta_star_custom must list exactly d values")
        if self.subspace_seed is None:
            self.subspace_seed = self.seed
        if self.gamma is None:
            self.gamma = defaults["gamma"]
        if self.learner_eta is None:
            self.learner_eta = defaults["learner_eta"]
        if self.initial_law is None:
            self.initial_law = InitialLaw(defaults["initial_law"])
        if self.learner_samples is None:
            self.learner_samples = self.n_particles
        if self.learner_samples > self.n_particles:
            raise ValueError("learner_samples must not exceed n_particles")
        if self.snapshots is None:
            every = self.record_every or max(1, self.T // DEFAULT_SNAPSHOT_BLOCKS)
            times = list(range(0, self.T + 1, every))
            if times[-1] != self.T:
                times.append(self.T)
            self.snapshots = times
        if not self.snapshots:
            raise ValueError("snapshots must not be empty")
        if self.snapshots != sorted(set(self.snapshots)):
            raise ValueError("snapshots must be strictly increasing")
        if self.snapshots[0] < 0 or self.snapshots[-1] > self.T:
            raise ValueError("snapshots must lie within [0, T]")
        return self

    def echo(self) -> Dict[str, Any]:
        return self.model_dump(mode="json")


class RateFit(BaseModel):
    """
    Least-squares rate fit over one record window.

    exp_decay regresses the mean log-odds of misalignment, log((1 − align_b²)/align_b²),
    on t. That quantity is exactly linear in t for the regression closed form and
    differs from log(1 − align_b²) by log(align_b²), which tends to 0, so both share
    the asymptotic slope −2·log(1+γ̃).
    poly_log regresses mean log(1 − align_c) on log t.
    """

    model: RateModel
    slope: float
    intercept: float
    r2: float = Field(ge=0.0, le=1.0)
    predicted_c_or_exponent: float
    n_points: int
    t_min: int
    t_max: int
    closed_form_points: int = 0

    @property
    def fitted_rate(self) -> float:
        """−slope: the decay rate c for exp_decay, the exponent magnitude for poly_log."""
        return -self.slope


class RunHeader(BaseModel):
    """Header echoed at the top of every output file."""

    schema_name: str
    schema_version: int = SCHEMA_VERSION
    code_version: str
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)


class LearnerReport(BaseModel):
    setting: Setting
    T: int
    n: int
    eta: float
    steps: int
    noise_free: bool
    err_norm: float
    curse_ratio: Optional[float] = None
    along_star: float
    along_b: float
    residual: float
    n_degenerate: int = 0
    theta1: List[float] = Field(default_factory=list)


class SweepRow(BaseModel):
    index: int
    status: JobStatus
    error: Optional[str] = None
    setting: Setting
    gamma: float
    subspace_rank: int
    seed: int
    r: Optional[float] = None
    gamma_tilde: Optional[float] = None
    eta: Optional[float] = None
    final_align_b_mean: Optional[float] = None
    final_align_c_mean: Optional[float] = None
    rate_slope: Optional[float] = None
    rate_predicted: Optional[float] = None
    plateau_L: Optional[float] = None
    plateau_target: Optional[float] = None
    learner_err_norm: Optional[float] = None
    learner_curse_ratio: Optional[float] = None


class Manifest(BaseModel):
    figure: str
    code_version: str
    schema_version: int = SCHEMA_VERSION
    config: Dict[str, Any]
    derived: Dict[str, float] = Field(default_factory=dict)
    markers: Dict[str, List[float]] = Field(default_factory=dict)
    stationary_particles: List[int] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)
