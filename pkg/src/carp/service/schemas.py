"""Request/response models for the service and the config-file schema."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1

Variant = Literal["mln", "copula"]


class EventIn(BaseModel):
    model_config = ConfigDict(extra="forbid")

    time: float
    event_type: int = Field(ge=1, le=2)
    covariates: tuple[float, float] = (0.0, 0.0)
    duration: float | None = None


class HistoryPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    events: list[EventIn]
    termination: float
    origin: str | None = None


class IngestRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    csv_text: str
    mapping: dict[str, int] | None = None
    date_min: str | None = None
    date_max: str | None = None


class OptimizerOptions(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_starts: int = 8
    jitter: float = 0.3
    use_nelder_mead: bool = True
    nm_maxiter: int = 3000
    qn_maxiter: int = 500
    freeze_b: bool = False


class FitRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    history: HistoryPayload
    variant: Variant = "mln"
    optimizer: OptimizerOptions = OptimizerOptions()
    seed: int | None = None


class FitResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    variant: Variant
    estimates: dict[str, float]
    se: dict[str, float]
    ci95: dict[str, tuple[float, float]]
    loglik: float
    k: int
    aic: float
    tau: float
    tau_se: float
    tau_ci95: tuple[float, float]
    convergence: dict
    flags: list[str]
    n_events: int
    seed: int | None
    config_hash: str


class CovariateLawPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["lognormal", "none"] = "lognormal"
    mu: tuple[float, float] = (-0.66, -0.66)
    sigma: tuple[float, float] = (0.40, 0.40)


class ModelParams(BaseModel):
    """Natural parameters keyed by name; ``dep`` is eta or alpha per variant."""

    model_config = ConfigDict(extra="forbid")

    mu1: float = 1.0
    mu2: float = 1.5
    sigma1: float = 0.25
    sigma2: float = 0.25
    dep: float = 1.5
    b11: float = 1.5
    b12: float = 0.0
    b21: float = 0.0
    b22: float = 0.1

    def as_vector(self) -> list[float]:
        return [self.mu1, self.mu2, self.sigma1, self.sigma2, self.dep,
                self.b11, self.b12, self.b21, self.b22]


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variant: Variant = "copula"
    params: ModelParams = ModelParams()
    n_events: int = Field(default=1000, ge=1)
    covariate_law: CovariateLawPayload = CovariateLawPayload()
    seed: int = 0
    mapping: dict[str, int] | None = None


class SimulateResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    history: HistoryPayload
    csv_text: str
    seed: int
    config_hash: str


class ScenarioPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    label: str
    variant: Variant
    params: ModelParams = ModelParams()
    n_events: int = Field(ge=1)


class FitSpecPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    variant: Variant
    zero_b: bool = False


class StudyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    scenarios: list[ScenarioPayload]
    fits: list[FitSpecPayload]
    replicates: int = Field(default=100, ge=1)
    covariate_law: CovariateLawPayload = CovariateLawPayload()
    master_seed: int = 0
    optimizer: OptimizerOptions | None = None
    compute_coverage: bool = False


class StudyRowPayload(BaseModel):
    scenario: str
    truth_variant: Variant
    n_events: int
    tau_true: float
    fitted_variant: Variant
    zero_b: bool
    n_ok: int
    n_failed: int
    mean_aic: float
    mse: dict[str, float]
    coverage: dict[str, int]


class StudyResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    rows: list[StudyRowPayload]
    replicates: int
    master_seed: int
    csv_text: str
    config_hash: str


class DiagnoseRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    history: HistoryPayload
    variant: Variant
    params: ModelParams
    grid_step: float | None = Field(default=None, gt=0)


class IntensitySeries(BaseModel):
    t: list[float]
    estimated: list[float]
    observed: list[int]


class DiagnoseResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    series: dict[str, IntensitySeries]
    config_hash: str


class SummaryRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    history: HistoryPayload


class TypeSummary(BaseModel):
    count: int
    gap_mean: float | None
    gap_sd: float | None
    duration_mean: float | None
    duration_sd: float | None


class SummaryResponse(BaseModel):
    schema_version: int = SCHEMA_VERSION
    n: int
    termination: float
    per_type: dict[str, TypeSummary]


class RunConfig(BaseModel):
    """Schema for the CLI --config file; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid")

    variant: Variant = "mln"
    mapping: dict[str, int] | None = None
    date_min: str | None = None
    date_max: str | None = None
    seed: int = 0
    grid_step: float | None = None
    optimizer: OptimizerOptions = OptimizerOptions()
    simulate: SimulateRequest | None = None
    study: StudyRequest | None = None
