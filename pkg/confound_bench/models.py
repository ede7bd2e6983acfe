"""
models.py – Pydantic schemas: scenario configuration, experiment files, HTTP payloads.
"""
from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Method = Literal["IV", "OLS", "FE", "LMM"]
Scenario = Literal["W_only", "B_only", "W_and_B"]
ConfounderMode = Literal["W_only", "B_only", "W_and_B", "none"]
Regime = Literal["m_infty_fixed_n", "m_and_n_infty"]
CovariateLevel = Literal["within", "between"]

METHODS: tuple[Method, ...] = ("IV", "OLS", "FE", "LMM")
SCENARIOS: tuple[Scenario, ...] = ("W_only", "B_only", "W_and_B")
REGIMES: tuple[Regime, ...] = ("m_infty_fixed_n", "m_and_n_infty")

PSD_TOL = 1e-12


class CovariateSpec(BaseModel):
    """One measured covariate column: varies within clusters or is cluster-constant."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    level: CovariateLevel
    mean: float = 0.0
    sd: float = Field(default=1.0, ge=0)


DEFAULT_COVARIATES = (
    CovariateSpec(level="within", mean=0.0, sd=1.0),     # C_2ij ~ N(0, 1)
    CovariateSpec(level="between", mean=11.0, sd=1.0),   # C_3i  ~ N(11, 1)
)


# ── Scenario ──────────────────────────────────────────────────────────────────

class ScenarioConfig(BaseModel):
    """True-model parameters. Defaults are the published simulation design."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    m: int = Field(default=200, ge=2, description="Number of clusters")
    n: int = Field(default=20, ge=1, description="Common cluster size")
    beta: float = Field(default=0.7, description="True exposure effect")

    alpha_0: float = Field(default=18.0, description="Intercept of the exposure model")
    beta_0: float = Field(default=3.0, description="Intercept of the outcome model")
    covariates: tuple[CovariateSpec, ...] = DEFAULT_COVARIATES
    alpha_c: tuple[float, ...] = (-1.0, -1.0)
    beta_c: tuple[float, ...] = (1.0, 1.0)

    alpha_w: tuple[float, ...] = (0.6,)
    beta_w: tuple[float, ...] = (0.6,)
    alpha_b: tuple[float, ...] = (0.6,)
    beta_b: tuple[float, ...] = (0.6,)

    sigma_a2: float = Field(default=0.09, ge=0)
    sigma_b2: float = Field(default=1.0, ge=0)
    sigma_et2: float = Field(default=1.0, ge=0)
    sigma_ey2: float = Field(default=1.0, ge=0)

    V_w: tuple[tuple[float, ...], ...] = ((1.0,),)
    V_b: tuple[tuple[float, ...], ...] = ((1.0,),)
    mean_w: tuple[float, ...] = (1.0,)
    mean_b: tuple[float, ...] = (1.0,)

    confounder_mode: ConfounderMode = "W_and_B"
    seed: int = Field(default=20_240_501, ge=0, lt=2**64)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ScenarioConfig":
        problems: list[str] = []
        k_c = len(self.covariates)
        if len(self.alpha_c) != k_c or len(self.beta_c) != k_c:
            problems.append(
                f"alpha_c/beta_c lengths ({len(self.alpha_c)}, {len(self.beta_c)}) must equal covariates ({k_c})"
            )
        for fam in ("w", "b"):
            a, b = getattr(self, f"alpha_{fam}"), getattr(self, f"beta_{fam}")
            V, mu = getattr(self, f"V_{fam}"), getattr(self, f"mean_{fam}")
            k = len(a)
            if len(b) != k or len(mu) != k:
                problems.append(f"alpha_{fam}, beta_{fam}, mean_{fam} must share one length")
            if len(V) != k or any(len(row) != k for row in V):
                problems.append(f"V_{fam} must be {k}×{k}")
                continue
            if k == 0:
                continue
            mat = np.asarray(V, dtype=float)
            if not np.allclose(mat, mat.T, rtol=0.0, atol=PSD_TOL):
                problems.append(f"V_{fam} is not symmetric")
            elif np.linalg.eigvalsh(mat).min() < -PSD_TOL * max(1.0, float(np.abs(mat).max())):
                problems.append(f"V_{fam} has a negative eigenvalue")
        if problems:
            raise ValueError("; ".join(problems))
        return self

    # ── Derived views ─────────────────────────────────────────────────────────

    @property
    def mean_c(self) -> tuple[float, ...]:
        return tuple(c.mean for c in self.covariates)

    @property
    def has_w(self) -> bool:
        return self.confounder_mode in ("W_only", "W_and_B")

    @property
    def has_b(self) -> bool:
        return self.confounder_mode in ("B_only", "W_and_B")

    def array(self, name: str) -> np.ndarray:
        """Field as a float ndarray (vectors and the V_* matrices)."""
        return np.asarray(getattr(self, name), dtype=float)


class CovariatePolicy(BaseModel):
    """Which columns a fit adjusts for. Excluding a confounder makes it unmeasured."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    include_measured: bool = True
    include_latent_w: bool = False
    include_latent_b: bool = False
    drop_between_cluster_covariates_for_fe: bool = True


# ── Experiment files ──────────────────────────────────────────────────────────

class CalibrationSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    m_cal: int = Field(default=2000, ge=2)
    reps_cal: int = Field(default=50, ge=2)


class OutputPaths(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    csv_path: str
    svg_path: Optional[str] = None


class ExperimentSpec(BaseModel):
    """One bias-vs-parameter experiment: a base scenario swept along one axis."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    name: str = Field(..., min_length=1)
    base: ScenarioConfig = ScenarioConfig()
    axis: str
    values: tuple[float, ...] = Field(..., min_length=1)
    reps: int = Field(default=1000, ge=2)
    methods: tuple[Method, ...] = METHODS
    outputs: Optional[OutputPaths] = None
    analytic_only: bool = False
    z: float = Field(default=3.0, gt=0)
    policy: CovariatePolicy = CovariatePolicy()
    calibration: Optional[CalibrationSettings] = None    # None → service defaults (env)
    grid_note: Optional[str] = None

    @model_validator(mode="after")
    def _check_axis(self) -> "ExperimentSpec":
        from .core.dgp import resolve_axis
        resolve_axis(self.axis, self.base)
        if not self.methods:
            raise ValueError("methods must not be empty")
        return self


# ── HTTP payloads ─────────────────────────────────────────────────────────────

class TableRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    base: ScenarioConfig = ScenarioConfig()
    policy: CovariatePolicy = CovariatePolicy()
    calibration: Optional[CalibrationSettings] = None    # None → service defaults (env)


class BiasCellOut(BaseModel):
    method: Method
    scenario: Scenario
    regime: Regime
    n: int
    value: float


class TableResponse(BaseModel):
    cells: list[BiasCellOut]
    sigma_de2: float
    sigma_chie2: float


class ExperimentRowOut(BaseModel):
    scenario_axis: str
    axis_value: float
    method: Method
    mean_bias: Optional[float] = None
    mc_se: Optional[float] = None
    analytic_bias: float
    agreement: Optional[bool] = None
    reps: int = 0
    truncations: int = 0
    weak_iv_count: int = 0


class ExperimentResponse(BaseModel):
    name: str
    analytic_only: bool
    all_agree: bool
    rows: list[ExperimentRowOut]
    grid_note: Optional[str] = None
