"""
core/bias.py – Analytic asymptotic bias of the four estimators.
Responsibility: evaluate every (method × scenario × regime) cell from a
ScenarioConfig, and calibrate the LMM variance-component limits by simulation.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np
import pandas as pd

from ..errors import DegenerateWithin, NotPositiveDefinite, ZeroDenominator
from ..models import METHODS, REGIMES, SCENARIOS, CovariatePolicy, Method, Regime, Scenario, ScenarioConfig
from .dgp import ReplicationSeed, calibration_seed, simulate_dataset
from .estimators import DEFAULT_POLICY, lmm_variance_components

logger = logging.getLogger(__name__)

MIN_DENOMINATOR = 1e-300
RECOMMENDED_M_CAL = 1000
RECOMMENDED_REPS_CAL = 20


@dataclass(frozen=True)
class BiasCell:
    method: Method
    scenario: Scenario
    regime: Regime
    n: int
    value: float


@dataclass(frozen=True)
class LmmPlimConstants:
    """Calibrated limits of the LMM variance components (σde², σχe²)."""

    sigma_de2: float
    sigma_chie2: float
    m_cal: int
    reps_cal: int
    seed: int
    sd_de2: float = 0.0
    sd_chie2: float = 0.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma_de2) and math.isfinite(self.sigma_chie2)):
            raise ValueError("Calibrated plims must be finite")
        if self.sigma_de2 < 0 or self.sigma_chie2 <= 0:
            raise NotPositiveDefinite(
                f"Calibrated plims out of range: sigma_de2={self.sigma_de2}, sigma_chie2={self.sigma_chie2}"
            )

    @property
    def calibration_meta(self) -> dict:
        return {
            "m_cal": self.m_cal,
            "reps_cal": self.reps_cal,
            "seed": self.seed,
            "sd_de2": self.sd_de2,
            "sd_chie2": self.sd_chie2,
        }


PlimsArg = Union[LmmPlimConstants, Mapping[Scenario, LmmPlimConstants], None]


# ── Quadratic forms ───────────────────────────────────────────────────────────

@dataclass(frozen=True)
class _Moments:
    c_w: float     # α_w'V_wβ_w
    v_w: float     # α_w'V_wα_w
    c_b: float
    v_b: float


def _quad(a: np.ndarray, V: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(a @ V @ b)


def _moments(cfg: ScenarioConfig, scenario: Scenario) -> _Moments:
    """Quadratic forms of the scenario; the complementary family is zeroed."""
    use_w = scenario in ("W_only", "W_and_B")
    use_b = scenario in ("B_only", "W_and_B")
    aw, bw, Vw = cfg.array("alpha_w"), cfg.array("beta_w"), cfg.array("V_w")
    ab, bb, Vb = cfg.array("alpha_b"), cfg.array("beta_b"), cfg.array("V_b")
    return _Moments(
        c_w=_quad(aw, Vw, bw) if use_w else 0.0,
        v_w=_quad(aw, Vw, aw) if use_w else 0.0,
        c_b=_quad(ab, Vb, bb) if use_b else 0.0,
        v_b=_quad(ab, Vb, ab) if use_b else 0.0,
    )


def _ratio(num: float, den: float, label: str) -> float:
    if abs(den) < MIN_DENOMINATOR:
        raise ZeroDenominator(f"{label}: denominator {den!r} underflows")
    return num / den


# ── Cells ─────────────────────────────────────────────────────────────────────

def bias_iv(cfg: ScenarioConfig, scenario: Scenario, regime: Regime) -> float:
    if regime == "m_and_n_infty" and scenario == "W_only":
        return 0.0
    q = _moments(cfg, scenario)
    if regime == "m_and_n_infty":
        return _ratio(q.c_b, cfg.sigma_a2 + q.v_b, "IV")
    n = cfg.n
    return _ratio(q.c_b + q.c_w / n, (cfg.sigma_a2 + q.v_b) + (q.v_w + cfg.sigma_et2) / n, "IV")


def bias_ols(cfg: ScenarioConfig, scenario: Scenario, regime: Regime) -> float:
    """Does not depend on n or the regime."""
    q = _moments(cfg, scenario)
    return _ratio(q.c_b + q.c_w, cfg.sigma_a2 + q.v_b + q.v_w + cfg.sigma_et2, "OLS")


def bias_fe(cfg: ScenarioConfig, scenario: Scenario, regime: Regime) -> float:
    if scenario == "B_only":
        return 0.0
    q = _moments(cfg, scenario)
    return _ratio(q.c_w, q.v_w + cfg.sigma_et2, "FE")


def bias_lmm(
    cfg: ScenarioConfig,
    scenario: Scenario,
    regime: Regime,
    plims: Optional[LmmPlimConstants] = None,
) -> float:
    """Fixed-n cells weight the between terms by σχe²/(σχe² + (n−1)σde²).

    `plims` may be omitted in the double-asymptotic regime and at n = 1,
    where the weight does not depend on them.
    """
    if regime == "m_and_n_infty":
        return bias_fe(cfg, scenario, regime)
    if cfg.n == 1:
        weight = 1.0
    elif plims is None:
        raise ValueError("bias_lmm needs calibrated plims for the fixed-n regime with n >= 2")
    else:
        weight = plims.sigma_chie2 / (plims.sigma_chie2 + (cfg.n - 1) * plims.sigma_de2)
    q = _moments(cfg, scenario)
    return _ratio(
        q.c_b * weight + q.c_w,
        (cfg.sigma_a2 + q.v_b) * weight + (q.v_w + cfg.sigma_et2),
        "LMM",
    )


def analytic_bias(
    method: Method,
    cfg: ScenarioConfig,
    scenario: Scenario,
    regime: Regime,
    plims: Optional[LmmPlimConstants] = None,
) -> float:
    if method == "IV":
        return bias_iv(cfg, scenario, regime)
    if method == "OLS":
        return bias_ols(cfg, scenario, regime)
    if method == "FE":
        return bias_fe(cfg, scenario, regime)
    return bias_lmm(cfg, scenario, regime, plims)


def bias_table(cfg: ScenarioConfig, plims: PlimsArg = None) -> list[BiasCell]:
    """All 24 cells at cfg.n.

    `plims` is one set of constants for every scenario or a mapping
    scenario → constants (the limits depend on which confounders are left in
    the residual).
    """
    cells = []
    for regime in REGIMES:
        for scenario in SCENARIOS:
            scenario_plims = plims.get(scenario) if isinstance(plims, Mapping) else plims
            for method in METHODS:
                value = analytic_bias(method, cfg, scenario, regime, scenario_plims)
                cells.append(BiasCell(method, scenario, regime, cfg.n, value))
    return cells


def bias_table_frame(cells: list[BiasCell]) -> pd.DataFrame:
    """Table layout: one row per (regime, scenario), one column per method."""
    frame = pd.DataFrame([c.__dict__ for c in cells])
    table = frame.pivot(index=["regime", "scenario"], columns="method", values="value")
    order = pd.MultiIndex.from_product([REGIMES, SCENARIOS], names=["regime", "scenario"])
    return table.reindex(index=order, columns=list(METHODS)).reset_index().rename_axis(columns=None)


# ── Calibration ───────────────────────────────────────────────────────────────

def calibrate_lmm_plims(
    cfg: ScenarioConfig,
    m_cal: int = 2000,
    reps_cal: int = 50,
    policy: CovariatePolicy = DEFAULT_POLICY,
    workers: Optional[int] = None,
) -> LmmPlimConstants:
    """Average the LMM variance-component estimates over reps_cal draws at m = m_cal."""
    if cfg.n < 2:
        raise DegenerateWithin("Variance components are not identified at n = 1")
    if reps_cal < 2:
        raise ValueError(f"reps_cal must be >= 2, got {reps_cal}")
    if m_cal < RECOMMENDED_M_CAL or reps_cal < RECOMMENDED_REPS_CAL:
        logger.warning(
            "[Calibration] m_cal=%d reps_cal=%d below recommended %d/%d",
            m_cal, reps_cal, RECOMMENDED_M_CAL, RECOMMENDED_REPS_CAL,
        )

    seed = calibration_seed(cfg.seed)
    cal_cfg = cfg.model_copy(update={"m": m_cal, "seed": seed})

    def one(r: int) -> tuple[float, float]:
        comps = lmm_variance_components(simulate_dataset(cal_cfg, ReplicationSeed(seed, r)), policy)
        return comps.sigma_d2, comps.sigma_chi2

    with ThreadPoolExecutor(max_workers=workers) as pool:
        draws = np.array(list(pool.map(one, range(reps_cal))))

    means = draws.mean(axis=0)
    sds = draws.std(axis=0, ddof=1)
    logger.info(
        "[Calibration] n=%d m_cal=%d reps=%d → sigma_de2=%.6g sigma_chie2=%.6g",
        cfg.n, m_cal, reps_cal, means[0], means[1],
    )
    return LmmPlimConstants(
        sigma_de2=float(means[0]),
        sigma_chie2=float(means[1]),
        m_cal=m_cal,
        reps_cal=reps_cal,
        seed=seed,
        sd_de2=float(sds[0]),
        sd_chie2=float(sds[1]),
    )
