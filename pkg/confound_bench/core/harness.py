"""
core/harness.py – MonteCarloHarness class.
Responsibility: replicate simulate→fit over a scenario grid, aggregate
empirical bias with Monte Carlo SEs, attach the analytic bias and compare.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..errors import ConfoundBenchError
from ..models import METHODS, CalibrationSettings, CovariatePolicy, Method, Scenario, ScenarioConfig
from .bias import analytic_bias
from .calibration import CalibrationService
from .data import FitFailure, FitResult
from .dgp import ReplicationSeed, resolve_axis, simulate_dataset
from .estimators import DEFAULT_POLICY, ESTIMATORS

logger = logging.getLogger(__name__)

FitOutcome = Union[FitResult, FitFailure]

REPORT_COLUMNS = [
    "scenario_axis", "axis_value", "method", "mean_bias", "mc_se",
    "analytic_bias", "agreement", "reps", "truncations", "weak_iv_count",
]

DEFAULT_ADJUSTMENT_SETS: dict[str, CovariatePolicy] = {
    "full": CovariatePolicy(include_latent_w=True, include_latent_b=True),
    "no_within": CovariatePolicy(include_latent_b=True),
    "no_within_between": CovariatePolicy(),
}


@dataclass(frozen=True)
class ReportRow:
    scenario_axis: str
    axis_value: float
    method: Method
    mean_bias: Optional[float]
    mc_se: Optional[float]
    analytic_bias: float
    agreement: Optional[bool]
    reps: int
    truncations: int
    weak_iv_count: int
    failures: tuple[str, ...] = ()


@dataclass(frozen=True)
class MonteCarloReport:
    rows: tuple[ReportRow, ...]
    z: float
    analytic_only: bool = False
    calibration_meta: tuple[dict, ...] = field(default_factory=tuple)

    @property
    def all_agree(self) -> bool:
        return self.analytic_only or all(r.agreement for r in self.rows if r.agreement is not None)

    @property
    def failure_count(self) -> int:
        return sum(len(r.failures) for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([{c: getattr(r, c) for c in REPORT_COLUMNS} for r in self.rows], columns=REPORT_COLUMNS)
        return frame.astype({"agreement": "object"})


# ── Helpers ───────────────────────────────────────────────────────────────────

def effective_scenario(cfg: ScenarioConfig, policy: CovariatePolicy) -> Optional[Scenario]:
    """Confounders left unmeasured after the policy's adjustment; None if none are."""
    has_w = cfg.has_w and not policy.include_latent_w
    has_b = cfg.has_b and not policy.include_latent_b
    if has_w and has_b:
        return "W_and_B"
    if has_w:
        return "W_only"
    if has_b:
        return "B_only"
    return None


def run_replication(
    cfg: ScenarioConfig,
    rep: ReplicationSeed,
    policy: CovariatePolicy = DEFAULT_POLICY,
    methods: Sequence[Method] = METHODS,
) -> dict[Method, FitOutcome]:
    """One dataset, one fit per method. Fit errors are recorded, not raised."""
    data = simulate_dataset(cfg, rep)
    out: dict[Method, FitOutcome] = {}
    for method in methods:
        try:
            out[method] = ESTIMATORS[method](data, policy)
        except (ConfoundBenchError, np.linalg.LinAlgError, FloatingPointError) as exc:
            out[method] = FitFailure(method, type(exc).__name__, str(exc))
    return out


def run_adjustment_sets(
    cfg: ScenarioConfig,
    rep: ReplicationSeed,
    policies: Mapping[str, CovariatePolicy] = DEFAULT_ADJUSTMENT_SETS,
    methods: Sequence[Method] = METHODS,
) -> pd.DataFrame:
    """Fit every method on one dataset under each named adjustment set."""
    data = simulate_dataset(cfg, rep)
    records = []
    for name, policy in policies.items():
        for method in methods:
            record = {"policy": name, "method": method}
            try:
                fit = ESTIMATORS[method](data, policy)
            except (ConfoundBenchError, np.linalg.LinAlgError) as exc:
                record.update(error=f"{type(exc).__name__}: {exc}")
            else:
                low, high = fit.wald_interval()
                record.update(
                    beta_hat=fit.beta_hat,
                    bias=fit.beta_hat - cfg.beta,
                    se=fit.se_beta_hat,
                    ci_low=low,
                    ci_high=high,
                    partial_f=fit.diagnostics.get("partial_f"),
                    error=None,
                )
            records.append(record)
    columns = ["policy", "method", "beta_hat", "bias", "se", "ci_low", "ci_high", "partial_f", "error"]
    return pd.DataFrame.from_records(records, columns=columns)


# ── Harness ───────────────────────────────────────────────────────────────────

class MonteCarloHarness:
    """Parallel replications, sequential aggregation in replication order."""

    def __init__(self, calibration: CalibrationService, workers: Optional[int] = None) -> None:
        self._calibration = calibration
        self._workers = workers

    @property
    def workers(self) -> Optional[int]:
        return self._workers

    # ── Public ────────────────────────────────────────────────────────────────

    def run_monte_carlo(
        self,
        grid: Sequence[ScenarioConfig],
        reps: int,
        policy: CovariatePolicy = DEFAULT_POLICY,
        methods: Sequence[Method] = METHODS,
        axis: Optional[str] = None,
        z: float = 3.0,
        analytic_only: bool = False,
        calibration: Optional[CalibrationSettings] = None,
    ) -> MonteCarloReport:
        if reps < 2 and not analytic_only:
            raise ValueError(f"reps must be >= 2, got {reps}")
        rows: list[ReportRow] = []
        meta: list[dict] = []
        with ThreadPoolExecutor(max_workers=self._workers) as pool:
            for i, cfg in enumerate(grid):
                axis_name = axis or "point"
                axis_value = resolve_axis(axis, cfg).current(cfg) if axis else float(i)
                analytic, point_meta = self._analytic(cfg, policy, methods, calibration)
                meta.append({"axis_value": axis_value, **point_meta})

                if analytic_only:
                    rows += [
                        ReportRow(axis_name, axis_value, m, None, None, analytic[m], None, 0, 0, 0)
                        for m in methods
                    ]
                    continue

                logger.info("[MC] %s=%g: %d reps × %d methods", axis_name, axis_value, reps, len(methods))
                outcomes = list(pool.map(
                    lambda r: run_replication(cfg, ReplicationSeed(cfg.seed, r), policy, methods),
                    range(reps),
                ))
                rows += [
                    self._aggregate(axis_name, axis_value, m, cfg.beta, [o[m] for o in outcomes], analytic[m], z)
                    for m in methods
                ]

        report = MonteCarloReport(tuple(rows), z, analytic_only, tuple(meta))
        if report.failure_count:
            logger.warning("[MC] %d fits failed and were excluded", report.failure_count)
        return report

    # ── Private helpers ───────────────────────────────────────────────────────

    def _analytic(
        self,
        cfg: ScenarioConfig,
        policy: CovariatePolicy,
        methods: Sequence[Method],
        settings: Optional[CalibrationSettings],
    ) -> tuple[dict[Method, float], dict]:
        scenario = effective_scenario(cfg, policy)
        if scenario is None:
            return {m: 0.0 for m in methods}, {}
        plims = self._calibration.get(cfg, policy, settings) if "LMM" in methods else None
        values = {m: analytic_bias(m, cfg, scenario, "m_infty_fixed_n", plims) for m in methods}
        return values, ({"sigma_de2": plims.sigma_de2, "sigma_chie2": plims.sigma_chie2, **plims.calibration_meta}
                        if plims else {})

    @staticmethod
    def _aggregate(
        axis_name: str,
        axis_value: float,
        method: Method,
        beta: float,
        outcomes: list[FitOutcome],
        analytic: float,
        z: float,
    ) -> ReportRow:
        fits = [o for o in outcomes if isinstance(o, FitResult)]
        failures = tuple(f"{o.error_type}: {o.message}" for o in outcomes if isinstance(o, FitFailure))
        estimates = np.array([f.beta_hat for f in fits])

        if len(fits) >= 2:
            mean_bias = float(estimates.mean() - beta)
            mc_se = float(estimates.std(ddof=1) / np.sqrt(len(fits)))
            agreement = bool(abs(mean_bias - analytic) <= z * mc_se + 1e-12)
        else:
            mean_bias = float(estimates.mean() - beta) if fits else None
            # nothing to compare against, e.g. FE at n = 1; failures carry the reason
            mc_se, agreement = None, None

        truncations = sum(1 for f in fits if f.varcomp is not None and f.varcomp.truncated)
        weak = sum(1 for f in fits if f.diagnostics.get("weak_instrument", 0.0) > 0)
        return ReportRow(
            axis_name, axis_value, method, mean_bias, mc_se, analytic, agreement,
            len(fits), truncations, weak, failures,
        )
