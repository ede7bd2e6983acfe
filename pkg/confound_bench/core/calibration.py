"""
core/calibration.py – CalibrationService class.
Responsibility: hand out LmmPlimConstants per scenario point, calibrating
once and reusing the result (in-process dict + SQLite via SQLAlchemy).
"""
import hashlib
import json
import logging
import threading
from typing import Optional

from ..db.models import CalibrationRecord
from ..db.session import db_session
from ..models import CalibrationSettings, CovariatePolicy, Scenario, ScenarioConfig
from .bias import LmmPlimConstants, calibrate_lmm_plims

logger = logging.getLogger(__name__)


def calibration_fingerprint(cfg: ScenarioConfig, policy: CovariatePolicy, settings: CalibrationSettings) -> str:
    """sha256 of everything the calibrated limits depend on; m is replaced by m_cal."""
    payload = {
        "scenario": cfg.model_dump(mode="json", exclude={"m"}),
        "policy": policy.model_dump(mode="json"),
        "m_cal": settings.m_cal,
        "reps_cal": settings.reps_cal,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class CalibrationService:
    """Cache-through access to calibrated LMM plims."""

    def __init__(
        self,
        db_path: str = "",
        defaults: CalibrationSettings = CalibrationSettings(),
        workers: Optional[int] = None,
    ) -> None:
        self._db_path = db_path
        self._defaults = defaults
        self._workers = workers
        self._memory: dict[str, LmmPlimConstants] = {}
        self._lock = threading.Lock()

    @property
    def defaults(self) -> CalibrationSettings:
        return self._defaults

    # ── Public ────────────────────────────────────────────────────────────────

    def get(
        self,
        cfg: ScenarioConfig,
        policy: CovariatePolicy,
        settings: Optional[CalibrationSettings] = None,
    ) -> Optional[LmmPlimConstants]:
        """Plims for cfg, or None at n = 1 where the LMM cell does not use them."""
        if cfg.n < 2:
            return None
        settings = settings or self._defaults
        key = calibration_fingerprint(cfg, policy, settings)

        with self._lock:
            if key in self._memory:
                return self._memory[key]

        stored = self._load(key)
        if stored is not None:
            logger.info("[Calibration] cache hit %s (n=%d)", key[:12], cfg.n)
        else:
            logger.info("[Calibration] cache miss %s (n=%d), calibrating", key[:12], cfg.n)
            stored = calibrate_lmm_plims(cfg, settings.m_cal, settings.reps_cal, policy, self._workers)
            self._store(key, cfg.n, stored)

        with self._lock:
            self._memory[key] = stored
        return stored

    def for_scenarios(
        self,
        cfg: ScenarioConfig,
        policy: CovariatePolicy,
        settings: Optional[CalibrationSettings] = None,
        scenarios: tuple[Scenario, ...] = ("W_only", "B_only", "W_and_B"),
    ) -> dict[Scenario, Optional[LmmPlimConstants]]:
        """One calibration per confounding scenario, as the table needs."""
        return {s: self.get(cfg.model_copy(update={"confounder_mode": s}), policy, settings) for s in scenarios}

    # ── Persistence ───────────────────────────────────────────────────────────

    def _load(self, key: str) -> Optional[LmmPlimConstants]:
        with db_session(self._db_path) as session:
            row = session.get(CalibrationRecord, key)
            if row is None:
                return None
            return LmmPlimConstants(
                sigma_de2=row.sigma_de2,
                sigma_chie2=row.sigma_chie2,
                m_cal=row.m_cal,
                reps_cal=row.reps_cal,
                seed=int(row.seed),
                sd_de2=row.sd_de2,
                sd_chie2=row.sd_chie2,
            )

    def _store(self, key: str, n: int, plims: LmmPlimConstants) -> None:
        with db_session(self._db_path) as session:
            session.merge(CalibrationRecord(
                fingerprint=key,
                n=n,
                m_cal=plims.m_cal,
                reps_cal=plims.reps_cal,
                seed=str(plims.seed),
                sigma_de2=plims.sigma_de2,
                sigma_chie2=plims.sigma_chie2,
                sd_de2=plims.sd_de2,
                sd_chie2=plims.sd_chie2,
            ))
