"""
deps.py – Dependency Injection: singleton service instances.
Built once from environment variables on first import.
"""
import os
from typing import Optional

from .core.calibration import CalibrationService
from .core.harness import MonteCarloHarness
from .handlers.experiment_handler import ExperimentHandler
from .models import CalibrationSettings


def _workers() -> Optional[int]:
    raw = os.getenv("CONFOUND_BENCH_THREADS", "").strip()
    if not raw:
        return os.cpu_count()
    value = int(raw)
    if value < 1:
        raise ValueError(f"CONFOUND_BENCH_THREADS must be >= 1, got {value}")
    return value


# ── Core singletons ────────────────────────────────────────────────────────────

_workers_n = _workers()
_calibration = CalibrationService(
    db_path=os.getenv("CONFOUND_BENCH_DB", "./data/calibration.db"),
    defaults=CalibrationSettings(
        m_cal=int(os.getenv("CONFOUND_BENCH_M_CAL", "2000")),
        reps_cal=int(os.getenv("CONFOUND_BENCH_REPS_CAL", "50")),
    ),
    workers=_workers_n,
)
_harness = MonteCarloHarness(_calibration, workers=_workers_n)

# ── Handler singletons ─────────────────────────────────────────────────────────

_experiments = ExperimentHandler(_harness, _calibration, out_dir=os.getenv("CONFOUND_BENCH_OUT", "./out"))


# ── Getters (used by routes and the CLI) ───────────────────────────────────────

def get_harness()            -> MonteCarloHarness:  return _harness
def get_experiment_handler() -> ExperimentHandler:  return _experiments
