"""tests/conftest.py – shared fixtures for all tests."""
import os

# before anything imports confound_bench.deps
os.environ["CONFOUND_BENCH_DB"] = ""
os.environ["CONFOUND_BENCH_THREADS"] = "2"
os.environ["CONFOUND_BENCH_M_CAL"] = "300"
os.environ["CONFOUND_BENCH_REPS_CAL"] = "4"

import pytest

from confound_bench.core.calibration import CalibrationService
from confound_bench.core.data import ClusteredDataset
from confound_bench.core.dgp import ReplicationSeed, simulate_dataset
from confound_bench.core.harness import MonteCarloHarness
from confound_bench.handlers.experiment_handler import ExperimentHandler
from confound_bench.models import CalibrationSettings, CovariateSpec, ScenarioConfig

FAST_CALIBRATION = CalibrationSettings(m_cal=300, reps_cal=4)


def make_cfg(**kw) -> ScenarioConfig:
    return ScenarioConfig(**kw)


def draw(cfg: ScenarioConfig, rep: int = 0) -> ClusteredDataset:
    return simulate_dataset(cfg, ReplicationSeed(cfg.seed, rep))


@pytest.fixture
def default_cfg() -> ScenarioConfig:
    return ScenarioConfig()


@pytest.fixture
def small_cfg() -> ScenarioConfig:
    return ScenarioConfig(m=30, n=5)


@pytest.fixture
def noiseless_cfg() -> ScenarioConfig:
    """No confounding and no outcome noise: Y is an exact linear function of T and C."""
    return ScenarioConfig(m=40, n=6, confounder_mode="none", sigma_b2=0.0, sigma_ey2=0.0)


@pytest.fixture
def within_only_covariates() -> dict:
    return dict(covariates=(CovariateSpec(level="within"),), alpha_c=(-1.0,), beta_c=(1.0,))


@pytest.fixture
def calibration() -> CalibrationService:
    return CalibrationService(db_path="", defaults=FAST_CALIBRATION, workers=2)


@pytest.fixture
def harness(calibration) -> MonteCarloHarness:
    return MonteCarloHarness(calibration, workers=2)


@pytest.fixture
def handler(harness, calibration, tmp_path) -> ExperimentHandler:
    return ExperimentHandler(harness, calibration, out_dir=str(tmp_path / "out"))
