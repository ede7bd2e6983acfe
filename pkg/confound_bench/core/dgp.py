"""
core/dgp.py – Data-generating process for the true clustered models.
Responsibility: draw ClusteredDataset replications from a ScenarioConfig
with counter-based, per-variable RNG substreams; build scenario grids.

    T_ij = α0 + a_0i + C_ij'α_c + W_ij'α_w + B_i'α_b + ε^t_ij
    Y_ij = β0 + b_0i + βT_ij + C_ij'β_c + W_ij'β_w + B_i'β_b + ε^y_ij
"""
import re
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..errors import InvalidCovariance, UnknownAxis
from ..models import PSD_TOL, ScenarioConfig
from .data import ClusteredDataset

# Substream tags. Append only: renumbering changes every simulated dataset.
VARIABLE_TAGS: dict[str, int] = {
    "a0": 0,
    "b0": 1,
    "eps_t": 2,
    "eps_y": 3,
    "w": 4,
    "b": 5,
    "c": 6,
}
_GRID_TAG = 0x6772_6964        # "grid"
_CALIBRATION_TAG = 0x63616C    # "cal"

_SCALAR_AXES = {"m", "n", "beta", "alpha_0", "beta_0", "sigma_a2", "sigma_b2", "sigma_et2", "sigma_ey2"}
_INTEGER_AXES = {"m", "n"}
_COEF_AXIS = re.compile(r"^(alpha|beta)_(\d+)([wbc])$")


@dataclass(frozen=True)
class ReplicationSeed:
    master_seed: int
    replication_index: int

    def __post_init__(self) -> None:
        if not 0 <= self.master_seed < 2**64:
            raise ValueError(f"master_seed out of 64-bit range: {self.master_seed}")
        if self.replication_index < 0:
            raise ValueError(f"replication_index must be >= 0, got {self.replication_index}")

    def stream(self, tag: str) -> np.random.Generator:
        """Independent Philox stream for one variable of this replication."""
        ss = np.random.SeedSequence([self.master_seed, self.replication_index, VARIABLE_TAGS[tag]])
        return np.random.Generator(np.random.Philox(ss))


def derived_seed(master_seed: int, tag: int, index: int) -> int:
    """Deterministic 64-bit child seed, e.g. for grid point `index`."""
    state = np.random.SeedSequence([master_seed, tag, index]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def calibration_seed(master_seed: int) -> int:
    return derived_seed(master_seed, _CALIBRATION_TAG, 0)


# ── Simulation ────────────────────────────────────────────────────────────────

def covariance_factor(V: np.ndarray) -> np.ndarray:
    """L with L·L' = V. Cholesky, or an eigen factor when V is PSD but singular."""
    V = np.asarray(V, dtype=float)
    if V.size == 0:
        return V.reshape(0, 0)
    scale = max(1.0, float(np.abs(V).max()))
    eig, vecs = np.linalg.eigh(V)
    if eig.min() < -PSD_TOL * scale:
        raise InvalidCovariance(f"Covariance has eigenvalue {eig.min():.3g} below tolerance")
    try:
        return np.linalg.cholesky(V)
    except np.linalg.LinAlgError:
        return vecs * np.sqrt(np.clip(eig, 0.0, None))


def simulate_dataset(cfg: ScenarioConfig, rep: ReplicationSeed) -> ClusteredDataset:
    m, n = cfg.m, cfg.n

    a0 = rep.stream("a0").normal(0.0, np.sqrt(cfg.sigma_a2), m)
    b0 = rep.stream("b0").normal(0.0, np.sqrt(cfg.sigma_b2), m)
    eps_t = rep.stream("eps_t").normal(0.0, np.sqrt(cfg.sigma_et2), (m, n))
    eps_y = rep.stream("eps_y").normal(0.0, np.sqrt(cfg.sigma_ey2), (m, n))

    if cfg.has_w:
        L_w = covariance_factor(cfg.array("V_w"))
        z = rep.stream("w").standard_normal((m, n, L_w.shape[0]))
        W = cfg.array("mean_w") + z @ L_w.T
        alpha_w, beta_w = cfg.array("alpha_w"), cfg.array("beta_w")
    else:
        W, alpha_w, beta_w = np.zeros((m, n, 0)), np.zeros(0), np.zeros(0)

    if cfg.has_b:
        L_b = covariance_factor(cfg.array("V_b"))
        z = rep.stream("b").standard_normal((m, L_b.shape[0]))
        B = cfg.array("mean_b") + z @ L_b.T
        alpha_b, beta_b = cfg.array("alpha_b"), cfg.array("beta_b")
    else:
        B, alpha_b, beta_b = np.zeros((m, 0)), np.zeros(0), np.zeros(0)

    C = _draw_covariates(cfg, rep.stream("c"))

    T = (
        cfg.alpha_0 + a0[:, None] + C @ cfg.array("alpha_c")
        + W @ alpha_w + (B @ alpha_b)[:, None] + eps_t
    )
    Y = (
        cfg.beta_0 + b0[:, None] + cfg.beta * T + C @ cfg.array("beta_c")
        + W @ beta_w + (B @ beta_b)[:, None] + eps_y
    )
    return ClusteredDataset(
        y=Y, t=T, c=C, w_latent=W, b_latent=B,
        covariate_names=tuple(f"c_{k + 2}" for k in range(len(cfg.covariates))),
    )


def _draw_covariates(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    m, n = cfg.m, cfg.n
    cols = []
    for spec in cfg.covariates:
        if spec.level == "within":
            cols.append(rng.normal(spec.mean, spec.sd, (m, n)))
        else:
            cols.append(np.repeat(rng.normal(spec.mean, spec.sd, m)[:, None], n, axis=1))
    return np.stack(cols, axis=2) if cols else np.zeros((m, n, 0))


def dataset_frame(data: ClusteredDataset, include_latents: bool = False) -> pd.DataFrame:
    """Long layout: cluster, unit, y, t, c_*, and w_*/b_* when asked."""
    m, n = data.m, data.n
    frame = {
        "cluster": np.repeat(np.arange(m), n),
        "unit": np.tile(np.arange(n), m),
        "y": data.y.ravel(),
        "t": data.t.ravel(),
    }
    for k, name in enumerate(data.covariate_names):
        frame[name] = data.c[:, :, k].ravel()
    if include_latents:
        for k in range(data.w_latent.shape[2]):
            frame[f"w_{k + 1}"] = data.w_latent[:, :, k].ravel()
        for k in range(data.b_latent.shape[1]):
            frame[f"b_{k + 1}"] = np.repeat(data.b_latent[:, k], n)
    return pd.DataFrame(frame)


# ── Scenario grids ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class AxisRef:
    """Where an axis name lands inside ScenarioConfig."""

    name: str
    field: str
    index: Optional[int] = None

    @property
    def integer(self) -> bool:
        return self.field in _INTEGER_AXES

    def current(self, cfg: ScenarioConfig) -> float:
        value = getattr(cfg, self.field)
        return float(value if self.index is None else value[self.index])

    def apply(self, cfg: ScenarioConfig, value: float) -> dict:
        if self.integer:
            if not float(value).is_integer():
                raise ValueError(f"Axis {self.name} needs integer values, got {value}")
            return {self.field: int(value)}
        if self.index is None:
            return {self.field: float(value)}
        vec = list(getattr(cfg, self.field))
        vec[self.index] = float(value)
        return {self.field: tuple(vec)}


def resolve_axis(axis: str, cfg: ScenarioConfig) -> AxisRef:
    if axis in _SCALAR_AXES:
        return AxisRef(axis, axis)
    match = _COEF_AXIS.match(axis)
    if not match:
        raise UnknownAxis(f"Unknown axis: {axis!r}")
    side, k, family = match.group(1), int(match.group(2)), match.group(3)
    if family == "c":
        if k == 1:
            return AxisRef(axis, f"{side}_0")
        field_name, index = f"{side}_c", k - 2
    else:
        field_name, index = f"{side}_{family}", k - 1
    if not 0 <= index < len(getattr(cfg, field_name)):
        raise UnknownAxis(f"Axis {axis!r} indexes past {field_name} (length {len(getattr(cfg, field_name))})")
    return AxisRef(axis, field_name, index)


def scenario_grid(base: ScenarioConfig, axis: str, values: Sequence[float]) -> list[ScenarioConfig]:
    """One config per value, all else copied; each point gets its own seed."""
    ref = resolve_axis(axis, base)
    grid = []
    for i, value in enumerate(values):
        update = ref.apply(base, value)
        update["seed"] = derived_seed(base.seed, _GRID_TAG, i)
        grid.append(ScenarioConfig.model_validate({**base.model_dump(), **update}))
    return grid
