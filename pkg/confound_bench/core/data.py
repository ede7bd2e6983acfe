"""
core/data.py – Value types passed between dgp, estimators and harness.
All immutable after construction; arrays are flagged read-only.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from ..models import Method


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ClusteredDataset:
    """Balanced clustered draw.

    y, t: m×n. c: m×n×K_c (no intercept column). w_latent: m×n×K_w and
    b_latent: m×K_b are the simulated unmeasured confounders, zero-width when
    the scenario does not generate them.
    """

    y: np.ndarray
    t: np.ndarray
    c: np.ndarray
    w_latent: np.ndarray
    b_latent: np.ndarray
    covariate_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        for name in ("y", "t", "c", "w_latent", "b_latent"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        m, n = self.y.shape
        if self.t.shape != (m, n):
            raise ValueError(f"t has shape {self.t.shape}, expected {(m, n)}")
        if self.c.shape[:2] != (m, n) or self.w_latent.shape[:2] != (m, n):
            raise ValueError("c and w_latent must be m×n×K")
        if self.b_latent.shape[0] != m:
            raise ValueError("b_latent must be m×K_b")
        if len(self.covariate_names) != self.c.shape[2]:
            object.__setattr__(
                self, "covariate_names", tuple(f"c_{k + 2}" for k in range(self.c.shape[2]))
            )
        if not all(np.all(np.isfinite(getattr(self, f))) for f in ("y", "t", "c")):
            raise ValueError("Dataset contains missing or non-finite values")

    @property
    def m(self) -> int:
        return self.y.shape[0]

    @property
    def n(self) -> int:
        return self.y.shape[1]

    @property
    def cluster_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.m), self.n)


@dataclass(frozen=True)
class VarianceComponents:
    """Random-intercept variance estimates: between (d) and within (χ)."""

    sigma_d2: float
    sigma_chi2: float
    truncated: bool = False          # between estimate clipped at 0
    within_boundary: bool = False    # no within-cluster residual variation


@dataclass(frozen=True)
class FitResult:
    method: Method
    beta_hat: float
    coef: np.ndarray
    coef_names: tuple[str, ...]
    var_beta_hat: float
    varcomp: Optional[VarianceComponents] = None
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "coef", _frozen(self.coef))
        object.__setattr__(self, "var_beta_hat", max(0.0, float(self.var_beta_hat)))

    @property
    def se_beta_hat(self) -> float:
        return float(np.sqrt(self.var_beta_hat))

    def wald_interval(self, level: float = 0.95) -> tuple[float, float]:
        half = stats.norm.ppf(0.5 + level / 2) * self.se_beta_hat
        return self.beta_hat - half, self.beta_hat + half


@dataclass(frozen=True)
class FitFailure:
    """A fit that raised; recorded by the harness instead of propagating."""

    method: Method
    error_type: str
    message: str
