"""
core/linalg.py – Dense least squares + compound-symmetry kernel.
Responsibility: the numerical plumbing shared by every estimator.
No estimator logic here.
"""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from ..errors import NotPositiveDefinite, SingularDesign

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class LeastSquaresSolution:
    coef: np.ndarray
    residuals: np.ndarray
    xtx_inv: np.ndarray          # (X'X)^-1 from the triangular factor
    condition_number: float


# ── Least squares ─────────────────────────────────────────────────────────────

def least_squares(X: np.ndarray, y: np.ndarray) -> LeastSquaresSolution:
    """argmin ||y - Xb||² via economic QR; rank checked on singular values of R."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValueError(f"Shape mismatch: X{X.shape}, y{y.shape}")
    N, p = X.shape
    if N < p:
        raise SingularDesign(f"{N} rows < {p} columns")
    if not np.all(np.isfinite(X)):
        raise ValueError("X has non-finite entries")

    Q, R = sla.qr(X, mode="economic")
    sv = sla.svdvals(R)
    if sv.size == 0 or sv[0] == 0.0:
        raise SingularDesign("Design is identically zero")
    rank = int(np.sum(sv > RANK_RTOL * sv[0]))
    if rank < p:
        raise SingularDesign(f"Effective rank {rank} < {p} columns")

    coef = sla.solve_triangular(R, Q.T @ y)
    r_inv = sla.solve_triangular(R, np.eye(p))
    return LeastSquaresSolution(
        coef=coef,
        residuals=y - X @ coef,
        xtx_inv=r_inv @ r_inv.T,
        condition_number=float(sv[0] / sv[-1]),
    )


def solve_least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    return least_squares(X, y).coef


# ── Compound symmetry ─────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CompoundSymmetryKernel:
    """V = sigma_within2·I_n + sigma_between2·J_nJ_n'."""

    sigma_within2: float
    sigma_between2: float
    n: int

    @property
    def is_positive_definite(self) -> bool:
        return (
            self.n >= 1
            and self.sigma_within2 > 0
            and self.sigma_between2 >= 0
            and self.sigma_within2 + self.n * self.sigma_between2 > 0
        )

    @property
    def s(self) -> float:
        return self.sigma_between2 / (self.sigma_within2 + self.n * self.sigma_between2)

    def dense(self) -> np.ndarray:
        return self.sigma_within2 * np.eye(self.n) + self.sigma_between2 * np.ones((self.n, self.n))


def _cluster_split(k: CompoundSymmetryKernel, M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(M, its means along the kernel axis), after the PD and size checks."""
    if not k.is_positive_definite:
        raise NotPositiveDefinite(
            f"Kernel not PD: sigma_within2={k.sigma_within2}, sigma_between2={k.sigma_between2}, n={k.n}"
        )
    M = np.asarray(M, dtype=float)
    axis = 0 if M.ndim == 1 else -2
    if M.shape[axis] != k.n:
        raise ValueError(f"Kernel of size {k.n} cannot act on shape {M.shape}")
    means = M.mean(axis=axis, keepdims=True)
    return M, means


def kernel_inverse_apply(k: CompoundSymmetryKernel, M: np.ndarray) -> np.ndarray:
    """V⁻¹M by the closed form (1/σw²)(M − s·J(J'M)), split into within and between parts.

    M is (n,), (n, q) or a stack (..., n, q); the kernel acts on axis -2
    (axis 0 for a vector).
    """
    M, means = _cluster_split(k, M)
    return (M - means) / k.sigma_within2 + means / (k.sigma_within2 + k.n * k.sigma_between2)


def kernel_inverse_sqrt_apply(k: CompoundSymmetryKernel, M: np.ndarray) -> np.ndarray:
    """Symmetric V^{-1/2}M: within deviations scaled by 1/σw, cluster means by 1/√(σw² + n·σb²).

    Same layouts as kernel_inverse_apply; (V^{-1/2}M)'(V^{-1/2}M) = M'V⁻¹M.
    """
    M, means = _cluster_split(k, M)
    return (M - means) / np.sqrt(k.sigma_within2) + means / np.sqrt(k.sigma_within2 + k.n * k.sigma_between2)


# ── Cluster helpers ───────────────────────────────────────────────────────────

def cluster_means(M: np.ndarray) -> np.ndarray:
    """Row means of an m×n matrix (or m×n×q stack → m×q)."""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2:
        raise ValueError(f"cluster_means needs an m×n layout, got shape {M.shape}")
    return M.mean(axis=1)

