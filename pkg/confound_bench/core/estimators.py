"""
core/estimators.py – The four competing fits: OLS, FE, LMM (feasible GLS), preference-based IV.
Responsibility: ClusteredDataset + CovariatePolicy → FitResult. Pure functions.
"""
import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import stats

from ..errors import DegenerateWithin, SingularDesign, WeakInstrumentWarning
from ..models import CovariatePolicy, Method
from .data import ClusteredDataset, FitResult, VarianceComponents
from .linalg import (
    CompoundSymmetryKernel,
    LeastSquaresSolution,
    cluster_means,
    kernel_inverse_apply,
    kernel_inverse_sqrt_apply,
    least_squares,
)

logger = logging.getLogger(__name__)

DEFAULT_POLICY = CovariatePolicy()
WEAK_INSTRUMENT_F = 10.0
_CONSTANT_RTOL = 1e-12


@dataclass(frozen=True)
class Design:
    """Regressors in cluster layout m×n×p; column 0 is always the exposure."""

    X: np.ndarray
    names: tuple[str, ...]

    @property
    def flat(self) -> np.ndarray:
        return self.X.reshape(-1, self.X.shape[2])


@dataclass(frozen=True)
class FirstStageResult:
    gamma_hat: np.ndarray          # per-cluster exposure level γ̂_i
    t_hat: np.ndarray              # m×n fitted exposure
    partial_f: float
    partial_f_pvalue: float
    df_num: int
    df_den: int
    covariate_coef: np.ndarray = field(default_factory=lambda: np.zeros(0))


# ── Design helpers ────────────────────────────────────────────────────────────

def _varies_within(col: np.ndarray) -> bool:
    centered = col - cluster_means(col)[:, None]
    return float(np.abs(centered).max(initial=0.0)) > _CONSTANT_RTOL * max(1.0, float(np.abs(col).max(initial=0.0)))


def _within_columns(block: np.ndarray) -> list[int]:
    return [k for k in range(block.shape[2]) if _varies_within(block[:, :, k])]


def _design(data: ClusteredDataset, policy: CovariatePolicy, exposure: np.ndarray, intercept: bool = True) -> Design:
    m, n = data.m, data.n
    cols, names = [exposure], ["t"]
    if intercept:
        cols.append(np.ones((m, n)))
        names.append("intercept")
    if policy.include_measured:
        for k, name in enumerate(data.covariate_names):
            cols.append(data.c[:, :, k])
            names.append(name)
    if policy.include_latent_w:
        for k in range(data.w_latent.shape[2]):
            cols.append(data.w_latent[:, :, k])
            names.append(f"w_{k + 1}")
    if policy.include_latent_b:
        for k in range(data.b_latent.shape[1]):
            cols.append(np.repeat(data.b_latent[:, k:k + 1], n, axis=1))
            names.append(f"b_{k + 1}")
    return Design(np.stack(cols, axis=2), tuple(names))


def _instrument_covariates(data: ClusteredDataset, policy: CovariatePolicy) -> np.ndarray:
    """Within-varying adjustment columns; cluster-constant ones are absorbed by the dummies."""
    blocks = []
    if policy.include_measured and data.c.shape[2]:
        blocks.append(data.c[:, :, _within_columns(data.c)])
    if policy.include_latent_w and data.w_latent.shape[2]:
        blocks.append(data.w_latent[:, :, _within_columns(data.w_latent)])
    if not blocks:
        return np.zeros((data.m, data.n, 0))
    return np.concatenate(blocks, axis=2)


def _pooled_fit(method: Method, design: Design, y: np.ndarray, df_absorbed: int = 0) -> FitResult:
    X, yf = design.flat, np.asarray(y).ravel()
    N, p = X.shape
    df = N - p - df_absorbed
    if df <= 0:
        raise SingularDesign(f"{method}: no residual degrees of freedom ({N} rows, {p + df_absorbed} parameters)")
    sol = least_squares(X, yf)
    sigma2 = float(sol.residuals @ sol.residuals) / df
    return FitResult(
        method=method,
        beta_hat=float(sol.coef[0]),
        coef=sol.coef,
        coef_names=design.names,
        var_beta_hat=sigma2 * float(sol.xtx_inv[0, 0]),
        diagnostics={"sigma2": sigma2, "df_resid": float(df), "condition_number": sol.condition_number},
    )


def _gls(method: Method, design: Design, y: np.ndarray, kernel: CompoundSymmetryKernel,
         resid_design: Optional[Design] = None) -> tuple[np.ndarray, LeastSquaresSolution, float]:
    """One GLS step: whiten by V^{-1/2}, QR-solve, then score residuals with V⁻¹.

    Returns (coef, whitened solution, generalized residual scale). The whitened
    solution's xtx_inv is (Σ X_i'V⁻¹X_i)⁻¹.
    """
    Xw = kernel_inverse_sqrt_apply(kernel, design.X)
    yw = kernel_inverse_sqrt_apply(kernel, y[:, :, None])[:, :, 0]
    sol = least_squares(Xw.reshape(-1, Xw.shape[2]), yw.ravel())

    resid = y - (resid_design or design).X @ sol.coef
    N, p = design.flat.shape
    scale = float(np.sum(resid * kernel_inverse_apply(kernel, resid[:, :, None])[:, :, 0])) / max(N - p, 1)
    return sol.coef, sol, scale


# ── OLS ───────────────────────────────────────────────────────────────────────

def fit_ols(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> FitResult:
    """Pooled least squares of Y on (T, 1, C...)."""
    return _pooled_fit("OLS", _design(data, policy, data.t), data.y)


# ── FE ────────────────────────────────────────────────────────────────────────

def within_transform(data: ClusteredDataset) -> ClusteredDataset:
    """Subtract cluster means; drop every cluster-constant column (they centre to 0)."""
    if data.n < 2:
        raise DegenerateWithin("Within transform needs cluster size n >= 2")

    def centre(a: np.ndarray) -> np.ndarray:
        return a - np.expand_dims(cluster_means(a), 1)

    keep_c = _within_columns(data.c)
    keep_w = _within_columns(data.w_latent)
    return ClusteredDataset(
        y=centre(data.y),
        t=centre(data.t),
        c=centre(data.c[:, :, keep_c]),
        w_latent=centre(data.w_latent[:, :, keep_w]),
        b_latent=np.zeros((data.m, 0)),
        covariate_names=tuple(data.covariate_names[k] for k in keep_c),
    )


def fit_fe(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> FitResult:
    """Within estimator. Between-cluster columns are always dropped."""
    if data.n >= 2 and not _varies_within(data.t):
        raise SingularDesign("FE: exposure does not vary within clusters")
    wd = within_transform(data)
    fe_policy = policy.model_copy(update={"include_latent_b": False, "drop_between_cluster_covariates_for_fe": True})
    design = _design(wd, fe_policy, wd.t, intercept=False)
    result = _pooled_fit("FE", design, wd.y, df_absorbed=data.m)
    dropped = data.c.shape[2] - wd.c.shape[2] if policy.include_measured else 0
    return replace(result, diagnostics={**result.diagnostics, "dropped_constant_columns": float(dropped)})


def fit_lsdv(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> FitResult:
    """Dummy-variable regression: T, intercept, m−1 cluster indicators, within-varying columns."""
    m, n = data.m, data.n
    dummies = np.zeros((m, n, m - 1))
    for i in range(1, m):
        dummies[i, :, i - 1] = 1.0
    cols = [data.t[:, :, None], np.ones((m, n, 1)), dummies]
    names = ["t", "intercept", *[f"cluster_{i}" for i in range(1, m)]]
    covars = _instrument_covariates(data, policy)
    cols.append(covars)
    names += [f"z_{k + 1}" for k in range(covars.shape[2])]
    return _pooled_fit("FE", Design(np.concatenate(cols, axis=2), tuple(names)), data.y)


# ── Variance components ───────────────────────────────────────────────────────

def estimate_variance_components(residual_matrix: np.ndarray) -> VarianceComponents:
    """Balanced one-way ANOVA moments: σ̂χ² = MSW, σ̂d² = max(0, (MSB − MSW)/n)."""
    r = np.asarray(residual_matrix, dtype=float)
    if r.ndim != 2:
        raise ValueError(f"Residual matrix must be m×n, got shape {r.shape}")
    m, n = r.shape
    if m < 2:
        raise ValueError("Variance components need m >= 2 clusters")
    if n < 2:
        raise DegenerateWithin("Variance components need cluster size n >= 2")

    means = cluster_means(r)
    msw = float(np.sum((r - means[:, None]) ** 2)) / (m * (n - 1))
    msb = n * float(np.sum((means - means.mean()) ** 2)) / (m - 1)

    within_boundary = msw <= 1e-20 * max(1.0, float(np.mean(r ** 2)))
    if within_boundary:
        msw = 0.0
    d2 = (msb - msw) / n
    truncated = d2 < 0.0
    return VarianceComponents(
        sigma_d2=0.0 if truncated else d2,
        sigma_chi2=msw,
        truncated=truncated,
        within_boundary=within_boundary,
    )


def lmm_variance_components(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> VarianceComponents:
    """First feasible-GLS step: ANOVA components of pooled OLS residuals."""
    design = _design(data, policy, data.t)
    sol = least_squares(design.flat, data.y.ravel())
    return estimate_variance_components(sol.residuals.reshape(data.m, data.n))


# ── LMM ───────────────────────────────────────────────────────────────────────

def fit_lmm(
    data: ClusteredDataset,
    policy: CovariatePolicy = DEFAULT_POLICY,
    components: Optional[VarianceComponents] = None,
) -> FitResult:
    """Two-step feasible GLS with a random-intercept kernel.

    `components` overrides the estimated variance components (used to pin the
    kernel, e.g. σd² = 0 reproduces OLS).
    """
    design = _design(data, policy, data.t)

    if components is None and data.n < 2:
        logger.debug("LMM: n=1, variance components unidentifiable; falling back to OLS")
        fit = _pooled_fit("LMM", design, data.y)
        return replace(fit, diagnostics={**fit.diagnostics, "fallback_ols": 1.0})

    comps = components or lmm_variance_components(data, policy)
    if comps.within_boundary or comps.sigma_chi2 <= 0.0:
        fit = _pooled_fit("LMM", design, data.y)
        return replace(fit, varcomp=comps, diagnostics={**fit.diagnostics, "fallback_ols": 1.0, "within_boundary": 1.0})

    kernel = CompoundSymmetryKernel(sigma_within2=comps.sigma_chi2, sigma_between2=comps.sigma_d2, n=data.n)
    coef, sol, scale = _gls("LMM", design, data.y, kernel)
    return FitResult(
        method="LMM",
        beta_hat=float(coef[0]),
        coef=coef,
        coef_names=design.names,
        var_beta_hat=float(sol.xtx_inv[0, 0]),
        varcomp=comps,
        diagnostics={
            "varcomp_truncated": float(comps.truncated),
            "ols_equivalent": float(comps.sigma_d2 == 0.0),
            "gls_scale": scale,
            "condition_number": sol.condition_number,
        },
    )


# ── IV ────────────────────────────────────────────────────────────────────────

def iv_first_stage(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> FirstStageResult:
    """Regress T on one indicator per cluster (no global intercept) plus within-varying covariates.

    Solved through the within transform, which gives the same slopes and
    cluster levels as the explicit dummy regression.
    """
    m, n = data.m, data.n
    Z = _instrument_covariates(data, policy)
    K = Z.shape[2]
    if K and m * n <= m + K:
        raise SingularDesign(f"First stage needs m·n > m + K ({m * n} <= {m + K})")

    t = data.t
    t_bar = cluster_means(t)
    if K:
        z_bar = cluster_means(Z)
        slopes = least_squares((Z - z_bar[:, None, :]).reshape(-1, K), (t - t_bar[:, None]).ravel()).coef
        gamma = t_bar - z_bar @ slopes
        t_hat = gamma[:, None] + Z @ slopes
    else:
        slopes = np.zeros(0)
        gamma = t_bar.copy()
        t_hat = np.repeat(t_bar[:, None], n, axis=1)

    rss_u = float(np.sum((t - t_hat) ** 2))
    # Restricted model: intercept plus every adjustment column of the outcome design
    adjust = _design(data, policy, np.zeros_like(t)).X[:, :, 1:]
    q = sum(1 for k in range(1, adjust.shape[2]) if not _varies_within(adjust[:, :, k]))
    restricted = least_squares(adjust.reshape(m * n, -1), t.ravel())
    rss_r = float(restricted.residuals @ restricted.residuals)
    df_num, df_den = m - 1 - q, m * n - m - K
    f_stat, p_value = _partial_f(rss_r, rss_u, df_num, df_den)

    return FirstStageResult(
        gamma_hat=gamma,
        t_hat=t_hat,
        partial_f=f_stat,
        partial_f_pvalue=p_value,
        df_num=df_num,
        df_den=df_den,
        covariate_coef=slopes,
    )


def _partial_f(rss_r: float, rss_u: float, df_num: int, df_den: int) -> tuple[float, float]:
    if df_num <= 0 or df_den <= 0:
        return float("nan"), float("nan")
    gain = rss_r - rss_u
    if gain <= 1e-12 * max(rss_r, 1e-300):
        return 0.0, 1.0
    if rss_u <= 0.0:
        return float("inf"), 0.0
    f_stat = (gain / df_num) / (rss_u / df_den)
    return f_stat, float(stats.f.sf(f_stat, df_num, df_den))


def fit_iv(data: ClusteredDataset, policy: CovariatePolicy = DEFAULT_POLICY) -> FitResult:
    """Two-stage GLS with the cluster indicators as instruments.

    Ω̂ comes from ANOVA components of preliminary 2SLS residuals (actual T);
    the final estimate is one GLS step of Y on (T̂, 1, C...).
    """
    fs = iv_first_stage(data, policy)
    d_hat = _design(data, policy, fs.t_hat)
    d_act = _design(data, policy, data.t)
    y = data.y

    prelim = least_squares(d_hat.flat, y.ravel())
    resid = y.ravel() - d_act.flat @ prelim.coef

    diagnostics = {
        "partial_f": fs.partial_f,
        "partial_f_pvalue": fs.partial_f_pvalue,
        "weak_instrument": 0.0,
    }
    if np.isfinite(fs.partial_f) and fs.partial_f < WEAK_INSTRUMENT_F:
        diagnostics["weak_instrument"] = 1.0
        warnings.warn(
            f"Weak instrument: first-stage partial F = {fs.partial_f:.3g} < {WEAK_INSTRUMENT_F:g}",
            WeakInstrumentWarning,
            stacklevel=2,
        )

    comps = estimate_variance_components(resid.reshape(data.m, data.n)) if data.n >= 2 else None
    if comps is None or comps.within_boundary:
        N, p = d_hat.flat.shape
        df = N - p
        if df <= 0:
            raise SingularDesign(f"IV: no residual degrees of freedom ({N} rows, {p} columns)")
        sigma2 = float(resid @ resid) / df
        return FitResult(
            method="IV",
            beta_hat=float(prelim.coef[0]),
            coef=prelim.coef,
            coef_names=d_hat.names,
            var_beta_hat=sigma2 * float(prelim.xtx_inv[0, 0]),
            varcomp=comps,
            diagnostics={**diagnostics, "fallback_2sls": 1.0, "sigma2": sigma2},
        )

    kernel = CompoundSymmetryKernel(sigma_within2=comps.sigma_chi2, sigma_between2=comps.sigma_d2, n=data.n)
    coef, sol, scale = _gls("IV", d_hat, y, kernel, resid_design=d_act)
    return FitResult(
        method="IV",
        beta_hat=float(coef[0]),
        coef=coef,
        coef_names=d_hat.names,
        var_beta_hat=float(sol.xtx_inv[0, 0]),
        varcomp=comps,
        diagnostics={
            **diagnostics,
            "varcomp_truncated": float(comps.truncated),
            "gls_scale": scale,
            "condition_number": sol.condition_number,
        },
    )


ESTIMATORS = {
    "OLS": fit_ols,
    "FE": fit_fe,
    "LMM": fit_lmm,
    "IV": fit_iv,
}
