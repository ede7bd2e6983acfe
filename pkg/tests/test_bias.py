"""
tests/test_bias.py – Unit tests for core/bias.py (analytic asymptotic bias table).
"""
import numpy as np
import pytest

from confound_bench.core.bias import (
    LmmPlimConstants,
    analytic_bias,
    bias_fe,
    bias_iv,
    bias_lmm,
    bias_ols,
    bias_table,
    bias_table_frame,
)
from confound_bench.errors import NotPositiveDefinite, ZeroDenominator
from confound_bench.models import METHODS, SCENARIOS, ScenarioConfig

FIXED, DOUBLE = "m_infty_fixed_n", "m_and_n_infty"
PLIMS = LmmPlimConstants(sigma_de2=1.2, sigma_chie2=1.4, m_cal=2000, reps_cal=50, seed=7)


def cfg_at(n: int, **kw) -> ScenarioConfig:
    return ScenarioConfig(n=n, **kw)


class TestHandDerivedCells:
    @pytest.mark.parametrize("fn,scenario,regime,expected", [
        (bias_iv, "W_only", FIXED, 0.018 / 0.158),
        (bias_ols, "W_only", FIXED, 0.36 / 1.45),
        (bias_fe, "W_only", FIXED, 0.36 / 1.36),
        (bias_iv, "B_only", FIXED, 0.72),
        (bias_ols, "B_only", FIXED, 0.36 / 1.45),
        (bias_fe, "B_only", FIXED, 0.0),
        (bias_ols, "W_and_B", FIXED, 0.72 / 1.81),
        (bias_iv, "W_and_B", FIXED, 0.378 / 0.518),
        (bias_iv, "B_only", DOUBLE, 0.8),
    ])
    def test_defaults_at_n20(self, default_cfg, fn, scenario, regime, expected):
        assert fn(default_cfg, scenario, regime) == pytest.approx(expected, abs=1e-9)

    @pytest.mark.parametrize("fn,scenario,expected", [
        (bias_iv, "W_only", 0.113924),
        (bias_ols, "W_only", 0.248276),
        (bias_fe, "W_only", 0.264706),
        (bias_ols, "W_and_B", 0.397790),
        (bias_iv, "W_and_B", 0.729730),
    ])
    def test_printed_values(self, default_cfg, fn, scenario, expected):
        assert fn(default_cfg, scenario, FIXED) == pytest.approx(expected, abs=5e-7)


class TestZeroCells:
    @pytest.mark.parametrize("kw", [{}, dict(alpha_w=(2.0,), beta_b=(-3.0,)), dict(sigma_et2=0.0)])
    def test_double_asymptotic_zeros_are_exact(self, kw):
        cfg = ScenarioConfig(**kw)
        assert bias_iv(cfg, "W_only", DOUBLE) == 0.0
        assert bias_fe(cfg, "B_only", DOUBLE) == 0.0
        assert bias_lmm(cfg, "B_only", DOUBLE) == 0.0

    def test_fe_b_only_zero_in_fixed_regime(self, default_cfg):
        assert bias_fe(default_cfg, "B_only", FIXED) == 0.0

    def test_no_confounding_pathway(self):
        cfg = ScenarioConfig(alpha_w=(0.0,), alpha_b=(0.0,))
        assert bias_ols(cfg, "W_and_B", FIXED) == 0.0

    def test_fe_zero_when_w_misses_outcome(self):
        assert bias_fe(ScenarioConfig(beta_w=(0.0,), alpha_w=(1.7,)), "W_only", FIXED) == 0.0

    def test_all_unmeasured_effects_zero(self):
        cfg = ScenarioConfig(alpha_w=(0.0,), beta_w=(0.0,), alpha_b=(0.0,), beta_b=(0.0,))
        assert all(c.value == 0.0 for c in bias_table(cfg, PLIMS))


class TestLimits:
    def test_iv_vanishes_monotonically_in_n(self):
        values = [bias_iv(cfg_at(n), "W_only", FIXED) for n in (1, 2, 5, 20, 100, 400, 10_000)]
        assert all(a > b for a, b in zip(values, values[1:]))
        # 0.36 / (0.09·400 + 1.36)
        assert values[5] == pytest.approx(0.36 / 37.36, abs=1e-12)
        assert values[5] < 0.01

    @pytest.mark.parametrize("scenario", SCENARIOS)
    @pytest.mark.parametrize("method", METHODS)
    def test_fixed_n_converges_to_double_regime(self, scenario, method):
        big = cfg_at(10**6)
        fixed = analytic_bias(method, big, scenario, FIXED, PLIMS)
        double = analytic_bias(method, big, scenario, DOUBLE, PLIMS)
        assert fixed == pytest.approx(double, rel=1e-4, abs=1e-5)

    @pytest.mark.parametrize("scenario", SCENARIOS)
    def test_n_one_iv_and_lmm_equal_ols(self, scenario):
        cfg = cfg_at(1)
        ols = bias_ols(cfg, scenario, FIXED)
        assert bias_iv(cfg, scenario, FIXED) == pytest.approx(ols, abs=1e-9)
        assert bias_lmm(cfg, scenario, FIXED) == pytest.approx(ols, abs=1e-9)

    @pytest.mark.parametrize("scenario", ["W_only", "W_and_B"])
    def test_lmm_and_fe_double_cells_identical(self, default_cfg, scenario):
        assert bias_lmm(default_cfg, scenario, DOUBLE) == bias_fe(default_cfg, scenario, DOUBLE)

    @pytest.mark.parametrize("fn", [bias_ols, bias_fe])
    def test_n_independence(self, fn):
        values = {fn(cfg_at(n), "W_and_B", FIXED) for n in (2, 20, 200)}
        assert len(values) == 1


class TestOrderingAndShape:
    def test_ols_less_biased_than_iv_for_between_confounding(self):
        gaps = []
        for n in (2, 5, 20, 100):
            cfg = cfg_at(n)
            ols, iv = abs(bias_ols(cfg, "B_only", FIXED)), abs(bias_iv(cfg, "B_only", FIXED))
            assert ols < iv
            gaps.append(iv - ols)
        assert all(a < b for a, b in zip(gaps, gaps[1:]))

    @pytest.mark.parametrize("field", ["beta_w", "beta_b"])
    @pytest.mark.parametrize("fn", [bias_iv, bias_ols, bias_fe])
    def test_affine_in_outcome_effects(self, fn, field):
        a, b, c = (fn(ScenarioConfig(**{field: (v,)}), "W_and_B", FIXED) for v in (0.0, 0.5, 1.0))
        assert b - a == pytest.approx(c - b, abs=1e-12)

    def test_lmm_affine_in_outcome_effects(self):
        a, b, c = (bias_lmm(ScenarioConfig(beta_w=(v,)), "W_and_B", FIXED, PLIMS) for v in (0.0, 0.5, 1.0))
        assert b - a == pytest.approx(c - b, abs=1e-12)

    @pytest.mark.parametrize("fn", [bias_iv, bias_ols, bias_fe])
    def test_w_and_b_reduces_to_single_family(self, default_cfg, fn):
        no_b = default_cfg.model_copy(update={"alpha_b": (0.0,), "beta_b": (0.0,)})
        no_w = default_cfg.model_copy(update={"alpha_w": (0.0,), "beta_w": (0.0,)})
        assert fn(no_b, "W_and_B", FIXED) == fn(default_cfg, "W_only", FIXED)
        assert fn(no_w, "W_and_B", FIXED) == fn(default_cfg, "B_only", FIXED)

    def test_fe_and_lmm_overlay_at_n200(self):
        for beta_w in np.linspace(-1, 1, 9):
            cfg = ScenarioConfig(n=200, beta_w=(float(beta_w),))
            gap = abs(bias_fe(cfg, "W_and_B", FIXED) - bias_lmm(cfg, "W_and_B", FIXED, PLIMS))
            assert gap < 0.02

    def test_vector_confounders_use_full_quadratic_forms(self):
        V = ((1.0, 0.3), (0.3, 2.0))
        cfg = ScenarioConfig(alpha_w=(0.6, 0.2), beta_w=(0.5, -0.4), mean_w=(0.0, 0.0), V_w=V)
        a, b, Vm = np.array([0.6, 0.2]), np.array([0.5, -0.4]), np.array(V)
        assert bias_fe(cfg, "W_only", FIXED) == pytest.approx((a @ Vm @ b) / (a @ Vm @ a + 1.0))


class TestTable:
    def test_cell_count_and_iv_b_cell(self, default_cfg):
        cells = bias_table(default_cfg, PLIMS)
        assert len(cells) == 24
        iv_b = next(c for c in cells if (c.method, c.scenario, c.regime) == ("IV", "B_only", FIXED))
        assert iv_b.value == pytest.approx(0.72, abs=1e-9)
        assert all(c.n == 20 for c in cells)

    def test_per_scenario_plims(self, default_cfg):
        other = LmmPlimConstants(sigma_de2=0.1, sigma_chie2=3.0, m_cal=2000, reps_cal=50, seed=7)
        cells = bias_table(default_cfg, {"W_only": PLIMS, "B_only": other, "W_and_B": PLIMS})
        lmm_b = next(c for c in cells if (c.method, c.scenario, c.regime) == ("LMM", "B_only", FIXED))
        assert lmm_b.value == pytest.approx(bias_lmm(default_cfg, "B_only", FIXED, other))

    def test_frame_layout(self, default_cfg):
        frame = bias_table_frame(bias_table(default_cfg, PLIMS))
        assert list(frame.columns) == ["regime", "scenario", "IV", "OLS", "FE", "LMM"]
        assert len(frame) == 6
        assert frame.iloc[0]["regime"] == FIXED and frame.iloc[0]["scenario"] == "W_only"


class TestErrors:
    def test_zero_denominator(self):
        cfg = ScenarioConfig(alpha_w=(0.0,), sigma_et2=0.0)
        with pytest.raises(ZeroDenominator):
            bias_fe(cfg, "W_only", FIXED)

    def test_lmm_needs_plims_at_fixed_n(self, default_cfg):
        with pytest.raises(ValueError):
            bias_lmm(default_cfg, "W_only", FIXED)

    def test_plims_must_be_positive(self):
        with pytest.raises(NotPositiveDefinite):
            LmmPlimConstants(sigma_de2=1.0, sigma_chie2=0.0, m_cal=10, reps_cal=2, seed=0)

    def test_zero_between_plim_is_accepted(self):
        plims = LmmPlimConstants(sigma_de2=0.0, sigma_chie2=1.0, m_cal=10, reps_cal=2, seed=0)
        assert plims.sigma_de2 == 0.0
        with pytest.raises(NotPositiveDefinite):
            LmmPlimConstants(sigma_de2=-1e-9, sigma_chie2=1.0, m_cal=10, reps_cal=2, seed=0)

    def test_plims_meta(self):
        assert PLIMS.calibration_meta["m_cal"] == 2000
