"""
tests/test_dgp.py – Unit tests for core/dgp.py and ScenarioConfig validation.
"""
import numpy as np
import pytest
from pydantic import ValidationError

from confound_bench.core.dgp import (
    ReplicationSeed,
    covariance_factor,
    dataset_frame,
    resolve_axis,
    scenario_grid,
    simulate_dataset,
)
from confound_bench.errors import InvalidCovariance, UnknownAxis
from confound_bench.models import ScenarioConfig
from tests.conftest import draw


class TestSimulation:
    def test_same_seed_same_data(self, small_cfg):
        a, b = draw(small_cfg, 3), draw(small_cfg, 3)
        assert np.array_equal(a.y, b.y) and np.array_equal(a.t, b.t) and np.array_equal(a.c, b.c)

    def test_replications_differ(self, small_cfg):
        assert not np.array_equal(draw(small_cfg, 0).y, draw(small_cfg, 1).y)

    def test_shapes(self, small_cfg):
        d = draw(small_cfg)
        assert d.y.shape == (30, 5)
        assert d.c.shape == (30, 5, 2)
        assert d.w_latent.shape == (30, 5, 1)
        assert d.b_latent.shape == (30, 1)
        assert d.covariate_names == ("c_2", "c_3")

    def test_arrays_are_read_only(self, small_cfg):
        with pytest.raises(ValueError):
            draw(small_cfg).y[0, 0] = 1.0

    def test_between_covariate_constant_within_cluster(self, small_cfg):
        c3 = draw(small_cfg).c[:, :, 1]
        assert np.all(c3 == c3[:, :1])

    @pytest.mark.parametrize("mode,w_width,b_width", [
        ("W_only", 1, 0),
        ("B_only", 0, 1),
        ("none", 0, 0),
    ])
    def test_inactive_confounders_are_zero_width(self, mode, w_width, b_width):
        d = draw(ScenarioConfig(m=10, n=3, confounder_mode=mode))
        assert d.w_latent.shape[2] == w_width
        assert d.b_latent.shape[1] == b_width

    def test_noiseless_design_is_constant(self):
        cfg = ScenarioConfig(
            m=6, n=4, confounder_mode="none", covariates=(), alpha_c=(), beta_c=(),
            sigma_a2=0.0, sigma_b2=0.0, sigma_et2=0.0, sigma_ey2=0.0,
        )
        data = draw(cfg)
        assert np.all(data.t == 18.0)
        assert np.allclose(data.y, 3.0 + 0.7 * 18.0, atol=1e-12)
        assert data.y[0, 0] == pytest.approx(15.6)

    def test_exposure_moments_at_defaults(self):
        # E[T] = 18 - 0 - 11 + 0.6 + 0.6; Var[T] = 0.09 + 1 + 1 + 0.36 + 0.36 + 1
        t = draw(ScenarioConfig(m=2000, n=20)).t
        assert t.mean() == pytest.approx(8.2, abs=0.15)
        assert t.var() == pytest.approx(3.81, abs=0.25)

    def test_variable_streams_are_independent_of_mode(self):
        """Turning B off leaves the W draws untouched."""
        wb = draw(ScenarioConfig(m=10, n=4, confounder_mode="W_and_B"))
        w = draw(ScenarioConfig(m=10, n=4, confounder_mode="W_only"))
        assert np.array_equal(wb.w_latent, w.w_latent)
        assert np.array_equal(wb.c, w.c)

    def test_replication_seed_validation(self):
        with pytest.raises(ValueError):
            ReplicationSeed(1, -1)
        with pytest.raises(ValueError):
            ReplicationSeed(2**64, 0)

    def test_frame_layout(self, small_cfg):
        frame = dataset_frame(draw(small_cfg), include_latents=True)
        assert list(frame.columns) == ["cluster", "unit", "y", "t", "c_2", "c_3", "w_1", "b_1"]
        assert len(frame) == 150
        assert frame.groupby("cluster")["b_1"].nunique().max() == 1


class TestCovarianceFactor:
    def test_cholesky(self):
        V = np.array([[2.0, 0.5], [0.5, 1.0]])
        L = covariance_factor(V)
        assert np.allclose(L @ L.T, V)

    def test_singular_psd(self):
        V = np.ones((2, 2))
        L = covariance_factor(V)
        assert np.allclose(L @ L.T, V)

    def test_negative_eigenvalue(self):
        with pytest.raises(InvalidCovariance):
            covariance_factor(np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_multivariate_w(self):
        cfg = ScenarioConfig(
            m=400, n=20, confounder_mode="W_only",
            alpha_w=(0.6, 0.2), beta_w=(0.6, 0.1), mean_w=(1.0, 0.0),
            V_w=((1.0, 0.5), (0.5, 2.0)),
        )
        w = simulate_dataset(cfg, ReplicationSeed(cfg.seed, 0)).w_latent.reshape(-1, 2)
        assert np.allclose(np.cov(w.T), [[1.0, 0.5], [0.5, 2.0]], atol=0.12)


class TestScenarioValidation:
    def test_defaults(self, default_cfg):
        assert (default_cfg.m, default_cfg.n, default_cfg.beta) == (200, 20, 0.7)
        assert default_cfg.mean_c == (0.0, 11.0)

    @pytest.mark.parametrize("kw", [
        dict(V_w=((1.0, 2.0), (2.0, 1.0)), alpha_w=(1.0, 1.0), beta_w=(1.0, 1.0), mean_w=(0.0, 0.0)),
        dict(alpha_c=(1.0,)),
        dict(V_b=((1.0, 0.0),)),
        dict(n=0),
        dict(sigma_a2=-1.0),
        dict(unknown_field=1),
    ])
    def test_invalid_configs_rejected(self, kw):
        with pytest.raises(ValidationError):
            ScenarioConfig(**kw)

    def test_zero_variances_allowed(self):
        cfg = ScenarioConfig(sigma_a2=0.0, sigma_b2=0.0, sigma_et2=0.0, sigma_ey2=0.0)
        assert cfg.sigma_et2 == 0.0


class TestAxes:
    @pytest.mark.parametrize("axis,field,index", [
        ("n", "n", None),
        ("sigma_et2", "sigma_et2", None),
        ("alpha_1w", "alpha_w", 0),
        ("beta_1b", "beta_b", 0),
        ("beta_1c", "beta_0", None),
        ("alpha_2c", "alpha_c", 0),
        ("beta_3c", "beta_c", 1),
    ])
    def test_resolve(self, default_cfg, axis, field, index):
        ref = resolve_axis(axis, default_cfg)
        assert (ref.field, ref.index) == (field, index)

    @pytest.mark.parametrize("axis", ["gamma", "alpha_2w", "beta_4c", "alpha_w"])
    def test_unknown(self, default_cfg, axis):
        with pytest.raises(UnknownAxis):
            resolve_axis(axis, default_cfg)

    def test_grid_points(self, default_cfg):
        grid = scenario_grid(default_cfg, "beta_1w", [-1.0, 0.0, 1.0])
        assert [g.beta_w for g in grid] == [(-1.0,), (0.0,), (1.0,)]
        assert all(g.alpha_w == default_cfg.alpha_w and g.m == default_cfg.m for g in grid)
        assert len({g.seed for g in grid}) == 3

    def test_grid_is_deterministic(self, default_cfg):
        assert scenario_grid(default_cfg, "n", [2, 5]) == scenario_grid(default_cfg, "n", [2, 5])

    def test_integer_axis_rejects_fractions(self, default_cfg):
        with pytest.raises(ValueError):
            scenario_grid(default_cfg, "n", [2.5])

    def test_grid_revalidates(self, default_cfg):
        with pytest.raises(ValidationError):
            scenario_grid(default_cfg, "n", [0])
