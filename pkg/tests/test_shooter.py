import numpy as np
import pytest
from hypothesis import given, strategies as st

from sharpshooter.errors import ContractError
from sharpshooter.results import CROSSED, FAILED, VALID
from sharpshooter.shooter import (SharpShooterConfig, alpha_gd_cf, alpha_grid, endpoints,
                                  interpolate_codes, line_search_cf, project_to_target)
from sharpshooter.vae import build_vae

from toys import constant_vae, identity_vae, scripted_pipeline

codes = st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=6)


class TestInterpolate:
    def test_endpoints_exact(self):
        zb, zt = np.array([0.1, -3.7]), np.array([2.9, 1e-3])
        assert np.array_equal(interpolate_codes(zb, zt, 0.0), zb)
        assert np.array_equal(interpolate_codes(zb, zt, 1.0), zt)

    def test_quarter(self):
        np.testing.assert_array_equal(interpolate_codes([0.0, 0.0], [2.0, 4.0], 0.25), [0.5, 1.0])

    def test_column_of_alphas(self):
        z = interpolate_codes([0.0], [1.0], np.array([[0.0], [0.5], [1.0]]))
        np.testing.assert_array_equal(z, [[0.0], [0.5], [1.0]])

    @given(codes, st.floats(0, 1))
    def test_degenerate_line(self, z, a):
        assert np.array_equal(interpolate_codes(z, z, a), np.array(z))

    def test_shape_mismatch(self):
        with pytest.raises(ContractError):
            interpolate_codes([0.0, 1.0], [0.0], 0.5)


class TestGrid:
    def test_ascending_uniform(self):
        np.testing.assert_array_equal(alpha_grid(SharpShooterConfig(n_alpha=4)), [0.25, 0.5, 0.75, 1.0])

    def test_random_toggle_in_range(self):
        g = alpha_grid(SharpShooterConfig(n_alpha=50, sampling="random", sampling_seed=3))
        assert np.all(np.diff(g) >= 0) and g.min() > 0 and g.max() <= 1
        assert np.array_equal(g, alpha_grid(SharpShooterConfig(n_alpha=50, sampling="random",
                                                               sampling_seed=3)))

    @pytest.mark.parametrize("kw", [{"p": 1.5}, {"p": 0.0}, {"tol": 0.0}, {"n_alpha": 0},
                                    {"gd_lr": -1.0}, {"sampling": "sobol"}])
    def test_config_validation(self, kw):
        with pytest.raises(ContractError):
            SharpShooterConfig(**kw)


class TestProjection:
    def test_identity_tvae(self):
        x = np.array([[0.3, -0.2]])
        np.testing.assert_array_equal(project_to_target(identity_vae(2, role="target"), x), x)

    def test_requires_target_role(self):
        with pytest.raises(ContractError):
            endpoints(identity_vae(1), identity_vae(1), [[0.0]])

    def test_deterministic(self):
        from sharpshooter.schema import FeatureSchema
        tvae = build_vae(FeatureSchema(("a", "b")), 2, (4,), role="target", seed=4)
        x = np.array([[0.5, 1.0]])
        assert np.array_equal(project_to_target(tvae, x), project_to_target(tvae, x))


class TestLineSearch:
    def test_crossed_only_when_tolerance_misses_grid(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        r = line_search_cf(f, tvae, uvae, x, SharpShooterConfig(tol=0.06, n_alpha=10))
        assert (r.status, r.alpha) == (CROSSED, 0.6)

    def test_valid_with_wider_tolerance(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        r = line_search_cf(f, tvae, uvae, x, SharpShooterConfig(tol=0.15, n_alpha=10))
        assert (r.status, r.alpha) == (VALID, 0.6)
        assert r.score == pytest.approx(0.6) and r.x_cf[0] == pytest.approx(0.6)

    def test_never_crossing(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: np.full_like(a, 0.2))
        r = line_search_cf(f, tvae, uvae, x, SharpShooterConfig(n_alpha=10))
        assert r.status == FAILED and r.x_cf is None

    def test_calls_classifier_once_per_grid_point(self):
        seen = []
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        r = line_search_cf(lambda c: (seen.append(len(c)), f(c))[1], tvae, uvae, x,
                           SharpShooterConfig(n_alpha=37))
        assert sum(seen) == 37 and r.iterations == 37

    def test_records_time(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        assert line_search_cf(f, tvae, uvae, x, SharpShooterConfig()).wall_time > 0

    def test_custom_target(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        r = line_search_cf(f, tvae, uvae, x, SharpShooterConfig(target=0.8, tol=0.05, n_alpha=100))
        assert r.status == VALID and r.alpha == pytest.approx(0.76)


class TestAlphaGd:
    def test_converges_just_past_threshold(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a)
        r = alpha_gd_cf(f, tvae, uvae, x, SharpShooterConfig(tol=0.01))
        assert r.status == VALID and 0.5 < r.alpha <= 0.51

    def test_already_satisfied(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: a + 0.02)
        r = alpha_gd_cf(f, tvae, uvae, x, SharpShooterConfig(tol=0.05))
        assert r.status == VALID and r.iterations == 0 and r.alpha == 0.5

    def test_zero_iterations_budget(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: 0.3 * a)
        r = alpha_gd_cf(f, tvae, uvae, x, SharpShooterConfig(gd_max_iters=0))
        assert r.status == FAILED and r.iterations == 0

    def test_flat_curve_fails(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: np.full_like(a, 0.2))
        assert alpha_gd_cf(f, tvae, uvae, x, SharpShooterConfig()).status == FAILED

    def test_alpha_stays_in_unit_interval(self):
        f, tvae, uvae, x = scripted_pipeline(lambda a: 1.0 - 0.9 * a)
        r = alpha_gd_cf(f, tvae, uvae, x, SharpShooterConfig(gd_lr=50.0, tol=0.01))
        assert 0.0 < r.alpha <= 1.0

    def test_final_loss_not_above_start(self):
        first = []
        curve = lambda a: 1 / (1 + np.exp(-25 * (a - 0.7)))
        f, tvae, uvae, x = scripted_pipeline(curve)
        cfg = SharpShooterConfig(tol=0.01, gd_lr=3.0)
        r = alpha_gd_cf(lambda c: (first.append(float(f(c)[0])), f(c))[1], tvae, uvae, x, cfg)
        assert (r.score - 0.505) ** 2 <= (first[0] - 0.505) ** 2
        assert r.status == VALID


def alpha_preimage_width(curve, lo, hi, n=200_001):
    a = np.linspace(0, 1, n)
    s = curve(a)
    inside = (s > lo) & (s < hi)
    return inside.sum() / (n - 1)


@given(st.floats(0.15, 0.85), st.floats(4.0, 40.0), st.sampled_from([10, 50, 100]))
def test_monotone_methods_agree(centre, slope, S):
    curve = lambda a: 1 / (1 + np.exp(-slope * (a - centre)))
    f, tvae, uvae, x = scripted_pipeline(curve)
    cfg = SharpShooterConfig(tol=0.05, n_alpha=S)
    line = line_search_cf(f, tvae, uvae, x, cfg)
    gd = alpha_gd_cf(f, tvae, uvae, x, cfg)
    for r in (line, gd):
        if r.status != FAILED:
            assert r.score > 0.5
    if line.status == VALID and gd.status == VALID:
        band = alpha_preimage_width(curve, 0.5, 0.55)
        assert abs(line.alpha - gd.alpha) <= 1.0 / S + band + 1e-9


def test_constant_target_projection_fails_cleanly():
    tvae = constant_vae(2, 0.0)
    uvae = identity_vae(2)
    f = lambda c: np.full(len(c), 0.1)
    r = line_search_cf(f, tvae, uvae, np.zeros((1, 2)), SharpShooterConfig())
    assert r.status == FAILED and r.alpha is None
