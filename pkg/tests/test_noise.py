import numpy as np
import pytest

from acsep import (NoiseKind, NoiseSpec, WienerIncrement,
                   apply_H_lambda, draw_increment, eval_h, noise_constants)
from acsep.noise import (draw_increment_matrix, mode_coeffs, power_profile,
                         profile_derivative_sups, validate_noise)


@pytest.fixture(scope="module")
def spec():
    return NoiseSpec(sigma=3, n_modes=16, epsilon=1.0)


class TestCoefficients:
    def test_mode_zero_at_origin(self, spec):
        assert eval_h(spec, 0, 0.0) == 1.0

    def test_vanishes_at_barriers(self, spec):
        for k in (0, 5, 15):
            assert eval_h(spec, k, 1.0) == 0.0
            assert eval_h(spec, k, -1.0) == 0.0

    def test_mode_scaling(self, spec):
        assert eval_h(spec, 3, 0.0) == 0.25
        r = np.linspace(-1, 1, 101)
        assert np.allclose(eval_h(spec, 4, r), eval_h(spec, 0, r) / 5.0)

    def test_index_error(self, spec):
        with pytest.raises(IndexError):
            eval_h(spec, 16, 0.0)

    def test_even_symmetry_exact(self, spec):
        r = np.linspace(0, 1, 257)
        assert np.array_equal(eval_h(spec, 2, r), eval_h(spec, 2, -r))

    def test_degenerate_boundary_damping(self, spec):
        # |h_k| <= (2 delta)^(sigma+3)/(k+1) within delta of the barriers
        for delta in (0.05, 0.01, 0.001):
            r = np.linspace(1.0 - delta, 1.0, 200)
            for k in (0, 7):
                bound = (2 * delta) ** 6 / (k + 1)
                assert np.max(np.abs(eval_h(spec, k, r))) <= bound * (1 + 1e-12)

    def test_lipschitz_bound(self, spec, log_potential):
        rng = np.random.default_rng(2)
        a, b = rng.uniform(-1, 1, 5000), rng.uniform(-1, 1, 5000)
        sups = profile_derivative_sups(spec)
        for k in (0, 3):
            gap = np.abs(eval_h(spec, k, a) - eval_h(spec, k, b))
            assert np.all(gap <= sups[1] / (k + 1) * np.abs(a - b) + 1e-12)
        # the summed W^{1,inf} norms stay below the assumption constant
        ks = np.arange(spec.n_modes)
        norm_sq_sum = np.sum(((sups[0] + sups[1]) / (ks + 1)) ** 2)
        assert norm_sq_sum <= noise_constants(spec, log_potential).c_h ** 2


class TestConstants:
    def test_profile_sup_is_one_at_origin(self, spec):
        sups = profile_derivative_sups(spec)
        assert sups[0] == 1.0
        # cross-check the first derivative sup against dense sampling
        r = np.linspace(-1, 1, 200_001)
        psi = power_profile(spec, r)
        num = np.max(np.abs(np.gradient(psi, r)))
        assert num == pytest.approx(sups[1], rel=1e-4)

    def test_constants_finite_with_tail(self, spec, log_potential):
        nc = noise_constants(spec, log_potential)
        assert np.isfinite(nc.c_h) and np.isfinite(nc.c_h_sigma)
        assert nc.c_h_sigma > nc.c_h > 0
        # tail of a 1/(k+1)^2 series: below c/K and above c/(K+1)
        lead = sum(nc.profile_deriv_sups) ** 2
        assert nc.c_h_sigma_sq_tail <= lead / spec.n_modes * (1 + 1e-12)
        assert nc.f2h2_sup == pytest.approx(1.0, rel=1e-12)  # |theta - theta0| at r=0

    def test_per_mode_decay_consistency(self, spec, log_potential):
        nc8 = noise_constants(NoiseSpec(sigma=3, n_modes=8), log_potential)
        nc16 = noise_constants(spec, log_potential)
        assert nc16.c_h_sigma >= nc8.c_h_sigma
        assert nc16.c_h_sigma_sq_tail < nc8.c_h_sigma_sq_tail

    def test_validate_default_passes(self, spec):
        assert validate_noise(spec)

    def test_validate_flags_heavy_truncation(self):
        with pytest.raises(ValueError, match="tail"):
            validate_noise(NoiseSpec(sigma=3, n_modes=2), tail_rtol=0.05)

    def test_epsilon_range_enforced(self):
        with pytest.raises(ValueError):
            NoiseSpec(epsilon=1.5)


class TestApplyH:
    def test_switched_off_noise(self, spec, log_potential):
        off = NoiseSpec(sigma=3, n_modes=16, epsilon=0.0)
        u = np.linspace(-0.5, 0.5, 11)
        dw = WienerIncrement(dt=1e-4, values=np.ones(16))
        out = apply_H_lambda(off, log_potential, 1e-4, u, dw)
        assert np.all(out == 0.0)

    def test_spatial_homogeneity_at_zero_state(self, spec, log_potential):
        dw = draw_increment(1, 0, 0, 1e-4, 16)
        out = apply_H_lambda(spec, log_potential, 1e-6, np.zeros(9), dw)
        expected = np.sum(dw.values * mode_coeffs(spec))
        assert np.allclose(out, expected, rtol=1e-9)

    def test_single_mode_arithmetic(self, log_potential):
        one = NoiseSpec(sigma=3, n_modes=1, epsilon=1.0)
        dw = WienerIncrement(dt=1e-4, values=np.array([0.01]))
        out = apply_H_lambda(one, log_potential, 0.0, np.full(5, 0.5), dw)
        assert np.allclose(out, 0.01 * 0.75**6)
        assert out[0] == pytest.approx(0.001780, abs=1e-6)

    def test_direct_mode_requires_confined_state(self, spec, log_potential):
        dw = WienerIncrement(dt=1e-4, values=np.zeros(16))
        with pytest.raises(ValueError):
            apply_H_lambda(spec, log_potential, 0.0, np.array([1.5]), dw)

    def test_shape_mismatch(self, spec, log_potential):
        with pytest.raises(ValueError):
            apply_H_lambda(spec, log_potential, 1e-4, np.zeros(4),
                           WienerIncrement(dt=1e-4, values=np.zeros(7)))

    def test_separable_path_matches_mode_loop(self, spec, log_potential):
        custom = NoiseSpec(
            sigma=3, n_modes=16, epsilon=1.0, kind=NoiseKind.CUSTOM,
            custom_h=lambda k, r: (1 - r * r) ** 6 / (k + 1.0))
        rng = np.random.default_rng(0)
        u = rng.uniform(-0.8, 0.8, (3, 12))
        dw = rng.normal(size=(3, 16)) * 1e-2
        fast = apply_H_lambda(spec, log_potential, 1e-4, u, dw)
        loop = apply_H_lambda(custom, log_potential, 1e-4, u, dw)
        assert np.allclose(fast, loop, rtol=1e-12, atol=1e-15)


class TestIncrements:
    def test_shape_and_reproducibility(self):
        inc = draw_increment(5, 3, 100, 2e-4, 16)
        assert inc.values.shape == (16,)
        inc2 = draw_increment(5, 3, 100, 2e-4, 16)
        assert np.array_equal(inc.values, inc2.values)

    def test_variance_within_one_percent(self):
        dt = 3e-4
        vals = draw_increment_matrix(9, np.arange(62_500), 0, dt, 16)
        assert vals.var() == pytest.approx(dt, rel=0.01)

    def test_cross_path_correlation_small(self):
        dt = 1.0
        a = draw_increment_matrix(4, np.arange(2), 0, dt, 50_000)
        corr = np.corrcoef(a[0], a[1])[0, 1]
        assert abs(corr) < 0.01

    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError):
            draw_increment(0, 0, 0, 0.0, 4)
