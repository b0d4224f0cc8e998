import dataclasses
import math

import numpy as np
import pytest

from acsep import (Barrier, Mesh1D, NoiseSpec, PotentialSpec, SolverConfig,
                   bernstein_bound, check_pathwise_bounds, compute_constants,
                   default_alpha, fit_tail, rate_function_N, tail_bound,
                   verify_martingale_tails)
from acsep.analysis import InsufficientTailData
from acsep.solver import PathRecord


def make_chain(delta0=0.5, alpha=0.4, n=32):
    pot = PotentialSpec.logarithmic(1.0, 2.0)
    mesh = Mesh1D(1.0, n)
    cfg = SolverConfig(t_final=0.25, dt=1e-4, lam=1e-4, p=2.0)
    noise = NoiseSpec(sigma=3, n_modes=16, epsilon=1.0)
    u0 = (1 - delta0) * np.sin(np.pi * mesh.nodes())
    return compute_constants(pot, noise, Barrier(3), mesh, cfg, u0, delta0, alpha=alpha)


def synthetic_record(max_m1=0.0, max_m2=0.0, qv1=0.0, qv2=0.0, eps=1.0,
                     g_gap=0.0, vp_stat=0.0):
    return PathRecord(
        path_id=0, seed=0, epsilon=eps, lambda_layer=0.4, sup_trajectory=0.6,
        separation_flag=False, newton_failed=False, newton_residual=0.0,
        final_g=1.0, final_vp=1.0, max_m1=max_m1, max_m2=max_m2,
        qv1=qv1, qv2=qv2, dissipation=0.0, g_gap_max=g_gap, vp_stat_max=vp_stat)


class TestChainArithmetic:
    def test_rho_value(self):
        chain = make_chain(alpha=0.4)
        assert abs(chain.rho - 2.0 / 9.0) < 1e-12

    def test_eta_bar_value(self):
        chain = make_chain(alpha=0.4)
        assert abs(chain.eta_bar - 2.25) < 1e-14

    def test_k0_at_half(self):
        chain = make_chain(delta0=0.5)
        assert chain.k0 == 2.0

    def test_delta_star_below_half_and_delta0(self):
        for d0 in (0.1, 0.5, 0.9):
            chain = make_chain(delta0=d0)
            assert chain.delta_star <= min(d0, 0.5)

    def test_deterministic_chain(self):
        a = make_chain()
        b = make_chain()
        for f in dataclasses.fields(a):
            if f.name == "extras":
                continue
            assert getattr(a, f.name) == getattr(b, f.name)

    def test_alpha_window_enforced(self):
        with pytest.raises(ValueError):
            make_chain(alpha=0.32)  # below 1/3
        with pytest.raises(ValueError):
            make_chain(alpha=0.51)  # above 1/2

    def test_default_alpha_is_midpoint(self):
        assert default_alpha(3, 2.0) == pytest.approx((1 / 3 + 1 / 2) / 2)
        with pytest.raises(ValueError):
            default_alpha(1, 2.0)

    def test_rho_vanishes_at_window_edge(self):
        edge = make_chain(alpha=1 / 3 + 1e-9).rho
        assert 0.0 < edge < 1e-8

    def test_eta_bar_optimization_identity(self):
        chain = make_chain(alpha=0.4)
        s, p, d, a = 3.0, 2.0, 1.0, chain.alpha
        lhs = (s - d / a) / chain.eta_bar
        rhs = (chain.eta_bar - 1.0) / chain.eta_bar * (p * a / d) * (s - d / a)
        assert lhs == pytest.approx(rhs, rel=1e-12)
        assert chain.rho == pytest.approx(lhs, rel=1e-12)

    def test_tilde_constants_dominate(self):
        chain = make_chain()
        assert chain.K1pp_tilde >= chain.K1pp
        assert chain.K1pp_tilde >= chain.K1p * chain.K1 + 1.0
        assert chain.K2pp_tilde == max(chain.K2pp, chain.K2p + 1.0)

    def test_requires_admissible_exponents(self):
        pot = PotentialSpec.logarithmic(1.0, 2.0)
        mesh = Mesh1D(1.0, 8)
        cfg = SolverConfig(t_final=0.25, dt=1e-4, lam=1e-4, p=2.0)
        noise = NoiseSpec(sigma=2, n_modes=4, epsilon=1.0)
        u0 = 0.5 * np.sin(np.pi * mesh.nodes())
        with pytest.raises(ValueError, match="admissib"):
            compute_constants(pot, noise, Barrier(2), mesh, cfg, u0, 0.5)


class TestTailBound:
    def test_out_of_range_is_trivial(self):
        chain = make_chain()
        b = tail_bound(chain, chain.delta_star * 2.0)
        assert b.value == 1.0 and b.out_of_range

    def test_monotone_in_delta(self):
        chain = make_chain()
        d2 = chain.delta_star * 0.9
        d1 = chain.delta_star * 0.5
        b1, b2 = tail_bound(chain, d1), tail_bound(chain, d2)
        assert not b1.out_of_range and not b2.out_of_range
        assert b1.value <= b2.value

    def test_arithmetic_pin(self):
        chain = dataclasses.replace(make_chain(), L=1.0, rho=1.0, delta_star=0.5)
        assert tail_bound(chain, 0.1).value == pytest.approx(math.exp(-10.0), rel=1e-14)


class TestBernstein:
    def test_unit_values(self):
        assert bernstein_bound(1.0, 1.0, 1.0) == pytest.approx(math.exp(-0.5), rel=1e-15)

    def test_degenerate_b(self):
        assert bernstein_bound(2.0, 0.5, 0.0) == pytest.approx(math.exp(-4.0), rel=1e-14)

    def test_decreasing_in_level(self):
        ls = np.linspace(0.1, 5, 50)
        vals = [bernstein_bound(l, 1.3, 0.7) for l in ls]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            bernstein_bound(0.0, 1.0, 1.0)


class TestRateFunction:
    def test_positive_in_small_delta(self):
        chain = make_chain(delta0=0.02)
        n = rate_function_N(chain, 0.01)
        assert n > 0.0 and np.isfinite(n)

    def test_denominators_stay_positive_via_tilde(self):
        chain = make_chain(delta0=0.5)
        # even where L1*delta^-rho < K1 the tilde constants keep N finite
        for d in (0.01, 0.1, 0.4):
            assert np.isfinite(rate_function_N(chain, d))


class TestMartingaleTails:
    def test_noise_off_records_are_vacuous(self):
        chain = make_chain()
        recs = [synthetic_record(eps=0.0) for _ in range(50)]
        rep = verify_martingale_tails(recs, chain, epsilon=0.0)
        assert np.all(rep.satisfied_m1) and np.all(rep.satisfied_m2)
        assert rep.qv_relation_fraction_m1 == 1.0

    def test_level_zero_row(self):
        chain = make_chain()
        recs = [synthetic_record(max_m1=0.5, max_m2=0.2, eps=1.0) for _ in range(20)]
        rep = verify_martingale_tails(recs, chain, epsilon=1.0, levels=[0.0, 1.0])
        assert rep.empirical_m1[0] == 1.0 and rep.bound_m1[0] == 1.0

    def test_maxima_below_level_satisfy_any_bound(self):
        chain = make_chain()
        recs = [synthetic_record(max_m1=0.1, max_m2=0.1) for _ in range(30)]
        rep = verify_martingale_tails(recs, chain, epsilon=1.0, levels=[5.0])
        assert rep.empirical_m1[0] == 0.0
        assert np.all(rep.satisfied_m1)


class TestPathwiseChecks:
    def test_fractions_count_violations(self):
        chain = make_chain()
        good = [synthetic_record(g_gap=0.5 * chain.K1, vp_stat=0.5 * chain.K2)
                for _ in range(9)]
        bad = [synthetic_record(g_gap=2.0 * chain.K1, vp_stat=3.0 * chain.K2)]
        rep = check_pathwise_bounds(good + bad, chain, slack=1.1)
        assert rep.g_bound_fraction == pytest.approx(0.9)
        assert rep.vp_bound_fraction == pytest.approx(0.9)
        assert rep.qv1_fraction == 1.0  # all qv = 0

    def test_qv_envelope(self):
        chain = make_chain()
        ok = synthetic_record(max_m1=1.0, qv1=chain.K1p, eps=1.0)
        bad = synthetic_record(max_m1=0.0, qv1=10.0 * chain.K1p, eps=1.0)
        rep = check_pathwise_bounds([ok, bad], chain, slack=1.1)
        assert rep.qv1_fraction == pytest.approx(0.5)


class TestFitTail:
    def test_recovers_planted_rate(self):
        rho, c = 2.0 / 9.0, 0.35
        rng = np.random.default_rng(1)
        u = rng.uniform(size=200_000)
        lam = (c / (-np.log(u))) ** (1.0 / rho)
        qs = np.quantile(lam, [0.003, 0.01, 0.03, 0.1, 0.2, 0.35])
        fit = fit_tail(lam, rho, delta_queries=qs)
        assert fit.slope == pytest.approx(-c, rel=0.05)
        assert fit.r_squared > 0.99

    def test_constant_samples_insufficient(self):
        with pytest.raises(InsufficientTailData):
            fit_tail(np.full(100, 0.5), 0.2, delta_queries=[0.1, 0.2, 0.3])

    def test_added_lower_tail_mass_raises_every_p_hat(self):
        rng = np.random.default_rng(2)
        lam = rng.uniform(0.2, 0.5, 5000)
        qs = [0.25, 0.3, 0.35, 0.4]
        base = fit_tail(lam, 0.25, delta_queries=qs)
        fat = fit_tail(np.concatenate([lam, np.full(500, 0.01)]), 0.25,
                       delta_queries=qs)
        assert np.all(fat.p_hat > base.p_hat)
