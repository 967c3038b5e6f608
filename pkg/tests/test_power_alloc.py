import numpy as np
import pytest

from minmaxbeam import (DimensionExhaustedError, DualPoint, SystemConfig,
                        altruistic_noise, gamma_prime, nested_solve, solve_dual,
                        solve_bs_powers, solve_two_cell)
from minmaxbeam.fixed_point import solve_mk
from minmaxbeam.power_alloc import downlink_power_residual
from conftest import random_feasible_config

FIG_EPS = [[2.0, 0.5], [0.7, 1.8]]


def fig_a_config():
    return SystemConfig(beta=[0.1, 0.5], eps=FIG_EPS, gamma=[5, 5], sigma2=1.0,
                        p_budget=10.0)


class TestGammaPrime:
    def test_single_cell_formula(self):
        cfg = SystemConfig(beta=[0.5], eps=[[1.0]], gamma=[1.0], sigma2=1.0,
                           p_budget=1.0)
        d = solve_dual(cfg)
        lam = d.lam[0]
        want = 1.0 * (1 + 0.5 * lam / 2) / (1 + 0.5 * lam / 4)
        assert gamma_prime(cfg, d)[0] == pytest.approx(want, rel=1e-10)

    def test_zero_forcing_reference_case(self):
        cfg = fig_a_config()
        d = solve_dual(cfg)
        lam2 = 10 / 1.05
        want = 5 * (2 + 0.5 * lam2 * 1.8 / 6) / (2 + 0.5 * lam2 * 1.8 / 36)
        assert gamma_prime(cfg, d)[0] == pytest.approx(want, rel=1e-8)

    def test_never_below_target(self, rng):
        for _ in range(20):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            d = solve_dual(cfg)
            gp = gamma_prime(cfg, d)
            for val, k in zip(gp, d.selfish):
                assert val >= cfg.gamma[k] - 1e-12


class TestSolveBsPowers:
    def test_single_cell(self):
        cfg = SystemConfig(beta=[0.5], eps=[[1.0]], gamma=[1.0], sigma2=1.0,
                           p_budget=1.0)
        d = solve_dual(cfg)
        P = solve_bs_powers(cfg, d)
        assert P[0] == pytest.approx(cfg.sigma2 * 0.5 * d.lam[0], rel=1e-10)

    def test_equal_powers_at_interior_intersection(self):
        cfg = SystemConfig(beta=[0.55, 0.5], eps=FIG_EPS, gamma=[5, 5],
                           sigma2=1.0, p_budget=10.0)
        sol = solve_two_cell(cfg)
        d = solve_dual(cfg)
        P = solve_bs_powers(cfg, d)
        curves_value = cfg.sigma2 * (0.55 + sol.rho_star * 0.5)
        from minmaxbeam import two_cell_curves
        h = two_cell_curves(cfg).h(sol.rho_star)
        assert P[0] == pytest.approx(P[1], rel=1e-8)
        assert P[0] == pytest.approx(curves_value / h, rel=1e-6)

    def test_zero_forcing_closed_form(self):
        cfg = fig_a_config()
        d = solve_dual(cfg)
        P = solve_bs_powers(cfg, d)
        c2 = 1 - 0.5 * 5 / 6
        assert P[0] == pytest.approx(1.0 * 0.5 * 5 / (1.8 * c2), rel=1e-8)

    def test_balance_equation_holds(self, rng):
        # substituting P back into the per-cell power balance must close
        for _ in range(20):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            d = solve_dual(cfg)
            P = solve_bs_powers(cfg, d)
            assert downlink_power_residual(cfg, d, P) < 1e-8

    def test_asymptotic_power_identity(self, rng):
        # p_k eps_kk m_k (mu_k + sum_j ...) = gamma_k (sigma2 + sum_j P_j ...)
        for _ in range(20):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            d = solve_dual(cfg)
            P = solve_bs_powers(cfg, d)
            sel = list(d.selfish)
            for a, k in enumerate(sel):
                m = solve_mk(d.mu[k], d.lam, cfg, k).value
                lhs_sum = d.mu[k]
                rhs_sum = cfg.sigma2
                for b, j in enumerate(sel):
                    r = d.lam[j] * cfg.eps[j, k] * cfg.gamma[k] / (cfg.eps[k, k] * d.lam[k])
                    lhs_sum += cfg.beta[j] * d.lam[j] * cfg.eps[j, k] / (1 + r) ** 2
                    rkj = d.lam[k] * cfg.eps[k, j] * cfg.gamma[j] / (cfg.eps[j, j] * d.lam[j])
                    rhs_sum += P[b] * cfg.eps[k, j] / (1 + rkj) ** 2
                p_k = P[a] / cfg.beta[k]
                lhs = p_k * cfg.eps[k, k] * m * lhs_sum
                rhs = cfg.gamma[k] * rhs_sum
                assert lhs == pytest.approx(rhs, rel=1e-8)

    def test_positive_powers_and_residual(self, rng):
        for _ in range(10):
            cfg = random_feasible_config(rng, 4)
            d = solve_dual(cfg)
            P = solve_bs_powers(cfg, d)
            assert np.all(P > 0)


class TestAltruisticNoise:
    def test_empty_when_all_selfish(self):
        cfg = SystemConfig(beta=[0.5], eps=[[1.0]], gamma=[1.0], sigma2=1.0,
                           p_budget=1.0)
        d = solve_dual(cfg)
        assert altruistic_noise(cfg, d, solve_bs_powers(cfg, d)).size == 0

    def test_zero_forcing_reference_value(self):
        cfg = fig_a_config()
        d = solve_dual(cfg)
        P = solve_bs_powers(cfg, d)
        s1 = altruistic_noise(cfg, d, P)
        assert s1[0] == pytest.approx(1.0 * (1 + 0.5 * 2.5 / 1.05), rel=1e-8)


class TestNestedSolve:
    def test_single_level_when_all_selfish(self):
        cfg = SystemConfig(beta=[0.5, 0.5], eps=[[1.5, 0.4], [0.4, 1.5]],
                           gamma=[2, 2], sigma2=1.0, p_budget=10.0)
        sol = nested_solve(cfg)
        assert len(sol.levels) == 1

    def test_zero_forcing_reference_recursion(self):
        sol = nested_solve(fig_a_config())
        assert len(sol.levels) == 2
        lv1 = sol.levels[1]
        assert lv1.cells == (0,)
        assert lv1.eff_beta[0] == pytest.approx(0.2)
        assert lv1.dual.mu[0] == pytest.approx(1.0, abs=1e-9)
        assert lv1.dual.lam[0] == pytest.approx(3.0, rel=1e-8)
        s1 = 1 + 0.5 * 2.5 / 1.05
        assert lv1.bs_power[0] == pytest.approx(0.2 * 3.0 * s1, rel=1e-8)
        assert lv1.per_user_power[0] == pytest.approx(3.0 * s1, rel=1e-8)
        assert sol.phi == pytest.approx(sol.levels[0].bs_power[0] / 10.0, rel=1e-8)

    def test_max_power_decreases_across_levels(self, rng):
        seen = 0
        for _ in range(40):
            cfg = random_feasible_config(rng, 3)
            sol = nested_solve(cfg)
            if len(sol.levels) > 1:
                seen += 1
                for a, b in zip(sol.levels, sol.levels[1:]):
                    assert np.max(b.bs_power) <= np.max(a.bs_power) * (1 + 1e-8)
        assert seen > 0

    def test_noise_equation_between_levels(self, rng):
        for _ in range(40):
            cfg = random_feasible_config(rng, 3)
            sol = nested_solve(cfg)
            if len(sol.levels) < 2:
                continue
            lv0, lv1 = sol.levels[0], sol.levels[1]
            for i, k in enumerate(lv1.cells):
                want = cfg.sigma2 + sum(
                    lv0.bs_power[a] * cfg.eps[k, j]
                    for a, j in enumerate(lv0.selfish))
                assert lv1.noise[i] == pytest.approx(want, rel=1e-10)

    def test_dim_fraction_strictly_decreasing(self, rng):
        for _ in range(20):
            cfg = random_feasible_config(rng, 4)
            sol = nested_solve(cfg)
            fracs = [lev.eff_dim_fraction for lev in sol.levels]
            assert all(b < a for a, b in zip(fracs, fracs[1:]))
            assert all(f > 0 for f in fracs)

    def test_dimension_exhausted_guard(self):
        # the transition requires a positive remaining dimension fraction;
        # inject the boundary case directly (reachable only at equality)
        cfg = SystemConfig(beta=[0.5, 0.5, 0.2], eps=np.eye(3) + 0.01,
                           gamma=[1, 1, 1], sigma2=1.0, p_budget=1.0)
        from minmaxbeam import power_alloc
        orig = power_alloc.solve_dual

        def fake_solve(sub, opts=None, noise=None, **kw):
            if sub.L == 3:
                lam = np.array([2.0, 2.0, 0.0])
                return DualPoint(mu=np.array([1.5, 1.5, 0.0]), lam=lam,
                                 objective=float(np.dot(sub.beta, lam)),
                                 selfish=(0, 1), altruistic=(2,))
            return orig(sub, opts, noise=noise, **kw)

        power_alloc.solve_dual = fake_solve
        try:
            with pytest.raises(DimensionExhaustedError):
                nested_solve(cfg)
        finally:
            power_alloc.solve_dual = orig
