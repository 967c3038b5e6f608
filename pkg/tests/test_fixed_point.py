import math

import numpy as np
import pytest

from minmaxbeam import (FpStatus, SystemConfig, eval_F, lambda_fixed_point,
                        solve_mk)
from minmaxbeam.fixed_point import iterate_from_zero
from conftest import random_feasible_config


def oracle_F_component(lam, mu_k, gamma_k, beta, eps_col, eps_kk):
    """Independent bisection on g_k(y) for cross-checking eval_F."""
    active = sum(b for b, l in zip(beta, lam) if l > 0)
    if mu_k == 0 and active <= 1:
        return 0.0

    def g(y):
        s = mu_k
        for b, l, e in zip(beta, lam, eps_col):
            if l > 0:
                s += b * e * l / (1 + gamma_k * e * l / (eps_kk * y))
        return gamma_k * s / (eps_kk * y) - 1.0

    hi = gamma_k * (mu_k + sum(b * l * e for b, l, e in zip(beta, lam, eps_col))) / eps_kk
    lo = 1e-300
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * hi:
            break
    return 0.5 * (lo + hi)


ISOLATED = SystemConfig(beta=[0.5], eps=[[1.0]], gamma=[1.0], sigma2=1.0,
                        p_budget=1.0)


class TestSolveMk:
    def test_zero_lambda_gives_inverse_mu(self):
        assert solve_mk(2.0, [0.0], ISOLATED, 0).value == pytest.approx(0.5)

    def test_self_consistency_isolated_cell(self):
        # m = 0.75 satisfies 1/(1 + (0.5*4/3)/(1 + (4/3)*0.75)) by substitution
        m = solve_mk(1.0, [4.0 / 3.0], ISOLATED, 0)
        assert m.finite and m.value == pytest.approx(0.75, abs=1e-10)

    def test_infinite_sentinel(self):
        cfg = SystemConfig(beta=[0.5, 0.75], eps=np.ones((2, 2)), gamma=[1, 1],
                           sigma2=1.0, p_budget=1.0)
        m = solve_mk(0.0, [1.0, 0.0], cfg, 0)
        assert not m.finite and math.isinf(m.value)

    def test_residual_on_random_inputs(self, rng):
        for _ in range(50):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            lam = rng.uniform(0, 5, L)
            mu_k = rng.uniform(0.1, 2)
            k = int(rng.integers(L))
            m = solve_mk(mu_k, lam, cfg, k).value
            s = mu_k + np.sum(cfg.beta * lam * cfg.eps[:, k]
                              / (1 + lam * cfg.eps[:, k] * m))
            assert abs(m * s - 1.0) < 1e-10


class TestEvalF:
    def test_zero_lambda_closed_form(self):
        cfg = SystemConfig(beta=[0.5], eps=[[1.0]], gamma=[2.0], sigma2=1.0,
                           p_budget=1.0)
        assert eval_F([0.0], [1.0], [2.0], cfg)[0] == pytest.approx(2.0)

    def test_zero_branch(self):
        cfg = SystemConfig(beta=[0.5, 0.4], eps=np.ones((2, 2)), gamma=[1, 1],
                           sigma2=1.0, p_budget=1.0)
        F = eval_F([0.0, 1.0], [0.0, 1.0], [1.0, 1.0], cfg)
        assert F[0] == 0.0 and F[1] > 0

    def test_isolated_fixed_point(self):
        y = eval_F([4.0 / 3.0], [1.0], [1.0], ISOLATED)[0]
        oracle = oracle_F_component([4.0 / 3.0], 1.0, 1.0, [0.5], [1.0], 1.0)
        assert y == pytest.approx(4.0 / 3.0, abs=1e-10)
        assert y == pytest.approx(oracle, rel=1e-10)

    def test_matches_bisection_oracle_randomized(self, rng):
        for _ in range(30):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            lam = rng.uniform(0, 4, L)
            mu = rng.uniform(0, 2, L)
            mu[int(rng.integers(L))] = rng.uniform(0.5, 2)
            F = eval_F(lam, mu, cfg.gamma, cfg)
            for k in range(L):
                want = oracle_F_component(lam, mu[k], cfg.gamma[k], cfg.beta,
                                          cfg.eps[:, k], cfg.eps[k, k])
                assert F[k] == pytest.approx(want, rel=1e-9, abs=1e-12)

    def test_monotone_in_lambda(self, rng):
        for _ in range(40):
            L = int(rng.integers(2, 5))
            cfg = random_feasible_config(rng, L)
            mu = rng.uniform(0.2, 2, L)
            lam = rng.uniform(0.1, 4, L)
            smaller = lam * rng.uniform(0.3, 0.99, L)
            assert np.all(eval_F(lam, mu, cfg.gamma, cfg)
                          >= eval_F(smaller, mu, cfg.gamma, cfg) - 1e-12)

    def test_scalable(self, rng):
        for _ in range(40):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            mu = rng.uniform(0.05, 2, L)
            lam = rng.uniform(0.1, 4, L)
            a = rng.uniform(1.01, 3)
            assert np.all(a * eval_F(lam, mu, cfg.gamma, cfg)
                          >= eval_F(a * lam, mu, cfg.gamma, cfg) - 1e-10)

    def test_scalability_tight_on_zero_mu_components(self, rng):
        cfg = random_feasible_config(rng, 3)
        if np.sum(cfg.beta) <= 1:
            cfg = SystemConfig(beta=cfg.beta + 0.4, eps=cfg.eps,
                               gamma=np.full(3, 0.3), sigma2=1.0, p_budget=1.0)
        mu = np.array([0.0, 1.5, 1.5])
        lam = np.array([1.0, 2.0, 0.5])
        a = 2.0
        F = eval_F(lam, mu, cfg.gamma, cfg)
        Fa = eval_F(a * lam, mu, cfg.gamma, cfg)
        if F[0] > 0 and Fa[0] > 0:
            assert Fa[0] == pytest.approx(a * F[0], rel=1e-8)


class TestLambdaFixedPoint:
    def test_isolated_closed_form(self):
        res = lambda_fixed_point([1.0], ISOLATED)
        assert res.status is FpStatus.CONVERGED
        # closed form 1/(eps (1/gamma - beta/(1+gamma))) = 1/(1 - 0.25)
        assert res.lam[0] == pytest.approx(4.0 / 3.0, abs=1e-9)
        assert res.residual <= 1e-10

    def test_overloaded_unbounded(self):
        cfg = SystemConfig(beta=[1.5], eps=[[1.0]], gamma=[3.0], sigma2=1.0,
                           p_budget=1.0)
        assert lambda_fixed_point([1.0], cfg).status is FpStatus.UNBOUNDED

    def test_interior_two_cell_matches_closed_form(self):
        # optimal mu of the balanced two-cell reference case, then the fixed
        # point must land on the closed-form pair (2/h(rho*), 2 rho*/h(rho*))
        from minmaxbeam import solve_two_cell
        cfg = SystemConfig(beta=[0.55, 0.5], eps=[[2, 0.5], [0.7, 1.8]],
                           gamma=[5, 5], sigma2=1.0, p_budget=10.0)
        sol = solve_two_cell(cfg)
        res = lambda_fixed_point(sol.mu, cfg)
        assert res.status is FpStatus.CONVERGED
        assert np.allclose(res.lam, sol.lam, atol=1e-8 * (1 + np.max(sol.lam)))

    def test_iterates_from_zero_nondecreasing(self, rng):
        for _ in range(10):
            L = int(rng.integers(1, 5))
            cfg = random_feasible_config(rng, L)
            rows = iterate_from_zero(np.ones(L), cfg, 40)
            diffs = np.diff(rows, axis=0)
            assert np.all(diffs >= -1e-12)

    def test_positivity_pattern(self, rng):
        # components with mu_k > 0 positive; mu_k = 0 all-zero or all-positive
        for _ in range(20):
            cfg = random_feasible_config(rng, 3)
            mu = np.array([0.0, 1.5, 1.5])
            res = lambda_fixed_point(mu, cfg)
            if res.status is not FpStatus.CONVERGED:
                continue
            assert np.all(res.lam[1:] > 0)

    def test_requires_some_positive_mu(self):
        with pytest.raises(ValueError):
            lambda_fixed_point([0.0], ISOLATED)
