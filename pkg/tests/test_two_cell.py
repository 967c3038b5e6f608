import math

import numpy as np
import pytest

from minmaxbeam import (SystemConfig, TwoCellCase, feasibility_two_cell,
                        nested_solve, solve_two_cell, two_cell_curves,
                        zf_optimality_check)
from conftest import random_bounded_two_cell

FIG_EPS = [[2.0, 0.5], [0.7, 1.8]]


def cfg_zf1():
    return SystemConfig(beta=[0.1, 0.5], eps=FIG_EPS, gamma=[5, 5],
                        sigma2=1.0, p_budget=10.0)


def cfg_interior():
    return SystemConfig(beta=[0.55, 0.5], eps=FIG_EPS, gamma=[5, 5],
                        sigma2=1.0, p_budget=10.0)


def cfg_zf2():
    return SystemConfig(beta=[0.6, 0.2], eps=FIG_EPS, gamma=[5, 2],
                        sigma2=1.0, p_budget=10.0)


class TestFeasibility:
    def test_underloaded_first_condition(self):
        feas = feasibility_two_cell(cfg_zf1())
        assert feas.bounded  # c1 - beta2 = 11/12 - 0.5 >= 0

    def test_negative_margin_unbounded(self):
        cfg = SystemConfig(beta=[1.5, 0.5], eps=FIG_EPS, gamma=[3, 1],
                           sigma2=1.0, p_budget=1.0)
        assert not feasibility_two_cell(cfg).bounded

    def test_interior_case_bounded_by_cross_inequality(self):
        feas = feasibility_two_cell(cfg_interior())
        assert feas.bounded and not feas.marginal


class TestCurves:
    def test_rho_lo_zero_when_cell2_underloaded(self):
        curves = two_cell_curves(cfg_zf2())
        # c2 - beta1 = (1 - 0.2*2/3) - 0.6 >= 0
        assert curves.rho_lo == 0.0

    def test_rho_hi_infinite_when_cell1_underloaded(self):
        curves = two_cell_curves(cfg_zf1())
        assert math.isinf(curves.rho_hi)

    def test_g1_strictly_decreasing_g2_increasing(self, rng):
        for _ in range(30):
            cfg = random_bounded_two_cell(rng)
            curves = two_cell_curves(cfg)
            hi = curves.rho_hi if not math.isinf(curves.rho_hi) else 10 * (1 + curves.rho_lo)
            lo = curves.rho_lo
            r1, r2 = sorted(rng.uniform(lo, hi, 2))
            if r2 - r1 < 1e-9:
                continue
            assert curves.g1(r1) > curves.g1(r2)
            assert curves.g2(r1) < curves.g2(r2)

    def test_limit_values(self):
        cfg = cfg_interior()
        curves = two_cell_curves(cfg)
        c1 = 1 - 0.55 * 5 / 6
        c2 = 1 - 0.5 * 5 / 6
        assert curves.g1(0.0) == pytest.approx(2 * c1 / (0.55 * 5))
        assert curves.g2(math.inf) == pytest.approx(1.8 * c2 / (0.5 * 5))
        assert curves.g1(math.inf) == pytest.approx(2 * (c1 - 0.5) / (0.55 * 5) - 0.5)


class TestSolve:
    def test_reference_case_tags(self):
        assert solve_two_cell(cfg_zf1()).case_tag is TwoCellCase.ZF_CELL1
        assert solve_two_cell(cfg_interior()).case_tag is TwoCellCase.INTERIOR
        assert solve_two_cell(cfg_zf2()).case_tag is TwoCellCase.ZF_CELL2

    def test_zf1_values(self):
        sol = solve_two_cell(cfg_zf1())
        assert math.isinf(sol.rho_star)
        assert sol.lam[0] == 0.0
        assert sol.lam[1] == pytest.approx(10 / 1.05, rel=1e-12)
        assert sol.mu[1] == pytest.approx(2.0)
        assert sol.level2 is not None
        assert sol.level2.mu_bar == 1.0
        assert sol.level2.lambda_bar == pytest.approx(3.0, rel=1e-12)

    def test_interior_intersection(self):
        sol = solve_two_cell(cfg_interior())
        curves = two_cell_curves(cfg_interior())
        assert abs(curves.g1(sol.rho_star) - curves.g2(sol.rho_star)) < 1e-10
        assert sol.mu[0] + sol.mu[1] == pytest.approx(2.0, abs=1e-12)
        assert np.all(sol.mu >= 0)

    def test_objective_maximal_along_rho(self, rng):
        for _ in range(10):
            cfg = random_bounded_two_cell(rng)
            sol = solve_two_cell(cfg)
            curves = two_cell_curves(cfg)
            best = curves.objective(sol.rho_star)
            hi = curves.rho_hi if not math.isinf(curves.rho_hi) \
                else 100 * (1 + curves.rho_lo + (0 if math.isinf(sol.rho_star) else sol.rho_star))
            for r in rng.uniform(curves.rho_lo, hi, 100):
                assert curves.objective(float(r)) <= best * (1 + 1e-9)

    def test_zf1_objective_equals_limit(self):
        cfg = cfg_zf1()
        sol = solve_two_cell(cfg)
        curves = two_cell_curves(cfg)
        c2 = 1 - 0.5 * 5 / 6
        want = 1.0 * 2 * 0.5 * 5 / (1.8 * c2)
        assert curves.objective(sol.rho_star) == pytest.approx(want, rel=1e-12)
        assert np.dot(cfg.beta, sol.lam) == pytest.approx(want, rel=1e-12)

    def test_general_solver_equivalence(self, rng):
        for _ in range(30):
            cfg = random_bounded_two_cell(rng)
            sol = solve_two_cell(cfg)
            ns = nested_solve(cfg)
            top = ns.levels[0].dual
            scale = 1 + np.max(sol.lam)
            assert np.max(np.abs(top.lam - sol.lam)) < 1e-6 * scale
            assert np.max(np.abs(top.mu - sol.mu)) < 1e-6 * 3
            power = ns.bs_power_by_cell()
            for k in range(2):
                assert power[k] == pytest.approx(sol.P[k], rel=1e-6)
            assert ns.phi == pytest.approx(np.max(sol.P) / cfg.p_budget, rel=1e-6)


class TestZfOptimality:
    def test_reference_mapping(self):
        # inequality at index k <=> the other cell zero-forces
        assert zf_optimality_check(cfg_zf1(), 1)
        assert not zf_optimality_check(cfg_zf1(), 0)
        assert zf_optimality_check(cfg_zf2(), 0)
        assert not zf_optimality_check(cfg_zf2(), 1)

    def test_symmetric_config_never_zero_forces(self):
        cfg = SystemConfig(beta=[0.5, 0.5], eps=[[1.5, 0.4], [0.4, 1.5]],
                           gamma=[2, 2], sigma2=1.0, p_budget=10.0)
        assert not zf_optimality_check(cfg, 0)
        assert not zf_optimality_check(cfg, 1)

    def test_consistency_with_solver(self, rng):
        for _ in range(50):
            cfg = random_bounded_two_cell(rng)
            sol = solve_two_cell(cfg)
            if sol.case_tag is TwoCellCase.ZF_CELL1:
                assert zf_optimality_check(cfg, 1)
            elif sol.case_tag is TwoCellCase.ZF_CELL2:
                assert zf_optimality_check(cfg, 0)
            else:
                assert not zf_optimality_check(cfg, 0)
                assert not zf_optimality_check(cfg, 1)
