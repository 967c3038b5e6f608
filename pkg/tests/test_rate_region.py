import math

import numpy as np
import pytest

from minmaxbeam import (RateProfile, SystemConfig, feasible_rate,
                        gammas_from_rate, max_rate, sweep_boundary)

FIG3 = SystemConfig(beta=[0.5, 0.75], eps=[[2.1, 0.6], [0.8, 1.6]],
                    gamma=[1, 1], sigma2=1.0, p_budget=10.0)


def isolated_cell_rate(beta, e_diag, p_budget, sigma2=1.0):
    """Independent closed-form: largest r with sigma2*beta*lam(gamma(r)) <= P,
    lam(g) = 1/(e (1/g - beta/(1+g))), by bisection on the monotone power."""
    def power(r):
        g = 2.0 ** (r / beta) - 1.0
        if g == 0:
            return 0.0
        margin = 1.0 / g - beta / (1.0 + g)
        if margin <= 0:
            return math.inf
        return sigma2 * beta / (e_diag * margin)

    lo, hi = 0.0, 1.0
    while power(hi) <= p_budget:
        lo, hi = hi, hi * 2
    for _ in range(200):
        mid = (lo + hi) / 2
        if power(mid) <= p_budget:
            lo = mid
        else:
            hi = mid
    return lo


class TestRateProfile:
    def test_must_sum_to_one(self):
        with pytest.raises(ValueError):
            RateProfile([0.5, 0.6])

    def test_nonnegative(self):
        with pytest.raises(ValueError):
            RateProfile([1.5, -0.5])


class TestGammasFromRate:
    def test_zero_rate(self):
        g = gammas_from_rate(0.0, RateProfile([0.5, 0.5]), FIG3)
        assert np.all(g == 0)

    def test_even_split(self):
        g = gammas_from_rate(2.0, RateProfile([0.5, 0.5]), FIG3)
        assert g[0] == pytest.approx(3.0)  # 2^(1/0.5) - 1
        assert g[1] == pytest.approx(2 ** (1 / 0.75) - 1)

    def test_silent_cell(self):
        g = gammas_from_rate(1.0, RateProfile([1.0, 0.0]), FIG3)
        assert g[0] == pytest.approx(3.0) and g[1] == 0.0


class TestFeasibleRate:
    def test_zero_rate_feasible(self):
        assert feasible_rate(FIG3, RateProfile([0.5, 0.5]), 0.0)

    def test_huge_rate_infeasible(self):
        assert not feasible_rate(FIG3, RateProfile([0.5, 0.5]), 60.0)

    def test_monotone(self):
        profile = RateProfile([0.5, 0.5])
        r = max_rate(FIG3, profile, tol=1e-4)
        for frac in (0.3, 0.7, 0.95):
            assert feasible_rate(FIG3, profile, frac * r)
        assert not feasible_rate(FIG3, profile, r + 0.05)


class TestMaxRate:
    def test_single_cell_closed_form(self):
        r = max_rate(FIG3, RateProfile([1.0, 0.0]), tol=1e-9)
        want = isolated_cell_rate(0.5, 2.1, 10.0)
        assert r == pytest.approx(want, abs=1e-7)

    def test_monotone_in_budget(self):
        small = SystemConfig(beta=FIG3.beta, eps=FIG3.eps, gamma=FIG3.gamma,
                             sigma2=1.0, p_budget=5.0)
        profile = RateProfile([0.5, 0.5])
        assert max_rate(small, profile, tol=1e-5) <= max_rate(FIG3, profile,
                                                              tol=1e-5)

    def test_interference_limited_cap(self):
        # overloaded cell: even unlimited power cannot push gamma past the
        # margin zero, capping r at beta*log2(1+gamma_cap)
        cfg = SystemConfig(beta=[1.5], eps=[[1.0]], gamma=[1.0], sigma2=1.0,
                           p_budget=1e9)
        r = max_rate(cfg, RateProfile([1.0]), tol=1e-7)
        gamma_cap = 1.0 / (1.5 - 1.0)
        assert r <= 1.5 * math.log2(1 + gamma_cap) + 1e-6
        assert r >= 1.5 * math.log2(1 + gamma_cap) * 0.98


class TestSweepBoundary:
    def test_endpoints_match_single_cell(self):
        rows = sweep_boundary(FIG3, 3, tol=1e-7)
        assert rows[0][0] == 0.0 and rows[-1][0] == 1.0
        r_cell2 = isolated_cell_rate(0.75, 1.6, 10.0)
        r_cell1 = isolated_cell_rate(0.5, 2.1, 10.0)
        assert rows[0][2] == pytest.approx(r_cell2, abs=1e-5)
        assert rows[-1][1] == pytest.approx(r_cell1, abs=1e-5)

    def test_symmetric_config_symmetric_boundary(self):
        cfg = SystemConfig(beta=[0.5, 0.5], eps=[[1.5, 0.4], [0.4, 1.5]],
                           gamma=[1, 1], sigma2=1.0, p_budget=10.0)
        rows = sweep_boundary(cfg, 5, tol=1e-6)
        for row, mirror in zip(rows, reversed(rows)):
            assert row[3] == pytest.approx(mirror[4], abs=1e-4)

    def test_rates_are_alpha_times_rstar(self):
        rows = sweep_boundary(FIG3, 5, tol=1e-6)
        for a1, a2, r, rate1, rate2 in rows:
            assert rate1 == pytest.approx(a1 * r)
            assert rate2 == pytest.approx(a2 * r)
