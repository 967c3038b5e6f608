"""Large-system rate-profile optimization: per-profile maximal sum rate via
bisection on feasibility, and boundary sweeps of the average rate region.

A profile alpha (nonnegative, summing to 1) splits the normalized sum rate r
across cells; cell k must then sustain SINR 2^(alpha_k r / beta_k) - 1. A
rate r is feasible when the nested solve succeeds with phi <= 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dual_solver import DualSolverOptions
from .model_core import (ConvergenceError, DimensionExhaustedError, InfeasibleError,
                         SystemConfig, require_valid)
from .power_alloc import nested_solve


@dataclass(frozen=True)
class RateProfile:
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if np.any(alpha < 0):
            raise ValueError("alpha must be componentwise nonnegative")
        if abs(float(alpha.sum()) - 1.0) > 1e-12:
            raise ValueError(f"alpha must sum to 1, got {alpha.sum()!r}")
        alpha = alpha.copy()
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)

    @property
    def L(self) -> int:
        return self.alpha.shape[0]


def gammas_from_rate(r: float, profile: RateProfile, cfg: SystemConfig) -> np.ndarray:
    """Targets gamma_k = 2^(alpha_k r / beta_k) - 1; zero for silent cells."""
    if r < 0:
        raise ValueError("r must be nonnegative")
    out = np.zeros(cfg.L)
    for k in range(cfg.L):
        if profile.alpha[k] > 0:
            out[k] = 2.0 ** (profile.alpha[k] * r / cfg.beta[k]) - 1.0
    return out


def _reduced_problem(cfg: SystemConfig, profile: RateProfile, r: float):
    """Config restricted to the active (alpha_k > 0) cells with targets from r.

    Silent cells transmit nothing and their vacuous gamma = 0 constraints
    would only degenerate the dual, so they are dropped before solving.
    """
    active = [k for k in range(cfg.L) if profile.alpha[k] > 0]
    gam = gammas_from_rate(r, profile, cfg)
    sub = SystemConfig(beta=cfg.beta[active],
                       eps=cfg.eps[np.ix_(active, active)],
                       gamma=gam[active],
                       sigma2=cfg.sigma2,
                       p_budget=cfg.p_budget)
    return sub, active


def feasible_rate(cfg: SystemConfig, profile: RateProfile, r: float,
                  opts: DualSolverOptions | None = None) -> bool:
    """True iff the nested solve at gamma(r) succeeds with phi <= 1."""
    require_valid(cfg)
    if r <= 0:
        return True
    sub, active = _reduced_problem(cfg, profile, r)
    if not active:
        return True
    try:
        sol = nested_solve(sub, opts)
    except (InfeasibleError, DimensionExhaustedError, ConvergenceError):
        return False
    return sol.phi <= 1.0


def max_rate(cfg: SystemConfig, profile: RateProfile, tol: float = 1e-8,
             opts: DualSolverOptions | None = None) -> float:
    """Largest feasible normalized sum rate, by bisection.

    The upper end doubles from 1 until infeasible, then the bracket narrows
    to below ``tol``; the lower end stays feasible and the upper end
    infeasible throughout. Returns ~0 when even tiny rates fail.
    """
    require_valid(cfg)
    lo = 0.0
    hi = 1.0
    for _ in range(60):
        if not feasible_rate(cfg, profile, hi, opts):
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConvergenceError("rate doubling did not reach an infeasible point")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if feasible_rate(cfg, profile, mid, opts):
            lo = mid
        else:
            hi = mid
    return lo


def _simplex_grid(L: int, n_points: int):
    """Profiles on a uniform simplex grid; for L = 2 a 1-D sweep of alpha_1."""
    if L == 2:
        for a in np.linspace(0.0, 1.0, n_points):
            yield RateProfile(np.array([a, 1.0 - a]))
        return
    if L == 1:
        yield RateProfile(np.array([1.0]))
        return
    m = n_points - 1
    if m < 1:
        raise ValueError("need at least 2 grid points per axis")

    def rec(prefix, remaining, cells_left):
        if cells_left == 1:
            yield prefix + [remaining]
            return
        for i in range(remaining + 1):
            yield from rec(prefix + [i], remaining - i, cells_left - 1)

    for combo in rec([], m, L):
        yield RateProfile(np.array(combo, dtype=float) / m)


def sweep_boundary(cfg: SystemConfig, n_points: int, tol: float = 1e-6,
                   opts: DualSolverOptions | None = None):
    """Boundary of the achievable normalized-rate region.

    Returns rows (alpha_1..alpha_L, r_star, rate_1..rate_L) where
    rate_k = alpha_k * r_star is cell k's normalized sum rate beta_k r_k.
    """
    rows = []
    for profile in _simplex_grid(cfg.L, n_points):
        r_star = max_rate(cfg, profile, tol=tol, opts=opts)
        rates = profile.alpha * r_star
        rows.append(tuple(profile.alpha.tolist()) + (r_star,) + tuple(rates.tolist()))
    return rows
