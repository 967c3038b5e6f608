"""Shared generators for randomized checks.

Configs are drawn with a safety margin on the isolated-cell feasibility
c_k = 1 - beta_k gamma_k / (1 + gamma_k) and moderate cross gains, then
filtered for boundedness (closed form for two cells, a trial solve
otherwise), so downstream tests exercise only well-posed instances.
"""

import numpy as np
import pytest

from minmaxbeam import (FpStatus, SystemConfig, feasibility_two_cell,
                        lambda_fixed_point)


def random_config(rng, L, margin=0.05, cross_max=0.7):
    while True:
        gamma = 10.0 ** rng.uniform(-0.3, 0.8, L)
        beta = rng.uniform(0.15, 1.1, L)
        c = 1.0 - beta * gamma / (1.0 + gamma)
        if np.any(c < margin):
            continue
        diag = 10.0 ** rng.uniform(-0.3, 0.5, L)
        eps = np.empty((L, L))
        for k in range(L):
            for j in range(L):
                eps[k, j] = diag[j] if k == j else diag[j] * rng.uniform(0.05, cross_max)
        return SystemConfig(beta=beta, eps=eps, gamma=gamma, sigma2=1.0,
                            p_budget=10.0)


def random_feasible_config(rng, L, margin=0.05, cross_max=0.7):
    """Random config with a bounded dual (hence solvable targets)."""
    while True:
        cfg = random_config(rng, L, margin, cross_max)
        if L == 2:
            feas = feasibility_two_cell(cfg)
            if feas.bounded and not feas.marginal:
                return cfg
            continue
        # boundedness of the inner problem is mu-independent up to boundary
        # equalities, so one interior evaluation decides it
        res = lambda_fixed_point(np.ones(L), cfg)
        if res.status is FpStatus.CONVERGED:
            return cfg


def random_bounded_two_cell(rng, **kw):
    return random_feasible_config(rng, 2, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
