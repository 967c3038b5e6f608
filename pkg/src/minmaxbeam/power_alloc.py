"""BS powers from the dual solution, altruistic-cell noise, and the nested
zero-forcing recursion across levels.

The selfish BS powers solve a small linear system A p = b whose diagonal is
mu_k plus self-damped cross terms and whose off-diagonals are negative; with
at least one mu_k > 0 the matrix is irreducibly diagonally dominant, hence
nonsingular.
"""

from __future__ import annotations

import numpy as np

from .dual_solver import DualSolverOptions, solve_dual
from .model_core import (DimensionExhaustedError, DualPoint, InfeasibleError, Level,
                         NestedSolution, NumericsError, SystemConfig, require_valid)


def _sel_arrays(cfg: SystemConfig, dual: DualPoint):
    sel = np.asarray(dual.selfish, dtype=int)
    if sel.size == 0:
        raise ValueError("dual has an empty selfish set")
    lam = dual.lam[sel]
    if np.any(lam <= 0):
        raise ValueError("selfish cells must carry strictly positive lambda")
    return sel, lam


def gamma_prime(cfg: SystemConfig, dual: DualPoint) -> np.ndarray:
    """Effective SINR targets gamma'_k >= gamma_k of the selfish power system.

    gamma'_k = gamma_k * (mu_k + sum_j b_j/(1+r_jk)) / (mu_k + sum_j b_j/(1+r_jk)^2)
    with b_j = beta_j lam_j eps_jk and r_jk = lam_j eps_jk gamma_k/(eps_kk lam_k),
    sums over selfish j. The squared denominators make the ratio >= 1.
    """
    sel, lam_s = _sel_arrays(cfg, dual)
    out = np.empty(sel.size)
    for a, k in enumerate(sel):
        gk = cfg.gamma[k]
        num = dual.mu[k]
        den = dual.mu[k]
        for b, j in enumerate(sel):
            r = lam_s[b] * cfg.eps[j, k] * gk / (cfg.eps[k, k] * lam_s[a])
            term = cfg.beta[j] * lam_s[b] * cfg.eps[j, k]
            num += term / (1.0 + r)
            den += term / (1.0 + r) ** 2
        out[a] = gk * num / den
    return out


def solve_bs_powers(cfg: SystemConfig, dual: DualPoint, noise=None) -> np.ndarray:
    """Selfish BS powers P_k (aligned with dual.selfish) via the A p = b system.

    b_k = lam_k beta_k sigma2_k; ``noise`` optionally supplies per-cell
    sigma2_k. Requires at least one mu_k > 0 among the selfish cells.
    """
    sel, lam_s = _sel_arrays(cfg, dual)
    n = sel.size
    if not np.any(dual.mu[sel] > 0):
        raise ValueError("need at least one positive mu among selfish cells")
    sigma2 = np.full(cfg.L, cfg.sigma2) if noise is None else np.asarray(noise, float)

    A = np.zeros((n, n))
    b = np.empty(n)
    for a, k in enumerate(sel):
        diag = dual.mu[k]
        for c, j in enumerate(sel):
            if j == k:
                continue
            r = lam_s[c] * cfg.eps[j, k] * cfg.gamma[k] / (cfg.eps[k, k] * lam_s[a])
            diag += cfg.beta[j] * lam_s[c] * cfg.eps[j, k] / (1.0 + r) ** 2
        A[a, a] = diag
        for c, l in enumerate(sel):
            if l == k:
                continue
            r = lam_s[a] * cfg.eps[k, l] * cfg.gamma[l] / (cfg.eps[l, l] * lam_s[c])
            A[a, c] = -cfg.beta[k] * cfg.eps[k, l] * lam_s[a] / (1.0 + r) ** 2
        b[a] = lam_s[a] * cfg.beta[k] * sigma2[k]

    try:
        p = np.linalg.solve(A, b)  # LU with partial pivoting
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"selfish power system singular: {exc}") from exc
    resid = float(np.max(np.abs(A @ p - b)))
    if resid > 1e-10 * max(1.0, float(np.max(np.abs(b)))):
        raise NumericsError(f"selfish power system residual {resid:.3g} too large")
    if np.any(p <= 0):
        raise NumericsError("selfish power system produced nonpositive powers")
    return p


def downlink_power_residual(cfg: SystemConfig, dual: DualPoint, powers,
                            noise=None) -> float:
    """Max relative mismatch of the per-cell power balance equations.

    Checks P_k eps_kk / (beta_k (sigma2_k + sum_j P_j eps_kj/(1+r_kj)^2))
    against gamma'_k; zero in exact arithmetic for powers from
    solve_bs_powers. Exposed as a cross-check (the A-system and this form
    are algebraically equivalent at a fixed point).
    """
    sel, lam_s = _sel_arrays(cfg, dual)
    sigma2 = np.full(cfg.L, cfg.sigma2) if noise is None else np.asarray(noise, float)
    powers = np.asarray(powers, dtype=float)
    gp = gamma_prime(cfg, dual)
    worst = 0.0
    for a, k in enumerate(sel):
        acc = sigma2[k]
        for c, j in enumerate(sel):
            r = lam_s[a] * cfg.eps[k, j] * cfg.gamma[j] / (cfg.eps[j, j] * lam_s[c])
            acc += powers[c] * cfg.eps[k, j] / (1.0 + r) ** 2
        lhs = powers[a] * cfg.eps[k, k] / (cfg.beta[k] * acc)
        worst = max(worst, abs(lhs - gp[a]) / gp[a])
    return worst


def altruistic_noise(cfg: SystemConfig, dual: DualPoint, powers, noise=None) -> np.ndarray:
    """Asymptotic noise-plus-interference sigma2_k at altruistic cells' users.

    sigma2_k = sigma2_k(current) + sum_{j selfish} P_j eps_kj, aligned with
    dual.altruistic. Empty altruistic set gives an empty array.
    """
    sigma2 = np.full(cfg.L, cfg.sigma2) if noise is None else np.asarray(noise, float)
    powers = np.asarray(powers, dtype=float)
    sel = np.asarray(dual.selfish, dtype=int)
    alt = np.asarray(dual.altruistic, dtype=int)
    out = np.empty(alt.size)
    for a, k in enumerate(alt):
        out[a] = sigma2[k] + float(np.sum(powers * cfg.eps[k, sel]))
    return out


def nested_solve(cfg: SystemConfig, opts: DualSolverOptions | None = None) -> NestedSolution:
    """Solve the full nested recursion: dual, powers, then the reduced problem
    of the altruistic cells with rescaled loadings and lifted noise, until no
    altruistic cells remain.

    At the transition to level n+1 the loadings become beta_k / d with
    d = 1 - sum of the original loadings of all selfish cells so far (the
    projected channels live in a space of that relative dimension), the noise
    of each remaining cell is lifted by the interference of the new selfish
    transmitters, and gamma is unchanged.
    """
    opts = opts or DualSolverOptions()
    require_valid(cfg)

    levels = []
    active = list(range(cfg.L))
    noise = np.full(cfg.L, cfg.sigma2)
    dim_frac = 1.0
    phi = 0.0

    while active:
        idx = np.asarray(active, dtype=int)
        eff_beta = cfg.beta[idx] / dim_frac
        sub = cfg.restrict(active, beta=eff_beta)
        sub_noise = noise[idx]
        dual = solve_dual(sub, opts, noise=sub_noise)

        sel_local = list(dual.selfish)
        powers = solve_bs_powers(sub, dual, noise=sub_noise)
        per_user = powers / eff_beta[sel_local]
        sel_global = [active[i] for i in sel_local]
        alt_global = [active[i] for i in dual.altruistic]

        levels.append(Level(
            cells=tuple(active),
            selfish=tuple(sel_global),
            dual=dual,
            bs_power=powers,
            per_user_power=per_user,
            noise=sub_noise,
            eff_beta=eff_beta,
            eff_dim_fraction=dim_frac,
        ))
        phi = max(phi, float(np.max(powers)) / cfg.p_budget)

        if not alt_global:
            break

        new_dim = dim_frac - float(np.sum(cfg.beta[sel_global]))
        if new_dim <= 1e-12:
            raise DimensionExhaustedError(
                "selfish loadings exhaust the spatial dimensions "
                f"(remaining fraction {new_dim:.3g}) with altruistic cells left")
        alt_noise = altruistic_noise(sub, dual, powers, noise=sub_noise)
        for a, k in enumerate(alt_global):
            noise[k] = alt_noise[a]
        active = alt_global
        dim_frac = new_dim

    return NestedSolution(levels=tuple(levels), phi=phi)
