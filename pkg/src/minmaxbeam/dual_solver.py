"""Large-system dual solve over the mu simplex, and verification of the
resulting optimality system.

The outer problem max g(mu) over {mu >= 0, sum mu = L} is concave; it is
solved by sweeping all cell pairs (i, j) and maximizing g along the segment
mu_i + mu_j = const with a golden-section line search. Every evaluation of g
solves the inner lambda fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _native
from .fixed_point import FixedPointOptions, eval_F
from .model_core import (ConvergenceError, DualPoint, InfeasibleError, KktReport,
                         SystemConfig, cell_margin, require_valid)


@dataclass(frozen=True)
class DualSolverOptions:
    fp: FixedPointOptions = FixedPointOptions()
    golden_iters: int = 60          # bracket shrinks below 1e-12 of the segment
    max_sweeps: int = 200
    sweep_rel_tol: float = 1e-10    # stop when a sweep gains < tol*(1+|obj|)
    partition_rel_tol: float = 1e-7  # selfish iff lam_k > tol * max lam
    kkt_tol: float = 1e-8
    polish: bool = True             # Newton refinement of the face found by the sweeps
    polish_face_tol: float = 1e-5   # mu_k > tol*L counts as positive for the face


def _noise_vector(cfg: SystemConfig, noise) -> np.ndarray:
    if noise is None:
        return np.full(cfg.L, cfg.sigma2)
    noise = np.asarray(noise, dtype=float)
    if noise.shape != (cfg.L,):
        raise ValueError(f"noise has shape {noise.shape}, expected ({cfg.L},)")
    return noise


def solve_dual(cfg: SystemConfig, opts: DualSolverOptions | None = None,
               noise=None, mu0=None, history_out: list | None = None) -> DualPoint:
    """Maximize the dual objective sum_k beta_k sigma2_k lam_k over the simplex.

    ``noise`` optionally gives per-cell noise powers sigma2_k (the nested
    recursion re-enters here with heterogeneous noise); default is the scalar
    cfg.sigma2 for every cell. ``mu0`` overrides the all-ones initial point
    (must satisfy mu >= 0, sum mu = L). ``history_out``, if given, receives the
    objective value after the initial evaluation and after each sweep.

    Raises InfeasibleError when the targets are unachievable and
    ConvergenceError (carrying the incumbent) when the sweep cap is hit.
    """
    opts = opts or DualSolverOptions()
    require_valid(cfg)
    margins = cell_margin(cfg)
    for k in range(cfg.L):
        if margins[k] <= 0:
            raise InfeasibleError(
                f"infeasible: c[{k}] <= 0 (isolated-cell margin {margins[k]:.6g})",
                structural=True)

    noise = _noise_vector(cfg, noise)
    weights = cfg.beta * noise
    L = cfg.L
    if mu0 is None:
        mu = np.ones(L)
    else:
        mu = np.asarray(mu0, dtype=float).copy()
        if mu.shape != (L,) or np.any(mu < 0) or abs(mu.sum() - L) > 1e-9 * L:
            raise ValueError("mu0 must be nonnegative with sum L")

    fp = opts.fp
    cap = fp.divergence_cap(cfg)
    lam = np.zeros(L)
    st, obj, lam = _native.g_eval(mu, cfg.beta, cfg.eps, cfg.gamma, weights, lam,
                                  False, fp.tol_lambda, fp.max_iter, cap,
                                  fp.tol_m, fp.max_iter, fp.probe_factor)
    _raise_on_status(st, cfg, lam)

    history = history_out if history_out is not None else []
    history.append(float(obj))
    if L > 1:
        pairs = [(i, j) for i in range(L) for j in range(i + 1, L)]
        converged = False
        for _ in range(opts.max_sweeps):
            obj_before = obj
            for (i, j) in pairs:
                st, obj_new = _native.pair_line_search(
                    mu, lam, i, j, cfg.beta, cfg.eps, cfg.gamma, weights, obj,
                    opts.golden_iters, fp.tol_lambda, fp.max_iter, cap,
                    fp.tol_m, fp.max_iter, fp.probe_factor)
                _raise_on_status(st, cfg, lam)
                # exact line maximization keeps the sweep objective nondecreasing
                if obj_new < obj - 1e-9 * (1.0 + abs(obj)):
                    raise RuntimeError("objective decreased within a sweep")
                obj = obj_new
            history.append(float(obj))
            if obj - obj_before <= opts.sweep_rel_tol * (1.0 + abs(obj)):
                converged = True
                break
        if not converged:
            incumbent = _build_dual_point(mu, lam, weights, opts)
            raise ConvergenceError(
                f"pair sweeps did not converge within {opts.max_sweeps}",
                incumbent=incumbent)

    point = _build_dual_point(mu, lam, weights, opts)
    if opts.polish:
        point = _kkt_polish(cfg, point, weights, opts, noise)
    return point


def _raise_on_status(st: int, cfg: SystemConfig, lam) -> None:
    if st == _native.UNBOUNDED:
        raise InfeasibleError(
            "infeasible: dual objective unbounded (multiplier iteration diverged)",
            structural=False)
    if st == _native.MAXITER:
        raise ConvergenceError("multiplier fixed point hit the iteration cap")


def _build_dual_point(mu, lam, weights, opts: DualSolverOptions) -> DualPoint:
    lam = np.asarray(lam, dtype=float)
    thresh = opts.partition_rel_tol * float(lam.max(initial=0.0))
    selfish = tuple(int(k) for k in range(lam.shape[0]) if lam[k] > thresh)
    altruistic = tuple(int(k) for k in range(lam.shape[0]) if lam[k] <= thresh)
    lam_clean = lam.copy()
    lam_clean[list(altruistic)] = 0.0
    return DualPoint(mu=mu, lam=lam_clean, objective=float(np.dot(weights, lam_clean)),
                     selfish=selfish, altruistic=altruistic)


def _kkt_polish(cfg: SystemConfig, point: DualPoint, weights,
                opts: DualSolverOptions, noise) -> DualPoint:
    """Newton refinement of the sweep solution on its active face.

    The line searches resolve coordinate optima only to about the square root
    of the objective noise. On the face identified by the sweeps, the optimum
    is the exact root of: lam_k = F_k on the selfish set, sum mu = L, and
    equal BS power across cells with positive mu (their simplex multipliers
    vanish). A damped finite-difference Newton drives those residuals to
    machine precision; on any failure the unpolished point is returned.
    """
    from . import power_alloc  # deferred: power_alloc imports this module

    L = cfg.L
    sel = list(point.selfish)
    pos = [k for k in sel if point.mu[k] > opts.polish_face_tol * L]
    if not pos:
        return point
    n_sel, n_pos = len(sel), len(pos)

    def residual(theta):
        lam = np.zeros(L)
        lam[sel] = theta[:n_sel]
        mu = np.zeros(L)
        mu[pos] = theta[n_sel:]
        if np.any(theta[:n_sel] <= 0.0) or np.any(theta[n_sel:] < 0.0):
            return None
        F = eval_F(lam, mu, cfg.gamma, cfg, opts.fp)
        trial = DualPoint(mu=mu, lam=lam, objective=float(np.dot(weights, lam)),
                          selfish=tuple(sel),
                          altruistic=tuple(k for k in range(L) if k not in sel))
        try:
            powers = power_alloc.solve_bs_powers(cfg, trial, noise=noise)
        except Exception:
            return None
        r = np.empty(n_sel + n_pos)
        r[:n_sel] = lam[sel] - F[sel]
        r[n_sel] = np.sum(theta[n_sel:]) - L
        pmap = {k: powers[i] for i, k in enumerate(sel)}
        for i, k in enumerate(pos[1:]):
            r[n_sel + 1 + i] = pmap[k] - pmap[pos[0]]
        return r

    theta = np.concatenate([point.lam[sel], point.mu[pos]])
    scale = 1.0 + float(np.max(np.abs(theta)))
    r = residual(theta)
    if r is None:
        return point
    best_theta, best_norm = theta.copy(), float(np.max(np.abs(r)))
    n = theta.size
    for _ in range(30):
        if best_norm <= 1e-13 * scale:
            break
        J = np.empty((n, n))
        ok = True
        for i in range(n):
            h = 1e-7 * (1.0 + abs(theta[i]))
            tp = theta.copy()
            tp[i] += h
            rp = residual(tp)
            if rp is None:
                ok = False
                break
            J[:, i] = (rp - r) / h
        if not ok:
            break
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            break
        improved = False
        for damp in (1.0, 0.5, 0.25, 0.1):
            tn = theta + damp * step
            rn = residual(tn)
            if rn is None:
                continue
            if float(np.max(np.abs(rn))) < best_norm:
                theta, r = tn, rn
                best_theta, best_norm = tn.copy(), float(np.max(np.abs(rn)))
                improved = True
                break
        if not improved:
            break

    # accept only a genuine refinement of the same optimum
    lam = np.zeros(L)
    lam[sel] = best_theta[:n_sel]
    mu = np.zeros(L)
    mu[pos] = best_theta[n_sel:]
    if (np.max(np.abs(lam - point.lam)) > 1e-2 * (1.0 + np.max(point.lam))
            or np.dot(weights, lam) < point.objective - 1e-6 * (1.0 + point.objective)):
        return point
    return _build_dual_point(mu, lam, weights, opts)


def verify_kkt(cfg: SystemConfig, dual: DualPoint, powers,
               opts: DualSolverOptions | None = None, noise=None) -> KktReport:
    """Check the optimality system of the dual solution against its residuals.

    ``powers`` are the selfish BS powers (aligned with dual.selfish) produced
    by the power allocation. z is the simplex multiplier
    (1/L) sum_k beta_k sigma2_k lam_k; x_k = z - P_k for selfish cells and
    z for altruistic ones (their top-level transmit power is zero).
    A failing report is data, not an error.
    """
    opts = opts or DualSolverOptions()
    noise = _noise_vector(cfg, noise)
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (len(dual.selfish),):
        raise ValueError("powers must align with dual.selfish")

    L = cfg.L
    z = float(np.sum(cfg.beta * noise * dual.lam) / L)
    x = np.full(L, z)
    for i, k in enumerate(dual.selfish):
        x[k] = z - powers[i]

    F = eval_F(dual.lam, dual.mu, cfg.gamma, cfg, opts.fp)
    residual_lambda = float(np.max(np.abs(dual.lam - F)))
    residual_mu_sum = float(abs(dual.mu.sum() - L))
    comp_slack = float(np.max(np.abs(dual.mu * x)))

    tol = opts.kkt_tol
    scale = 1.0 + float(np.max(np.abs(dual.lam), initial=0.0))
    return KktReport(
        z=z,
        x=x,
        residual_lambda=residual_lambda,
        residual_mu_sum=residual_mu_sum,
        complementary_slackness=comp_slack,
        pass_x_nonnegative=bool(np.all(x >= -tol * (1.0 + abs(z)))),
        pass_complementary_slackness=bool(comp_slack <= tol * (1.0 + abs(z))),
        pass_lambda_fixed_point=bool(residual_lambda <= tol * scale),
        pass_mu_sum=bool(residual_mu_sum <= tol * L),
    )
