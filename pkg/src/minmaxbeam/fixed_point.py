"""Large-system interference map F, its scalar self-consistency m_k, and the
multiplier fixed point lambda = F(lambda, mu, gamma).

F_k(lambda, mu_k, gamma_k) = gamma_k / (eps_kk * mbar_k(-mu_k, lambda)) where
mbar_k solves m = 1/(mu_k + sum_j beta_j lam_j eps_jk / (1 + lam_j eps_jk m))
and is infinite exactly when mu_k = 0 and the active loading
sum_j beta_j 1{lam_j>0} stays <= 1; the component of F is zero there.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _native
from .model_core import ConvergenceError, SystemConfig


@dataclass(frozen=True)
class FixedPointOptions:
    """Tolerances and caps of the fixed-point machinery.

    The defaults are tighter than strictly needed for the multipliers
    themselves because the outer line searches compare objective values whose
    noise floor is set here; coordinate optima are resolved only to about the
    square root of that noise.
    """

    tol_lambda: float = 1e-12      # absolute inf-norm on ||lam - F(lam)||
    tol_m: float = 1e-13           # relative tolerance of the scalar m iteration
    max_iter: int = 100_000        # cap for both the m and the lambda iteration
    cap_scale: float = 1e9         # divergence cap = cap_scale * max_k gamma_k/eps_kk
    probe_factor: float = 1e3      # large-start multiplier probing the second fixed point

    def divergence_cap(self, cfg: SystemConfig) -> float:
        return self.cap_scale * float(np.max(cfg.gamma / np.diag(cfg.eps)))


class FpStatus(enum.Enum):
    CONVERGED = "Converged"
    UNBOUNDED = "Unbounded"
    MAX_ITERATIONS = "MaxIterations"


_STATUS = {
    _native.CONVERGED: FpStatus.CONVERGED,
    _native.UNBOUNDED: FpStatus.UNBOUNDED,
    _native.MAXITER: FpStatus.MAX_ITERATIONS,
}


@dataclass(frozen=True)
class MkValue:
    """Value of mbar_k; ``finite`` is False on the infinite-sentinel branch."""

    value: float
    finite: bool


@dataclass(frozen=True)
class LambdaFixedPointResult:
    status: FpStatus
    lam: np.ndarray
    iterations: int
    residual: float

    @property
    def converged(self) -> bool:
        return self.status is FpStatus.CONVERGED


def _as_mu(mu, L) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (L,):
        raise ValueError(f"mu has shape {mu.shape}, expected ({L},)")
    if np.any(mu < 0):
        raise ValueError("mu must be componentwise nonnegative")
    return mu


def solve_mk(mu_k: float, lam, cfg: SystemConfig, k: int,
             opts: FixedPointOptions | None = None) -> MkValue:
    """Solve the scalar self-consistency for mbar_k(-mu_k, lambda).

    Returns the infinite sentinel when mu_k = 0 and the active loading is
    <= 1; otherwise runs the damped fixed-point iteration from
    m0 = 1/(mu_k + sum_j beta_j lam_j eps_jk).
    """
    opts = opts or FixedPointOptions()
    lam = np.asarray(lam, dtype=float)
    if mu_k < 0:
        raise ValueError("mu_k must be nonnegative")
    if np.any(lam < 0):
        raise ValueError("lambda must be componentwise nonnegative")
    if mu_k <= 0.0 and _native.active_loading(lam, cfg.beta) <= 1.0:
        return MkValue(value=math.inf, finite=False)
    eps_col = np.ascontiguousarray(cfg.eps[:, k])
    m0 = 1.0 / (mu_k + float(np.sum(cfg.beta * lam * eps_col)))
    m, conv = _native.mk_damped(mu_k, lam, cfg.beta, eps_col, m0,
                                opts.tol_m, opts.max_iter)
    if not conv:
        raise ConvergenceError(f"m_{k} iteration hit the cap of {opts.max_iter}")
    return MkValue(value=float(m), finite=True)


def eval_F(lam, mu, gamma, cfg: SystemConfig,
           opts: FixedPointOptions | None = None) -> np.ndarray:
    """Componentwise interference map F(lambda, mu, gamma).

    Component k is 0 exactly when mbar_k is infinite; otherwise it is the
    unique positive root of the strictly decreasing g_k, found by bracketed
    bisection on [eps_machine, gamma_k (mu_k + sum beta lam eps)/eps_kk].
    """
    opts = opts or FixedPointOptions()
    lam = np.asarray(lam, dtype=float)
    mu = _as_mu(mu, cfg.L)
    gamma = np.asarray(gamma, dtype=float)
    if np.any(lam < 0):
        raise ValueError("lambda must be componentwise nonnegative")
    out = np.empty(cfg.L)
    for k in range(cfg.L):
        out[k] = _native.f_root_bisect(lam, mu[k], gamma[k], cfg.beta,
                                       np.ascontiguousarray(cfg.eps[:, k]),
                                       cfg.eps[k, k], 200)
    return out


def lambda_fixed_point(mu, cfg: SystemConfig,
                       opts: FixedPointOptions | None = None,
                       gamma=None) -> LambdaFixedPointResult:
    """Solve lambda = F(lambda, mu, gamma) by the monotone iteration from 0.

    When some mu_k = 0 and the total loading exceeds 1 the equation can have a
    second, dominating fixed point; a second iteration from a large start
    probes for it and the fixed point with the larger objective is returned.
    Declares Unbounded when an iterate crosses the divergence cap.
    """
    opts = opts or FixedPointOptions()
    mu = _as_mu(mu, cfg.L)
    if not np.any(mu > 0):
        raise ValueError("mu must have at least one positive component")
    gamma = cfg.gamma if gamma is None else np.asarray(gamma, dtype=float)
    cap = opts.divergence_cap(cfg)
    weights = cfg.beta.copy()  # any positive weights rank the two fixed points

    st, lam, iters, resid, _ = _native.lambda_fp(
        mu, cfg.beta, cfg.eps, gamma, np.zeros(cfg.L),
        opts.tol_lambda, opts.max_iter, cap, opts.tol_m, opts.max_iter)
    if st != _native.CONVERGED:
        return LambdaFixedPointResult(_STATUS[st], lam, int(iters), float(resid))

    if np.any(mu <= 0.0) and float(np.sum(cfg.beta)) > 1.0:
        scale = float(np.max(lam))
        if scale <= 0.0:
            scale = float(np.max(gamma / np.diag(cfg.eps)))
        start = np.full(cfg.L, opts.probe_factor * scale)
        st2, lam2, iters2, resid2, _ = _native.lambda_fp(
            mu, cfg.beta, cfg.eps, gamma, start,
            opts.tol_lambda, opts.max_iter, cap, opts.tol_m, opts.max_iter)
        if st2 == _native.UNBOUNDED:
            return LambdaFixedPointResult(FpStatus.UNBOUNDED, lam2,
                                          int(iters + iters2), float(resid2))
        if st2 == _native.CONVERGED and np.dot(weights, lam2) > np.dot(weights, lam):
            return LambdaFixedPointResult(FpStatus.CONVERGED, lam2,
                                          int(iters + iters2), float(resid2))

    return LambdaFixedPointResult(FpStatus.CONVERGED, lam, int(iters), float(resid))


def iterate_from_zero(mu, cfg: SystemConfig, n_steps: int, gamma=None) -> np.ndarray:
    """First n_steps iterates of lam <- F(lam) from 0, one row per step.

    Exposed for property checks: from zero the sequence is componentwise
    nondecreasing.
    """
    gamma = cfg.gamma if gamma is None else np.asarray(gamma, dtype=float)
    mu = _as_mu(mu, cfg.L)
    lam = np.zeros(cfg.L)
    rows = np.empty((n_steps, cfg.L))
    for n in range(n_steps):
        lam = eval_F(lam, mu, gamma, cfg)
        rows[n] = lam
    return rows
