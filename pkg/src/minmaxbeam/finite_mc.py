"""Finite-system Monte-Carlo: channel draws, beamformers parameterized by the
large-system solution, SINR/power measurement, the finite-system dual solver
with downlink power allocation, power-control-only mode, and the experiment
harnesses (rate CDFs, average rate regions, convergence sweeps).

No symbols or receiver noise are ever sampled; SINRs are computed analytically
from channels and beamformers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _native
from .dual_solver import DualSolverOptions
from .linalg_complex import NotPositiveDefiniteError, hpd_solve, null_space_basis
from .model_core import (ConvergenceError, InfeasibleError, NestedSolution,
                         SystemConfig)
from .power_alloc import nested_solve
from .rate_region import RateProfile, gammas_from_rate, max_rate

# ---------------------------------------------------------------------------
# counter-based channel generation
# ---------------------------------------------------------------------------

_U64 = np.uint64
_MIX_GAMMA = _U64(0x9E3779B97F4A7C15)
_MIX_C1 = _U64(0xBF58476D1CE4E5B9)
_MIX_C2 = _U64(0x94D049BB133111EB)


def _mix64(x):
    """splitmix64 finalizer; element indices in, decorrelated 64-bit words out.

    uint64 arithmetic wraps modulo 2^64 by construction.
    """
    with np.errstate(over="ignore"):
        z = (np.asarray(x, dtype=np.uint64) + _MIX_GAMMA)
        z = (z ^ (z >> _U64(30))) * _MIX_C1
        z = (z ^ (z >> _U64(27))) * _MIX_C2
        return z ^ (z >> _U64(31))


def derive_seed(seed: int, stream: int) -> int:
    """Decorrelated child seed for an indexed stream (e.g. one per draw)."""
    return int(_mix64(_mix64(_U64(seed & 0xFFFFFFFFFFFFFFFF)) ^ _U64(stream)))


def _uniform01(words) -> np.ndarray:
    return ((words >> _U64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)


@dataclass(frozen=True)
class ChannelSet:
    """One finite-system draw. h[k][u, j, :] is the channel (length Nt) from
    BS j to user u of cell k; entries iid complex Gaussian with per-entry
    variance eps[k][j]."""

    Nt: int
    U: tuple
    h: tuple
    seed: int

    @property
    def L(self) -> int:
        return len(self.U)

    def restrict(self, cells) -> "ChannelSet":
        """Sub-draw on the given cells (both receivers and BSs)."""
        cells = [int(c) for c in cells]
        h = tuple(np.ascontiguousarray(self.h[k][:, cells, :]) for k in cells)
        return ChannelSet(Nt=self.Nt, U=tuple(self.U[k] for k in cells),
                          h=h, seed=self.seed)


def draw_channels(cfg: SystemConfig, Nt: int, U, seed: int) -> ChannelSet:
    """Deterministic counter-based draw: the entry for (user, cell, BS, antenna)
    depends only on (seed, u, k, j, t), so draws are order-independent.
    Gaussian pairs come from Box-Muller on two mixed streams."""
    if Nt < 1:
        raise ValueError("Nt must be >= 1")
    U = tuple(int(x) for x in U)
    if len(U) != cfg.L or any(u < 1 for u in U):
        raise ValueError("U must give a positive user count per cell")
    base = _mix64(_U64(seed & 0xFFFFFFFFFFFFFFFF))
    t_idx = np.arange(Nt, dtype=np.uint64)
    h = []
    for k in range(cfg.L):
        hk = np.empty((U[k], cfg.L, Nt), dtype=np.complex128)
        key_k = _mix64(base ^ _U64(k))
        for u in range(U[k]):
            key_u = _mix64(key_k ^ _U64(u))
            for j in range(cfg.L):
                key_j = _mix64(key_u ^ _U64(j))
                keys = _mix64(key_j ^ t_idx)
                u1 = _uniform01(_mix64(keys))
                u2 = _uniform01(_mix64(keys ^ _U64(1)))
                radius = np.sqrt(-2.0 * np.log(u1))
                angle = 2.0 * np.pi * u2
                g = radius * (np.cos(angle) + 1j * np.sin(angle))
                hk[u, j, :] = np.sqrt(cfg.eps[k, j] / 2.0) * g
        h.append(hk)
    return ChannelSet(Nt=Nt, U=U, h=tuple(h), seed=int(seed))


# ---------------------------------------------------------------------------
# beamformers and measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BeamformerSet:
    """w[k][u, :] is the precoder of user u in cell k; per_bs_power[k] the
    transmit power sum_u ||w_uk||^2 of BS k. ``pseudo_cells`` flags cells whose
    regularized matrix was singular and solved in its positive eigenspace."""

    w: tuple
    per_bs_power: np.ndarray
    pseudo_cells: tuple = ()

    def recompute_power(self) -> np.ndarray:
        return np.array([float(np.sum(np.abs(wk) ** 2)) for wk in self.w])


def _regularized_gram(channels_to_bs, lam_by_row, mu_k, dim):
    """mu_k I + (1/dim) sum_rows lam_row h^H h for the rows with lam > 0."""
    M = mu_k * np.eye(dim, dtype=np.complex128)
    mask = lam_by_row > 0
    if np.any(mask):
        Hp = channels_to_bs[mask]
        M += (Hp.conj().T * (lam_by_row[mask] / dim)) @ Hp
    return M


def _solve_directions(M, rhs, cell: int, pseudo: list):
    """Columns M^-1 rhs; positive-eigenspace pseudo-solve if M is singular."""
    try:
        return hpd_solve(M, rhs)
    except NotPositiveDefiniteError:
        vals, vecs = np.linalg.eigh(M)
        keep = vals > 1e-12 * max(float(vals.max()), 1.0)
        pseudo.append(cell)
        return vecs[:, keep] @ ((vecs[:, keep].conj().T @ rhs) / vals[keep, None])


def build_beamformers_ls(ch: ChannelSet, sol: NestedSolution) -> BeamformerSet:
    """Beamformers from the large-system recipe, level by level.

    Selfish cells of level n use regularized directions built from that
    level's (mu*, lambda*) and the level's per-user power; cells serving at
    deeper levels first project every channel onto the null space of all
    earlier levels' selfish users' channels from their BS, apply the same
    construction in the reduced dimension, and map back.
    """
    L = ch.L
    w = [np.zeros((ch.U[k], ch.Nt), dtype=np.complex128) for k in range(L)]
    pseudo: list = []
    prior_selfish: list = []

    for lev in sol.levels:
        cells = list(lev.cells)
        sel_local = [cells.index(k) for k in lev.selfish]
        dim = ch.Nt - sum(ch.U[j] for j in prior_selfish)
        if dim < 1:
            raise InfeasibleError("no dimensions left for a deeper level",
                                  structural=True)
        p_by_cell = {k: lev.per_user_power[i] for i, k in enumerate(lev.selfish)}
        lam_by_cell = {k: lev.dual.lam[cells.index(k)] for k in cells}
        mu_by_cell = {k: lev.dual.mu[cells.index(k)] for k in cells}

        for k in lev.selfish:
            # channels from BS k to every user of this level's selfish cells
            rows = np.vstack([ch.h[j][:, k, :] for j in lev.selfish])
            lam_rows = np.concatenate([
                np.full(ch.U[j], lam_by_cell[j]) for j in lev.selfish])
            if prior_selfish:
                blockers = np.vstack([ch.h[j][:, k, :] for j in prior_selfish])
                basis = null_space_basis(blockers)
                rows = rows @ basis
            else:
                basis = None
            M = _regularized_gram(rows, lam_rows, mu_by_cell[k], dim)
            own_rows = ch.h[k][:, k, :] if basis is None else ch.h[k][:, k, :] @ basis
            dirs = _solve_directions(M, own_rows.conj().T, k, pseudo)
            dirs = dirs / np.linalg.norm(dirs, axis=0, keepdims=True)
            scale = math.sqrt(p_by_cell[k] / dim)
            wk = scale * dirs.T
            # w = B wbar maps back isometrically and annihilates the blockers
            w[k] = wk if basis is None else wk @ basis.T

        prior_selfish.extend(lev.selfish)

    power = np.array([float(np.sum(np.abs(wk) ** 2)) for wk in w])
    return BeamformerSet(w=tuple(w), per_bs_power=power, pseudo_cells=tuple(pseudo))


def compute_sinr(ch: ChannelSet, W: BeamformerSet, sigma2: float) -> list:
    """Per-user SINR |h_ukk w_uk|^2 / (sigma2 + sum over other streams)."""
    out = []
    for k in range(ch.L):
        signal = np.zeros(ch.U[k])
        total = np.full(ch.U[k], float(sigma2))
        for j in range(ch.L):
            amp = ch.h[k][:, j, :] @ W.w[j].T  # (U_k, U_j) received amplitudes
            p = np.abs(amp) ** 2
            total += p.sum(axis=1)
            if j == k:
                signal = np.real(amp.diagonal() * amp.diagonal().conj())
        out.append(signal / (total - signal))
    return out


def measured_selfish_interference(ch: ChannelSet, W: BeamformerSet, sigma2: float,
                                  selfish_cells, cell: int) -> np.ndarray:
    """Noise plus interference from the given cells' BSs at cell's users."""
    acc = np.full(ch.U[cell], float(sigma2))
    for j in selfish_cells:
        amp = ch.h[cell][:, j, :] @ W.w[j].T
        acc += (np.abs(amp) ** 2).sum(axis=1)
    return acc


def zero_forcing_violation(ch: ChannelSet, W: BeamformerSet, sol: NestedSolution) -> float:
    """Max |h_sel . w_alt| / (||h|| ||w||) over deeper-level beamformers and the
    selfish users' channels they must annihilate."""
    worst = 0.0
    prior: list = []
    for lev in sol.levels:
        if prior:
            for k in lev.selfish:
                wk = W.w[k]
                norms_w = np.linalg.norm(wk, axis=1)
                for j in prior:
                    hrows = ch.h[j][:, k, :]
                    norms_h = np.linalg.norm(hrows, axis=1)
                    cross = np.abs(hrows @ wk.T)
                    denom = np.outer(norms_h, np.maximum(norms_w, 1e-300))
                    worst = max(worst, float(np.max(cross / denom)))
        prior.extend(lev.selfish)
    return worst


# ---------------------------------------------------------------------------
# finite-system dual solver and power allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FiniteDualSolution:
    """Per-user multipliers, per-BS multipliers, and the zero-forcing cells of
    one finite-system dual solve."""

    lambda_uk: tuple
    mu: np.ndarray
    zf_cells: tuple
    objective: float

    @property
    def L(self) -> int:
        return len(self.lambda_uk)

    def lam_flat(self) -> np.ndarray:
        return np.concatenate([np.asarray(x) for x in self.lambda_uk])


@dataclass(frozen=True)
class FiniteSolverOptions:
    tol_lambda: float = 1e-11
    max_iter: int = 200_000
    golden_iters: int = 48
    max_sweeps: int = 60
    sweep_rel_tol: float = 1e-9
    partition_rel_tol: float = 1e-7
    cap_scale: float = 1e9
    probe_factor: float = 1e3
    max_levels: int = 2   # finite nested recursion depth (levels beyond need a flag)


def _bs_tensor(ch: ChannelSet) -> tuple:
    """(L, G, Nt) tensor of channels grouped by BS, plus cell slices."""
    G = sum(ch.U)
    hbs = np.empty((ch.L, G, ch.Nt), dtype=np.complex128)
    start = np.zeros(ch.L, dtype=np.int64)
    end = np.zeros(ch.L, dtype=np.int64)
    g = 0
    for j in range(ch.L):
        start[j] = g
        for u in range(ch.U[j]):
            for k in range(ch.L):
                hbs[k, g, :] = ch.h[j][u, k, :]
            g += 1
        end[j] = g
    return hbs, start, end


def finite_dual_solve(ch: ChannelSet, gamma, opts: FiniteSolverOptions | None = None,
                      sigma2: float = 1.0, noise_u=None) -> FiniteDualSolution:
    """Finite-system dual: inner monotone multiplier iteration per BS-pair
    line-search step over the mu simplex.

    ``noise_u`` optionally holds per-user noise powers (used by the reduced
    problems of the zero-forcing recursion); the default is sigma2 for all.
    Raises InfeasibleError when the inner iteration diverges at the incumbent.
    """
    opts = opts or FiniteSolverOptions()
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (ch.L,):
        raise ValueError(f"gamma has shape {gamma.shape}, expected ({ch.L},)")
    hbs, start, end = _bs_tensor(ch)
    G = hbs.shape[1]
    gamma_u = np.concatenate([np.full(ch.U[j], gamma[j]) for j in range(ch.L)])
    if noise_u is None:
        noise_u = np.full(G, float(sigma2))
    else:
        noise_u = np.asarray(noise_u, dtype=float)
        if noise_u.shape != (G,):
            raise ValueError("noise_u must have one entry per user")

    own_norm2 = np.array([
        float(np.sum(np.abs(hbs[j, g]) ** 2))
        for j in range(ch.L) for g in range(start[j], end[j])])
    cap = opts.cap_scale * float(np.max(gamma_u * ch.Nt / np.maximum(own_norm2, 1e-12)))

    mu = np.ones(ch.L)
    lam = np.zeros(G)
    st, obj, lam = _native.fin_g_eval(hbs, start, end, mu, gamma_u, noise_u, ch.Nt,
                                      lam, False, opts.tol_lambda, opts.max_iter,
                                      cap, opts.probe_factor)
    _raise_fin_status(st)

    if ch.L > 1:
        pairs = [(i, j) for i in range(ch.L) for j in range(i + 1, ch.L)]
        converged = False
        for _ in range(opts.max_sweeps):
            before = obj
            for (i, j) in pairs:
                st, obj = _native.fin_pair_line_search(
                    mu, lam, i, j, hbs, start, end, gamma_u, noise_u, ch.Nt, obj,
                    opts.golden_iters, opts.tol_lambda, opts.max_iter, cap,
                    opts.probe_factor)
                _raise_fin_status(st)
            if obj - before <= opts.sweep_rel_tol * (1.0 + abs(obj)):
                converged = True
                break
        if not converged:
            raise ConvergenceError("finite dual sweeps did not converge")

    thresh = opts.partition_rel_tol * float(np.max(lam, initial=0.0))
    lambda_uk = []
    zf = []
    for j in range(ch.L):
        lj = lam[start[j]:end[j]].copy()
        if np.all(lj <= thresh):
            lj[:] = 0.0
            zf.append(j)
        lambda_uk.append(lj)
    objective = float(np.dot(lam, noise_u) / ch.Nt)
    return FiniteDualSolution(lambda_uk=tuple(lambda_uk), mu=mu, zf_cells=tuple(zf),
                              objective=objective)


def _raise_fin_status(st: int) -> None:
    if st == _native.UNBOUNDED:
        raise InfeasibleError("finite dual unbounded: targets not achievable",
                              structural=False)
    if st == _native.MAXITER:
        raise ConvergenceError("finite multiplier iteration hit its cap")


def finite_directions(ch: ChannelSet, duals: FiniteDualSolution) -> list:
    """Unit beamforming directions S_uk^-1 h / ||.|| for positive-multiplier
    users (rows of zeros for zero-forcing cells)."""
    hbs, start, end = _bs_tensor(ch)
    lam = duals.lam_flat()
    dirs = []
    for k in range(ch.L):
        out = np.zeros((ch.U[k], ch.Nt), dtype=np.complex128)
        if k not in duals.zf_cells:
            rows = hbs[k]
            M = _regularized_gram(rows, lam, duals.mu[k], ch.Nt)
            own = ch.h[k][:, k, :]
            # own rank-one terms shift S^-1 h only by a scalar factor
            sol = hpd_solve(M, own.conj().T)
            sol = sol / np.linalg.norm(sol, axis=0, keepdims=True)
            out = sol.T
        dirs.append(out)
    return dirs


def finite_power_alloc(ch: ChannelSet, duals: FiniteDualSolution, gamma,
                       sigma2_per_user, directions=None) -> list:
    """Per-user powers p_uk (transmit power p_uk/Nt) equalizing SINR = gamma_k
    for every positive-multiplier user, with directions fixed to S^-1 h.

    ``sigma2_per_user`` is a scalar or a per-cell list of per-user noise
    powers. Raises InfeasibleError when the linear system has no positive
    solution.
    """
    gamma = np.asarray(gamma, dtype=float)
    if directions is None:
        directions = finite_directions(ch, duals)
    active = [(k, u) for k in range(ch.L) if k not in duals.zf_cells
              for u in range(ch.U[k])]
    m = len(active)
    if m == 0:
        return [np.zeros(ch.U[k]) for k in range(ch.L)]

    if np.isscalar(sigma2_per_user):
        noise = {ku: float(sigma2_per_user) for ku in active}
    else:
        noise = {(k, u): float(sigma2_per_user[k][u]) for (k, u) in active}

    # gains[a, b]: stream of active user b received by active user a
    gains = np.empty((m, m))
    for a, (k, u) in enumerate(active):
        for b, (j, v) in enumerate(active):
            amp = ch.h[k][u, j, :] @ directions[j][v]
            gains[a, b] = abs(amp) ** 2

    A = np.zeros((m, m))
    rhs = np.empty(m)
    for a, (k, u) in enumerate(active):
        A[a, :] = -gamma[k] * gains[a, :]
        A[a, a] = gains[a, a]
        rhs[a] = gamma[k] * noise[(k, u)]
    try:
        q = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise InfeasibleError(f"power system singular: {exc}") from exc
    if np.any(q <= 0) or not np.all(np.isfinite(q)):
        raise InfeasibleError("power system has no positive solution")

    p = [np.zeros(ch.U[k]) for k in range(ch.L)]
    for a, (k, u) in enumerate(active):
        p[k][u] = q[a] * ch.Nt
    return p


def finite_beamformers(ch: ChannelSet, duals: FiniteDualSolution, powers,
                       directions=None) -> BeamformerSet:
    """w_uk = sqrt(p_uk/Nt) * unit direction for positive-multiplier users."""
    if directions is None:
        directions = finite_directions(ch, duals)
    w = []
    for k in range(ch.L):
        scale = np.sqrt(np.asarray(powers[k]) / ch.Nt)
        w.append(scale[:, None] * directions[k])
    power = np.array([float(np.sum(np.abs(wk) ** 2)) for wk in w])
    return BeamformerSet(w=tuple(w), per_bs_power=power)


def finite_optimal_beamformers(ch: ChannelSet, gamma, sigma2: float,
                               opts: FiniteSolverOptions | None = None,
                               noise_u=None, _level: int = 0):
    """Full finite-system optimum: dual solve, selfish power allocation, and
    the reduced zero-forcing problems, recursively one level deep (deeper
    levels require raising opts.max_levels).

    Returns (BeamformerSet, list of FiniteDualSolution per level).
    """
    opts = opts or FiniteSolverOptions()
    gamma = np.asarray(gamma, dtype=float)
    duals = finite_dual_solve(ch, gamma, opts, sigma2=sigma2, noise_u=noise_u)

    if noise_u is None:
        noise_per_cell = [np.full(ch.U[k], float(sigma2)) for k in range(ch.L)]
    else:
        noise_per_cell = []
        g = 0
        for k in range(ch.L):
            noise_per_cell.append(np.asarray(noise_u[g:g + ch.U[k]], dtype=float))
            g += ch.U[k]

    dirs = finite_directions(ch, duals)
    powers = finite_power_alloc(ch, duals, gamma, noise_per_cell, dirs)
    W = finite_beamformers(ch, duals, powers, dirs)
    levels = [duals]
    if not duals.zf_cells:
        return W, levels

    if _level + 1 >= opts.max_levels:
        raise ConvergenceError(
            f"zero-forcing recursion needs depth > {opts.max_levels}; "
            "raise FiniteSolverOptions.max_levels")

    zf = list(duals.zf_cells)
    selfish = [k for k in range(ch.L) if k not in zf]
    # exact per-user noise-plus-interference from the selfish transmitters
    noise_sub = []
    for k in zf:
        noise_sub.append(measured_selfish_interference(ch, W, sigma2, selfish, k))

    # project each zero-forcing BS onto the null space of the selfish users'
    # channels from it, and recurse on the reduced channel set
    bases = {}
    dim = None
    for k in zf:
        blockers = np.vstack([ch.h[j][:, k, :] for j in selfish])
        bases[k] = null_space_basis(blockers)
        dim = bases[k].shape[1]
    h_red = []
    for a, k in enumerate(zf):
        hk = np.empty((ch.U[k], len(zf), dim), dtype=np.complex128)
        for b, kb in enumerate(zf):
            hk[:, b, :] = ch.h[k][:, kb, :] @ bases[kb]
        h_red.append(hk)
    ch_red = ChannelSet(Nt=dim, U=tuple(ch.U[k] for k in zf), h=tuple(h_red),
                        seed=ch.seed)
    W_red, sub_levels = finite_optimal_beamformers(
        ch_red, gamma[zf], sigma2, opts,
        noise_u=np.concatenate(noise_sub), _level=_level + 1)

    w = [W.w[k].copy() for k in range(ch.L)]
    for a, k in enumerate(zf):
        w[k] = W_red.w[a] @ bases[k].T
    power = np.array([float(np.sum(np.abs(wk) ** 2)) for wk in w])
    return BeamformerSet(w=tuple(w), per_bs_power=power), levels + sub_levels


def power_control_only(ch: ChannelSet, directions, gamma, sigma2: float,
                       p_budget: float, tol: float = 1e-10,
                       max_iter: int = 200_000) -> list:
    """Fixed directions, optimize powers only: monotone iteration from zero of
    p <- gamma (noise + interference)/gain.

    Returns per-cell arrays of p_uk (transmit power p_uk/Nt); raises
    InfeasibleError when the iteration diverges or a BS exceeds p_budget.
    """
    gamma = np.asarray(gamma, dtype=float)
    active = [(k, u) for k in range(ch.L) for u in range(ch.U[k])
              if np.linalg.norm(directions[k][u]) > 0]
    m = len(active)
    gains = np.empty((m, m))
    for a, (k, u) in enumerate(active):
        for b, (j, v) in enumerate(active):
            gains[a, b] = abs(ch.h[k][u, j, :] @ directions[j][v]) ** 2
    gamma_u = np.array([gamma[k] for (k, u) in active])
    noise_u = np.full(m, float(sigma2))
    cap = 1e6 * p_budget
    st, q, _ = _native.power_fp(gains, gamma_u, noise_u, tol, max_iter, cap)
    if st != _native.CONVERGED:
        raise InfeasibleError("power-control iteration diverged")
    p = [np.zeros(ch.U[k]) for k in range(ch.L)]
    per_bs = np.zeros(ch.L)
    for a, (k, u) in enumerate(active):
        p[k][u] = q[a] * ch.Nt
        per_bs[k] += q[a]
    if np.any(per_bs > p_budget):
        raise InfeasibleError("power-control solution exceeds the BS budget")
    return p


# ---------------------------------------------------------------------------
# experiment harnesses
# ---------------------------------------------------------------------------


def _user_counts(cfg: SystemConfig, Nt: int) -> tuple:
    U = []
    for k in range(cfg.L):
        u = cfg.beta[k] * Nt
        if abs(u - round(u)) > 1e-9:
            raise ValueError(f"beta[{k}] * Nt = {u} is not an integer user count")
        U.append(int(round(u)))
    return tuple(U)


def run_convergence(cfg: SystemConfig, nt_list, n_draws: int, seed: int,
                    opts: DualSolverOptions | None = None) -> list:
    """Measured-vs-predicted errors of the large-system beamformers.

    For each antenna count: mean relative SINR error against the targets,
    mean relative BS power error against the predicted powers, mean relative
    error of noise-plus-interference at deeper-level users against its
    predicted constant, and the worst zero-forcing violation. Returns one dict
    per antenna count.
    """
    sol = nested_solve(cfg, opts)
    p_pred = sol.bs_power_by_cell()
    # predicted noise constant of each deeper-level cell, paired with the
    # selfish cells of all earlier levels whose interference it absorbs
    noise_pred = []
    prior: list = []
    for n, lev in enumerate(sol.levels):
        if n > 0:
            for i, k in enumerate(lev.cells):
                noise_pred.append((k, list(prior), float(lev.noise[i])))
        prior.extend(lev.selfish)

    rows = []
    for Nt in nt_list:
        U = _user_counts(cfg, Nt)
        sinr_err = []
        power_err = []
        noise_err = []
        zf_worst = 0.0
        for d in range(n_draws):
            ch = draw_channels(cfg, Nt, U, derive_seed(seed, d * 1009 + Nt))
            W = build_beamformers_ls(ch, sol)
            sinr = compute_sinr(ch, W, cfg.sigma2)
            for k in range(cfg.L):
                sinr_err.extend(np.abs(sinr[k] / cfg.gamma[k] - 1.0))
            meas = W.per_bs_power
            power_err.extend(
                abs(meas[k] / p_pred[k] - 1.0) for k in range(cfg.L))
            for k, earlier, pred in noise_pred:
                got = measured_selfish_interference(ch, W, cfg.sigma2, earlier, k)
                noise_err.extend(np.abs(got / pred - 1.0))
            zf_worst = max(zf_worst, zero_forcing_violation(ch, W, sol))
        rows.append({
            "Nt": int(Nt),
            "mean_sinr_err": float(np.mean(sinr_err)),
            "mean_power_err": float(np.mean(power_err)),
            "mean_noise_err": float(np.mean(noise_err)) if noise_err else 0.0,
            "max_zf_violation": zf_worst,
        })
    return rows


def run_rate_cdf(cfg: SystemConfig, alpha, nt_list, n_draws: int, seed: int,
                 opts: DualSolverOptions | None = None) -> dict:
    """CDF of the first user of the first cell's rate under the large-system
    beamformers at the large-system optimal operating point.

    Returns {Nt: [(rate, prob), ...]} with rates sorted ascending.
    """
    profile = RateProfile(alpha)
    r_star = max_rate(cfg, profile, opts=opts)
    gam = gammas_from_rate(r_star, profile, cfg)
    cfg_t = SystemConfig(beta=cfg.beta, eps=cfg.eps, gamma=gam,
                         sigma2=cfg.sigma2, p_budget=cfg.p_budget)
    sol = nested_solve(cfg_t, opts)
    out = {}
    for Nt in nt_list:
        U = _user_counts(cfg, Nt)
        rates = np.empty(n_draws)
        for d in range(n_draws):
            ch = draw_channels(cfg_t, Nt, U, derive_seed(seed, d * 2027 + Nt))
            W = build_beamformers_ls(ch, sol)
            sinr = compute_sinr(ch, W, cfg.sigma2)
            rates[d] = math.log2(1.0 + float(sinr[0][0]))
        rates.sort()
        out[int(Nt)] = [(float(r), (i + 1) / n_draws) for i, r in enumerate(rates)]
    return out


def _finite_gammas(profile: RateProfile, r: float, Nt: int, U) -> np.ndarray:
    out = np.zeros(profile.L)
    for k in range(profile.L):
        if profile.alpha[k] > 0:
            out[k] = 2.0 ** (profile.alpha[k] * r * Nt / U[k]) - 1.0
    return out


class _LsCache:
    """Memoized large-system solves keyed by the candidate rate."""

    def __init__(self, cfg: SystemConfig, profile: RateProfile,
                 opts: DualSolverOptions | None):
        self.cfg = cfg
        self.profile = profile
        self.opts = opts
        self.active = [k for k in range(cfg.L) if profile.alpha[k] > 0]
        self._store: dict = {}

    def solve(self, r: float):
        """NestedSolution on the active cells at gamma(r), or None if the
        large-system problem is infeasible (phi > 1 included)."""
        key = round(r, 12)
        if key in self._store:
            return self._store[key]
        gam = gammas_from_rate(r, self.profile, self.cfg)
        sub = SystemConfig(beta=self.cfg.beta[self.active],
                           eps=self.cfg.eps[np.ix_(self.active, self.active)],
                           gamma=gam[self.active],
                           sigma2=self.cfg.sigma2, p_budget=self.cfg.p_budget)
        try:
            sol = nested_solve(sub, self.opts)
            if sol.phi > 1.0:
                sol = None
        except (InfeasibleError, ConvergenceError):
            sol = None
        self._store[key] = sol
        return sol


def _draw_max_rate(feasible, r_hint: float, tol_r: float) -> float:
    """Bisection of a per-draw feasibility predicate; bracket grown from r_hint."""
    if not feasible(tol_r):
        return 0.0
    lo = tol_r
    hi = max(r_hint, 2 * tol_r)
    for _ in range(60):
        if not feasible(hi):
            break
        lo = hi
        hi *= 2.0
    else:
        raise ConvergenceError("per-draw rate doubling found no infeasible point")
    while hi - lo > tol_r:
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def run_avg_rate_region(cfg: SystemConfig, Nt: int, U, n_draws: int, n_alpha: int,
                        mode: str, seed: int,
                        fin_opts: FiniteSolverOptions | None = None,
                        ls_opts: DualSolverOptions | None = None,
                        tol_r: float = 0.02) -> list:
    """Average finite-system rate region boundary for L = 2.

    Per profile point and channel draw, the largest feasible rate is found by
    bisection; feasibility is checked by the selected machinery:

    - ``finite_opt``: full finite dual + power allocation + per-BS budget;
    - ``ls``: large-system beamformers, feasible when every measured SINR
      meets its target within the BS budget;
    - ``pc``: directions from the large-system solution, powers re-optimized.

    Returns rows (alpha_1, mean_rate_1, mean_rate_2).
    """
    if cfg.L != 2:
        raise ValueError("the rate-region harness follows the two-cell experiment")
    if mode not in ("finite_opt", "ls", "pc"):
        raise ValueError(f"unknown mode {mode!r}")
    U = tuple(int(x) for x in U)
    fin_opts = fin_opts or FiniteSolverOptions()

    draws = [draw_channels(cfg, Nt, U, derive_seed(seed, d)) for d in range(n_draws)]
    rows = []
    for a1 in np.linspace(0.0, 1.0, n_alpha):
        profile = RateProfile(np.array([a1, 1.0 - a1]))
        cache = _LsCache(cfg, profile, ls_opts)
        active = cache.active
        # one bracket hint per profile keeps the bisection grid, and with it
        # the large-system cache keys, shared across draws
        r_hint = max(1.0, 2.0 * max_rate(cfg, profile, tol=1e-3, opts=ls_opts))
        mean_r = 0.0
        for ch in draws:
            ch_act = ch.restrict(active)
            U_act = [U[k] for k in active]

            def feasible(r: float) -> bool:
                gam = _finite_gammas(profile, r, Nt, U)[active]
                if mode == "finite_opt":
                    try:
                        W, _ = finite_optimal_beamformers(ch_act, gam, cfg.sigma2,
                                                          fin_opts)
                    except (InfeasibleError, ConvergenceError):
                        return False
                    return bool(np.max(W.per_bs_power) <= cfg.p_budget * (1 + 1e-9))
                sol = cache.solve(r)
                if sol is None:
                    return False
                W = build_beamformers_ls(ch_act, sol)
                if mode == "pc":
                    dirs = [w / np.maximum(np.linalg.norm(w, axis=1, keepdims=True),
                                           1e-300) for w in W.w]
                    try:
                        power_control_only(ch_act, dirs, gam, cfg.sigma2,
                                           cfg.p_budget)
                    except InfeasibleError:
                        return False
                    return True
                sinr = compute_sinr(ch_act, W, cfg.sigma2)
                if np.max(W.per_bs_power) > cfg.p_budget * (1 + 1e-9):
                    return False
                return all(np.all(sinr[i] >= gam[i]) for i in range(len(active)))

            r_draw = _draw_max_rate(feasible, r_hint, tol_r)
            mean_r += r_draw / n_draws
        rows.append((float(a1), float(profile.alpha[0] * mean_r),
                     float(profile.alpha[1] * mean_r)))
    return rows
