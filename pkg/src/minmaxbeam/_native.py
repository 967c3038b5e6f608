"""Compiled inner loops for the dual fixed-point machinery.

Everything here is numba-jitted and operates on plain float64/complex128
arrays; the public modules wrap these kernels with validation and result
types. Status codes are shared across kernels:

    0   converged
    1   unbounded (an iterate crossed the divergence cap)
    2   iteration cap reached without convergence or divergence
"""

import numpy as np
from numba import njit

CONVERGED = 0
UNBOUNDED = 1
MAXITER = 2


@njit(cache=True)
def mk_damped(mu_k, lam, beta, eps_col, m0, rel_tol, max_iter):
    """Scalar self-consistency m = 1/(mu_k + sum_j beta_j lam_j e_j/(1+lam_j e_j m)).

    Damped fixed-point iteration (factor 0.5 on oscillation). ``eps_col[j]``
    is the gain from BS k to cell j's users, i.e. eps[j, k]. Returns
    (m, converged). The caller must rule out the divergent branch
    (mu_k = 0 with sum of active loadings <= 1) beforehand.
    """
    L = lam.shape[0]
    m = m0
    prev_step = 0.0
    for _ in range(max_iter):
        s = mu_k
        for j in range(L):
            lj = lam[j]
            if lj > 0.0:
                e = eps_col[j]
                s += beta[j] * lj * e / (1.0 + lj * e * m)
        m_new = 1.0 / s
        step = m_new - m
        if step * prev_step < 0.0:
            step *= 0.5
            m_new = m + step
        prev_step = step
        if abs(step) <= rel_tol * m_new:
            return m_new, True
        m = m_new
    return m, False


@njit(cache=True)
def active_loading(lam, beta):
    """sum_j beta_j * 1{lam_j > 0}."""
    s = 0.0
    for j in range(lam.shape[0]):
        if lam[j] > 0.0:
            s += beta[j]
    return s


@njit(cache=True)
def f_root_bisect(lam, mu_k, gamma_k, beta, eps_col, eps_kk, max_iter):
    """Unique positive root of g_k(y) = (gamma_k/(e_kk y))[mu_k + S(y)] - 1.

    g_k is strictly decreasing in y, positive near 0 and negative at
    y_hi = gamma_k (mu_k + sum beta lam eps)/e_kk, so bisection always
    brackets. Returns 0.0 on the divergent-denominator branch.
    """
    L = lam.shape[0]
    if mu_k <= 0.0 and active_loading(lam, beta) <= 1.0:
        return 0.0
    s_lin = mu_k
    for j in range(L):
        s_lin += beta[j] * lam[j] * eps_col[j]
    hi = gamma_k * s_lin / eps_kk
    lo = 2.220446049250313e-16 * hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s = mu_k
        for j in range(L):
            lj = lam[j]
            if lj > 0.0:
                e = eps_col[j]
                s += beta[j] * e * lj / (1.0 + gamma_k * e * lj / (eps_kk * mid))
        g = gamma_k * s / (eps_kk * mid) - 1.0
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * hi:
            break
    return 0.5 * (lo + hi)


@njit(cache=True)
def eval_f_inplace(lam, mu, beta, eps, gamma, m_ws, out, m_rel_tol, m_max_iter):
    """out[k] = F_k(lam, mu_k, gamma_k) for all k, via the m self-consistency.

    ``m_ws`` carries warm starts for the inner scalar iterations (<= 0 means
    cold). Returns False if any inner iteration failed to converge.
    """
    L = lam.shape[0]
    act = active_loading(lam, beta)
    ok = True
    for k in range(L):
        if mu[k] <= 0.0 and act <= 1.0:
            out[k] = 0.0
            m_ws[k] = -1.0
            continue
        s_lin = mu[k]
        for j in range(L):
            s_lin += beta[j] * lam[j] * eps[j, k]
        m0 = m_ws[k] if m_ws[k] > 0.0 else 1.0 / s_lin
        m, conv = mk_damped(mu[k], lam, beta, eps[:, k].copy(), m0, m_rel_tol, m_max_iter)
        if not conv:
            ok = False
        m_ws[k] = m
        out[k] = gamma[k] / (eps[k, k] * m)
    return ok


@njit(cache=True)
def lambda_fp(mu, beta, eps, gamma, lam0, tol, max_iter, cap, m_rel_tol, m_max_iter):
    """Iterate lam <- F(lam) until ||lam - F(lam)||_inf <= tol.

    Returns (status, lam, iterations, residual, monotone) where ``lam`` is the
    iterate whose measured residual is reported, and ``monotone`` is True when
    no component ever decreased (meaningful for the start lam0 = 0).
    """
    L = mu.shape[0]
    lam = lam0.copy()
    nxt = np.empty(L)
    m_ws = np.full(L, -1.0)
    monotone = True
    resid = np.inf
    for n in range(max_iter):
        ok = eval_f_inplace(lam, mu, beta, eps, gamma, m_ws, nxt, m_rel_tol, m_max_iter)
        if not ok:
            return MAXITER, lam, n, resid, monotone
        resid = 0.0
        for k in range(L):
            d = abs(nxt[k] - lam[k])
            if d > resid:
                resid = d
            if nxt[k] < lam[k] - 1e-12 * (1.0 + lam[k]):
                monotone = False
        if resid <= tol:
            return CONVERGED, lam, n, resid, monotone
        for k in range(L):
            if nxt[k] > cap:
                return UNBOUNDED, nxt.copy(), n, resid, monotone
        for k in range(L):
            lam[k] = nxt[k]
    return MAXITER, lam, max_iter, resid, monotone


@njit(cache=True)
def g_eval(mu, beta, eps, gamma, weights, lam_ws, use_warm, tol, max_iter, cap,
           m_rel_tol, m_max_iter, probe_factor):
    """Inner dual value g(mu) = max over feasible lam of sum_k weights_k lam_k.

    weights_k is beta_k * sigma2_k. Warm starts are only taken when the fixed
    point is provably unique (all mu > 0, or total loading <= 1); otherwise
    runs the iteration from 0 and, when a second dominating fixed point may
    exist (some mu_k = 0 and total loading > 1), probes it from a large start.
    """
    L = mu.shape[0]
    any_zero = False
    for k in range(L):
        if mu[k] <= 0.0:
            any_zero = True
    sum_beta = 0.0
    for k in range(L):
        sum_beta += beta[k]

    warm_safe = (not any_zero) or (sum_beta <= 1.0)
    if use_warm and warm_safe:
        st, lam, it, r, mono = lambda_fp(mu, beta, eps, gamma, lam_ws, tol, max_iter,
                                         cap, m_rel_tol, m_max_iter)
        if st == CONVERGED:
            obj = 0.0
            for k in range(L):
                obj += weights[k] * lam[k]
            return CONVERGED, obj, lam
        if st == UNBOUNDED:
            return st, 0.0, lam
        # a stale warm start may stall; retry cold below

    zeros = np.zeros(L)
    st, lam, it, r, mono = lambda_fp(mu, beta, eps, gamma, zeros, tol, max_iter,
                                     cap, m_rel_tol, m_max_iter)
    if st != CONVERGED:
        return st, 0.0, lam
    obj = 0.0
    for k in range(L):
        obj += weights[k] * lam[k]
    best = lam

    if any_zero and sum_beta > 1.0:
        scale = 0.0
        for k in range(L):
            if lam[k] > scale:
                scale = lam[k]
        if scale <= 0.0:
            for k in range(L):
                s = gamma[k] / eps[k, k]
                if s > scale:
                    scale = s
        start = np.full(L, probe_factor * scale)
        st2, lam2, it2, r2, mono2 = lambda_fp(mu, beta, eps, gamma, start, tol,
                                              max_iter, cap, m_rel_tol, m_max_iter)
        if st2 == UNBOUNDED:
            return UNBOUNDED, 0.0, lam2
        if st2 == CONVERGED:
            obj2 = 0.0
            for k in range(L):
                obj2 += weights[k] * lam2[k]
            if obj2 > obj:
                obj = obj2
                best = lam2
    return CONVERGED, obj, best


_INVPHI = 0.6180339887498949  # (sqrt(5)-1)/2


@njit(cache=True)
def pair_line_search(mu, lam, i, j, beta, eps, gamma, weights, obj_in, golden_iters,
                     tol, max_iter, cap, m_rel_tol, m_max_iter, probe_factor):
    """Maximize g over mu_i in [0, mu_i+mu_j] with mu_j = budget - mu_i.

    Golden-section search (g is concave along the segment) plus explicit
    endpoint evaluations; the incumbent point always stays a candidate, so
    the returned objective never decreases. Updates mu and lam in place.
    Returns (status, objective).
    """
    budget = mu[i] + mu[j]
    if budget <= 0.0:
        return CONVERGED, obj_in

    L = mu.shape[0]
    trial = mu.copy()
    best_t = mu[i]
    best_obj = obj_in
    best_lam = lam.copy()

    # endpoint and interior probes; t is the value given to mu_i
    a = 0.0
    b = budget
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    ts = np.empty(4)
    ts[0] = 0.0
    ts[1] = budget
    ts[2] = c
    ts[3] = d
    fc = -np.inf
    fd = -np.inf
    for p in range(4):
        t = ts[p]
        trial[i] = t
        trial[j] = budget - t
        st, obj, lam_t = g_eval(trial, beta, eps, gamma, weights, best_lam, True,
                                tol, max_iter, cap, m_rel_tol, m_max_iter, probe_factor)
        if st != CONVERGED:
            return st, best_obj
        if p == 2:
            fc = obj
        if p == 3:
            fd = obj
        if obj > best_obj:
            best_obj = obj
            best_t = t
            best_lam = lam_t.copy()

    for _ in range(golden_iters):
        new_is_c = fc > fd
        if new_is_c:
            b = d
            d = c
            fd = fc
            c = b - _INVPHI * (b - a)
            t = c
        else:
            a = c
            c = d
            fc = fd
            d = a + _INVPHI * (b - a)
            t = d
        trial[i] = t
        trial[j] = budget - t
        st, obj, lam_t = g_eval(trial, beta, eps, gamma, weights, best_lam, True,
                                tol, max_iter, cap, m_rel_tol, m_max_iter, probe_factor)
        if st != CONVERGED:
            return st, best_obj
        if new_is_c:
            fc = obj
        else:
            fd = obj
        if obj > best_obj:
            best_obj = obj
            best_t = t
            best_lam = lam_t.copy()
        if b - a <= 1e-12 * budget:
            break

    mu[i] = best_t
    mu[j] = budget - best_t
    for k in range(L):
        lam[k] = best_lam[k]
    return CONVERGED, best_obj


# ---------------------------------------------------------------------------
# finite-system kernels
# ---------------------------------------------------------------------------


@njit(cache=True)
def fin_eval_f(hbs, cell_start, cell_end, mu, gamma_u, lam, nt, out):
    """One update of the per-user multipliers lam_g <- gamma / ((1/Nt) h S^-1 h^H).

    hbs[k, g, :] is the channel from BS k to global user g. For each BS one
    regularized Gram matrix is factored per call; the user's own rank-one term
    is removed with the Sherman-Morrison identity. Users of a cell whose
    matrix would be singular (mu_k = 0, not enough active interferers) get
    lam = 0, which is the partial zero-forcing branch.
    """
    L = cell_start.shape[0]
    G = hbs.shape[1]
    npos = 0
    for g in range(G):
        if lam[g] > 0.0:
            npos += 1
    for k in range(L):
        s0 = cell_start[k]
        s1 = cell_end[k]
        nk = s1 - s0
        if mu[k] <= 0.0:
            own_pos = 0
            for g in range(s0, s1):
                if lam[g] > 0.0:
                    own_pos += 1
            others = npos - own_pos
            inner = own_pos - 1 if own_pos > 0 else 0
            if others + inner < nt:
                for g in range(s0, s1):
                    out[g] = 0.0
                continue
        M = np.zeros((nt, nt), dtype=np.complex128)
        for g in range(G):
            lg = lam[g]
            if lg > 0.0:
                w = lg / nt
                for a in range(nt):
                    ha = np.conj(hbs[k, g, a])
                    for b in range(nt):
                        M[a, b] += w * ha * hbs[k, g, b]
        for a in range(nt):
            M[a, a] += mu[k]
        rhs = np.empty((nt, nk), dtype=np.complex128)
        for idx in range(nk):
            g = s0 + idx
            for a in range(nt):
                rhs[a, idx] = np.conj(hbs[k, g, a])
        X = np.linalg.solve(M, rhs)
        for idx in range(nk):
            g = s0 + idx
            acc = 0.0
            for a in range(nt):
                acc += (hbs[k, g, a] * X[a, idx]).real
            q = acc / nt
            den = 1.0 - lam[g] * q
            if den < 1e-14:
                den = 1e-14
            out[g] = gamma_u[g] * den / q


@njit(cache=True)
def fin_lambda_fp(hbs, cell_start, cell_end, mu, gamma_u, lam0, nt, tol, max_iter, cap):
    """Monotone interference-function iteration for the finite dual multipliers."""
    G = hbs.shape[1]
    lam = lam0.copy()
    nxt = np.empty(G)
    resid = np.inf
    for n in range(max_iter):
        fin_eval_f(hbs, cell_start, cell_end, mu, gamma_u, lam, nt, nxt)
        resid = 0.0
        for g in range(G):
            d = abs(nxt[g] - lam[g])
            if d > resid:
                resid = d
        if resid <= tol:
            return CONVERGED, lam, n, resid
        for g in range(G):
            if nxt[g] > cap:
                return UNBOUNDED, nxt.copy(), n, resid
        for g in range(G):
            lam[g] = nxt[g]
    return MAXITER, lam, max_iter, resid


@njit(cache=True)
def fin_g_eval(hbs, cell_start, cell_end, mu, gamma_u, noise_u, nt, lam_ws, use_warm,
               tol, max_iter, cap, probe_factor):
    """Finite-system inner dual value sum_g lam_g noise_g / Nt at fixed mu."""
    L = cell_start.shape[0]
    G = hbs.shape[1]
    any_zero = False
    for k in range(L):
        if mu[k] <= 0.0:
            any_zero = True
    second_possible = G - 1 >= nt

    warm_safe = (not any_zero) or (not second_possible)
    if use_warm and warm_safe:
        st, lam, it, r = fin_lambda_fp(hbs, cell_start, cell_end, mu, gamma_u,
                                       lam_ws, nt, tol, max_iter, cap)
        if st == CONVERGED:
            obj = 0.0
            for g in range(G):
                obj += lam[g] * noise_u[g]
            return CONVERGED, obj / nt, lam
        if st == UNBOUNDED:
            return st, 0.0, lam
        # a stale warm start may stall; retry cold below

    zeros = np.zeros(G)
    st, lam, it, r = fin_lambda_fp(hbs, cell_start, cell_end, mu, gamma_u,
                                   zeros, nt, tol, max_iter, cap)
    if st != CONVERGED:
        return st, 0.0, lam
    obj = 0.0
    for g in range(G):
        obj += lam[g] * noise_u[g]
    best = lam

    if any_zero and second_possible:
        scale = 0.0
        for g in range(G):
            if lam[g] > scale:
                scale = lam[g]
        if scale <= 0.0:
            scale = 1.0
        start = np.full(G, probe_factor * scale)
        st2, lam2, it2, r2 = fin_lambda_fp(hbs, cell_start, cell_end, mu, gamma_u,
                                           start, nt, tol, max_iter, cap)
        if st2 == UNBOUNDED:
            return UNBOUNDED, 0.0, lam2
        if st2 == CONVERGED:
            obj2 = 0.0
            for g in range(G):
                obj2 += lam2[g] * noise_u[g]
            if obj2 > obj:
                obj = obj2
                best = lam2
    return CONVERGED, obj / nt, best


@njit(cache=True)
def fin_pair_line_search(mu, lam, i, j, hbs, cell_start, cell_end, gamma_u, noise_u,
                         nt, obj_in, golden_iters, tol, max_iter, cap, probe_factor):
    """Pairwise coordinate step of the finite outer dual, mirroring pair_line_search."""
    budget = mu[i] + mu[j]
    if budget <= 0.0:
        return CONVERGED, obj_in
    G = hbs.shape[1]
    trial = mu.copy()
    best_t = mu[i]
    best_obj = obj_in
    best_lam = lam.copy()

    a = 0.0
    b = budget
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    ts = np.empty(4)
    ts[0] = 0.0
    ts[1] = budget
    ts[2] = c
    ts[3] = d
    fc = -np.inf
    fd = -np.inf
    for p in range(4):
        t = ts[p]
        trial[i] = t
        trial[j] = budget - t
        st, obj, lam_t = fin_g_eval(hbs, cell_start, cell_end, trial, gamma_u, noise_u,
                                    nt, best_lam, True, tol, max_iter, cap, probe_factor)
        if st != CONVERGED:
            return st, best_obj
        if p == 2:
            fc = obj
        if p == 3:
            fd = obj
        if obj > best_obj:
            best_obj = obj
            best_t = t
            best_lam = lam_t.copy()

    for _ in range(golden_iters):
        new_is_c = fc > fd
        if new_is_c:
            b = d
            d = c
            fd = fc
            c = b - _INVPHI * (b - a)
            t = c
        else:
            a = c
            c = d
            fc = fd
            d = a + _INVPHI * (b - a)
            t = d
        trial[i] = t
        trial[j] = budget - t
        st, obj, lam_t = fin_g_eval(hbs, cell_start, cell_end, trial, gamma_u, noise_u,
                                    nt, best_lam, True, tol, max_iter, cap, probe_factor)
        if st != CONVERGED:
            return st, best_obj
        if new_is_c:
            fc = obj
        else:
            fd = obj
        if obj > best_obj:
            best_obj = obj
            best_t = t
            best_lam = lam_t.copy()
        if b - a <= 1e-12 * budget:
            break

    mu[i] = best_t
    mu[j] = budget - best_t
    for g in range(G):
        lam[g] = best_lam[g]
    return CONVERGED, best_obj


@njit(cache=True)
def power_fp(gains, gamma_u, noise_u, tol, max_iter, cap):
    """Monotone power iteration q_g <- gamma_g (noise_g + interference)/gain_gg.

    gains[g, g'] is the cross power gain from the stream of user g' into the
    receiver of user g; the diagonal holds the useful signal gains. Starts at
    zero and increases toward the minimal solution when spectral conditions
    allow one. Returns (status, q, iterations).
    """
    G = gains.shape[0]
    q = np.zeros(G)
    nxt = np.empty(G)
    for n in range(max_iter):
        delta = 0.0
        for g in range(G):
            acc = noise_u[g]
            for h in range(G):
                if h != g:
                    acc += q[h] * gains[g, h]
            val = gamma_u[g] * acc / gains[g, g]
            nxt[g] = val
            d = abs(val - q[g])
            if d > delta:
                delta = d
        for g in range(G):
            q[g] = nxt[g]
        if delta <= tol * (1.0 + np.max(q)):
            return CONVERGED, q, n
        if np.max(q) > cap:
            return UNBOUNDED, q, n
    return MAXITER, q, max_iter
