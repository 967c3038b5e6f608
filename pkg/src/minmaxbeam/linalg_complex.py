"""Dense complex linear algebra for the finite-system module: Hermitian
positive-definite solves and orthonormal null-space bases.

Desk-scale implementations (dimensions up to a few hundred): a vectorized
Cholesky factorization with forward/back substitution, and a right-looking
modified Gram-Schmidt with one reorthogonalization pass. Every routine is
residual-checked in the tests.
"""

from __future__ import annotations

import numpy as np


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """A pivot of the Cholesky factorization was not strictly positive."""


class RankDeficiencyError(np.linalg.LinAlgError):
    """The row set handed to the null-space routine is not full rank."""


_HERMITIAN_TOL = 1e-12


def _as_cmatrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    return A


def cholesky_lower(A) -> np.ndarray:
    """Lower-triangular G with G G^H = A for Hermitian positive-definite A."""
    A = _as_cmatrix(A)
    n = A.shape[0]
    scale = float(np.max(np.abs(A))) or 1.0
    if float(np.max(np.abs(A - A.conj().T))) > _HERMITIAN_TOL * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    G = np.zeros_like(A)
    for j in range(n):
        d = A[j, j].real - np.real(G[j, :j] @ G[j, :j].conj())
        if d <= n * np.finfo(float).eps * scale:
            raise NotPositiveDefiniteError(
                f"nonpositive pivot {d:.3g} at column {j}")
        G[j, j] = np.sqrt(d)
        if j + 1 < n:
            G[j + 1:, j] = (A[j + 1:, j] - G[j + 1:, :j] @ G[j, :j].conj()) / G[j, j]
    return G


def solve_cholesky(G, b) -> np.ndarray:
    """Solve G G^H x = b given the lower factor G; b may hold multiple columns."""
    b = np.asarray(b, dtype=np.complex128)
    squeeze = b.ndim == 1
    x = b.reshape(b.shape[0], -1).copy()
    n = G.shape[0]
    for i in range(n):          # G y = b
        if i:
            x[i] -= G[i, :i] @ x[:i]
        x[i] /= G[i, i]
    for i in range(n - 1, -1, -1):  # G^H x = y
        if i + 1 < n:
            x[i] -= G[i + 1:, i].conj() @ x[i + 1:]
        x[i] /= G[i, i].conj()
    return x[:, 0] if squeeze else x


def hpd_solve(A, b) -> np.ndarray:
    """Solve A x = b for Hermitian positive-definite A via Cholesky.

    Raises NotPositiveDefiniteError when a pivot fails, which callers
    interpret as the rank-deficient (zero-forcing) regime.
    """
    return solve_cholesky(cholesky_lower(A), b)


def null_space_basis(H) -> np.ndarray:
    """Orthonormal basis of {x : H x = 0} for a full-row-rank r x n matrix, r < n.

    Orthonormalizes the conjugated rows of H and, against them, the standard
    basis vectors (right-looking modified Gram-Schmidt, one reorthogonalization
    pass). Any orthonormal basis of the subspace is acceptable downstream, so
    no eigendecomposition is needed. Returns n x (n - r) columns.
    """
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2:
        raise ValueError("H must be a matrix")
    r, n = H.shape
    if r >= n:
        raise ValueError(f"need r < n, got shape {H.shape}")
    need = n - r

    work = np.vstack([H.conj(), np.eye(n, dtype=np.complex128)])
    row_scale = np.linalg.norm(work[:r], axis=1) if r else np.empty(0)
    kept_candidates: list[int] = []
    for i in range(n + r):
        v = work[i]
        nrm = np.linalg.norm(v)
        if i < r:
            if nrm < 1e-10 * row_scale[i]:
                raise RankDeficiencyError(f"row {i} of H is linearly dependent")
        else:
            if len(kept_candidates) >= need:
                break
            if nrm < 1e-4:  # candidate almost inside the current span; skip it
                continue
            kept_candidates.append(i)
        q = v / nrm
        work[i] = q
        if i + 1 < work.shape[0]:
            coeff = work[i + 1:] @ q.conj()
            work[i + 1:] -= np.outer(coeff, q)
    if len(kept_candidates) < need:
        raise RankDeficiencyError("could not complete the null-space basis")

    # one reorthogonalization pass: the same sweep over the accepted rows
    rows = np.vstack([work[:r], work[kept_candidates]])
    m = rows.shape[0]
    for i in range(m):
        q = rows[i] / np.linalg.norm(rows[i])
        rows[i] = q
        if i + 1 < m:
            coeff = rows[i + 1:] @ q.conj()
            rows[i + 1:] -= np.outer(coeff, q)
    return rows[r:].T.copy()
