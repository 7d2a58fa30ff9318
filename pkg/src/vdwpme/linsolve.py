"""Linear solvers for the per-iteration systems.

``solve_cg`` is Jacobi-preconditioned conjugate gradients for the SPD case;
``solve_direct`` is banded LU with partial pivoting (LAPACK ``gbsv``) for
everything else, including the indefinite systems of the aggregation run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import lapack


@dataclass
class SolveReport:
    iterations: int
    residual: float
    method: str  # "cg" or "direct"
    success: bool


class SingularMatrixError(RuntimeError):
    """Zero pivot during LU factorization."""

    def __init__(self, pivot: int):
        super().__init__(f"matrix is singular: zero pivot at elimination step {pivot}")
        self.pivot = pivot


def solve_cg(A, b, x0=None, rtol: float = 1e-12, atol: float = 0.0, max_iter: int | None = None):
    """Jacobi-preconditioned CG; stops when ||b - A x||_2 <= rtol*||b||_2 + atol.

    Returns ``(x, SolveReport)``. Exceeding ``max_iter`` or producing a
    non-finite iterate yields ``success=False`` instead of raising, so the
    caller can fall back to a direct solve.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = b.size
    if max_iter is None:
        max_iter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    diag = A.diagonal()
    inv_d = np.where(diag != 0.0, 1.0 / np.where(diag != 0.0, diag, 1.0), 1.0)

    target = rtol * np.linalg.norm(b) + atol
    r = b - A @ x
    res = np.linalg.norm(r)
    if res <= target:
        return x, SolveReport(0, float(res), "cg", True)

    z = inv_d * r
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0.0:
            return x, SolveReport(k, float(res), "cg", False)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if not np.isfinite(res):
            return x, SolveReport(k, float(res), "cg", False)
        if res <= target:
            # confirm with the true residual; recursion drift can hide stagnation
            res = np.linalg.norm(b - A @ x)
            if res <= target:
                return x, SolveReport(k, float(res), "cg", True)
            r = b - A @ x
        z = inv_d * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(max_iter, float(res), "cg", False)


def bandwidths(A: sp.csr_matrix) -> tuple[int, int]:
    """Lower and upper bandwidth of a sparse matrix."""
    coo = A.tocoo()
    if coo.nnz == 0:
        return 0, 0
    diff = coo.row.astype(np.int64) - coo.col.astype(np.int64)
    return int(max(diff.max(), 0)), int(max(-diff.min(), 0))


def solve_direct(A, b):
    """Banded LU with partial pivoting.

    Raises SingularMatrixError (with the 1-based pivot index LAPACK reports)
    when a zero pivot is met. Symmetric indefinite matrices are fine.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    kl, ku = bandwidths(A)
    # LAPACK band storage with kl extra rows for the fill-in of pivoting.
    ab = np.zeros((2 * kl + ku + 1, n), order="F")
    coo = A.tocoo()
    ab[kl + ku + coo.row - coo.col, coo.col] = coo.data
    _, _, x, info = lapack.dgbsv(kl, ku, ab, b.copy())
    if info > 0:
        raise SingularMatrixError(int(info))
    if info < 0:
        raise ValueError(f"dgbsv: illegal argument {-info}")
    res = np.linalg.norm(A @ x - b)
    bound = 1e-10 * (
        abs(A).sum(axis=1).max() * np.abs(x).max() + np.abs(b).max()
    )
    ok = bool(np.all(np.isfinite(x)) and res <= bound)
    return x, SolveReport(1, float(res), "direct", ok)
