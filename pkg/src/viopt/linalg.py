"""Sparse linear-solve helpers used by the solvers.

Direct LU is used up to ``ITERATIVE_THRESHOLD`` unknowns; above that a
restarted, ILU-preconditioned GMRES takes over.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import LinearSolveError

ITERATIVE_THRESHOLD = 20_000
GMRES_RTOL = 1e-12


def solve_sparse(
    m: sparse.sparray,
    b: np.ndarray,
    *,
    iterative_threshold: int = ITERATIVE_THRESHOLD,
    rtol: float = GMRES_RTOL,
) -> tuple[np.ndarray, int]:
    """Solve ``m x = b`` and return ``(x, linear_solver_iters)``.

    The iteration count is 1 for the direct path and the Krylov iteration
    count for the GMRES path.
    """
    n = m.shape[0]
    if n <= iterative_threshold:
        try:
            lu = splinalg.splu(sparse.csc_matrix(m))
            x = lu.solve(b)
        except RuntimeError as exc:
            raise LinearSolveError(f"sparse LU failed: {exc}") from exc
        if not np.all(np.isfinite(x)):
            raise LinearSolveError("sparse LU produced non-finite entries")
        return x, 1

    try:
        ilu = splinalg.spilu(sparse.csc_matrix(m), drop_tol=1e-5, fill_factor=10.0)
    except RuntimeError as exc:
        raise LinearSolveError(f"ILU preconditioner failed: {exc}") from exc
    precond = splinalg.LinearOperator(m.shape, ilu.solve)
    iters = 0

    def _count(_):
        nonlocal iters
        iters += 1

    x, info = splinalg.gmres(
        m, b, rtol=rtol, atol=0.0, restart=50, maxiter=2000, M=precond,
        callback=_count, callback_type="pr_norm",
    )
    if info != 0 or not np.all(np.isfinite(x)):
        raise LinearSolveError(f"GMRES did not converge (info={info})")
    return x, max(iters, 1)


class Factorized:
    """Reusable sparse LU factorization with optional transpose solves."""

    def __init__(self, m: sparse.sparray):
        try:
            self._lu = splinalg.splu(sparse.csc_matrix(m))
        except RuntimeError as exc:
            raise LinearSolveError(f"sparse LU failed: {exc}") from exc

    def solve(self, b: np.ndarray, transpose: bool = False) -> np.ndarray:
        x = self._lu.solve(np.asarray(b, dtype=float), trans="T" if transpose else "N")
        if not np.all(np.isfinite(x)):
            raise LinearSolveError("factorized solve produced non-finite entries")
        return x
