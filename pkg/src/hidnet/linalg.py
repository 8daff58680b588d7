"""Conjugate gradients for the symmetric positive-definite propagation systems."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

DENSE_LIMIT = 2000


class SolverError(RuntimeError):
    pass


def cg(matvec, b: np.ndarray, tol: float = 1e-10, maxiter: int | None = None,
       x0: np.ndarray | None = None) -> tuple[np.ndarray, int, float]:
    """Solve ``A x = b`` for SPD ``A`` given as a matvec, column by column.

    All columns of ``b`` are iterated together; each column stops updating
    once its residual falls below ``tol * ||b_col||``.  Returns the solution,
    the iteration count and the worst relative residual.
    """
    b = np.asarray(b, dtype=np.float64)
    squeeze = b.ndim == 1
    if squeeze:
        b = b[:, None]
    n = b.shape[0]
    maxiter = maxiter or 10 * n + 100
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.float64).reshape(b.shape)
    r = b - matvec(x)
    p = r.copy()
    rs = np.einsum("ij,ij->j", r, r)
    bnorm = np.linalg.norm(b, axis=0)
    bnorm[bnorm == 0] = 1.0
    target = (tol * bnorm) ** 2
    it = 0
    while it < maxiter:
        active = rs > target
        if not active.any():
            break
        ap = matvec(p)
        pap = np.einsum("ij,ij->j", p, ap)
        step = np.where(active, rs / np.where(pap == 0, 1.0, pap), 0.0)
        x += p * step
        r -= ap * step
        rs_new = np.einsum("ij,ij->j", r, r)
        ratio = np.where(active, rs_new / np.where(rs == 0, 1.0, rs), 0.0)
        p = r + p * ratio
        rs = rs_new
        it += 1
    resid = float(np.max(np.sqrt(rs) / bnorm)) if rs.size else 0.0
    return (x[:, 0] if squeeze else x), it, resid


def solve_spd(a, b: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """CG on a sparse SPD matrix with a dense fallback for small systems."""
    matvec = (lambda v: a @ v)
    x, _, resid = cg(matvec, b, tol=tol)
    if resid <= tol and np.all(np.isfinite(x)):
        return x
    n = a.shape[0]
    if n > DENSE_LIMIT:
        raise SolverError(f"conjugate gradients stalled at relative residual {resid:.3e}")
    dense = a.toarray() if sp.issparse(a) else np.asarray(a)
    try:
        return np.linalg.solve(dense, b)
    except np.linalg.LinAlgError as exc:
        raise SolverError(f"singular system: {exc}") from exc
