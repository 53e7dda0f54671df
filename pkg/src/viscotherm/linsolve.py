"""Deterministic preconditioned conjugate gradients on nodal arrays.

The systems assembled in this package are symmetric positive definite,
so a Jacobi-preconditioned CG with a fixed iteration order is enough and
keeps runs bit-for-bit reproducible.  Unknowns are full ``(n+1, n+1)``
arrays whose boundary ring is identically zero; the operator must
preserve that property.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverFailure

__all__ = ["pcg"]


def _norm(arr: np.ndarray) -> float:
    return float(np.sqrt(np.sum(arr * arr)))


def pcg(apply_op, b: np.ndarray, diag: np.ndarray, rtol: float = 1e-10,
        maxiter: int = 10000):
    """Solve ``A x = b`` to a relative residual ``rtol``.

    Returns ``(x, relres, iterations)``.  Raises
    :class:`~viscotherm.errors.SolverFailure` with the residual history
    if ``maxiter`` passes are not enough.  Convergence is declared on
    the recomputed true residual, not the recursive one, so the reported
    tolerance is trustworthy.
    """
    bnorm = _norm(b)
    x = np.zeros_like(b)
    if bnorm == 0.0:
        return x, 0.0, 0
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = float(np.sum(r * z))
    history: list[float] = []
    relres = _norm(r) / bnorm
    for k in range(1, maxiter + 1):
        Ap = apply_op(p)
        pAp = float(np.sum(p * Ap))
        if pAp <= 0.0:
            raise SolverFailure(
                "operator lost positive definiteness during CG", relres, history
            )
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        relres = _norm(r) / bnorm
        history.append(relres)
        if relres <= rtol:
            # confirm against the true residual; restart if drift is seen
            r_true = b - apply_op(x)
            true_rel = _norm(r_true) / bnorm
            if true_rel <= rtol:
                return x, true_rel, k
            r = r_true
            z = r / diag
            p = z.copy()
            rz = float(np.sum(r * z))
            continue
        z = r / diag
        rz_new = float(np.sum(r * z))
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    raise SolverFailure(
        f"CG did not reach rtol={rtol:g} within {maxiter} iterations",
        relres,
        history,
    )
