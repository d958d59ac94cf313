"""Dense tableau simplex with Bland's anti-cycling rule.

Small and self-contained on purpose: it is the reference oracle that the
closed-form and greedy solvers are checked against, so it shares no code
with them.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np


class LPInfeasible(Exception):
    pass


class LPUnbounded(Exception):
    pass


class LPBudgetExceeded(Exception):
    """Raised when the problem is larger than the oracle is allowed to handle."""


@dataclass
class LPResult:
    x: np.ndarray
    value: float
    iterations: int
    basis: np.ndarray


def _pivot(T, row, col):
    T[row] /= T[row, col]
    piv = T[row]
    colv = T[:, col].copy()
    colv[row] = 0.0
    T -= np.outer(colv, piv)
    T[:, col] = 0.0
    T[row, col] = 1.0


def _bland_loop(T, basis, n_cols, tol, max_iter, allowed):
    """Run simplex iterations on tableau T (objective in the last row, maximize).

    The last row stores reduced costs r_j; a column enters when r_j > tol.
    Returns the number of iterations performed.
    """
    m = T.shape[0] - 1
    it = 0
    while True:
        r = T[m, :n_cols]
        cand = np.nonzero((r > tol) & allowed)[0]
        if cand.size == 0:
            return it
        col = int(cand[0])
        a = T[:m, col]
        pos = np.nonzero(a > tol)[0]
        if pos.size == 0:
            raise LPUnbounded("objective is unbounded")
        ratios = T[pos, -1] / a[pos]
        best = ratios.min()
        ties = pos[ratios <= best + tol * max(1.0, abs(best))]
        # Bland: among tied rows leave the basic variable with lowest index
        row = int(ties[np.argmin(basis[ties])])
        _pivot(T, row, col)
        basis[row] = col
        it += 1
        if it > max_iter:
            raise LPBudgetExceeded(f"simplex exceeded {max_iter} iterations")


def simplex_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, *,
                tol: float = 1e-11, max_iter: Optional[int] = None,
                max_vars: Optional[int] = None) -> LPResult:
    """Maximize c @ x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0.

    Two-phase tableau method, Bland's rule for both entering and leaving
    choices. The final basic solution is recomputed with a direct solve of
    the basis system to clean up accumulated pivoting error.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if max_vars is not None and n > max_vars:
        raise LPBudgetExceeded(f"{n} variables exceed the budget of {max_vars}")
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float).ravel()
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # standard form columns: x (n), slacks (m_ub), artificials (m)
    A = np.zeros((m, n + m_ub))
    A[:m_ub, :n] = A_ub
    A[:m_ub, n:] = np.eye(m_ub)
    A[m_ub:, :n] = A_eq
    b = np.concatenate([b_ub, b_eq])
    neg = b < 0
    A[neg] *= -1.0
    b = np.where(neg, -b, b)

    n_std = n + m_ub
    T = np.zeros((m + 1, n_std + m + 1))
    T[:m, :n_std] = A
    T[:m, n_std:n_std + m] = np.eye(m)
    T[:m, -1] = b
    basis = np.arange(n_std, n_std + m)
    # rows whose slack has +1 can start with the slack basic
    for i in range(m_ub):
        if not neg[i]:
            basis[i] = n + i
    art_cols = np.arange(n_std, n_std + m)
    uses_art = np.isin(basis, art_cols)
    T[:m, n_std:n_std + m][:, ~uses_art] = 0.0
    T[np.arange(m)[~uses_art], n_std + np.arange(m)[~uses_art]] = 0.0

    if max_iter is None:
        max_iter = 50 * (m + n_std) + 1000
    scale_tol = tol * max(1.0, float(np.abs(A).max(initial=0.0)))

    total_it = 0
    if uses_art.any():
        # phase 1: maximize -(sum of artificials)
        T[m, :] = 0.0
        for i in np.nonzero(uses_art)[0]:
            T[m, :] += T[i, :]
        T[m, n_std:n_std + m] = 0.0
        allowed = np.ones(n_std + m, dtype=bool)
        allowed[n_std:] = False
        total_it += _bland_loop(T, basis, n_std + m, scale_tol, max_iter, allowed)
        infeas = T[m, -1]
        if infeas > 1e-9 * max(1.0, float(np.abs(b).max(initial=0.0))):
            raise LPInfeasible("constraints are infeasible")
        # drive remaining artificials out of the basis
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n_std:
                row = T[i, :n_std]
                nz = np.nonzero(np.abs(row) > scale_tol)[0]
                if nz.size == 0:
                    keep[i] = False
                else:
                    _pivot(T, i, int(nz[0]))
                    basis[i] = int(nz[0])
        if not keep.all():
            rows = np.concatenate([np.nonzero(keep)[0], [m]])
            T = T[rows]
            basis = basis[keep]
            m = int(keep.sum())

    # phase 2
    T = np.delete(T, np.s_[n_std:n_std + T.shape[1] - n_std - 1], axis=1)
    cost = np.concatenate([c, np.zeros(m_ub)])
    T[m, :n_std] = cost - cost[basis] @ T[:m, :n_std]
    T[m, -1] = -cost[basis] @ T[:m, -1]
    allowed = np.ones(n_std, dtype=bool)
    total_it += _bland_loop(T, basis, n_std, scale_tol, max_iter, allowed)

    # clean solution from the final basis
    x_std = np.zeros(n_std)
    A_rows = A if m == A.shape[0] else None
    if A_rows is not None:
        B = A[:, basis]
        try:
            xb = np.linalg.solve(B, b)
            if np.all(xb >= -1e-9):
                x_std[basis] = np.maximum(xb, 0.0)
            else:
                x_std[basis] = np.maximum(T[:m, -1], 0.0)
        except np.linalg.LinAlgError:
            x_std[basis] = np.maximum(T[:m, -1], 0.0)
    else:
        x_std[basis] = np.maximum(T[:m, -1], 0.0)
    x = x_std[:n]
    return LPResult(x=x, value=float(c @ x), iterations=total_it, basis=basis.copy())
