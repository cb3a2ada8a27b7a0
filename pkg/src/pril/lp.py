"""Dense two-phase primal simplex for small linear programs.

Solves ``maximize c @ x`` subject to ``A_ub @ x <= b_ub``, ``A_eq @ x == b_eq``
and ``x >= 0``. Pivoting runs in ``pril.kernels.simplex_iterate``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pril import kernels

STATUS_NAMES = {
    kernels.OPTIMAL: "optimal",
    kernels.UNBOUNDED: "unbounded",
    kernels.ITERATION_LIMIT: "iteration_limit",
}


@dataclass
class LpResult:
    x: np.ndarray | None
    objective: float
    status: str
    pivots: int

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _price_out(T, basis):
    """Make the cost row zero on every basic column."""
    m = T.shape[0] - 1
    for i in range(m):
        coef = T[m, basis[i]]
        if coef != 0.0:
            T[m] -= coef * T[i]


def _pivot(T, r, j):
    T[r] /= T[r, j]
    f = T[:, j].copy()
    f[r] = 0.0
    T -= f[:, None] * T[r][None, :]


def _dual_cleanup(T, basis, allowed, tol, max_iter):
    """Dual simplex pivots until every basic value is non-negative.

    Used after the right-hand-side perturbation is removed; the basis is
    still dual feasible, so only a few pivots are ever needed.
    """
    m = T.shape[0] - 1
    if m == 0:
        return True, 0
    for it in range(max_iter):
        rhs = T[:m, -1]
        r = int(np.argmin(rhs))
        if rhs[r] >= -tol:
            T[:m, -1] = np.maximum(rhs, 0.0)
            return True, it
        row = T[r, :-1]
        cand = np.flatnonzero((row < -tol) & allowed.astype(bool))
        if cand.size == 0:
            return False, it
        ratios = T[m, cand] / -row[cand]
        j = int(cand[np.argmin(ratios)])
        _pivot(T, r, j)
        basis[r] = j
    return False, max_iter


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, tol: float = 1e-9,
             max_iter: int = 50000, bland_after: int = 50, perturb: float = 1e-7,
             backend=None) -> LpResult:
    """Maximize ``c @ x`` over ``x >= 0`` with inequality and equality rows.

    Highly degenerate problems (many zero right-hand sides) make plain
    simplex stall, so every right-hand side is first shifted by a small,
    distinct amount. The shift is carried as an extra tableau column and
    subtracted exactly once the perturbed problem is solved; a short dual
    simplex pass then restores feasibility if the unshifted vertex differs.
    """
    impl = kernels if backend is None else backend
    c = np.asarray(c, dtype=np.float64)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.asarray(A_ub, dtype=np.float64).reshape(-1, n)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=np.float64).ravel()
    A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=np.float64).reshape(-1, n)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=np.float64).ravel()
    if A_ub.shape[0] != b_ub.size or A_eq.shape[0] != b_eq.size:
        raise ValueError("constraint matrix and right-hand side disagree in length")
    m_ub, m_eq = A_ub.shape[0], A_eq.shape[0]
    m = m_ub + m_eq

    # Flip rows so every right-hand side is non-negative.
    ub_sign = np.where(b_ub < 0, -1.0, 1.0)
    eq_sign = np.where(b_eq < 0, -1.0, 1.0)
    needs_art = np.concatenate([ub_sign < 0, np.ones(m_eq, dtype=bool)])
    n_art = int(needs_art.sum())
    n_cols = n + m_ub + n_art
    shift_col = n_cols

    T = np.zeros((m + 1, n_cols + 2))
    T[:m_ub, :n] = A_ub * ub_sign[:, None]
    T[:m_ub, n:n + m_ub] = np.diag(ub_sign)
    T[:m_ub, -1] = b_ub * ub_sign
    T[m_ub:m, :n] = A_eq * eq_sign[:, None]
    T[m_ub:m, -1] = b_eq * eq_sign
    if m and perturb > 0:
        shift = perturb * (1.0 + np.arange(m) / m)
        T[:m, shift_col] = shift
        T[:m, -1] += shift
    basis = np.empty(m, dtype=np.int64)
    art_rows = np.flatnonzero(needs_art)
    for k, i in enumerate(art_rows):
        T[i, n + m_ub + k] = 1.0
        basis[i] = n + m_ub + k
    slack_rows = np.flatnonzero(~needs_art)
    basis[slack_rows] = n + slack_rows

    allowed = np.ones(n_cols + 1, dtype=np.uint8)
    allowed[shift_col] = 0
    pivots = 0
    if n_art:
        T[m, n + m_ub:n_cols] = 1.0
        _price_out(T, basis)
        status, used = impl.simplex_iterate(T, basis, allowed, max_iter, tol, bland_after)
        pivots += used
        if status == kernels.ITERATION_LIMIT:
            return LpResult(None, float("nan"), "iteration_limit", pivots)
        scale = max(1.0, float(np.abs(T[:m, -1]).max(initial=0.0)))
        if T[m, -1] - T[m, shift_col] < -1e3 * tol * scale:
            return LpResult(None, float("nan"), "infeasible", pivots)
        # Drive remaining artificial variables out of the basis.
        keep = np.ones(m, dtype=bool)
        for i in range(m):
            if basis[i] >= n + m_ub:
                cand = np.flatnonzero(np.abs(T[i, :n + m_ub]) > tol)
                if cand.size:
                    _pivot(T, i, int(cand[0]))
                    basis[i] = int(cand[0])
                    pivots += 1
                else:
                    keep[i] = False
        if not keep.all():
            T = np.ascontiguousarray(np.vstack([T[:m][keep], T[m:]]))
            basis = np.ascontiguousarray(basis[keep])
            m = int(keep.sum())
        allowed[n + m_ub:n_cols] = 0

    T[m, :] = 0.0
    T[m, :n] = -c
    _price_out(T, basis)
    status, used = impl.simplex_iterate(T, basis, allowed, max_iter, tol, bland_after)
    pivots += used
    if status != kernels.OPTIMAL:
        return LpResult(None, float("nan"), STATUS_NAMES[status], pivots)

    T[:, -1] -= T[:, shift_col]
    T[:, shift_col] = 0.0
    feasible, used = _dual_cleanup(T, basis, allowed, tol, max_iter)
    pivots += used
    if not feasible:
        return LpResult(None, float("nan"), "infeasible", pivots)
    x = np.zeros(n_cols + 1)
    x[basis] = T[:m, -1]
    x = x[:n]
    return LpResult(x, float(c @ x), "optimal", pivots)
