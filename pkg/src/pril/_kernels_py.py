"""Pure-numpy twins of the compiled kernels in ``_kernels.pyx``.

Both implementations perform the same floating-point operations in the same
order, so results agree bit for bit. Keep them in lockstep when editing.
"""

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2


def bellman_sweeps(succ_idx, succ_p, reward, gamma, terminal, values, noise, tol, max_iters, residuals):
    """Synchronous Bellman sweeps, updating ``values`` in place.

    ``noise`` is either empty or holds one row of additive noise per sweep.
    ``residuals[i]`` receives the max-norm change of sweep ``i``. Returns the
    number of sweeps run; stops early once a residual drops below ``tol``.
    """
    K = succ_idx.shape[2]
    term = terminal.astype(bool)
    use_noise = noise.shape[0] > 0
    r = reward[:, None]
    for it in range(max_iters):
        acc = succ_p[:, :, 0] * values[succ_idx[:, :, 0]]
        for k in range(1, K):
            acc = acc + succ_p[:, :, k] * values[succ_idx[:, :, k]]
        new = (r + gamma * acc).max(axis=1)
        if use_noise:
            new = new + noise[it]
        new[term] = reward[term]
        res = float(np.max(np.abs(new - values)))
        values[:] = new
        residuals[it] = res
        if res < tol:
            return it + 1
    return max_iters


def simplex_iterate(T, basis, allowed, max_iter, tol, bland_after):
    """Primal simplex pivots on a dense tableau (maximization form).

    ``T`` has one row per constraint plus a final reduced-cost row, and a final
    right-hand-side column. A column may enter only where ``allowed`` is set.
    Dantzig pricing switches permanently to Bland's rule after ``bland_after``
    consecutive degenerate pivots. Returns ``(status, pivots)``.
    """
    m = T.shape[0] - 1
    n = T.shape[1] - 1
    allowed = allowed.astype(bool)
    degenerate = 0
    bland = False
    for it in range(max_iter):
        cost = T[m, :n]
        if bland:
            cand = np.flatnonzero(allowed & (cost < -tol))
            if cand.size == 0:
                return OPTIMAL, it
            j = int(cand[0])
        else:
            masked = np.where(allowed, cost, np.inf)
            j = int(np.argmin(masked))
            if not masked[j] < -tol:
                return OPTIMAL, it

        col = T[:m, j]
        rows = np.flatnonzero(col > tol)
        if rows.size == 0:
            return UNBOUNDED, it
        ratios = T[rows, n] / col[rows]
        r = -1
        best = 0.0
        for i, ratio in zip(rows, ratios):
            if r < 0 or ratio < best or (ratio == best and basis[i] < basis[r]):
                r, best = int(i), ratio

        if best <= tol:
            degenerate += 1
            if degenerate >= bland_after:
                bland = True
        else:
            degenerate = 0

        T[r, :] = T[r, :] / T[r, j]
        f = T[:, j].copy()
        f[r] = 0.0
        T -= f[:, None] * T[r][None, :]
        basis[r] = j
    return ITERATION_LIMIT, max_iter
