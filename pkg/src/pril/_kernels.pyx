# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. ``_kernels_py`` holds the bit-identical numpy twins."""

from libc.math cimport fabs, INFINITY

DEF OPTIMAL = 0
DEF UNBOUNDED = 1
DEF ITERATION_LIMIT = 2


def bellman_sweeps(const long long[:, :, ::1] succ_idx, const double[:, :, ::1] succ_p,
                   const double[::1] reward, double gamma, const unsigned char[::1] terminal,
                   double[::1] values, const double[:, ::1] noise, double tol,
                   long long max_iters, double[::1] residuals):
    cdef Py_ssize_t S = succ_idx.shape[0]
    cdef Py_ssize_t A = succ_idx.shape[1]
    cdef Py_ssize_t K = succ_idx.shape[2]
    cdef bint use_noise = noise.shape[0] > 0
    cdef Py_ssize_t s, a, k
    cdef long long it
    cdef double acc, q, best, res, d
    cdef double[::1] new = values.copy()

    for it in range(max_iters):
        for s in range(S):
            best = -INFINITY
            for a in range(A):
                acc = succ_p[s, a, 0] * values[succ_idx[s, a, 0]]
                for k in range(1, K):
                    acc = acc + succ_p[s, a, k] * values[succ_idx[s, a, k]]
                q = reward[s] + gamma * acc
                if a == 0 or q > best:
                    best = q
            if use_noise:
                best = best + noise[it, s]
            if terminal[s]:
                best = reward[s]
            new[s] = best
        res = 0.0
        for s in range(S):
            d = fabs(new[s] - values[s])
            if d > res:
                res = d
            values[s] = new[s]
        residuals[it] = res
        if res < tol:
            return it + 1
    return max_iters


def simplex_iterate(double[:, ::1] T, long long[::1] basis, const unsigned char[::1] allowed,
                    long long max_iter, double tol, long long bland_after):
    cdef Py_ssize_t m = T.shape[0] - 1
    cdef Py_ssize_t n = T.shape[1] - 1
    cdef Py_ssize_t i, j, c, r
    cdef long long it, degenerate = 0
    cdef bint bland = False
    cdef double best, ratio, piv, f, lowest

    for it in range(max_iter):
        j = -1
        if bland:
            for c in range(n):
                if allowed[c] and T[m, c] < -tol:
                    j = c
                    break
            if j < 0:
                return OPTIMAL, it
        else:
            lowest = INFINITY
            for c in range(n):
                if allowed[c] and (j < 0 or T[m, c] < lowest):
                    lowest = T[m, c]
                    j = c
            if j < 0 or not (lowest < -tol):
                return OPTIMAL, it

        r = -1
        best = 0.0
        for i in range(m):
            if T[i, j] > tol:
                ratio = T[i, n] / T[i, j]
                if r < 0 or ratio < best or (ratio == best and basis[i] < basis[r]):
                    r = i
                    best = ratio
        if r < 0:
            return UNBOUNDED, it

        if best <= tol:
            degenerate += 1
            if degenerate >= bland_after:
                bland = True
        else:
            degenerate = 0

        piv = T[r, j]
        for c in range(n + 1):
            T[r, c] = T[r, c] / piv
        for i in range(m + 1):
            if i == r:
                continue
            f = T[i, j]
            for c in range(n + 1):
                T[i, c] = T[i, c] - f * T[r, c]
        # the numpy twin also subtracts 0 * row from the pivot row
        for c in range(n + 1):
            T[r, c] = T[r, c] - 0.0 * T[r, c]
        basis[r] = j
    return ITERATION_LIMIT, max_iter
