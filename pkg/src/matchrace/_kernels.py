"""Compiled sweep kernels.

Drift tables are factored per player: ``spd_P[m, i, j, k]`` is the speed of
player P on tack ``m+1`` at node (i, j, k) (B evaluated at ``-x``), and
``hx_P[m, k]``, ``hy_P[m, k]`` are the heading components.  The kernels
rebuild ``f`` and ``ell`` from these on the fly, which keeps memory at a few
copies of one (N+1)^3 array even on fine grids.
"""

import warnings

import numba
import numpy as np

# numba falls back to another threading layer on its own; the notice is noise
warnings.filterwarnings("ignore", message=".*TBB threading layer.*")


@numba.njit(cache=True)
def gs_sweeps_1d(v, src, cost, lam, a4, tol, max_iters):
    """Gauss-Seidel sweeps for the periodic single-player switching problem.

    Nodes ascend in k with the mode loop innermost.  Returns the number of
    sweeps and the last sweep's max absolute update.
    """
    m = v.shape[1]
    inv = 1.0 / (lam + a4)
    res = np.inf
    for it in range(max_iters):
        res = 0.0
        for k in range(m):
            km = k - 1 if k > 0 else m - 1
            kp = k + 1 if k < m - 1 else 0
            for p in range(2):
                s = inv * (0.5 * a4 * (v[p, km] + v[p, kp]) + src[p, k])
                new = max(v[1 - p, k] - cost, s)
                d = abs(new - v[p, k])
                if d > res:
                    res = d
                v[p, k] = new
        if res < tol:
            return it + 1, res
    return max_iters, res


@numba.njit(cache=True, inline="always")
def _sgn(x):
    if x > 0.0:
        return 1
    if x < 0.0:
        return -1
    return 0


@numba.njit(cache=True, inline="always")
def _node_T(v, q, r, i, j, k, spd_A, spd_B, hx_A, hy_A, hx_B, hy_B,
            inv_dx1, inv_dx2, a4, lam, c_A, c_B):
    sa = spd_A[q, i, j, k]
    sb = spd_B[r, i, j, k]
    f1 = sa * hx_A[q, k] - sb * hx_B[r, k]
    f2 = sa * hy_A[q, k] - sb * hy_B[r, k]
    a1 = abs(f1) * inv_dx1
    a2 = abs(f2) * inv_dx2
    big = lam + a1 + a2 + a4
    ib = i + _sgn(f1)
    jb = j + _sgn(f2)
    s = (a1 * v[q, r, ib, j, k] + a2 * v[q, r, i, jb, k]
         + 0.5 * a4 * (v[q, r, i, j, k - 1] + v[q, r, i, j, k + 1]) + f2) / big
    return max(v[1 - q, r, i, j, k] - c_A, min(v[q, 1 - r, i, j, k] + c_B, s))


@numba.njit(cache=True, parallel=True)
def jacobi_sweep(v, out, spd_A, spd_B, hx_A, hy_A, hx_B, hy_B,
                 inv_dx1, inv_dx2, a4, lam, c_A, c_B, omega):
    """One Jacobi sweep ``out = v + omega * (T[v] - v)``; returns max |T[v] - v|.

    Each interior i-slab is handled independently, so the result does not
    depend on the number of threads.
    """
    n = v.shape[2] - 1
    slab_res = np.zeros(n + 1)
    for i in numba.prange(1, n):
        loc = 0.0
        for q in range(2):
            for r in range(2):
                for j in range(1, n):
                    for k in range(1, n):
                        t = _node_T(v, q, r, i, j, k, spd_A, spd_B, hx_A, hy_A,
                                    hx_B, hy_B, inv_dx1, inv_dx2, a4, lam, c_A, c_B)
                        d = abs(t - v[q, r, i, j, k])
                        if d > loc:
                            loc = d
                        if omega != 1.0:
                            t = v[q, r, i, j, k] + omega * (t - v[q, r, i, j, k])
                        out[q, r, i, j, k] = t
        slab_res[i] = loc
    return slab_res.max()


@numba.njit(cache=True)
def gauss_seidel_sweep(v, spd_A, spd_B, hx_A, hy_A, hx_B, hy_B,
                       inv_dx1, inv_dx2, a4, lam, c_A, c_B, omega):
    """In-place sweep in lexicographic (q, r, i, j, k) order, relaxed by ``omega``."""
    n = v.shape[2] - 1
    res = 0.0
    for q in range(2):
        for r in range(2):
            for i in range(1, n):
                for j in range(1, n):
                    for k in range(1, n):
                        t = _node_T(v, q, r, i, j, k, spd_A, spd_B, hx_A, hy_A,
                                    hx_B, hy_B, inv_dx1, inv_dx2, a4, lam, c_A, c_B)
                        d = abs(t - v[q, r, i, j, k])
                        if d > res:
                            res = d
                        if omega != 1.0:
                            t = v[q, r, i, j, k] + omega * (t - v[q, r, i, j, k])
                        v[q, r, i, j, k] = t
    return res
