"""Compiled inner loops: path sampling and the batched LSPE(lambda) recursion.

All kernels release the GIL so that trajectory chunks can run on a thread pool.
"""

import numba
import numpy as np

OK = 0
SMW_BREAKDOWN = 1
SMW_FLOOR = 1e-14


@numba.njit(cache=True, nogil=True)
def _next_state(cdf_row, u):
    # first index with cdf > u; zero-probability states have flat cdf and are skipped
    lo = 0
    hi = cdf_row.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if cdf_row[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return lo


@numba.njit(cache=True, nogil=True)
def walk(cdf, x0, u, out):
    """Fill ``out`` with x0 followed by len(u) inverse-CDF transitions."""
    x = x0
    out[0] = x
    for t in range(u.shape[0]):
        x = _next_state(cdf[x], u[t])
        out[t + 1] = x


@numba.njit(cache=True, nogil=True)
def lspe_block(phi, cost, cdf, alpha, alpha_lam, a_block, n_start, u, x,
               r, z, A_bar, b_bar, G_inv, H, r_star,
               err_out, r_out, snap_A, snap_b, snap_G, record_r, record_snap):
    """Advance every trajectory in the batch by ``u.shape[1]`` LSPE steps.

    Row ``i`` of the state arrays belongs to trajectory ``i``; ``x[i]`` holds the
    current chain state X_n and is overwritten with X_{n+steps}.  ``a_block[j]``
    is the stepsize a(n_start + j).  After step j, ``err_out[i, j]`` is the
    H-norm of r_{n_start+j+1} - r*.
    """
    R, steps = u.shape
    M = phi.shape[1]
    w = np.empty(M)
    g = np.empty(M)
    v = np.empty(M)
    d = np.empty(M)
    for i in range(R):
        xm = x[i]
        for j in range(steps):
            m = n_start + j
            xm1 = _next_state(cdf[xm], u[i, j])
            inv = 1.0 / (m + 1)
            # eligibility trace
            for p in range(M):
                z[i, p] = alpha_lam * z[i, p] + phi[xm, p]
            # running averages A_n, b_n
            kx = cost[xm]
            for p in range(M):
                w[p] = alpha * phi[xm1, p] - phi[xm, p]
            for p in range(M):
                zp = z[i, p]
                for q in range(M):
                    A_bar[i, p, q] += (zp * w[q] - A_bar[i, p, q]) * inv
                b_bar[i, p] += (zp * kx - b_bar[i, p]) * inv
            # Sherman-Morrison update of (rho I + sum phi phi^T)^{-1}
            denom = 1.0
            for p in range(M):
                acc = 0.0
                for q in range(M):
                    acc += G_inv[i, p, q] * phi[xm, q]
                g[p] = acc
                denom += phi[xm, p] * acc
            if denom <= SMW_FLOOR:
                return SMW_BREAKDOWN
            for p in range(M):
                for q in range(M):
                    G_inv[i, p, q] -= g[p] * g[q] / denom
            # r_{n+1} = r_n + a(n) (n+1) G_inv (A_n r_n + b_n)
            for p in range(M):
                acc = b_bar[i, p]
                for q in range(M):
                    acc += A_bar[i, p, q] * r[i, q]
                v[p] = acc
            scale = a_block[j] * (m + 1)
            for p in range(M):
                acc = 0.0
                for q in range(M):
                    acc += G_inv[i, p, q] * v[q]
                d[p] = acc
            for p in range(M):
                r[i, p] += scale * d[p]
            # H-norm error of the new iterate
            for p in range(M):
                d[p] = r[i, p] - r_star[p]
            acc = 0.0
            for p in range(M):
                for q in range(M):
                    acc += d[p] * H[p, q] * d[q]
            err_out[i, j] = np.sqrt(max(acc, 0.0))
            if record_r:
                for p in range(M):
                    r_out[i, j, p] = r[i, p]
            if record_snap:
                for p in range(M):
                    snap_b[i, j, p] = b_bar[i, p]
                    for q in range(M):
                        snap_A[i, j, p, q] = A_bar[i, p, q]
                        snap_G[i, j, p, q] = G_inv[i, p, q]
            xm = xm1
        x[i] = xm
    return OK


@numba.njit(cache=True, nogil=True)
def chi_weighted_sums(a, w):
    """S(m) = sum_{k<=m} chi(m, k+1) a(k) w(k), by S(m) = (1 - a(m)) S(m-1) + a(m) w(m)."""
    out = np.empty_like(a)
    acc = 0.0
    for i in range(a.shape[0]):
        acc = (1.0 - a[i]) * acc + a[i] * w[i]
        out[i] = acc
    return out


@numba.njit(cache=True, nogil=True)
def reference_iterate(drift, offset, a, out):
    """out[j+1] = out[j] + a[j] (drift @ out[j] + offset); out[0] is the start."""
    M = drift.shape[0]
    for j in range(a.shape[0]):
        for p in range(M):
            acc = offset[p]
            for q in range(M):
                acc += drift[p, q] * out[j, q]
            out[j + 1, p] = out[j, p] + a[j] * acc
