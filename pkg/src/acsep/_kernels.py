"""Compiled inner loops for the logarithmic-kind implicit solve.

The batched Newton solve is the hot spot of every experiment; these
numba kernels run it row by row (one row = one path) with the scalar
resolvent inlined.  Per-row control flow means a path performs exactly
the same arithmetic whether it runs alone or inside a batch, which the
reproducibility contract needs.  Custom potentials take the vectorized
numpy path in ``solver`` instead; a test pins the two implementations
against each other.

All kernels are serial and compiled without fastmath, so results do not
depend on thread count or on floating-point contraction.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

R_SAT = float(np.nextafter(1.0, 0.0))


@njit(cache=True)
def _beta_log(theta, x):
    return 0.5 * theta * (math.log1p(x) - math.log1p(-x)) - theta * x


@njit(cache=True)
def _dbeta_log(theta, x):
    xx = x * x
    return theta * xx / (1.0 - xx)


@njit(cache=True)
def _resolvent_scalar(theta, lam, r, x0):
    """Root of x + lam*beta(x) = r by safeguarded Newton on (-1, 1).

    Saturates at the last representable points when the true root is
    within one ulp of the barriers (|r| far outside (-1, 1))."""
    hi = R_SAT
    lo = -R_SAT
    if hi + lam * _beta_log(theta, hi) - r <= 0.0:
        return hi
    if lo + lam * _beta_log(theta, lo) - r >= 0.0:
        return lo
    x = x0
    if x <= lo or x >= hi:
        x = r
        if x > 0.99:
            x = 0.99
        elif x < -0.99:
            x = -0.99
    tol = 1e-13 * (1.0 + abs(r))
    phi = x + lam * _beta_log(theta, x) - r
    it = 0
    # converge on residual or on bracket collapse (near the barriers the
    # achievable residual is lam * beta' * ulp(x), above any fixed tol)
    while abs(phi) > tol and hi - lo > 4e-16 and it < 100:
        if phi > 0.0:
            hi = x
        else:
            lo = x
        dphi = 1.0 + lam * _dbeta_log(theta, x)
        cand = x - phi / dphi
        if not (lo < cand < hi) or not math.isfinite(cand):
            cand = 0.5 * (lo + hi)
        x = cand
        phi = x + lam * _beta_log(theta, x) - r
        it += 1
    return x


@njit(cache=True)
def _row_residual(v, b, j, bl, g, flux, res, dt, h, p, theta, lam, j_warm):
    """Residual of one row; fills j, bl, g, flux, res.  Returns max |res|."""
    n = v.shape[0]
    for i in range(n):
        ji = _resolvent_scalar(theta, lam, v[i], j_warm[i])
        j[i] = ji
        bl[i] = (v[i] - ji) / lam
    g[0] = v[0] / h
    for i in range(1, n):
        g[i] = (v[i] - v[i - 1]) / h
    g[n] = -v[n - 1] / h
    if p == 2.0:
        for i in range(n + 1):
            flux[i] = g[i]
    else:
        for i in range(n + 1):
            flux[i] = abs(g[i]) ** (p - 2.0) * g[i]
    rn = 0.0
    for i in range(n):
        lap = (flux[i + 1] - flux[i]) / h
        res[i] = v[i] - dt * lap + dt * bl[i] - b[i]
        a = abs(res[i])
        if a > rn:
            rn = a
    return rn


@njit(cache=True)
def implicit_solve_log(u, b, lam_rows, dt, h, p, theta, tol, max_iter, j_warm,
                       v_out, j_out, rnorm_out):
    """Damped Newton for every row of the batch; outputs written in place."""
    n_rows, n = u.shape
    inv_h2 = dt / (h * h)
    v = np.empty(n)
    j = np.empty(n)
    bl = np.empty(n)
    g = np.empty(n + 1)
    flux = np.empty(n + 1)
    res = np.empty(n)
    v_try = np.empty(n)
    j_try = np.empty(n)
    bl_try = np.empty(n)
    g_try = np.empty(n + 1)
    flux_try = np.empty(n + 1)
    res_try = np.empty(n)
    delta = np.empty(n)
    diag = np.empty(n)
    cp = np.empty(n)
    dp = np.empty(n)
    w = np.empty(n + 1)

    for row in range(n_rows):
        lam = lam_rows[row]
        for i in range(n):
            v[i] = u[row, i]
        rn = _row_residual(v, b[row], j, bl, g, flux, res, dt, h, p, theta,
                           lam, j_warm[row])
        it = 0
        while rn > tol and it < max_iter:
            if p == 2.0:
                for i in range(n + 1):
                    w[i] = 1.0
            else:
                for i in range(n + 1):
                    w[i] = (p - 1.0) * abs(g[i]) ** (p - 2.0)
            # tridiagonal Jacobian: lower_i = -inv_h2*w[i], upper_i = -inv_h2*w[i+1]
            for i in range(n):
                ji = j[i]
                dbj = _dbeta_log(theta, ji)
                blp = dbj / (1.0 + lam * dbj)
                diag[i] = 1.0 + inv_h2 * (w[i] + w[i + 1]) + dt * blp
            cp[0] = -inv_h2 * w[1] / diag[0]
            dp[0] = res[0] / diag[0]
            for i in range(1, n):
                low = -inv_h2 * w[i]
                m = diag[i] - low * cp[i - 1]
                cp[i] = -inv_h2 * w[i + 1] / m
                dp[i] = (res[i] - low * dp[i - 1]) / m
            delta[n - 1] = dp[n - 1]
            for i in range(n - 2, -1, -1):
                delta[i] = dp[i] - cp[i] * delta[i + 1]

            alpha = 1.0
            accepted = False
            for _ in range(40):
                for i in range(n):
                    v_try[i] = v[i] - alpha * delta[i]
                rn_try = _row_residual(v_try, b[row], j_try, bl_try, g_try,
                                       flux_try, res_try, dt, h, p, theta, lam, j)
                if rn_try < rn:
                    accepted = True
                    break
                alpha *= 0.5
                if alpha <= 2.0**-30:
                    break
            if not accepted:
                break
            for i in range(n):
                v[i] = v_try[i]
                j[i] = j_try[i]
                res[i] = res_try[i]
            for i in range(n + 1):
                g[i] = g_try[i]
            rn = rn_try
            it += 1

        for i in range(n):
            v_out[row, i] = v[i]
            j_out[row, i] = j[i]
        rnorm_out[row] = rn


@njit(cache=True)
def resolvent_log_batch(r, lam_rows, x0, theta, out):
    """Vector resolvent for the logarithmic kind (flat warm-started loop)."""
    n_rows, n = r.shape
    for row in range(n_rows):
        lam = lam_rows[row]
        for i in range(n):
            out[row, i] = _resolvent_scalar(theta, lam, r[row, i], x0[row, i])
