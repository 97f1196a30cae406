"""Compiled inner loops for coordinate descent.

Status codes returned by the sweeps: 0 converged, 1 hit ``max_sweeps``,
2 penalty too large for the square-root closed form at column ``bad_j``.
"""

import numpy as np
from numba import njit

RECOMPUTE_EVERY = 50


@njit(cache=True, nogil=True)
def _residual(x, y, beta):
    n, p = x.shape
    r = y.copy()
    for j in range(p):
        b = beta[j]
        if b != 0.0:
            for i in range(n):
                r[i] -= x[i, j] * b
    return r


@njit(cache=True, nogil=True)
def _mean_sq(r):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i] * r[i]
    return s / r.shape[0]


@njit(cache=True, nogil=True)
def sqrt_update(rho, d, q_minus, pen):
    """Minimize sqrt(q_minus - 2 b rho + b^2 d) + pen |b| over b.

    Returns (b, ok); ok is False when the nonzero branch is reached but
    pen^2 >= d, where the closed form has no real denominator.
    """
    if abs(rho) <= pen * np.sqrt(q_minus):
        return 0.0, True
    den = 1.0 - pen * pen / d
    if den <= 0.0:
        return 0.0, False
    num = q_minus - rho * rho / d
    if num < 0.0:
        num = 0.0
    shift = pen / d * np.sqrt(num) / np.sqrt(den)
    if rho > 0.0:
        return rho / d - shift, True
    return rho / d + shift, True


@njit(cache=True, nogil=True)
def lasso_update(rho, d, pen):
    """Minimize q - 2 b rho + b^2 d + pen |b| over b."""
    if 2.0 * abs(rho) <= pen:
        return 0.0
    if rho > 0.0:
        return (2.0 * rho - pen) / (2.0 * d)
    return (2.0 * rho + pen) / (2.0 * d)


@njit(cache=True, nogil=True)
def cd_sweeps(x, y, pen, beta, tol, max_sweeps, sqrt_loss, shuffle, seed):
    """Cyclic (or shuffled) coordinate descent.

    ``pen[j] = lam * gamma_j / n``. ``beta`` is updated in place.
    Returns (sweeps, status, bad_j, objectives).
    """
    n, p = x.shape
    col_sq = np.empty(p)
    for j in range(p):
        col_sq[j] = _mean_sq(x[:, j])
    r = _residual(x, y, beta)
    q = _mean_sq(r)
    objectives = np.empty(max_sweeps)
    order = np.arange(p)
    if shuffle:
        np.random.seed(seed)
    status = 1
    bad_j = -1
    sweeps = 0
    for sweep in range(max_sweeps):
        if shuffle:
            order = np.random.permutation(p)
        max_change = 0.0
        for jj in range(p):
            j = order[jj]
            d = col_sq[j]
            bj = beta[j]
            xr = 0.0
            for i in range(n):
                xr += x[i, j] * r[i]
            xr /= n
            rho = xr + d * bj
            if sqrt_loss:
                if bj != 0.0:
                    qm = 0.0
                    for i in range(n):
                        t = r[i] + x[i, j] * bj
                        qm += t * t
                    qm /= n
                else:
                    qm = q
                b, ok = sqrt_update(rho, d, qm, pen[j])
                if not ok:
                    status = 2
                    bad_j = j
                    return sweeps, status, bad_j, objectives[:sweeps]
            else:
                b = lasso_update(rho, d, pen[j])
            delta = b - bj
            if delta != 0.0:
                s = 0.0
                for i in range(n):
                    r[i] -= x[i, j] * delta
                    s += r[i] * r[i]
                q = s / n
                beta[j] = b
                if abs(delta) > max_change:
                    max_change = abs(delta)
        sweeps = sweep + 1
        if sweeps % RECOMPUTE_EVERY == 0:
            r = _residual(x, y, beta)
            q = _mean_sq(r)
        penalty = 0.0
        for j in range(p):
            penalty += pen[j] * abs(beta[j])
        objectives[sweep] = (np.sqrt(q) if sqrt_loss else q) + penalty
        if max_change <= tol:
            status = 0
            break
    return sweeps, status, bad_j, objectives[:sweeps]
