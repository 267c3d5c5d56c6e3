"""Compiled inner maximisation of the paged failure exponent over a slice of
the probability simplex.

The slice is ``{a >= 0 : sum(a) = 1, sum(i * a_i) = x * t}``.  The objective
is the ``a``-dependent part of ``log c9``::

    G(a) = (1/t) * sum(a_i * (lct_i - log a_i)) + x*d*log(L) + w*log(q)

with ``L = a . ell``, ``M = a . mu``, ``q = 1 - d*M*L**(d-1) - L**d`` and
``w = beta - x``.  Local search is Newton ascent in an orthonormal basis of
the slice's null space, followed by three-index mass transfers that keep
both linear constraints fixed.
"""

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, nogil=True)
def objective(a, x, w, d, t, ell, mu, lct):
    ent = 0.0
    for i in range(a.shape[0]):
        ai = a[i]
        if ai > 0.0:
            ent += ai * (lct[i] - np.log(ai))
        elif ai < 0.0:
            return NEG_INF
    L = 0.0
    M = 0.0
    for i in range(a.shape[0]):
        L += a[i] * ell[i]
        M += a[i] * mu[i]
    if L <= 0.0:
        return NEG_INF
    q = 1.0 - d * M * L ** (d - 1) - L ** d
    if q <= 0.0:
        return NEG_INF
    return ent / t + x * d * np.log(L) + w * np.log(q)


@njit(cache=True, nogil=True)
def grad_hess(a, x, w, d, t, ell, mu, lct, g, H):
    n = a.shape[0]
    L = 0.0
    M = 0.0
    for i in range(n):
        L += a[i] * ell[i]
        M += a[i] * mu[i]
    Ld1 = L ** (d - 1)
    Ld2 = L ** (d - 2) if d >= 2 else 0.0
    Ld3 = L ** (d - 3) if d >= 3 else 0.0
    q = 1.0 - d * M * Ld1 - L ** d
    cl = d * (d - 1) * M * Ld2 + d * Ld1  # -dq/dL
    cm = d * Ld1  # -dq/dM
    cll = d * (d - 1) * (d - 2) * M * Ld3 + d * (d - 1) * Ld2  # -d2q/dL2
    clm = d * (d - 1) * Ld2  # -d2q/dLdM
    for i in range(n):
        dq_i = -(cl * ell[i] + cm * mu[i])
        g[i] = (lct[i] - np.log(a[i]) - 1.0) / t + x * d * ell[i] / L + w * dq_i / q
        for j in range(n):
            dq_j = -(cl * ell[j] + cm * mu[j])
            d2q = -(cll * ell[i] * ell[j] + clm * (ell[i] * mu[j] + mu[i] * ell[j]))
            H[i, j] = -x * d * ell[i] * ell[j] / (L * L) + w * (d2q / q - dq_i * dq_j / (q * q))
        H[i, i] -= 1.0 / (t * a[i])


@njit(cache=True, nogil=True)
def tilt(base, x, t, out):
    """``out_i ~ base_i * exp(lam * i)`` normalised with mean index ``x * t``."""
    n = base.shape[0]
    target = x * t
    lo = -1.0
    hi = 1.0

    def mean_at(lam):
        mx = NEG_INF
        for i in range(n):
            if base[i] > 0.0:
                v = np.log(base[i]) + lam * i
                if v > mx:
                    mx = v
        s = 0.0
        m = 0.0
        for i in range(n):
            if base[i] > 0.0:
                e = np.exp(np.log(base[i]) + lam * i - mx)
                s += e
                m += e * i
        return m / s

    while mean_at(lo) > target:
        lo *= 2.0
    while mean_at(hi) < target:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mean_at(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    lam = 0.5 * (lo + hi)
    mx = NEG_INF
    for i in range(n):
        if base[i] > 0.0:
            v = np.log(base[i]) + lam * i
            if v > mx:
                mx = v
    s = 0.0
    for i in range(n):
        out[i] = np.exp(np.log(base[i]) + lam * i - mx) if base[i] > 0.0 else 0.0
        s += out[i]
    for i in range(n):
        out[i] /= s


@njit(cache=True, nogil=True)
def newton_ascent(a, x, w, d, t, ell, mu, lct, N, max_iter):
    n = a.shape[0]
    g = np.empty(n)
    H = np.empty((n, n))
    f = objective(a, x, w, d, t, ell, mu, lct)
    trial = np.empty(n)
    for _ in range(max_iter):
        grad_hess(a, x, w, d, t, ell, mu, lct, g, H)
        gz = N.T @ g
        Hz = N.T @ H @ N
        lam, V = np.linalg.eigh(-Hz)
        c = V.T @ gz
        for i in range(lam.shape[0]):
            c[i] /= max(abs(lam[i]), 1e-12)
        dz = V @ c
        decrement = gz @ dz
        if decrement < 1e-16:
            break
        da = N @ dz
        step = 1.0
        for i in range(n):
            if da[i] < 0.0:
                step = min(step, -0.99 * a[i] / da[i])
        improved = False
        for _ls in range(60):
            for i in range(n):
                trial[i] = a[i] + step * da[i]
            ft = objective(trial, x, w, d, t, ell, mu, lct)
            if ft >= f + 1e-4 * step * decrement:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        gain = ft - f
        a[:] = trial
        f = ft
        if gain < 1e-15:
            break
    return f


@njit(cache=True, nogil=True)
def exchange_refine(a, x, w, d, t, ell, mu, lct, tol, max_sweeps):
    """Three-index mass transfers ``(+(l-j), -(l-i), +(j-i))`` on ``(i, j, l)``.

    Each such move keeps both the total mass and the mean index fixed.
    Stops when no move improves the objective by more than ``tol``.
    """
    n = a.shape[0]
    f = objective(a, x, w, d, t, ell, mu, lct)
    g = np.empty(n)
    H = np.empty((n, n))
    trial = np.empty(n)
    for _ in range(max_sweeps):
        any_move = False
        grad_hess_safe(a, x, w, d, t, ell, mu, lct, g, H)
        for i in range(n):
            for j in range(i + 1, n):
                for l in range(j + 1, n):
                    ei = float(l - j)
                    ej = -float(l - i)
                    el = float(j - i)
                    slope = g[i] * ei + g[j] * ej + g[l] * el
                    sgn = 1.0 if slope > 0.0 else -1.0
                    # curvature along the move from the 3x3 Hessian block
                    curv = -(H[i, i] * ei * ei + H[j, j] * ej * ej + H[l, l] * el * el
                             + 2.0 * (H[i, j] * ei * ej + H[i, l] * ei * el + H[j, l] * ej * el))
                    if curv > 0.0 and slope * slope / (2.0 * curv) < tol:
                        continue
                    # largest step keeping all three entries non-negative
                    smax = np.inf
                    for idx, e in ((i, sgn * ei), (j, sgn * ej), (l, sgn * el)):
                        if e < 0.0:
                            smax = min(smax, a[idx] / -e)
                    if smax <= 0.0:
                        continue
                    if curv > 0.0:
                        step = min(smax, abs(slope) / curv)
                    else:
                        step = smax
                    for _ls in range(40):
                        trial[:] = a
                        trial[i] += step * sgn * ei
                        trial[j] += step * sgn * ej
                        trial[l] += step * sgn * el
                        for idx in (i, j, l):
                            if trial[idx] < 0.0:
                                trial[idx] = 0.0
                        ft = objective(trial, x, w, d, t, ell, mu, lct)
                        if ft > f + tol:
                            a[:] = trial
                            f = ft
                            any_move = True
                            grad_hess_safe(a, x, w, d, t, ell, mu, lct, g, H)
                            break
                        step *= 0.5
        if not any_move:
            break
    return f


@njit(cache=True, nogil=True)
def grad_hess_safe(a, x, w, d, t, ell, mu, lct, g, H):
    # entries driven to exactly zero have an infinite entropy slope
    floor = np.empty_like(a)
    for i in range(a.shape[0]):
        floor[i] = max(a[i], 1e-300)
    grad_hess(floor, x, w, d, t, ell, mu, lct, g, H)


@njit(cache=True, nogil=True)
def maximize_slice(x, w, d, t, ell, mu, lct, N, n_random, seed, blend, newton_iter, tol, sweeps):
    """Multi-start maximisation of ``G`` on the slice at mean ``x``.

    Returns ``(best value, best a, number of starts that converged)``.
    """
    n = t + 1
    np.random.seed(seed)
    uniform = np.ones(n)
    base_tilted = np.empty(n)
    tilt(uniform, x, t, base_tilted)
    best = NEG_INF
    best_a = base_tilted.copy()
    start = np.empty(n)
    raw = np.empty(n)
    converged = 0
    for s in range(3 + n_random):
        if s == 0:
            raw[:] = 0.0
            raw[0] = 1.0 - x
            raw[t] = x
        elif s == 1:
            raw[:] = base_tilted
        elif s == 2:
            raw[:] = 0.0
            xt = x * t
            lo = int(np.floor(xt))
            hi = int(np.ceil(xt))
            if lo == hi:
                raw[lo] = 1.0
            else:
                raw[lo] = hi - xt
                raw[hi] = xt - lo
        else:
            for i in range(n):
                raw[i] = np.random.exponential(1.0)
            tilt(raw.copy(), x, t, raw)
        for i in range(n):
            start[i] = (1.0 - blend) * raw[i] + blend * base_tilted[i]
        f = newton_ascent(start, x, w, d, t, ell, mu, lct, N, newton_iter)
        f = exchange_refine(start, x, w, d, t, ell, mu, lct, tol, sweeps)
        if np.isfinite(f):
            converged += 1
        if f > best:
            best = f
            best_a[:] = start
    return best, best_a, converged
