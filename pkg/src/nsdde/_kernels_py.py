"""Pure-Python stepping kernel for catalog models.

Mirror of ``_kernels.pyx``; used when the compiled extension is absent or
``NSDDE_PURE_PYTHON`` is set. Keep the two in step.
"""

import math

import numpy as np

OK, BLOWUP, NO_CONVERGENCE = 0, 1, 2


def _phi(kind, u):
    if kind == 0:
        return 1.0
    if kind == 1:
        return u
    if kind == 2:
        return math.sin(u)
    if kind == 3:
        return u * u * u
    if kind == 4:
        u2 = u * u
        return u2 * u2 * u
    return u / (1.0 + u * u)


def _dphi(kind, u):
    if kind == 0:
        return 0.0
    if kind == 1:
        return 1.0
    if kind == 2:
        return math.cos(u)
    if kind == 3:
        return 3.0 * u * u
    if kind == 4:
        u2 = u * u
        return 5.0 * u2 * u2
    w = 1.0 + u * u
    return (1.0 - u * u) / (w * w)


def _terms(kx, ky, coef, x, y, i):
    s = 0.0
    for t in range(len(kx)):
        c = coef[t][i]
        if c != 0.0:
            s += c * _phi(kx[t], x) * _phi(ky[t], y)
    return s


def _dterms(kx, ky, coef, x, y, i):
    s = 0.0
    for t in range(len(kx)):
        c = coef[t][i]
        if c != 0.0:
            s += c * _dphi(kx[t], x) * _phi(ky[t], y)
    return s


def _solve(fkx, fky, fc, y, i, h, target, x, tol, max_iter):
    """Root of ``x - h f(x, y, i) - target``; returns (x, converged)."""
    it = 0
    newton = True
    while it < max_iter:
        r = x - h * _terms(fkx, fky, fc, x, y, i) - target
        # the first correction is unconditional: tol*(1+|x|) would accept the predictor for tiny x
        if it > 0 and abs(r) <= tol * (1.0 + abs(x)):
            return x, True
        it += 1
        if newton:
            dg = 1.0 - h * _dterms(fkx, fky, fc, x, y, i)
            if dg > 0.0 and math.isfinite(dg):
                step = r / dg
                lam = 1.0
                accepted = False
                while lam >= 1.0 / 1024.0:
                    xn = x - lam * step
                    rn = xn - h * _terms(fkx, fky, fc, xn, y, i) - target
                    if abs(rn) < abs(r):
                        x = xn
                        accepted = True
                        break
                    lam *= 0.5
                if accepted:
                    continue
            newton = False
        x = 0.5 * x + 0.5 * (target + h * _terms(fkx, fky, fc, x, y, i))
    r = x - h * _terms(fkx, fky, fc, x, y, i) - target
    return x, abs(r) <= tol * (1.0 + abs(x))


def simulate_catalog(
    nkx, nky, nc, fkx, fky, fc, gkx, gky, gc,
    theta, delta, m, xi, regimes, dw, tol, max_iter, guard,
):
    """Run the theta scheme for a componentwise catalog model.

    ``xi`` holds the ``m + 1`` initial rows, ``regimes`` the 1-based grid
    regimes ``r(k delta)`` for ``k = 0..K`` and ``dw`` the scaled Brownian
    increments ``(K, d)``. Returns ``(X, status, k_stop)`` where ``X`` has
    ``m + 1 + K`` rows and is NaN past ``k_stop`` when ``status != OK``.
    """
    K = dw.shape[0]
    d = dw.shape[1]
    X = np.full((m + 1 + K, d), np.nan)
    X[: m + 1] = xi
    rows = X.tolist()
    nc, fc, gc = nc.tolist(), fc.tolist(), gc.tolist()
    nkx, nky, fkx, fky, gkx, gky = (list(map(int, a)) for a in (nkx, nky, fkx, fky, gkx, gky))
    reg = [int(r) - 1 for r in regimes]
    dwl = dw.tolist()
    h = theta * delta
    explicit = 1.0 - theta
    for k in range(K):
        i = reg[k]
        inext = reg[k + 1]
        cur = rows[m + k]
        dly = rows[k]
        nxt_dly = rows[k + 1]
        new = [0.0] * d
        for c in range(d):
            xk = cur[c]
            xd = dly[c]
            yn = nxt_dly[c]
            fk = _terms(fkx, fky, fc, xk, xd, i)
            gk = _terms(gkx, gky, gc, xk, xd, i)
            dk = _terms(nkx, nky, nc, 0.0, xd, i)
            dn = _terms(nkx, nky, nc, 0.0, yn, inext)
            noise = gk * dwl[k][c]
            target = xk - dk + explicit * delta * fk + noise + dn
            if h == 0.0:
                x = target
            else:
                guess = xk + fk * delta + noise + dn - dk
                if not math.isfinite(guess):
                    guess = target
                try:
                    x, ok = _solve(fkx, fky, fc, yn, inext, h, target, guess, tol, max_iter)
                except (ValueError, OverflowError):
                    # math.sin/cos reject infinities reached mid-iteration
                    x, ok = math.inf, False
                if not ok:
                    X[: m + 1 + k] = rows[: m + 1 + k]
                    if not math.isfinite(x) or abs(x) > guard:
                        return X, BLOWUP, k + 1
                    return X, NO_CONVERGENCE, k + 1
            if not math.isfinite(x) or abs(x) > guard:
                X[: m + 1 + k] = rows[: m + 1 + k]
                return X, BLOWUP, k + 1
            new[c] = x
        rows[m + k + 1] = new
    X[:] = rows
    return X, OK, K
