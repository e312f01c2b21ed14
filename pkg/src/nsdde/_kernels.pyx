# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stepping kernel for catalog models.

Same algorithm and arithmetic order as ``_kernels_py.simulate_catalog``.
The stepping loop runs without the GIL so ensemble worker threads scale.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, fabs, isfinite, INFINITY, NAN

cnp.import_array()

cdef enum:
    OK = 0
    BLOWUP = 1
    NO_CONVERGENCE = 2


cdef inline double _phi(int kind, double u) noexcept nogil:
    cdef double u2
    if kind == 0:
        return 1.0
    if kind == 1:
        return u
    if kind == 2:
        return sin(u)
    if kind == 3:
        return u * u * u
    if kind == 4:
        u2 = u * u
        return u2 * u2 * u
    return u / (1.0 + u * u)


cdef inline double _dphi(int kind, double u) noexcept nogil:
    cdef double u2, w
    if kind == 0:
        return 0.0
    if kind == 1:
        return 1.0
    if kind == 2:
        return cos(u)
    if kind == 3:
        return 3.0 * u * u
    if kind == 4:
        u2 = u * u
        return 5.0 * u2 * u2
    w = 1.0 + u * u
    return (1.0 - u * u) / (w * w)


cdef inline double _terms(const int[:] kx, const int[:] ky, const double[:, :] coef,
                          double x, double y, int i) noexcept nogil:
    cdef double s = 0.0, c
    cdef Py_ssize_t t
    for t in range(kx.shape[0]):
        c = coef[t, i]
        if c != 0.0:
            s += c * _phi(kx[t], x) * _phi(ky[t], y)
    return s


cdef inline double _dterms(const int[:] kx, const int[:] ky, const double[:, :] coef,
                           double x, double y, int i) noexcept nogil:
    cdef double s = 0.0, c
    cdef Py_ssize_t t
    for t in range(kx.shape[0]):
        c = coef[t, i]
        if c != 0.0:
            s += c * _dphi(kx[t], x) * _phi(ky[t], y)
    return s


cdef int _solve(const int[:] fkx, const int[:] fky, const double[:, :] fc,
                double y, int i, double h, double target, double* x,
                double tol, int max_iter) noexcept nogil:
    cdef int it = 0
    cdef bint newton = True, accepted
    cdef double r, dg, step, lam, xn, rn
    while it < max_iter:
        r = x[0] - h * _terms(fkx, fky, fc, x[0], y, i) - target
        if it > 0 and fabs(r) <= tol * (1.0 + fabs(x[0])):
            return 1
        it += 1
        if newton:
            dg = 1.0 - h * _dterms(fkx, fky, fc, x[0], y, i)
            if dg > 0.0 and isfinite(dg):
                step = r / dg
                lam = 1.0
                accepted = False
                while lam >= 1.0 / 1024.0:
                    xn = x[0] - lam * step
                    rn = xn - h * _terms(fkx, fky, fc, xn, y, i) - target
                    if fabs(rn) < fabs(r):
                        x[0] = xn
                        accepted = True
                        break
                    lam *= 0.5
                if accepted:
                    continue
            newton = False
        x[0] = 0.5 * x[0] + 0.5 * (target + h * _terms(fkx, fky, fc, x[0], y, i))
    r = x[0] - h * _terms(fkx, fky, fc, x[0], y, i) - target
    return fabs(r) <= tol * (1.0 + fabs(x[0]))


def simulate_catalog(
    const int[:] nkx, const int[:] nky, const double[:, :] nc,
    const int[:] fkx, const int[:] fky, const double[:, :] fc,
    const int[:] gkx, const int[:] gky, const double[:, :] gc,
    double theta, double delta, int m,
    const double[:, :] xi, const long[:] regimes, const double[:, :] dw,
    double tol, int max_iter, double guard,
):
    cdef Py_ssize_t K = dw.shape[0]
    cdef Py_ssize_t d = dw.shape[1]
    out = np.full((m + 1 + K, d), np.nan)
    cdef double[:, :] X = out
    cdef Py_ssize_t k, c
    cdef int i, inext, status = OK
    cdef long k_stop = K
    cdef double h = theta * delta, explicit = 1.0 - theta
    cdef double xk, xd, yn, fk, gk, dk, dn, noise, target, x, guess
    for k in range(m + 1):
        for c in range(d):
            X[k, c] = xi[k, c]
    with nogil:
        for k in range(K):
            i = <int>regimes[k] - 1
            inext = <int>regimes[k + 1] - 1
            for c in range(d):
                xk = X[m + k, c]
                xd = X[k, c]
                yn = X[k + 1, c]
                fk = _terms(fkx, fky, fc, xk, xd, i)
                gk = _terms(gkx, gky, gc, xk, xd, i)
                dk = _terms(nkx, nky, nc, 0.0, xd, i)
                dn = _terms(nkx, nky, nc, 0.0, yn, inext)
                noise = gk * dw[k, c]
                target = xk - dk + explicit * delta * fk + noise + dn
                if h == 0.0:
                    x = target
                else:
                    guess = xk + fk * delta + noise + dn - dk
                    if not isfinite(guess):
                        guess = target
                    x = guess
                    if not _solve(fkx, fky, fc, yn, inext, h, target, &x, tol, max_iter):
                        if not isfinite(x) or fabs(x) > guard:
                            status = BLOWUP
                        else:
                            status = NO_CONVERGENCE
                        k_stop = k + 1
                        break
                if not isfinite(x) or fabs(x) > guard:
                    status = BLOWUP
                    k_stop = k + 1
                    break
                X[m + k + 1, c] = x
            if status != OK:
                for c in range(d):
                    X[m + k + 1, c] = NAN
                break
    return out, status, k_stop
