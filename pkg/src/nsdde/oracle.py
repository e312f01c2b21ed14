"""Independent reference computations used by tests and ``nsdde selftest``.

Nothing here calls into the code it is meant to check: the arithmetic is
duplicated on purpose and only plain floats or nested lists are used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import BracketInvalid


@dataclass(frozen=True)
class LinearTestProblem:
    """``dX = -a X dt`` with no delay dependence, noise or switching."""

    a: float
    theta: float
    delta: float

    def __post_init__(self):
        if not 1.0 + self.theta * self.a * self.delta > 0:
            raise ValueError("need 1 + theta*a*delta > 0")


def linear_ratio(prob: LinearTestProblem) -> float:
    """One-step amplification ``(1 - (1-theta) a delta) / (1 + theta a delta)``."""
    a, th, dt = prob.a, prob.theta, prob.delta
    return (1.0 - (1.0 - th) * a * dt) / (1.0 + th * a * dt)


def linear_path(prob: LinearTestProblem, x0: float, n_steps: int) -> list[float]:
    """Closed-form iterates ``x0 * ratio**k`` for ``k = 0..n_steps``."""
    num = 1.0 - (1.0 - prob.theta) * prob.a * prob.delta
    den = 1.0 + prob.theta * prob.a * prob.delta
    return [x0 * num**k / den**k for k in range(n_steps + 1)]


def _matmul(a, b):
    n = len(a)
    return [[math.fsum(a[i][k] * b[k][j] for k in range(n)) for j in range(n)] for i in range(n)]


def expm_series(mat, tol: float = 1e-16) -> list[list[float]]:
    """Matrix exponential by Taylor series with scaling and squaring.

    The matrix is halved until its infinity norm is at most 0.5, the series
    is summed until terms drop below ``tol``, and the result is squared back.
    """
    n = len(mat)
    norm = max(math.fsum(abs(v) for v in row) for row in mat) if n else 0.0
    s = 0
    while norm > 0.5:
        norm /= 2.0
        s += 1
    scale = 2.0**-s
    a = [[v * scale for v in row] for row in mat]
    result = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    term = [row[:] for row in result]
    for k in range(1, 200):
        term = [[v / k for v in row] for row in _matmul(term, a)]
        result = [[result[i][j] + term[i][j] for j in range(n)] for i in range(n)]
        if max(abs(v) for row in term for v in row) < tol:
            break
    for _ in range(s):
        result = _matmul(result, result)
    return result


def ctmc_marginal(rates, i0: int, t: float) -> list[float]:
    """Row ``i0`` (1-based) of ``exp(t Gamma)``: the law of ``r(t)`` given ``r(0) = i0``."""
    if t < 0:
        raise ValueError("t must be non-negative")
    scaled = [[float(v) * t for v in row] for row in rates]
    return expm_series(scaled)[i0 - 1]


def exp_series(x: float, tol: float = 1e-17) -> float:
    """``e**x`` by summing the Taylor series of ``e**(x / 2**s)`` and squaring."""
    s = 0
    while abs(x) > 0.5:
        x /= 2.0
        s += 1
    total, term, k = 1.0, 1.0, 0
    while abs(term) > tol:
        k += 1
        term *= x / k
        total += term
    for _ in range(s):
        total *= total
    return total


def scalar_bisection_solve(fun, lo: float, hi: float, tol: float = 1e-14, max_iter: int = 400) -> float:
    """Root of an increasing scalar map on ``[lo, hi]`` by bisection."""
    flo, fhi = fun(lo), fun(hi)
    if flo * fhi > 0:
        raise BracketInvalid(f"map has the same sign at {lo} and {hi}")
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = fun(mid)
        if fm == 0 or hi - lo <= tol:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sec5_one_step_map(x: float, y_next: float, i_next: int, theta_delta: float, rhs_plus_d: float) -> float:
    """``x - theta_delta f(x, y, i) - c`` for the scalar sine/quintic example, written out by hand."""
    fx = -(6.0 * x + x**5 + 0.5 * math.sin(y_next)) * i_next
    return x - theta_delta * fx - rhs_plus_d
