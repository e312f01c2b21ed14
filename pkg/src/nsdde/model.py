"""Neutral SDDE models with Markov switching.

A model is the triple ``(D, f, g)`` of the equation

    d[X(t) - D(X(t - tau), r(t))] = f(X(t), X(t - tau), t, r(t)) dt
                                    + g(X(t), X(t - tau), t, r(t)) dB(t)

together with the constants it declares (contraction ``beta``, one-sided
Lipschitz ``L`` and optionally the dissipativity pair ``(C1, C2)``).

Coefficient callables take ``(y, i)`` for ``D`` and ``(x, y, t, i)`` for
``f``/``g``/``jac_x``. Models marked ``vectorized`` accept stacked arrays
with the state on the last axis, which the sampling checks exploit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import catalog as cat
from .ctmc import GeneratorMatrix, validate_generator
from .errors import ModelError, NonFiniteEvaluation

Array = np.ndarray

_SPOT_TIMES = (0.0, 1.0, 10.0)


@dataclass(frozen=True)
class ModelSpec:
    dim_x: int
    dim_w: int
    tau: float
    D: Callable
    f: Callable
    g: Callable
    beta: float
    one_sided_L: float
    n_regimes: int = 1
    dissipativity: Optional[tuple[float, float]] = None
    jac_x: Optional[Callable] = None
    vectorized: bool = False
    coefficients: Optional[cat.CatalogCoefficients] = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim_x < 1 or self.dim_w < 1:
            raise ModelError("state and noise dimensions must be positive")
        if not self.tau > 0:
            raise ModelError("delay tau must be positive")
        if not 0 <= self.beta < 1:
            raise ModelError(f"declared beta={self.beta} must lie in [0, 1)")
        if not self.one_sided_L > 0:
            raise ModelError("one-sided Lipschitz constant L must be positive")
        if self.dissipativity is not None:
            c1, c2 = self.dissipativity
            if not c1 > c2 > 0:
                raise ModelError(f"dissipativity constants need C1 > C2 > 0, got ({c1}, {c2})")
        zero = np.zeros(self.dim_x)
        for i in range(1, self.n_regimes + 1):
            if np.any(np.asarray(self.D(zero, i)) != 0):
                raise ModelError(f"D(0, {i}) != 0: zero is not a solution")
            for t in _SPOT_TIMES:
                if np.any(np.asarray(self.f(zero, zero, t, i)) != 0):
                    raise ModelError(f"f(0, 0, {t}, {i}) != 0: zero is not a solution")
                gv = np.asarray(self.g(zero, zero, t, i))
                if gv.shape != (self.dim_x, self.dim_w):
                    raise ModelError(f"g returned shape {gv.shape}, expected {(self.dim_x, self.dim_w)}")
                if np.any(gv != 0):
                    raise ModelError(f"g(0, 0, {t}, {i}) != 0: zero is not a solution")

    def F(self, x, y, t, i, theta_delta):
        """Implicit transform ``x - D(y, i) - theta*delta*f(x, y, t, i)``."""
        return x - self.D(y, i) - theta_delta * self.f(x, y, t, i)


@dataclass(frozen=True)
class InitialSegment:
    """Initial data on ``[-tau, 0]``: a callable or values on the step grid.

    ``values`` rows are ordered ``j = -m, ..., 0``.
    """

    func: Optional[Callable] = None
    values: Optional[Array] = None

    @classmethod
    def constant(cls, value, dim: int = 1) -> "InitialSegment":
        v = np.broadcast_to(np.asarray(value, dtype=float), (dim,)).copy()
        return cls(func=lambda s: v)

    def grid_values(self, delta: float, m: int, dim: int) -> Array:
        if self.values is not None:
            out = np.asarray(self.values, dtype=float).reshape(m + 1, dim)
        else:
            out = np.array([np.broadcast_to(self.func(j * delta), (dim,)) for j in range(-m, 1)], dtype=float)
        if not np.all(np.isfinite(out)):
            raise ModelError("initial segment must be finite")
        return out


@dataclass(frozen=True)
class LyapunovCallbacks:
    V: Callable
    V_t: Callable
    V_x: Callable
    V_xx: Callable


def quadratic_lyapunov(weights=None) -> LyapunovCallbacks:
    """``V(z, t, i) = w_i |z|^2`` (``w_i = 1`` when ``weights`` is None)."""

    def w(i):
        return 1.0 if weights is None else float(weights[i - 1])

    return LyapunovCallbacks(
        V=lambda z, t, i: w(i) * float(np.dot(z, z)),
        V_t=lambda z, t, i: 0.0,
        V_x=lambda z, t, i: 2.0 * w(i) * np.asarray(z, dtype=float),
        V_xx=lambda z, t, i: 2.0 * w(i) * np.eye(len(z)),
    )


def evaluate_LV(model: ModelSpec, gen: GeneratorMatrix, lyap: LyapunovCallbacks, x, y, t, i) -> float:
    """Diffusion operator applied to ``V`` at ``(x, y, t, i)``.

    ``V``, ``V_t``, ``V_x`` and ``V_xx`` are evaluated at ``z = x - D(y, i)``
    in regime ``i``; the generator row of ``i`` couples ``V`` across regimes.
    """
    if not 1 <= i <= gen.n_states:
        raise ValueError(f"regime {i} outside 1..{gen.n_states}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = x - model.D(y, i)
    fv = model.f(x, y, t, i)
    gv = model.g(x, y, t, i)
    hess = np.asarray(lyap.V_xx(z, t, i), dtype=float)
    out = (
        float(lyap.V_t(z, t, i))
        + float(np.dot(lyap.V_x(z, t, i), fv))
        + 0.5 * float(np.trace(gv.T @ hess @ gv))
    )
    row = gen.rates[i - 1]
    for j in range(gen.n_states):
        if row[j] != 0.0:
            out += row[j] * float(lyap.V(z, t, j + 1))
    if not math.isfinite(out):
        raise NonFiniteEvaluation(f"LV not finite at x={x}, y={y}, t={t}, i={i}")
    return out


def quadratic_LV(model: ModelSpec, x, y, t, i) -> float:
    """Closed form for ``V = |x|^2``: ``2<x - D(y,i), f> + ||g||_HS^2``."""
    z = np.asarray(x, dtype=float) - model.D(np.asarray(y, dtype=float), i)
    g = model.g(x, y, t, i)
    return 2.0 * float(np.dot(z, model.f(x, y, t, i))) + float(np.sum(g * g))


# ---------------------------------------------------------------- catalog models


def catalog_model(
    coefficients: cat.CatalogCoefficients,
    dim: int = 1,
    tau: float = 1.0,
    *,
    beta: Optional[float] = None,
    one_sided_L: float = 1.0,
    dissipativity=None,
    name: str = "catalog",
    params: Optional[dict] = None,
) -> ModelSpec:
    """Componentwise model from term tables, with diagonal noise (``m = d``).

    ``beta`` defaults to the Lipschitz bound implied by the neutral terms.
    """
    nt, dr, df = coefficients.neutral, coefficients.drift, coefficients.diffusion
    derived = nt.lipschitz_in_y()
    if beta is None:
        if not math.isfinite(derived):
            raise ModelError("neutral term is not globally Lipschitz; declare beta explicitly")
        beta = derived

    def D(y, i):
        y = np.asarray(y, dtype=float)
        return nt.value(np.zeros_like(y), y, i)

    def f(x, y, t, i):
        return dr.value(np.asarray(x, dtype=float), np.asarray(y, dtype=float), i)

    def g(x, y, t, i):
        v = df.value(np.asarray(x, dtype=float), np.asarray(y, dtype=float), i)
        return v[..., :, None] * np.eye(v.shape[-1])

    def jac_x(x, y, t, i):
        v = dr.dvalue_dx(np.asarray(x, dtype=float), np.asarray(y, dtype=float), i)
        return v[..., :, None] * np.eye(v.shape[-1])

    return ModelSpec(
        dim_x=dim,
        dim_w=dim,
        tau=tau,
        D=D,
        f=f,
        g=g,
        beta=float(beta),
        one_sided_L=one_sided_L,
        n_regimes=coefficients.n_regimes,
        dissipativity=dissipativity,
        jac_x=jac_x,
        vectorized=True,
        coefficients=coefficients,
        name=name,
        params=dict(params or {}),
    )


def builtin_example_sec5(tau: float = 1.0) -> tuple[ModelSpec, GeneratorMatrix]:
    """Scalar two-regime example with sine neutral term and quintic drift.

    ``D(y,i) = sin(y)/(6i)``, ``f = -(6x + x^5 + sin(y)/2) i``,
    ``g = 2 x^3 y / ((1 + y^2) i)``; returned with a symmetric unit-rate
    generator as template.

    The drift has ``df/dx = -(6 + 5x^4) i < 0``, so any ``L > 0`` satisfies
    the one-sided Lipschitz condition; ``L = 1`` is declared.
    """
    coeffs = cat.CatalogCoefficients(
        neutral=cat.TermTable.from_terms([([1 / 6, 1 / 12], cat.ONE, cat.SIN)], 2),
        drift=cat.TermTable.from_terms(
            [
                ([-6.0, -12.0], cat.LINEAR, cat.ONE),
                ([-1.0, -2.0], cat.QUINTIC, cat.ONE),
                ([-0.5, -1.0], cat.ONE, cat.SIN),
            ],
            2,
        ),
        diffusion=cat.TermTable.from_terms([([2.0, 1.0], cat.CUBIC, cat.RATIONAL)], 2),
    )
    model = catalog_model(
        coeffs, 1, tau, beta=1 / 6, one_sided_L=1.0, dissipativity=(10.0, 25 / 72), name="sec5"
    )
    return model, validate_generator([[-1.0, 1.0], [1.0, -1.0]])


def linear_test_model(a: float, sigma: float = 0.0, tau: float = 1.0, n_regimes: int = 1) -> ModelSpec:
    """Scalar ``dX = -a X dt + sigma X dB`` with no neutral term."""
    terms = [(-a, cat.LINEAR, cat.ONE)] if a != 0 else []
    coeffs = cat.CatalogCoefficients(
        neutral=cat.TermTable.empty(n_regimes),
        drift=cat.TermTable.from_terms(terms, n_regimes),
        diffusion=cat.TermTable.from_terms([(sigma, cat.LINEAR, cat.ONE)] if sigma else [], n_regimes),
    )
    return catalog_model(
        coeffs, 1, tau, one_sided_L=max(1.0, -a), name="linear", params={"a": a, "sigma": sigma}
    )


def trivial_model(dim: int = 1, tau: float = 1.0, n_regimes: int = 1) -> ModelSpec:
    """``D = f = g = 0``; every path stays at its initial value."""
    coeffs = cat.CatalogCoefficients(
        cat.TermTable.empty(n_regimes), cat.TermTable.empty(n_regimes), cat.TermTable.empty(n_regimes)
    )
    return catalog_model(coeffs, dim, tau, name="trivial")


def linear_neutral(kappas) -> Callable:
    """``D(y, i) = kappa_i * y``; Lipschitz with constant ``max |kappa_i|``."""
    k = np.asarray(kappas, dtype=float)
    return lambda y, i: k[i - 1] * np.asarray(y, dtype=float)


def builtin_remark42(
    r_exponent: float,
    D: Optional[Callable] = None,
    beta: float = 0.0,
    *,
    n_regimes: int = 1,
    tau: float = 1.0,
    one_sided_L: float = 1.0,
) -> ModelSpec:
    """Two-dimensional model whose diffusion rotates ``z = x - D(y, i)``.

    ``g = |z|^r (-z_2, z_1)^T`` and ``f = -|z|^{2r} z - z``; ``g`` grows
    faster than linearly. ``D`` must be a contraction with constant
    ``beta``, which the caller declares.
    """
    if not r_exponent > 0:
        raise ModelError("r_exponent must be positive")
    if D is None:
        D = lambda y, i: np.zeros_like(np.asarray(y, dtype=float))  # noqa: E731
    r = float(r_exponent)

    def _z(x, y, i):
        return np.asarray(x, dtype=float) - D(np.asarray(y, dtype=float), i)

    def f(x, y, t, i):
        z = _z(x, y, i)
        n2 = np.sum(z * z, axis=-1, keepdims=True)
        return -(n2**r) * z - z

    def g(x, y, t, i):
        z = _z(x, y, i)
        n = np.sqrt(np.sum(z * z, axis=-1, keepdims=True))
        rot = np.stack([-z[..., 1], z[..., 0]], axis=-1)
        return ((n**r) * rot)[..., None]

    def jac_x(x, y, t, i):
        z = _z(x, y, i)
        n2 = float(np.dot(z, z))
        eye = np.eye(2)
        if n2 == 0.0:
            return -eye
        return -(n2**r) * eye - 2 * r * n2 ** (r - 1) * np.outer(z, z) - eye

    return ModelSpec(
        dim_x=2,
        dim_w=1,
        tau=tau,
        D=D,
        f=f,
        g=g,
        beta=beta,
        one_sided_L=one_sided_L,
        n_regimes=n_regimes,
        jac_x=jac_x,
        vectorized=True,
        name="remark42",
        params={"r_exponent": r},
    )


def remark42_closed_form_LV(model: ModelSpec, x, y, i) -> float:
    """``-|z|^{2r+2} - 2|z|^2`` for the rotation model with ``V = |x|^2``."""
    z = np.asarray(x, dtype=float) - model.D(np.asarray(y, dtype=float), i)
    n2 = float(np.dot(z, z))
    r = model.params["r_exponent"]
    return -(n2 ** (r + 1)) - 2.0 * n2


# ------------------------------------------------------------- sampling checks


def sample_box(box, dim: int, n: int, rng) -> Array:
    """Uniform samples in ``box = (lo, hi)``; bounds may be per-component."""
    lo, hi = box
    lo = np.broadcast_to(np.asarray(lo, dtype=float), (dim,))
    hi = np.broadcast_to(np.asarray(hi, dtype=float), (dim,))
    return lo + (hi - lo) * rng.random((n, dim))


def _by_regime(model: ModelSpec, fn, regimes, *arrays):
    """Evaluate ``fn(*rows, i)`` for each sample, batching by regime."""
    n = regimes.size
    out = None
    for i in range(1, model.n_regimes + 1):
        idx = np.flatnonzero(regimes == i)
        if idx.size == 0:
            continue
        if model.vectorized:
            val = np.asarray(fn(*(a[idx] for a in arrays), i), dtype=float)
        else:
            val = np.array([fn(*(a[k] for a in arrays), i) for k in idx], dtype=float)
        if out is None:
            out = np.empty((n,) + val.shape[1:])
        out[idx] = val
    return out


@dataclass(frozen=True)
class SampleReport:
    """Worst value found by a sampling check and where it occurred."""

    value: float
    x: Array
    y: Array
    regime: int
    n_samples: int

    @property
    def holds(self) -> bool:
        return self.value >= 0


def estimate_beta(model: ModelSpec, box, n_samples: int, rng) -> float:
    """Largest sampled difference quotient of ``D``: a lower bound on ``beta``."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    d = model.dim_x
    a = sample_box(box, d, n_samples, rng)
    b = sample_box(box, d, n_samples, rng)
    i = rng.integers(1, model.n_regimes + 1, size=n_samples)
    da = _by_regime(model, model.D, i, a)
    db = _by_regime(model, model.D, i, b)
    num = np.linalg.norm(da - db, axis=1)
    den = np.linalg.norm(a - b, axis=1)
    ok = den > 0
    if not np.any(ok):
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def check_dissipativity(model: ModelSpec, C1: float, C2: float, box, n_samples: int, rng, t: float = 0.0) -> SampleReport:
    """Worst margin of ``-C1|x|^2 + C2|y|^2 - (2<x - D(y,i), f> + ||g||^2)``."""
    if not C1 > C2 > 0:
        raise ValueError("need C1 > C2 > 0")
    d = model.dim_x
    x = sample_box(box, d, n_samples, rng)
    y = sample_box(box, d, n_samples, rng)
    i = rng.integers(1, model.n_regimes + 1, size=n_samples)
    z = x - _by_regime(model, model.D, i, y)
    fv = _by_regime(model, lambda a, b, r: model.f(a, b, t, r), i, x, y)
    gv = _by_regime(model, lambda a, b, r: model.g(a, b, t, r), i, x, y)
    lhs = 2.0 * np.sum(z * fv, axis=1) + np.sum(gv * gv, axis=(1, 2))
    rhs = -C1 * np.sum(x * x, axis=1) + C2 * np.sum(y * y, axis=1)
    margin = rhs - lhs
    k = int(np.argmin(margin))
    return SampleReport(float(margin[k]), x[k], y[k], int(i[k]), n_samples)


def check_one_sided_lipschitz(model: ModelSpec, box, n_samples: int, rng, t: float = 0.0) -> float:
    """Largest sampled ``<x1 - x2, f(x1,y) - f(x2,y)> / |x1 - x2|^2``."""
    d = model.dim_x
    x1 = sample_box(box, d, n_samples, rng)
    x2 = sample_box(box, d, n_samples, rng)
    y = sample_box(box, d, n_samples, rng)
    i = rng.integers(1, model.n_regimes + 1, size=n_samples)
    f1 = _by_regime(model, lambda a, b, r: model.f(a, b, t, r), i, x1, y)
    f2 = _by_regime(model, lambda a, b, r: model.f(a, b, t, r), i, x2, y)
    dx = x1 - x2
    den = np.sum(dx * dx, axis=1)
    ok = den > 0
    return float(np.max(np.sum(dx * (f1 - f2), axis=1)[ok] / den[ok]))
