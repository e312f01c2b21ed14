"""Exponent estimation and exponential-stability certificates.

Certificates evaluate the hypotheses of the stability results mechanically:
algebraic conditions exactly in double precision, inequalities over the
state space by random sampling (a falsifier, not a proof). Every check
carries a signed margin; positive means satisfied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ctmc import GeneratorMatrix
from .ensemble import MomentCurve, PathwiseSummary
from .errors import DivisionByZeroV, MissingConstants, NonPositiveMoment
from .model import LyapunovCallbacks, ModelSpec, _by_regime, evaluate_LV, sample_box
from .theta_em import SchemeConfig

# 3 + 2 sqrt(2); read at call time so the self-test can mutate it
CERT_CONSTANT = 3.0 + 2.0 * math.sqrt(2.0)
MIN_FIT_POINTS = 10


@dataclass(frozen=True)
class ExponentEstimate:
    slope: float
    std_err: float
    window: tuple[float, float]
    kind: str = "moment"
    p_moment: Optional[float] = None
    n_points: int = 0


def fit_moment_exponent(curve: MomentCurve, window) -> ExponentEstimate:
    """Least-squares slope of ``log E|X(t)|^p`` against ``t`` over ``window``."""
    t0, t1 = window
    eps = 1e-9 * (curve.times[1] - curve.times[0] if curve.times.size > 1 else 1.0)
    sel = (curve.times >= t0 - eps) & (curve.times <= t1 + eps)
    t = curve.times[sel]
    v = curve.values[sel]
    if t.size < MIN_FIT_POINTS:
        raise ValueError(f"window {window} holds {t.size} grid points; need at least {MIN_FIT_POINTS}")
    if np.any(~(v > 0)):
        raise NonPositiveMoment(
            "moment estimate is zero or negative inside the window; shorten the horizon or add paths"
        )
    y = np.log(v)
    tm = t.mean()
    dt = t - tm
    sxx = float(np.dot(dt, dt))
    slope = float(np.dot(dt, y - y.mean()) / sxx)
    resid = y - y.mean() - slope * dt
    n = t.size
    se = math.sqrt(float(np.dot(resid, resid)) / (n - 2) / sxx) if n > 2 else 0.0
    return ExponentEstimate(slope, se, (float(t0), float(t1)), "moment", curve.p_moment, n)


def pathwise_estimate(summary: PathwiseSummary) -> ExponentEstimate:
    """Mean pathwise exponent with its Monte Carlo standard error."""
    e = summary.exponents
    se = float(np.std(e, ddof=1) / math.sqrt(e.size)) if e.size > 1 else 0.0
    return ExponentEstimate(float(np.mean(e)), se, summary.window, "pathwise", None, e.size)


# ---------------------------------------------------------------- certificates


@dataclass(frozen=True)
class Check:
    name: str
    margin: float
    passed: bool


@dataclass
class StabilityCertificate:
    """Outcome of :func:`certify_scheme`; ``verdict`` is the conjunction of checks."""

    beta: float
    C1: float
    C2: float
    threshold: float
    theta: float
    L_theta_delta: float
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_text(self) -> str:
        lines = [
            f"beta = {self.beta!r}",
            f"C1 = {self.C1!r}",
            f"C2 = {self.C2!r}",
            f"threshold = {self.threshold!r}",
            f"theta = {self.theta!r}",
            f"L_theta_delta = {self.L_theta_delta!r}",
        ]
        lines += [f"check.{c.name} = {'pass' if c.passed else 'fail'} (margin {c.margin!r})" for c in self.checks]
        lines.append(f"verdict = {self.verdict}")
        return "\n".join(lines)

    def to_rows(self) -> list[tuple[str, float, bool]]:
        return [(c.name, c.margin, c.passed) for c in self.checks]


def dissipativity_threshold(beta: float, C2: float) -> float:
    """Smallest admissible ``C1``: ``K C2 / (1 - K beta^2)`` with ``K = 3 + 2 sqrt 2``.

    Infinite once ``beta^2 >= 1/K``.
    """
    k = CERT_CONSTANT
    denom = 1.0 - k * beta * beta
    if denom <= 0:
        return math.inf
    return k / denom * C2


def certify_scheme(model: ModelSpec, cfg: SchemeConfig, C1: Optional[float] = None, C2: Optional[float] = None) -> StabilityCertificate:
    """Check the mean-square / almost-sure stability hypotheses for the scheme.

    Checks: ``beta^2 < 1/(3 + 2 sqrt 2)``; ``C1`` above the threshold;
    ``1/2 < theta <= 1``; ``L theta delta < 1``.
    """
    if C1 is None or C2 is None:
        if model.dissipativity is None:
            raise MissingConstants("model declares no dissipativity constants (C1, C2)")
        C1 = model.dissipativity[0] if C1 is None else C1
        C2 = model.dissipativity[1] if C2 is None else C2
    beta = model.beta
    thr = dissipativity_threshold(beta, C2)
    ltd = model.one_sided_L * cfg.theta * cfg.delta
    contraction = 1.0 / CERT_CONSTANT - beta * beta
    checks = [
        Check("contraction", contraction, contraction > 0),
        Check("dissipativity", C1 - thr, C1 > thr),
        Check("theta_range", cfg.theta - 0.5, 0.5 < cfg.theta <= 1.0),
        Check("well_posedness", 1.0 - ltd, ltd < 1.0),
    ]
    return StabilityCertificate(beta, float(C1), float(C2), thr, cfg.theta, ltd, checks)


@dataclass
class SampledCertificate:
    """Algebraic gates plus the worst sampled margin of an inequality."""

    gates: list[Check]
    sampled: Check
    worst_point: Optional[tuple] = None
    n_samples: int = 0

    @property
    def checks(self) -> list[Check]:
        return [*self.gates, self.sampled]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"

    def to_text(self) -> str:
        lines = [f"check.{c.name} = {'pass' if c.passed else 'fail'} (margin {c.margin!r})" for c in self.checks]
        if self.worst_point is not None:
            x, y, i = self.worst_point
            lines.append(f"worst_point = x={np.asarray(x).tolist()!r} y={np.asarray(y).tolist()!r} i={i}")
        lines.append(f"verdict = {self.verdict}")
        return "\n".join(lines)


def certify_exact_quadratic(
    model: ModelSpec,
    gen: GeneratorMatrix,
    lam: float,
    alpha1: float,
    alpha2: float,
    box,
    n_samples: int,
    rng,
    t: float = 0.0,
) -> SampledCertificate:
    """Moment-stability hypotheses with ``V = U = |x|^2`` and zero envelopes.

    Gates ``alpha1 >= alpha2 e^{lam tau}`` and ``beta e^{lam tau} < 1`` are
    exact; ``LV <= -lam |x - D(y,i)|^2 - alpha1 |x|^2 + alpha2 |y|^2`` is
    sampled. The generator sum vanishes for regime-independent ``V``.
    """
    if not (lam > 0 and alpha1 > 0 and alpha2 > 0):
        raise ValueError("lam, alpha1, alpha2 must be positive")
    grow = math.exp(lam * model.tau)
    gates = [
        Check("alpha_gate", alpha1 - alpha2 * grow, alpha1 >= alpha2 * grow),
        Check("neutral_gate", 1.0 - model.beta * grow, model.beta * grow < 1.0),
    ]
    d = model.dim_x
    x = sample_box(box, d, n_samples, rng)
    y = sample_box(box, d, n_samples, rng)
    i = rng.integers(1, gen.n_states + 1, size=n_samples)
    z = x - _by_regime(model, model.D, i, y)
    fv = _by_regime(model, lambda a, b, r: model.f(a, b, t, r), i, x, y)
    gv = _by_regime(model, lambda a, b, r: model.g(a, b, t, r), i, x, y)
    lv = 2.0 * np.sum(z * fv, axis=1) + np.sum(gv * gv, axis=(1, 2))
    rhs = -lam * np.sum(z * z, axis=1) - alpha1 * np.sum(x * x, axis=1) + alpha2 * np.sum(y * y, axis=1)
    margin = rhs - lv
    k = int(np.argmin(margin))
    sampled = Check("lv_inequality", float(margin[k]), bool(margin[k] >= 0))
    return SampledCertificate(gates, sampled, (x[k], y[k], int(i[k])), n_samples)


@dataclass
class ConstantEstimate:
    """Sampled extremum of a ratio plus points where it was undefined."""

    value: float
    worst_point: Optional[tuple]
    n_samples: int
    n_undefined: int = 0


def check_as_condition_c3(model: ModelSpec, gen: GeneratorMatrix, lyap: LyapunovCallbacks, box, n_samples: int, rng, t: float = 0.0, strict: bool = False) -> ConstantEstimate:
    """Smallest ``alpha`` consistent with the sample in

        |g^T V_x(z)|^2 + sum_{j != i} gamma_ij |V(z, j) - V(z, i)|^2 <= alpha V(z, i)^2,

    ``z = x - D(y, i)``. Points with ``V = 0`` but a nonzero left side are
    counted in ``n_undefined`` (raised as :class:`DivisionByZeroV` if ``strict``).
    """
    d = model.dim_x
    xs = sample_box(box, d, n_samples, rng)
    ys = sample_box(box, d, n_samples, rng)
    regs = rng.integers(1, gen.n_states + 1, size=n_samples)
    best = 0.0
    where = None
    undefined = 0
    for x, y, i in zip(xs, ys, regs):
        i = int(i)
        z = x - model.D(y, i)
        vi = float(lyap.V(z, t, i))
        gv = model.g(x, y, t, i)
        grad = np.asarray(lyap.V_x(z, t, i), dtype=float)
        num = float(np.sum((gv.T @ grad) ** 2))
        row = gen.rates[i - 1]
        for j in range(gen.n_states):
            if j != i - 1 and row[j] != 0.0:
                num += row[j] * (float(lyap.V(z, t, j + 1)) - vi) ** 2
        if vi == 0.0:
            if num != 0.0:
                if strict:
                    raise DivisionByZeroV(f"V(z)=0 with nonzero numerator at x={x}, y={y}, i={i}")
                undefined += 1
            continue
        ratio = num / (vi * vi)
        if ratio > best or where is None:
            best = max(best, ratio)
            where = (x, y, i)
    return ConstantEstimate(best, where, n_samples, undefined)


def check_moment_bounds(lyap: LyapunovCallbacks, dim: int, p: float, n_regimes: int, box, n_samples: int, rng, t: float = 0.0) -> tuple[float, float]:
    """Sampled ``(min, max)`` of ``V(x, t, i) / |x|^p``: candidates for ``c1`` and ``c2``."""
    xs = sample_box(box, dim, n_samples, rng)
    regs = rng.integers(1, n_regimes + 1, size=n_samples)
    ratios = []
    for x, i in zip(xs, regs):
        n = float(np.linalg.norm(x))
        if n > 0:
            ratios.append(float(lyap.V(x, t, int(i))) / n**p)
    return min(ratios), max(ratios)


def estimate_growth_constant(model: ModelSpec, gen: GeneratorMatrix, lyap: LyapunovCallbacks, box, n_samples: int, rng, t: float = 0.0) -> ConstantEstimate:
    """Smallest ``C0`` with ``LV <= C0 V(x - D(y,i))`` on the sample (zero envelopes)."""
    d = model.dim_x
    xs = sample_box(box, d, n_samples, rng)
    ys = sample_box(box, d, n_samples, rng)
    regs = rng.integers(1, gen.n_states + 1, size=n_samples)
    best = -math.inf
    where = None
    undefined = 0
    for x, y, i in zip(xs, ys, regs):
        i = int(i)
        z = x - model.D(y, i)
        v = float(lyap.V(z, t, i))
        lv = evaluate_LV(model, gen, lyap, x, y, t, i)
        if v == 0.0:
            undefined += lv > 0
            continue
        if lv / v > best:
            best = lv / v
            where = (x, y, i)
    return ConstantEstimate(best, where, n_samples, undefined)
