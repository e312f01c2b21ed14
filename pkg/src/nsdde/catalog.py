"""Componentwise coefficient catalog.

A catalog model writes each of ``D``, ``f`` and ``g`` as a sum of terms

    coef[i] * phi_a(x) * phi_b(y)

applied to every state component, with regime-dependent coefficients and a
small library of scalar factors. Diffusion is diagonal (one Brownian motion
per component). The same tables drive the compiled stepping kernel.

Term syntax (terms separated by ``;``)::

    [-6, -12]*x; [-1, -2]*x^5; -0.5*sin(y)

A coefficient is a number, a fraction ``a/b`` or a bracketed per-regime list.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigError, ModelError

ONE, LINEAR, SIN, CUBIC, QUINTIC, RATIONAL = range(6)

FACTOR_NAMES = {ONE: "1", LINEAR: "{}", SIN: "sin({})", CUBIC: "{}^3", QUINTIC: "{}^5", RATIONAL: "rat({})"}
# global Lipschitz constant of each factor, used to derive a sound beta for D
FACTOR_LIPSCHITZ = {ONE: 0.0, LINEAR: 1.0, SIN: 1.0, CUBIC: math.inf, QUINTIC: math.inf, RATIONAL: 1.0}

_FACTOR_RE = re.compile(r"^(?:(x|y)|sin\((x|y)\)|(x|y)\^([35])|rat\((x|y)\))$")


def phi(kind: int, u):
    if kind == ONE:
        return np.ones_like(u)
    if kind == LINEAR:
        return u
    if kind == SIN:
        return np.sin(u)
    if kind == CUBIC:
        return u * u * u
    if kind == QUINTIC:
        u2 = u * u
        return u2 * u2 * u
    if kind == RATIONAL:
        return u / (1.0 + u * u)
    raise ValueError(f"unknown factor kind {kind}")


def dphi(kind: int, u):
    if kind == ONE:
        return np.zeros_like(u)
    if kind == LINEAR:
        return np.ones_like(u)
    if kind == SIN:
        return np.cos(u)
    if kind == CUBIC:
        return 3.0 * u * u
    if kind == QUINTIC:
        u2 = u * u
        return 5.0 * u2 * u2
    if kind == RATIONAL:
        w = 1.0 + u * u
        return (1.0 - u * u) / (w * w)
    raise ValueError(f"unknown factor kind {kind}")


@dataclass(frozen=True)
class TermTable:
    """Sum of catalog terms; ``coef`` has shape ``(n_terms, n_regimes)``."""

    kind_x: np.ndarray
    kind_y: np.ndarray
    coef: np.ndarray

    @classmethod
    def empty(cls, n_regimes: int) -> "TermTable":
        return cls(np.zeros(0, np.int32), np.zeros(0, np.int32), np.zeros((0, n_regimes)))

    @classmethod
    def from_terms(cls, terms, n_regimes: int) -> "TermTable":
        """Build from ``(coef, kind_x, kind_y)`` triples; scalar coefs broadcast."""
        if not terms:
            return cls.empty(n_regimes)
        kx, ky, rows = [], [], []
        for c, a, b in terms:
            c = np.broadcast_to(np.asarray(c, dtype=float), (n_regimes,))
            kx.append(a)
            ky.append(b)
            rows.append(c)
        return cls(np.array(kx, np.int32), np.array(ky, np.int32), np.array(rows, dtype=float))

    @property
    def n_terms(self) -> int:
        return self.kind_x.size

    def value(self, x, y, i: int):
        out = np.zeros(np.broadcast(x, y).shape)
        for t in range(self.n_terms):
            out = out + self.coef[t, i - 1] * phi(self.kind_x[t], x) * phi(self.kind_y[t], y)
        return out

    def dvalue_dx(self, x, y, i: int):
        out = np.zeros(np.broadcast(x, y).shape)
        for t in range(self.n_terms):
            out = out + self.coef[t, i - 1] * dphi(self.kind_x[t], x) * phi(self.kind_y[t], y)
        return out

    def lipschitz_in_y(self) -> float:
        """Bound on ``|D(y1,i) - D(y2,i)| / |y1 - y2|`` for a y-only table."""
        if self.n_terms == 0:
            return 0.0
        lips = np.array([FACTOR_LIPSCHITZ[int(k)] for k in self.kind_y])
        with np.errstate(invalid="ignore"):
            per_regime = np.where(self.coef == 0, 0.0, np.abs(self.coef) * lips[:, None]).sum(axis=0)
        return float(per_regime.max())

    def format(self) -> str:
        parts = []
        for t in range(self.n_terms):
            c = self.coef[t]
            cs = repr(float(c[0])) if np.all(c == c[0]) else "[" + ", ".join(repr(float(v)) for v in c) + "]"
            fac = [FACTOR_NAMES[int(k)].format(v) for k, v in ((self.kind_x[t], "x"), (self.kind_y[t], "y")) if k != ONE]
            parts.append("*".join([cs, *fac]))
        return "; ".join(parts)


def _parse_number(tok: str) -> float:
    tok = tok.strip()
    try:
        return float(Fraction(tok))
    except (ValueError, ZeroDivisionError):
        try:
            return float(tok)
        except ValueError:
            raise ConfigError(f"cannot parse coefficient {tok!r}") from None


def _parse_factor(tok: str):
    m = _FACTOR_RE.match(tok.strip())
    if not m:
        raise ConfigError(f"unknown factor {tok!r}; expected x, y, sin(.), .^3, .^5 or rat(.)")
    lin, sin_arg, pow_arg, power, rat_arg = m.groups()
    if lin:
        return lin, LINEAR
    if sin_arg:
        return sin_arg, SIN
    if pow_arg:
        return pow_arg, CUBIC if power == "3" else QUINTIC
    return rat_arg, RATIONAL


def parse_terms(text: str, n_regimes: int) -> TermTable:
    text = text.strip()
    if not text or text == "0":
        return TermTable.empty(n_regimes)
    terms = []
    for raw in text.split(";"):
        raw = raw.strip()
        if not raw:
            continue
        m = re.match(r"^(\[[^\]]*\]|[^*]+)\s*(?:\*(.*))?$", raw)
        if not m:
            raise ConfigError(f"cannot parse term {raw!r}")
        coef_tok, rest = m.group(1), m.group(2)
        if coef_tok.startswith("["):
            vals = [_parse_number(v) for v in coef_tok[1:-1].split(",") if v.strip()]
            if len(vals) != n_regimes:
                raise ConfigError(f"term {raw!r} lists {len(vals)} coefficients for {n_regimes} regimes")
            coef = vals
        else:
            coef = _parse_number(coef_tok)
        kinds = {"x": ONE, "y": ONE}
        if rest:
            for fac in rest.split("*"):
                arg, kind = _parse_factor(fac)
                if kinds[arg] != ONE:
                    raise ConfigError(f"term {raw!r} has two factors in {arg}")
                kinds[arg] = kind
        terms.append((coef, kinds["x"], kinds["y"]))
    return TermTable.from_terms(terms, n_regimes)


@dataclass(frozen=True)
class CatalogCoefficients:
    neutral: TermTable
    drift: TermTable
    diffusion: TermTable

    def __post_init__(self):
        if np.any(self.neutral.kind_x != ONE):
            raise ModelError("the neutral term may depend on the delayed state only")

    @property
    def n_regimes(self) -> int:
        return self.drift.coef.shape[1]
