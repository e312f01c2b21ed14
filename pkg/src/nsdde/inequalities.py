"""Vectorised sweeps over the two elementary inequalities behind the theory.

* neutral power bound: ``|x - D(y,i)|^p <= (1+beta)^(p-1) (|x|^p + beta |y|^p)``
  for any contraction ``D`` with constant ``beta`` and ``p >= 1``;
* weighted binomial bound: ``(a+b)^p <= (1+c)^(p-1) (a^p + c^(1-p) b^p)``
  for ``a, b, c > 0`` and ``p >= 1``.

A sample counts as a violation only if the left side exceeds the right by
more than a relative ``1e-12`` (equality cases are attained).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelSpec, _by_regime, sample_box

REL_SLACK = 1e-12


@dataclass(frozen=True)
class SweepResult:
    n_samples: int
    n_violations: int
    worst_ratio: float  # max of lhs / rhs

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def neutral_power_bound(model: ModelSpec, box, n_samples: int, rng, p_max: float = 6.0) -> SweepResult:
    d = model.dim_x
    x = sample_box(box, d, n_samples, rng)
    y = sample_box(box, d, n_samples, rng)
    i = rng.integers(1, model.n_regimes + 1, size=n_samples)
    p = 1.0 + (p_max - 1.0) * rng.random(n_samples)
    beta = model.beta
    z = x - _by_regime(model, model.D, i, y)
    lhs = np.linalg.norm(z, axis=1) ** p
    rhs = (1.0 + beta) ** (p - 1.0) * (np.linalg.norm(x, axis=1) ** p + beta * np.linalg.norm(y, axis=1) ** p)
    bad = lhs > rhs * (1.0 + REL_SLACK)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return SweepResult(n_samples, int(bad.sum()), float(ratio.max()))


def binomial_power_bound(n_samples: int, rng, p_max: float = 6.0, log10_range: float = 3.0) -> SweepResult:
    a, b, c = 10.0 ** rng.uniform(-log10_range, log10_range, size=(3, n_samples))
    p = 1.0 + (p_max - 1.0) * rng.random(n_samples)
    lhs = (a + b) ** p
    rhs = (1.0 + c) ** (p - 1.0) * (a**p + c ** (1.0 - p) * b**p)
    bad = lhs > rhs * (1.0 + REL_SLACK)
    return SweepResult(n_samples, int(bad.sum()), float(np.max(lhs / rhs)))
