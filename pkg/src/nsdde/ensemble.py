"""Monte Carlo ensembles: moment curves and pathwise decay statistics.

Each path ``n`` owns random streams derived from ``(master_seed, n)`` through
``numpy.random.SeedSequence`` spawn keys: one for the regime chain and one
for the Brownian increments (Philox, counter based). Paths are simulated in
fixed-size chunks, possibly on several threads, and always folded into the
accumulators in path-index order, so results do not depend on ``workers``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ctmc import GeneratorMatrix, regime_at_grid, sample_regime_path
from .errors import AllPathsBlewUp
from .model import InitialSegment, ModelSpec
from .theta_em import PathRecord, SchemeConfig, check_well_posed, simulate_path

CHUNK = 64
Z95 = 1.96
ZERO_FLOOR = -1e3


@dataclass(frozen=True)
class EnsembleConfig:
    n_paths: int
    p_moment: float = 2.0
    master_seed: int = 0
    window: Optional[tuple[float, float]] = None
    tail_width: Optional[float] = None

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if not self.p_moment >= 1:
            raise ValueError("p_moment must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be non-negative")
        if self.window is not None and not self.window[0] < self.window[1]:
            raise ValueError("window must satisfy t0 < T")

    def resolved_window(self, horizon: float) -> tuple[float, float]:
        """Fitting window; defaults to the last 75% of the horizon."""
        if self.window is None:
            return (0.25 * horizon, horizon)
        t0, t1 = self.window
        if t1 > horizon * (1 + 1e-12):
            raise ValueError(f"window end {t1} beyond horizon {horizon}")
        return (t0, t1)


@dataclass
class MomentCurve:
    times: np.ndarray
    values: np.ndarray
    std_err: np.ndarray
    n_paths: int
    n_blowups: int = 0
    p_moment: float = 2.0
    meta: dict = field(default_factory=dict)

    @property
    def ci_low(self) -> np.ndarray:
        return self.values - Z95 * self.std_err

    @property
    def ci_high(self) -> np.ndarray:
        return self.values + Z95 * self.std_err


@dataclass
class EnsembleResult:
    curve: MomentCurve
    paths: list[PathRecord]


def path_streams(master_seed: int, index: int):
    """``(chain_rng, noise_rng)`` for path ``index``."""
    chain_ss, noise_ss = np.random.SeedSequence(master_seed, spawn_key=(index,)).spawn(2)
    return np.random.Generator(np.random.Philox(chain_ss)), np.random.Generator(np.random.Philox(noise_ss))


def simulate_member(model, cfg, gen, i0, init, master_seed, index, backend=None) -> PathRecord:
    chain_rng, noise_rng = path_streams(master_seed, index)
    horizon = max(cfg.horizon, cfg.delta)
    rp = sample_regime_path(gen, i0, horizon, chain_rng)
    regimes = regime_at_grid(rp, cfg.delta, cfg.horizon_steps)
    return simulate_path(model, cfg, init, regimes, noise_rng, backend=backend, keep_increments=False)


def run_ensemble(
    model: ModelSpec,
    cfg: SchemeConfig,
    ens: EnsembleConfig,
    gen: GeneratorMatrix,
    i0: int,
    init: InitialSegment,
    *,
    workers: int = 1,
    backend: Optional[str] = None,
    retain: bool = True,
) -> EnsembleResult:
    """Estimate ``E|X(t)|^p`` on the grid ``t = k delta, k = 0..K``.

    Blown-up paths are dropped from the averages and counted. The standard
    error is the sample standard deviation over ``sqrt(N)``.

    Raises
    ------
    AllPathsBlewUp
        When no path survives to the horizon.
    """
    check_well_posed(model, cfg)
    K, m = cfg.horizon_steps, cfg.m_steps
    half_p = ens.p_moment / 2.0
    mean = np.zeros(K + 1)
    m2 = np.zeros(K + 1)
    n_ok = 0
    n_blow = 0
    kept: list[PathRecord] = []

    def run_chunk(start):
        stop = min(start + CHUNK, ens.n_paths)
        return [simulate_member(model, cfg, gen, i0, init, ens.master_seed, n, backend) for n in range(start, stop)]

    starts = range(0, ens.n_paths, CHUNK)
    with ThreadPoolExecutor(max_workers=max(1, int(workers))) as pool:
        for chunk in pool.map(run_chunk, starts):
            for path in chunk:
                if retain:
                    kept.append(path)
                if path.blew_up:
                    n_blow += 1
                    continue
                x = path.states[m:]
                v = np.sum(x * x, axis=1) ** half_p
                n_ok += 1
                d = v - mean
                mean += d / n_ok
                m2 += d * (v - mean)
    if n_ok == 0:
        raise AllPathsBlewUp(f"all {ens.n_paths} paths exceeded the overflow guard")
    if n_ok > 1:
        se = np.sqrt(np.maximum(m2, 0.0) / (n_ok - 1)) / math.sqrt(n_ok)
    else:
        se = np.zeros(K + 1)
    curve = MomentCurve(
        times=np.arange(K + 1) * cfg.delta,
        values=mean,
        std_err=se,
        n_paths=ens.n_paths,
        n_blowups=n_blow,
        p_moment=ens.p_moment,
        meta={"theta": cfg.theta, "delta": cfg.delta, "seed": ens.master_seed},
    )
    return EnsembleResult(curve, kept)


@dataclass
class PathwiseSummary:
    exponents: np.ndarray
    window: tuple[float, float]
    n_zero: int
    n_excluded: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.exponents))

    @property
    def q95(self) -> float:
        return float(np.quantile(self.exponents, 0.95))


def pathwise_exponents(paths, tail_window) -> PathwiseSummary:
    """Finite-horizon pathwise exponent ``log(sup_{[t0, T]} |X|) / T`` per path.

    Paths that blew up before ``T`` are excluded; a path identically zero on
    the window gets the floor value ``-1e3`` and is counted in ``n_zero``.
    """
    t0, t1 = tail_window
    if not t0 < t1 and not math.isclose(t0, t1):
        raise ValueError("tail window must satisfy t0 <= T")
    if not t1 > 0:
        raise ValueError("tail window must end after t = 0")
    out = []
    n_zero = 0
    n_excl = 0
    for path in paths:
        tol = 1e-9 * path.delta
        if path.blew_up or path.times[-1] < t1 - tol:
            n_excl += 1
            continue
        sel = (path.times >= t0 - tol) & (path.times <= t1 + tol)
        sup = float(np.max(path.norms()[sel]))
        if sup == 0.0:
            n_zero += 1
            out.append(ZERO_FLOOR)
        else:
            out.append(math.log(sup) / t1)
    return PathwiseSummary(np.array(out), (t0, t1), n_zero, n_excl)
