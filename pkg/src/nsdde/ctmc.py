"""Finite-state continuous-time Markov chains driving regime switches.

Regimes are labelled ``1..N`` throughout the package. Generators follow the
zero-row-sum convention ``Gamma[i, i] = -sum_{j != i} Gamma[i, j]``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import HorizonExceeded, NegativeOffDiagonal, NonSquare, RowSumNonzero

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated rate matrix of a chain on ``{1, ..., N}``.

    Construct through :func:`validate_generator`; ``rates`` is a read-only
    array whose diagonal is exactly the negated off-diagonal row sum.
    """

    rates: np.ndarray

    @property
    def n_states(self) -> int:
        return self.rates.shape[0]

    def exit_rate(self, i: int) -> float:
        return -float(self.rates[i - 1, i - 1])

    def jump_probabilities(self, i: int) -> np.ndarray:
        """Embedded jump-chain row for regime ``i`` (zero at ``i``)."""
        row = self.rates[i - 1].copy()
        row[i - 1] = 0.0
        q = row.sum()
        if q == 0.0:
            return row
        return row / q

    def stationary_distribution(self) -> np.ndarray:
        """Solve ``pi Gamma = 0`` with ``sum(pi) = 1`` by least squares."""
        n = self.n_states
        a = np.vstack([self.rates.T, np.ones(n)])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        return pi

    def tolist(self) -> list[list[float]]:
        return self.rates.tolist()


def validate_generator(rates) -> GeneratorMatrix:
    """Check and normalise a rate matrix.

    Raises
    ------
    NonSquare
        If the matrix is not ``N x N`` with ``N >= 1``.
    NegativeOffDiagonal
        If any off-diagonal rate is negative.
    RowSumNonzero
        If a row sum differs from zero by more than ``1e-12``.
    """
    q = np.array(rates, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] < 1:
        raise NonSquare(f"generator must be a non-empty square matrix, got shape {q.shape}")
    if not np.all(np.isfinite(q)):
        raise NonSquare("generator entries must be finite")
    n = q.shape[0]
    off = ~np.eye(n, dtype=bool)
    if np.any(q[off] < 0):
        i, j = np.argwhere((q < 0) & off)[0]
        raise NegativeOffDiagonal(f"rate ({i + 1},{j + 1}) is negative: {q[i, j]}")
    row_sums = q.sum(axis=1)
    bad = np.abs(row_sums) > ROW_SUM_TOL
    if np.any(bad):
        i = int(np.argmax(bad))
        raise RowSumNonzero(f"row {i + 1} sums to {row_sums[i]!r}, expected 0")
    off_sum = np.where(off, q, 0.0).sum(axis=1)
    q[np.diag_indices(n)] = -off_sum
    q.setflags(write=False)
    return GeneratorMatrix(q)


@dataclass(frozen=True)
class RegimePath:
    """Right-continuous piecewise-constant regime trajectory on ``[0, horizon]``.

    ``states[0]`` is the initial regime and ``states[k]`` is occupied on
    ``[jump_times[k-1], jump_times[k])``.
    """

    jump_times: np.ndarray
    states: np.ndarray
    horizon: float

    def at(self, t: float) -> int:
        return int(self.states[np.searchsorted(self.jump_times, t, side="right")])


def sample_regime_path(gen: GeneratorMatrix, i0: int, horizon: float, rng) -> RegimePath:
    """Exact (holding-time) simulation of the chain started in ``i0``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    if not 1 <= i0 <= gen.n_states:
        raise ValueError(f"initial regime {i0} outside 1..{gen.n_states}")
    times: list[float] = []
    states = [i0]
    t = 0.0
    i = i0
    n = gen.n_states
    cum = [np.cumsum(gen.jump_probabilities(j + 1)) for j in range(n)]
    while True:
        q = gen.exit_rate(i)
        if q == 0.0:
            break
        t += rng.exponential(1.0 / q)
        if t > horizon:
            break
        # inverse-CDF draw from the embedded jump chain row
        i = min(int(np.searchsorted(cum[i - 1], rng.random(), side="right")), n - 1) + 1
        times.append(t)
        states.append(i)
    return RegimePath(np.array(times, dtype=float), np.array(states, dtype=np.int64), float(horizon))


def sample_states_at(gen: GeneratorMatrix, i0: int, t: float, n_paths: int, rng) -> np.ndarray:
    """Regime at time ``t`` for ``n_paths`` independent chains, vectorised.

    Same holding-time construction as :func:`sample_regime_path`, advanced
    for all chains at once; used for large law checks.
    """
    n = gen.n_states
    state = np.full(n_paths, i0 - 1, dtype=np.int64)
    clock = np.zeros(n_paths)
    q = -np.diag(gen.rates)
    jump = np.array([gen.jump_probabilities(i + 1) for i in range(n)])
    cum = np.cumsum(jump, axis=1)
    active = q[state] > 0
    while np.any(active):
        idx = np.flatnonzero(active)
        clock[idx] += rng.exponential(1.0, size=idx.size) / q[state[idx]]
        moved = idx[clock[idx] <= t]
        u = rng.random(moved.size)
        nxt = (u[:, None] >= cum[state[moved]]).sum(axis=1)
        state[moved] = np.minimum(nxt, n - 1)
        active[:] = False
        active[moved] = q[state[moved]] > 0
    return state + 1


def regime_at_grid(path: RegimePath, delta: float, n_steps: int) -> np.ndarray:
    """Read ``r(k*delta)`` for ``k = 0..n_steps`` using right-continuity."""
    end = n_steps * delta
    if end > path.horizon * (1 + 1e-12) + 1e-15:
        raise HorizonExceeded(f"grid end {end} beyond path horizon {path.horizon}")
    grid = np.arange(n_steps + 1) * delta
    return path.states[np.searchsorted(path.jump_times, grid, side="right")]
