"""Semi-implicit theta Euler-Maruyama scheme for neutral SDDEs with switching.

With ``delta = tau / m`` and ``X_j = xi(j delta)`` for ``j = -m..0`` the
scheme advances

    X_{k+1} - D(X_{k+1-m}, r_{k+1}) = X_k - D(X_{k-m}, r_k)
        + [(1 - theta) f_k + theta f(X_{k+1}, X_{k+1-m}, t_{k+1}, r_{k+1})] delta
        + g_k dB_k

Every step solves ``x - theta*delta*f(x, ...) = rhs + D(...)``, a strongly
monotone equation whenever ``L theta delta < 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .errors import BlowUp, NoConvergence, SchemeError
from .model import InitialSegment, ModelSpec

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 50
DEFAULT_GUARD = 1e12


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme parameters; the step size is always ``tau / m_steps``."""

    theta: float
    m_steps: int
    tau: float
    horizon_steps: int
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    guard: float = DEFAULT_GUARD

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise SchemeError(f"theta={self.theta} must lie in [0, 1]")
        if int(self.m_steps) != self.m_steps or self.m_steps < 1:
            raise SchemeError(f"m_steps={self.m_steps} must be a positive integer")
        if not self.tau > 0:
            raise SchemeError("tau must be positive")
        if self.horizon_steps < 0:
            raise SchemeError("horizon_steps must be non-negative")

    @property
    def delta(self) -> float:
        return self.tau / self.m_steps

    @property
    def horizon(self) -> float:
        return self.horizon_steps * self.delta

    @classmethod
    def for_model(cls, model: ModelSpec, theta: float, m_steps: int, horizon: float, **kw) -> "SchemeConfig":
        """Build a config on the model's delay with ``round(horizon/delta)`` steps."""
        delta = model.tau / m_steps
        cfg = cls(theta, int(m_steps), model.tau, int(round(horizon / delta)), **kw)
        check_well_posed(model, cfg)
        return cfg


def well_posedness_margin(model: ModelSpec, cfg: SchemeConfig) -> float:
    """``1 - L theta delta``; positive means each implicit step is uniquely solvable."""
    return 1.0 - model.one_sided_L * cfg.theta * cfg.delta


def check_well_posed(model: ModelSpec, cfg: SchemeConfig) -> None:
    if abs(cfg.tau - model.tau) > 1e-15 * max(1.0, model.tau):
        raise SchemeError(f"scheme tau={cfg.tau} differs from model tau={model.tau}")
    if cfg.theta > 0 and well_posedness_margin(model, cfg) <= 0:
        raise SchemeError(
            f"L*theta*delta = {model.one_sided_L * cfg.theta * cfg.delta:.6g} >= 1: "
            "implicit step not guaranteed solvable; increase m_steps"
        )


# ------------------------------------------------------------------ solver


def _fd_jacobian(fun, x, y, t, i):
    d = x.size
    jac = np.empty((d, d))
    for c in range(d):
        h = 1e-7 * (1.0 + abs(x[c]))
        xp = x.copy()
        xm = x.copy()
        xp[c] += h
        xm[c] -= h
        jac[:, c] = (fun(xp, y, t, i) - fun(xm, y, t, i)) / (2.0 * h)
    return jac


def implicit_solve(
    model: ModelSpec,
    y_next,
    t_next: float,
    i_next: int,
    rhs,
    theta_delta: float,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    x0=None,
) -> np.ndarray:
    """Solve ``x - theta_delta * f(x, y_next, t_next, i_next) = rhs + D(y_next, i_next)``.

    Damped Newton (analytic Jacobian when the model has one, central
    differences otherwise). When the Jacobian is singular or the line search
    stalls the remaining iterations use the relaxed fixed point
    ``x <- (x + target + theta_delta f(x)) / 2``. At least one correction is
    applied to the initial guess before the residual test.

    Raises
    ------
    SchemeError
        If ``L * theta_delta >= 1``.
    NoConvergence
        If the residual is still above ``tol * (1 + |x|)`` after ``max_iter``.
    """
    if model.one_sided_L * theta_delta >= 1.0:
        raise SchemeError("L*theta*delta >= 1: solution not guaranteed unique")
    y_next = np.asarray(y_next, dtype=float)
    target = np.asarray(rhs, dtype=float) + model.D(y_next, i_next)
    x = target.copy() if x0 is None else np.array(x0, dtype=float)
    f = model.f

    def resid(v):
        return v - theta_delta * f(v, y_next, t_next, i_next) - target

    if theta_delta == 0.0:
        return target
    jac_fn = model.jac_x
    eye = np.eye(x.size)
    newton = True
    r = resid(x)
    rn_norm = float(np.linalg.norm(r))
    for it in range(max_iter):
        # at least one correction: tol*(1+|x|) would accept the predictor for tiny x
        if it > 0 and rn_norm <= tol * (1.0 + float(np.linalg.norm(x))):
            return x
        if newton:
            jf = jac_fn(x, y_next, t_next, i_next) if jac_fn is not None else _fd_jacobian(f, x, y_next, t_next, i_next)
            try:
                step = np.linalg.solve(eye - theta_delta * jf, r)
            except np.linalg.LinAlgError:
                step = None
            if step is not None and np.all(np.isfinite(step)):
                lam = 1.0
                while lam >= 1.0 / 1024.0:
                    xn = x - lam * step
                    rn = resid(xn)
                    nn = float(np.linalg.norm(rn))
                    if nn < rn_norm:
                        x, r, rn_norm = xn, rn, nn
                        break
                    lam *= 0.5
                else:
                    newton = False
                if newton:
                    continue
            newton = False
        x = 0.5 * x + 0.5 * (target + theta_delta * f(x, y_next, t_next, i_next))
        r = resid(x)
        rn_norm = float(np.linalg.norm(r))
    if rn_norm <= tol * (1.0 + float(np.linalg.norm(x))):
        return x
    raise NoConvergence(max_iter, rn_norm)


# ------------------------------------------------------------------ stepping


class StepState:
    """Ring buffer of the last ``m + 1`` states plus grid regimes.

    Holds ``X_{k-m}, ..., X_k``; ``regime_now`` is ``r(k delta)`` and
    ``regime_next`` is ``r((k+1) delta)``.
    """

    def __init__(self, initial: np.ndarray, regime_now: int, regime_next: Optional[int] = None):
        initial = np.asarray(initial, dtype=float)
        self.m = initial.shape[0] - 1
        if self.m < 1:
            raise SchemeError("history must hold m + 1 >= 2 states")
        if not np.all(np.isfinite(initial)):
            raise SchemeError("history contains non-finite states")
        self._buf = initial.copy()
        self._head = 0  # slot of X_{k-m}
        self.k = 0
        self.regime_now = int(regime_now)
        self.regime_next = int(regime_now if regime_next is None else regime_next)

    def lag(self, j: int) -> np.ndarray:
        """``X_{k-j}`` for ``0 <= j <= m``."""
        return self._buf[(self._head + self.m - j) % (self.m + 1)]

    @property
    def current(self) -> np.ndarray:
        return self.lag(0)

    def advance(self, x_next, regime_after: int) -> None:
        """Append ``X_{k+1}``, shift regimes, and read ``r((k+2) delta)``."""
        self._buf[self._head] = x_next
        self._head = (self._head + 1) % (self.m + 1)
        self.k += 1
        self.regime_now = self.regime_next
        self.regime_next = int(regime_after)


def step(model: ModelSpec, cfg: SchemeConfig, state: StepState, dB) -> np.ndarray:
    """One theta-scheme step from ``state``; returns ``X_{k+1}``.

    ``dB`` is the Brownian increment over the step, distributed ``N(0, delta I_m)``.
    """
    delta = cfg.delta
    t_k = state.k * delta
    t_next = t_k + delta
    i, i_next = state.regime_now, state.regime_next
    xk = state.current
    x_del = state.lag(state.m)
    y_next = state.lag(state.m - 1)
    fk = model.f(xk, x_del, t_k, i)
    gk = model.g(xk, x_del, t_k, i)
    noise = gk @ np.asarray(dB, dtype=float)
    dk = model.D(x_del, i)
    rhs = xk - dk + (1.0 - cfg.theta) * delta * fk + noise
    if cfg.theta == 0.0:
        x = rhs + model.D(y_next, i_next)
    else:
        guess = xk + fk * delta + noise + model.D(y_next, i_next) - dk
        if not np.all(np.isfinite(guess)):
            guess = None
        x = implicit_solve(
            model, y_next, t_next, i_next, rhs, cfg.theta * delta, cfg.tol, cfg.max_iter, x0=guess
        )
    norm = float(np.linalg.norm(x))
    if not math.isfinite(norm) or norm > cfg.guard:
        raise BlowUp(state.k + 1, norm)
    return x


@dataclass
class PathRecord:
    """Grid trajectory including the initial segment.

    Row ``j`` corresponds to grid index ``j - m`` (time ``(j - m) delta``).
    ``blowup_at`` is the step index at which the guard tripped; rows from
    that index on are absent.
    """

    times: np.ndarray
    states: np.ndarray
    regimes: np.ndarray
    m_steps: int
    delta: float
    blowup_at: Optional[int] = None
    increments: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def blew_up(self) -> bool:
        return self.blowup_at is not None

    @property
    def forward(self) -> slice:
        """Rows with ``t >= 0``."""
        return slice(self.m_steps, None)

    def norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.states * self.states, axis=1))


def _record(X, regimes, cfg, n_rows, blowup_at, increments):
    m = cfg.m_steps
    idx = np.arange(-m, n_rows - m)
    reg = np.concatenate([np.full(m, regimes[0]), regimes[: n_rows - m]]).astype(np.int64)
    return PathRecord(
        times=idx * cfg.delta,
        states=X[:n_rows],
        regimes=reg,
        m_steps=m,
        delta=cfg.delta,
        blowup_at=blowup_at,
        increments=increments,
    )


def simulate_path(
    model: ModelSpec,
    cfg: SchemeConfig,
    init: InitialSegment,
    regimes,
    rng,
    *,
    backend: Optional[str] = None,
    keep_increments: bool = True,
    increments=None,
) -> PathRecord:
    """Simulate one trajectory on ``k = 0..K``.

    Brownian increments are drawn from ``rng`` as one ``(K, m)`` standard
    normal block in step order and scaled by ``sqrt(delta)`` (or taken from
    ``increments`` when given). Catalog models go through the stepping
    kernel unless ``backend="generic"``; any other model uses :func:`step`.
    A guard trip truncates the path instead of raising.
    """
    check_well_posed(model, cfg)
    K, m = cfg.horizon_steps, cfg.m_steps
    regimes = np.asarray(regimes, dtype=np.int64)
    if regimes.size < K + 1:
        raise SchemeError(f"need {K + 1} grid regimes, got {regimes.size}")
    regimes = regimes[: K + 1]
    xi = init.grid_values(cfg.delta, m, model.dim_x)
    if increments is None:
        dB = rng.standard_normal((K, model.dim_w)) * math.sqrt(cfg.delta)
    else:
        dB = np.asarray(increments, dtype=float).reshape(K, model.dim_w)
    kept = dB if keep_increments else None

    if model.coefficients is not None and backend != "generic":
        X, status, k_stop = kernels.simulate_catalog(
            model.coefficients, cfg.theta, cfg.delta, m, xi, regimes, dB, cfg.tol, cfg.max_iter, cfg.guard,
            backend=backend,
        )
        if status == kernels.NO_CONVERGENCE:
            raise NoConvergence(cfg.max_iter)
        if status == kernels.BLOWUP:
            return _record(X, regimes, cfg, m + k_stop, k_stop, kept)
        return _record(X, regimes, cfg, m + 1 + K, None, kept)

    X = np.full((m + 1 + K, model.dim_x), np.nan)
    X[: m + 1] = xi
    state = StepState(xi, regimes[0], regimes[1] if K > 0 else regimes[0])
    for k in range(K):
        try:
            x = step(model, cfg, state, dB[k])
        except BlowUp as exc:
            return _record(X, regimes, cfg, m + exc.step, exc.step, kept)
        X[m + k + 1] = x
        state.advance(x, regimes[k + 2] if k + 2 <= K else regimes[K])
    return _record(X, regimes, cfg, m + 1 + K, None, kept)


def scheme_residuals(model: ModelSpec, cfg: SchemeConfig, path: PathRecord) -> np.ndarray:
    """``|F_{k+1} - F_k - f_k delta - g_k dB_k|`` for every completed step.

    ``F_k = X_k - D(X_{k-m}, r_k) - theta delta f(X_k, X_{k-m}, t_k, r_k)``.
    """
    if path.increments is None:
        raise ValueError("path was recorded without Brownian increments")
    m = cfg.m_steps
    delta = cfg.delta
    h = cfg.theta * delta
    X, reg = path.states, path.regimes
    n_steps = X.shape[0] - m - 1
    out = np.empty(n_steps)

    def F_and_terms(k):
        x, y, t, i = X[m + k], X[k], k * delta, int(reg[m + k])
        fv = model.f(x, y, t, i)
        return x - model.D(y, i) - h * fv, fv, model.g(x, y, t, i)

    Fk, fk, gk = F_and_terms(0)
    for k in range(n_steps):
        Fn, fn, gn = F_and_terms(k + 1)
        out[k] = np.linalg.norm(Fn - Fk - fk * delta - gk @ path.increments[k])
        Fk, fk, gk = Fn, fn, gn
    return out
