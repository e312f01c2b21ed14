"""Run configuration: a sectioned ``key = value`` text file.

Example::

    [model]
    name = sec5

    [scheme]
    tau = 1.0
    m_steps = 100
    theta = 1.0
    horizon = 8.0

    [ensemble]
    n_paths = 2000
    p_moment = 2.0
    seed = 42
    window = [2.0, 8.0]

    [chain]
    generator = [[-1.0, 1.0], [1.0, -1.0]]
    i0 = 1

Arrays are bracketed comma lists. The step size is never a key: it is
``tau / m_steps``. Unknown sections or keys are rejected.
"""

from __future__ import annotations

import ast
import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import catalog as cat
from . import model as mdl
from .ctmc import GeneratorMatrix, validate_generator
from .errors import ConfigError, NSDDEError
from .ensemble import EnsembleConfig
from .model import InitialSegment, ModelSpec
from .theta_em import DEFAULT_TOL, SchemeConfig, check_well_posed

MODEL_NAMES = ("sec5", "remark42", "catalog", "linear", "trivial")

_COMMON_MODEL_KEYS = {"name", "xi", "beta", "one_sided_l", "c1", "c2"}
_MODEL_KEYS = {
    "sec5": set(),
    "remark42": {"r_exponent", "neutral"},
    "catalog": {"dim", "neutral", "drift", "diffusion"},
    "linear": {"a", "sigma"},
    "trivial": {"dim"},
}
_SECTION_KEYS = {
    "scheme": {"tau", "m_steps", "theta", "horizon", "tol"},
    "ensemble": {"n_paths", "p_moment", "seed", "window", "tail_width", "output"},
    "chain": {"generator", "i0"},
    "certify": {"lambda", "alpha1", "alpha2", "box", "n_samples"},
}
_DEFAULTS = {
    "scheme": {"tau": 1.0, "m_steps": 100, "theta": 1.0, "horizon": 8.0},
    "ensemble": {"n_paths": 2000, "p_moment": 2.0, "seed": 0},
    "chain": {"i0": 1},
}


def _literal(section, key, raw):
    try:
        return ast.literal_eval(raw)
    except (ValueError, SyntaxError):
        raise ConfigError(f"{section}.{key}: cannot parse value {raw!r}") from None


def _as_float(section, key, raw) -> float:
    v = _literal(section, key, raw) if isinstance(raw, str) else raw
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{section}.{key}: expected a number, got {raw!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{section}.{key}: must be finite")
    return float(v)


def _as_int(section, key, raw) -> int:
    v = _literal(section, key, raw) if isinstance(raw, str) else raw
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{section}.{key}: expected an integer, got {raw!r}")
    return v


def _as_list(section, key, raw) -> list:
    v = _literal(section, key, raw) if isinstance(raw, str) else raw
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return [float(v)]
    if not isinstance(v, (list, tuple)):
        raise ConfigError(f"{section}.{key}: expected a bracketed list, got {raw!r}")
    return list(v)


def _fmt(v) -> str:
    if isinstance(v, bool):
        raise TypeError("booleans are not config values")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@dataclass
class RunConfig:
    """Normalised content of a config file (see module docstring)."""

    model: dict[str, Any]
    generator: list[list[float]]
    i0: int
    tau: float
    m_steps: int
    theta: float
    horizon: float
    n_paths: int
    p_moment: float
    seed: int
    window: Optional[tuple[float, float]] = None
    tail_width: Optional[float] = None
    tol: float = DEFAULT_TOL
    output_path: Optional[str] = None
    certify: dict[str, Any] = field(default_factory=dict)

    # ------------------------------------------------------------ parsing

    @classmethod
    def from_text(cls, text: str, *, require_well_posed: bool = True) -> "RunConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from None
        sections = set(parser.sections())
        unknown = sections - {"model", *_SECTION_KEYS}
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")
        raw = {s: dict(parser[s]) if s in sections else {} for s in ("model", *_SECTION_KEYS)}
        for s, keys in _SECTION_KEYS.items():
            bad = set(raw[s]) - keys
            if bad:
                raise ConfigError(f"unknown key(s) in [{s}]: {', '.join(sorted(bad))}")

        m = raw["model"]
        name = m.get("name", "sec5").strip()
        if name not in MODEL_NAMES:
            raise ConfigError(f"model.name: unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
        bad = set(m) - _COMMON_MODEL_KEYS - _MODEL_KEYS[name]
        if bad:
            raise ConfigError(f"unknown key(s) in [model] for {name}: {', '.join(sorted(bad))}")
        model: dict[str, Any] = {"name": name}
        for k in ("beta", "one_sided_l", "c1", "c2", "a", "sigma", "r_exponent"):
            if k in m:
                model[k] = _as_float("model", k, m[k])
        if "dim" in m:
            model["dim"] = _as_int("model", "dim", m["dim"])
        if "xi" in m:
            model["xi"] = [_as_float("model", "xi", v) for v in _as_list("model", "xi", m["xi"])]
        if name == "remark42" and "neutral" in m:
            model["neutral"] = [_as_float("model", "neutral", v) for v in _as_list("model", "neutral", m["neutral"])]
        if name == "catalog":
            for k in ("neutral", "drift", "diffusion"):
                model[k] = m.get(k, "0").strip()
        if ("c1" in model) != ("c2" in model):
            raise ConfigError("model.c1 and model.c2 must be given together")

        sch = {**_DEFAULTS["scheme"], **raw["scheme"]}
        ens = {**_DEFAULTS["ensemble"], **raw["ensemble"]}
        ch = {**_DEFAULTS["chain"], **raw["chain"]}
        if "generator" not in ch:
            ch["generator"] = [[-1.0, 1.0], [1.0, -1.0]] if name == "sec5" else [[0.0]]
        gen = ch["generator"]
        gen = _literal("chain", "generator", gen) if isinstance(gen, str) else gen
        try:
            gen = [[float(v) for v in row] for row in gen]
        except (TypeError, ValueError):
            raise ConfigError("chain.generator: expected an array of arrays of numbers") from None

        window = None
        if "window" in ens:
            w = [_as_float("ensemble", "window", v) for v in _as_list("ensemble", "window", ens["window"])]
            if len(w) != 2:
                raise ConfigError("ensemble.window: expected [t0, T]")
            window = (w[0], w[1])

        cert = {}
        for k, v in raw["certify"].items():
            if k == "box":
                b = [_as_float("certify", k, x) for x in _as_list("certify", k, v)]
                if len(b) != 2:
                    raise ConfigError("certify.box: expected [lo, hi]")
                cert[k] = b
            elif k == "n_samples":
                cert[k] = _as_int("certify", k, v)
            else:
                cert[k] = _as_float("certify", k, v)

        cfg = cls(
            model=model,
            generator=gen,
            i0=_as_int("chain", "i0", ch["i0"]),
            tau=_as_float("scheme", "tau", sch["tau"]),
            m_steps=_as_int("scheme", "m_steps", sch["m_steps"]),
            theta=_as_float("scheme", "theta", sch["theta"]),
            horizon=_as_float("scheme", "horizon", sch["horizon"]),
            n_paths=_as_int("ensemble", "n_paths", ens["n_paths"]),
            p_moment=_as_float("ensemble", "p_moment", ens["p_moment"]),
            seed=_as_int("ensemble", "seed", ens["seed"]),
            window=window,
            tail_width=_as_float("ensemble", "tail_width", ens["tail_width"]) if "tail_width" in ens else None,
            tol=_as_float("scheme", "tol", sch["tol"]) if "tol" in sch else DEFAULT_TOL,
            output_path=ens["output"].strip() if "output" in ens else None,
            certify=cert,
        )
        cfg.validate(require_well_posed=require_well_posed)
        return cfg

    @classmethod
    def load(cls, path, **kw) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text, **kw)

    # ---------------------------------------------------------- validation

    def validate(self, *, require_well_posed: bool = True) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError(f"scheme.theta: {self.theta} outside [0, 1]")
        if self.m_steps < 1:
            raise ConfigError(f"scheme.m_steps: {self.m_steps} must be >= 1")
        if not self.tau > 0:
            raise ConfigError("scheme.tau: must be positive")
        if not self.horizon > 0:
            raise ConfigError("scheme.horizon: must be positive")
        if not self.tol > 0:
            raise ConfigError("scheme.tol: must be positive")
        if self.n_paths < 1:
            raise ConfigError("ensemble.n_paths: must be >= 1")
        if not self.p_moment >= 1:
            raise ConfigError("ensemble.p_moment: must be >= 1")
        if self.seed < 0:
            raise ConfigError("ensemble.seed: must be non-negative")
        if self.window is not None:
            t0, t1 = self.window
            if not (0 <= t0 < t1 <= self.horizon * (1 + 1e-12)):
                raise ConfigError(f"ensemble.window: need 0 <= t0 < T <= horizon, got {list(self.window)}")
        if self.tail_width is not None and not self.tail_width > 0:
            raise ConfigError("ensemble.tail_width: must be positive")
        try:
            gen = self.build_generator()
        except NSDDEError as exc:
            raise ConfigError(f"chain.generator: {exc}") from None
        if not 1 <= self.i0 <= gen.n_states:
            raise ConfigError(f"chain.i0: {self.i0} outside 1..{gen.n_states}")
        try:
            model = self.build_model()
        except ConfigError:
            raise
        except NSDDEError as exc:
            raise ConfigError(f"model: {exc}") from None
        if model.n_regimes != gen.n_states:
            raise ConfigError(f"chain.generator: {gen.n_states} regimes but model {model.name} has {model.n_regimes}")
        try:
            self.initial_segment(model).grid_values(self.tau / self.m_steps, self.m_steps, model.dim_x)
        except (NSDDEError, ValueError) as exc:
            raise ConfigError(f"model.xi: {exc}") from None
        if require_well_posed:
            try:
                check_well_posed(model, self.scheme_config(model, check=False))
            except NSDDEError as exc:
                raise ConfigError(f"scheme.m_steps/theta (well-posedness): {exc}") from None

    # ------------------------------------------------------------ builders

    def build_generator(self) -> GeneratorMatrix:
        return validate_generator(self.generator)

    def build_model(self) -> ModelSpec:
        mc = self.model
        name = mc["name"]
        n_reg = len(self.generator)
        overrides = {}
        if "beta" in mc:
            overrides["beta"] = mc["beta"]
        if "one_sided_l" in mc:
            overrides["one_sided_L"] = mc["one_sided_l"]
        if "c1" in mc:
            overrides["dissipativity"] = (mc["c1"], mc["c2"])

        if name == "sec5":
            model, _ = mdl.builtin_example_sec5(self.tau)
        elif name == "linear":
            model = mdl.linear_test_model(mc.get("a", 1.0), mc.get("sigma", 0.0), self.tau, n_reg)
        elif name == "trivial":
            model = mdl.trivial_model(mc.get("dim", 1), self.tau, n_reg)
        elif name == "remark42":
            kap = mc.get("neutral", [0.0])
            if len(kap) == 1:
                kap = kap * n_reg
            if len(kap) != n_reg:
                raise ConfigError(f"model.neutral: {len(kap)} coefficients for {n_reg} regimes")
            beta = max(abs(k) for k in kap)
            model = mdl.builtin_remark42(
                mc.get("r_exponent", 1.0), mdl.linear_neutral(kap), beta, n_regimes=n_reg, tau=self.tau
            )
        else:
            coeffs = cat.CatalogCoefficients(
                cat.parse_terms(mc["neutral"], n_reg),
                cat.parse_terms(mc["drift"], n_reg),
                cat.parse_terms(mc["diffusion"], n_reg),
            )
            model = mdl.catalog_model(coeffs, mc.get("dim", 1), self.tau, one_sided_L=1.0, beta=mc.get("beta"))
        if overrides:
            from dataclasses import replace

            model = replace(model, **overrides)
        return model

    def initial_segment(self, model: ModelSpec) -> InitialSegment:
        xi = self.model.get("xi", [1.0])
        if len(xi) not in (1, model.dim_x):
            raise ConfigError(f"model.xi: {len(xi)} values for state dimension {model.dim_x}")
        return InitialSegment.constant(np.array(xi), model.dim_x)

    def scheme_config(self, model: ModelSpec, check: bool = True) -> SchemeConfig:
        delta = self.tau / self.m_steps
        cfg = SchemeConfig(self.theta, self.m_steps, self.tau, int(round(self.horizon / delta)), tol=self.tol)
        if check:
            check_well_posed(model, cfg)
        return cfg

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(self.n_paths, self.p_moment, self.seed, self.window, self.tail_width)

    def fit_window(self) -> tuple[float, float]:
        return self.window if self.window is not None else (0.25 * self.horizon, self.horizon)

    def tail_window(self) -> tuple[float, float]:
        """Pathwise window: the last ``tail_width`` (default ``tau``) of the fit window."""
        t0, t1 = self.fit_window()
        width = self.tail_width if self.tail_width is not None else self.tau
        return (max(t0, t1 - width), t1)

    # ------------------------------------------------------------ emission

    def to_text(self) -> str:
        mc = self.model
        lines = ["[model]", f"name = {mc['name']}"]
        order = ("dim", "r_exponent", "a", "sigma", "neutral", "drift", "diffusion", "xi", "beta", "one_sided_l", "c1", "c2")
        n_reg = len(self.generator)
        for k in order:
            if k not in mc:
                continue
            v = mc[k]
            if mc["name"] == "catalog" and k in ("neutral", "drift", "diffusion"):
                v = cat.parse_terms(v, n_reg).format() or "0"
            lines.append(f"{k} = {_fmt(v)}")
        lines += [
            "",
            "[scheme]",
            f"tau = {_fmt(self.tau)}",
            f"m_steps = {self.m_steps}",
            f"theta = {_fmt(self.theta)}",
            f"horizon = {_fmt(self.horizon)}",
            f"tol = {_fmt(self.tol)}",
            "",
            "[ensemble]",
            f"n_paths = {self.n_paths}",
            f"p_moment = {_fmt(self.p_moment)}",
            f"seed = {self.seed}",
        ]
        if self.window is not None:
            lines.append(f"window = {_fmt(list(self.window))}")
        if self.tail_width is not None:
            lines.append(f"tail_width = {_fmt(self.tail_width)}")
        if self.output_path is not None:
            lines.append(f"output = {self.output_path}")
        lines += ["", "[chain]", f"generator = {_fmt(self.generator)}", f"i0 = {self.i0}"]
        if self.certify:
            lines += ["", "[certify]"]
            for k in ("lambda", "alpha1", "alpha2", "box", "n_samples"):
                if k in self.certify:
                    lines.append(f"{k} = {_fmt(self.certify[k])}")
        return "\n".join(lines) + "\n"
