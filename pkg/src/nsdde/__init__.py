"""Theta Euler-Maruyama simulation and exponential-stability checks for
neutral stochastic differential delay equations with Markovian switching."""

from .ctmc import GeneratorMatrix, RegimePath, sample_regime_path, validate_generator
from .ensemble import EnsembleConfig, MomentCurve, pathwise_exponents, run_ensemble
from .errors import NSDDEError
from .kernels import BACKEND
from .model import (
    InitialSegment,
    LyapunovCallbacks,
    ModelSpec,
    builtin_example_sec5,
    builtin_remark42,
    catalog_model,
    evaluate_LV,
    quadratic_lyapunov,
)
from .stability import (
    certify_exact_quadratic,
    certify_scheme,
    check_as_condition_c3,
    fit_moment_exponent,
)
from .theta_em import SchemeConfig, implicit_solve, simulate_path, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EnsembleConfig",
    "GeneratorMatrix",
    "InitialSegment",
    "LyapunovCallbacks",
    "ModelSpec",
    "MomentCurve",
    "NSDDEError",
    "RegimePath",
    "SchemeConfig",
    "builtin_example_sec5",
    "builtin_remark42",
    "catalog_model",
    "certify_exact_quadratic",
    "certify_scheme",
    "check_as_condition_c3",
    "evaluate_LV",
    "fit_moment_exponent",
    "implicit_solve",
    "pathwise_exponents",
    "quadratic_lyapunov",
    "run_ensemble",
    "sample_regime_path",
    "simulate_path",
    "step",
    "validate_generator",
]
