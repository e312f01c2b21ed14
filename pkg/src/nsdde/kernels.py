"""Backend selection for the catalog stepping kernel.

The compiled extension ``nsdde._kernels`` is used when importable; otherwise,
or when the environment variable ``NSDDE_PURE_PYTHON`` is set to a non-empty
value other than ``0``, the pure-Python mirror is used.
"""

import os

import numpy as np

from . import _kernels_py

OK, BLOWUP, NO_CONVERGENCE = _kernels_py.OK, _kernels_py.BLOWUP, _kernels_py.NO_CONVERGENCE

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

_force_python = os.environ.get("NSDDE_PURE_PYTHON", "") not in ("", "0")

COMPILED_AVAILABLE = _compiled is not None
BACKEND = "compiled" if COMPILED_AVAILABLE and not _force_python else "python"


def _impl(backend):
    backend = backend or BACKEND
    if backend == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel requested but nsdde._kernels is not built")
        return _compiled.simulate_catalog
    if backend == "python":
        return _kernels_py.simulate_catalog
    raise ValueError(f"unknown backend {backend!r}")


def _table(t):
    return (
        np.ascontiguousarray(t.kind_x, dtype=np.int32),
        np.ascontiguousarray(t.kind_y, dtype=np.int32),
        np.ascontiguousarray(t.coef, dtype=np.float64),
    )


def simulate_catalog(coefficients, theta, delta, m, xi, regimes, dw, tol, max_iter, guard, backend=None):
    """Dispatch to the selected kernel; see ``_kernels_py.simulate_catalog``."""
    fn = _impl(backend)
    return fn(
        *_table(coefficients.neutral),
        *_table(coefficients.drift),
        *_table(coefficients.diffusion),
        float(theta),
        float(delta),
        int(m),
        np.ascontiguousarray(xi, dtype=np.float64),
        np.ascontiguousarray(regimes, dtype=np.int64),
        np.ascontiguousarray(dw, dtype=np.float64),
        float(tol),
        int(max_iter),
        float(guard),
    )
