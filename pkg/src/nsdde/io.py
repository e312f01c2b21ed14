"""CSV emission and parsing for paths and moment curves.

Floats are written with ``repr`` (shortest round-trip decimal), so reading a
file back yields bit-identical values. Files are written to a temporary
sibling and renamed into place.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .ensemble import MomentCurve
from .theta_em import PathRecord

MOMENT_HEADER = ("t", "moment", "stderr", "ci_low", "ci_high")


def atomic_write(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(v) -> str:
    return repr(float(v))


def path_csv(path: PathRecord) -> str:
    d = path.states.shape[1]
    lines = [",".join(["t", *(f"x_{c + 1}" for c in range(d)), "regime"])]
    for t, row, r in zip(path.times, path.states, path.regimes):
        lines.append(",".join([_fmt(t), *(_fmt(v) for v in row), str(int(r))]))
    return "\n".join(lines) + "\n"


def write_path_csv(path: PathRecord, dest) -> None:
    atomic_write(dest, path_csv(path))


def read_path_csv(src) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(times, states, regimes)`` from a path CSV."""
    with open(src) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "t" or header[-1] != "regime":
            raise ValueError(f"not a path CSV: header {header}")
        rows = [line.strip().split(",") for line in fh if line.strip() and not line.startswith("#")]
    times = np.array([float(r[0]) for r in rows])
    states = np.array([[float(v) for v in r[1:-1]] for r in rows]).reshape(len(rows), len(header) - 2)
    regimes = np.array([int(r[-1]) for r in rows], dtype=np.int64)
    return times, states, regimes


def moment_csv(curve: MomentCurve, extra: dict | None = None) -> str:
    lines = [",".join(MOMENT_HEADER)]
    lo, hi = curve.ci_low, curve.ci_high
    for k in range(curve.times.size):
        lines.append(",".join(_fmt(v) for v in (curve.times[k], curve.values[k], curve.std_err[k], lo[k], hi[k])))
    summary = {"n_paths": curve.n_paths, "n_blowups": curve.n_blowups, "p": curve.p_moment}
    summary.update(curve.meta)
    summary.update(extra or {})
    summary["ci"] = "normal approximation mean +- 1.96*stderr"
    lines += [f"# {k} = {v}" for k, v in summary.items()]
    return "\n".join(lines) + "\n"


def write_moment_csv(curve: MomentCurve, dest, extra: dict | None = None) -> None:
    atomic_write(dest, moment_csv(curve, extra))


def read_moment_csv(src) -> MomentCurve:
    rows, meta = [], {}
    with open(src) as fh:
        header = tuple(fh.readline().strip().split(","))
        if header != MOMENT_HEADER:
            raise ValueError(f"not a moment CSV: header {header}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].partition("=")
                meta[key.strip()] = val.strip()
                continue
            rows.append([float(v) for v in line.split(",")])
    arr = np.array(rows, dtype=float).reshape(len(rows), 5)
    return MomentCurve(
        times=arr[:, 0],
        values=arr[:, 1],
        std_err=arr[:, 2],
        n_paths=int(meta.pop("n_paths", 0)),
        n_blowups=int(meta.pop("n_blowups", 0)),
        p_moment=float(meta.pop("p", 2.0)),
        meta=meta,
    )
