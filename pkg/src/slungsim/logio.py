"""CSV telemetry with a fixed, documented column order.

Columns: ``t``, payload position/velocity (and quaternion + angular velocity
for rigid-body payloads), then per robot k (1-based): position, velocity,
quaternion, angular velocity, thrust ``f{k}``, moment ``M{k}_*``, ``taut{k}``,
then the desired payload pose (position + quaternion), then the reset-event
flag.  Floats are printed with 17 significant digits so logs round-trip and
re-runs with the same seed are byte identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import LogIOError

_AXES = ("x", "y", "z")
_QUAT = ("w", "x", "y", "z")


def log_columns(n_robots: int, point_mass: bool) -> list[str]:
    cols = ["t"]
    cols += [f"xL_{a}" for a in _AXES] + [f"vL_{a}" for a in _AXES]
    if not point_mass:
        cols += [f"qL_{a}" for a in _QUAT] + [f"OmL_{a}" for a in _AXES]
    for k in range(1, n_robots + 1):
        cols += [f"x{k}_{a}" for a in _AXES] + [f"v{k}_{a}" for a in _AXES]
        cols += [f"q{k}_{a}" for a in _QUAT] + [f"Om{k}_{a}" for a in _AXES]
        cols += [f"f{k}"] + [f"M{k}_{a}" for a in _AXES] + [f"taut{k}"]
    cols += [f"des_{a}" for a in _AXES] + [f"des_q{a}" for a in _QUAT]
    cols += ["event"]
    return cols


def build_row(t, x, u, taut, des_pos, des_quat, point_mass, event=0) -> np.ndarray:
    """Assemble one log row from the flat state and the applied input."""
    n = len(taut)
    parts = [np.array([t]), x[0:6] if point_mass else x[0:13]]
    for k in range(n):
        base = 13 + 13 * k
        parts.append(x[base:base + 13])
        parts.append(np.array([u[4 * k]]))
        parts.append(u[4 * k + 1:4 * k + 4])
        parts.append(np.array([1.0 if taut[k] else 0.0]))
    parts.append(np.asarray(des_pos, dtype=float))
    parts.append(np.asarray(des_quat, dtype=float))
    parts.append(np.array([float(event)]))
    return np.concatenate(parts)


def write_log(rows, columns: list[str], path) -> None:
    """Write rows (iterable of equal-length float arrays) to ``path``.

    Rows must be time-monotone (non-decreasing first column); an empty series
    produces a header-only file.
    """
    rows = [np.asarray(r, dtype=float) for r in rows]
    for r in rows:
        if r.shape != (len(columns),):
            raise LogIOError(f"row has {r.shape[0]} fields, expected {len(columns)}")
    times = [r[0] for r in rows]
    if any(b < a for a, b in zip(times, times[1:])):
        raise LogIOError("rows are not time-monotone")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(columns) + "\n")
            for r in rows:
                fh.write(",".join(f"{v:.17g}" for v in r) + "\n")
    except OSError as exc:
        raise LogIOError(f"cannot write log {path}: {exc}") from exc


def read_log(path):
    """Read a CSV log back as (columns, (n_rows, n_cols) float array)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise LogIOError(f"cannot read log {path}: {exc}") from exc
    lines = [ln for ln in text.splitlines() if ln]
    if not lines:
        raise LogIOError(f"log {path} is empty")
    columns = lines[0].split(",")
    if len(lines) == 1:
        return columns, np.zeros((0, len(columns)))
    try:
        data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    except ValueError as exc:
        raise LogIOError(f"malformed log {path}: {exc}") from exc
    if data.shape[1] != len(columns):
        raise LogIOError(f"log {path}: row width does not match header")
    return columns, data


def column_index(columns: list[str], name: str) -> int:
    try:
        return columns.index(name)
    except ValueError as exc:
        raise LogIOError(f"log is missing required column '{name}'") from exc
