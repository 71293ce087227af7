"""Kernel backend selection: compiled Cython core with pure-Python fallback.

The compiled module ``slungsim._kernels_c`` is used when it imported
successfully; otherwise the NumPy reference kernels take over.  Set
``SLUNGSIM_BACKEND=python`` or ``=c`` to force a choice (forcing ``c`` when
the extension is unavailable is an error).
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels_c
except ImportError:
    _kernels_c = None


def available_backends() -> dict:
    out = {"python": _kernels_py}
    if _kernels_c is not None:
        out["c"] = _kernels_c
    return out


def get_kernels(name: str | None = None):
    if name is None:
        name = os.environ.get("SLUNGSIM_BACKEND", "").lower() or None
    if name in (None, "auto"):
        return _kernels_c if _kernels_c is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name in ("c", "cython", "compiled"):
        if _kernels_c is None:
            raise ImportError("compiled kernels requested but slungsim._kernels_c is not built")
        return _kernels_c
    raise ValueError(f"unknown kernel backend '{name}'")


kernels = get_kernels()
