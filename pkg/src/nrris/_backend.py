"""Select the quartic-kernel backend at import time.

The compiled extension is used when it was built; setting
``NRRIS_PURE_PYTHON=1`` forces the numpy fallback.
"""

import importlib
import os

from . import _kernels_py


def load(name: str | None = None):
    """Return the kernel module ``"cython"``, ``"python"``, or the default."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("nrris._kernels")
    if name is not None:
        raise ValueError(f"unknown backend {name!r}")
    if os.environ.get("NRRIS_PURE_PYTHON", "") not in ("", "0"):
        return _kernels_py
    try:
        return importlib.import_module("nrris._kernels")
    except ImportError:
        return _kernels_py


kernels = load()
BACKEND = kernels.NAME
