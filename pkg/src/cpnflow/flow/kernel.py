"""Select the stepping kernel at import time.

The compiled extension is preferred; the numpy version is used when it is
not built. ``CPNFLOW_KERNEL=python`` or ``=cython`` forces a choice.
"""
from __future__ import annotations

import os

from . import _kernel_py

try:
    from . import _kernel as _kernel_c
except ImportError:  # extension not built
    _kernel_c = None

OK = _kernel_py.OK
NONFINITE = _kernel_py.NONFINITE
GRAPH_LOST = _kernel_py.GRAPH_LOST
STATUS_TEXT = {OK: "ok", NONFINITE: "non-finite values", GRAPH_LOST: "graph condition lost"}


def available() -> list[str]:
    return ["python"] + (["cython"] if _kernel_c is not None else [])


def get_advance(name: str = "auto"):
    """Return ``advance(theta, Theta, g, dt, nsteps) -> (status, steps_done)`` for a kernel name."""
    if name == "auto":
        name = "cython" if _kernel_c is not None else "python"
    if name == "python":
        return _kernel_py.advance
    if name == "cython":
        if _kernel_c is None:
            raise ImportError("compiled kernel is not built; reinstall with Cython available")
        return _kernel_c.advance
    raise ValueError(f"unknown kernel {name!r}")


KERNEL_NAME = os.environ.get("CPNFLOW_KERNEL", "auto")
if KERNEL_NAME == "auto":
    KERNEL_NAME = "cython" if _kernel_c is not None else "python"
advance = get_advance(KERNEL_NAME)
