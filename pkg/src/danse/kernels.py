"""Backend selection for the propagation kernels.

The compiled extension is used when it imports; ``DANSE_BACKEND=python``
forces the numpy fallback and ``DANSE_BACKEND=compiled`` makes a missing
extension an error.
"""

import os

from . import _pykernels

_choice = os.environ.get("DANSE_BACKEND", "auto").lower()
if _choice not in ("auto", "compiled", "python"):
    raise ImportError(f"DANSE_BACKEND must be auto, compiled or python, got {_choice!r}")

_compiled = None
if _choice != "python":
    try:
        from . import _kernels as _compiled
    except ImportError:
        if _choice == "compiled":
            raise

if _compiled is not None:
    BACKEND = "compiled"
    _impl = _compiled
else:
    BACKEND = "python"
    _impl = _pykernels

rhs = _impl.rhs
rk4_advance = _impl.rk4_advance
split4_advance = _impl.split4_advance
split6_advance = _impl.split6_advance
sincos = _impl.sincos

ADVANCE = {"rk4": rk4_advance, "split4": split4_advance, "split6": split6_advance}


def get_backend(name):
    """Return the kernel module for ``name`` ("compiled" or "python")."""
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")
