"""Kernel backend selection.

``OPDA_BACKEND=numpy`` forces the pure-numpy kernels; the default is numba
when it imports cleanly.  The choice is fixed at import time.
"""
import os
import warnings

_requested = os.environ.get("OPDA_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ImportError(f"OPDA_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from . import _kernels_numba as kernels
    except ImportError:  # pragma: no cover - numba is a declared dependency
        warnings.warn("numba unavailable, falling back to numpy kernels")
        from . import _kernels_numpy as kernels
else:
    from . import _kernels_numpy as kernels

BACKEND = kernels.BACKEND
