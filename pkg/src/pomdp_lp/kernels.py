"""Select compiled or pure-Python hot loops at import time.

Set ``POMDP_LP_PURE_PYTHON=1`` to force the numpy fallback.
"""

import os

from . import _kernels_py as python_kernels

try:
    if os.environ.get("POMDP_LP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as compiled_kernels
except ImportError:
    compiled_kernels = None

active = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "compiled" if compiled_kernels is not None else "python"


def available_backends():
    out = {"python": python_kernels}
    if compiled_kernels is not None:
        out["compiled"] = compiled_kernels
    return out
