"""Pick the compiled bit kernels when available, else the pure-Python ones.

Set ``CFLOG_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py as python_kernels

if os.environ.get("CFLOG_PURE_PYTHON", "") not in ("", "0"):
    kernels = python_kernels
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = python_kernels

BitWriter = kernels.BitWriter
decode_canonical = kernels.decode_canonical
IMPLEMENTATION: str = kernels.IMPLEMENTATION
