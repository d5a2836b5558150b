"""Split-scan backend selection.

The compiled kernel is preferred when its extension module imported cleanly;
the pure-numpy kernel is the fallback. Set CELLSHAPES_PURE_PYTHON=1 to force
the fallback (used by the backend benchmark and parity tests). Both kernels
are bit-identical, so the choice never changes results, only speed.
"""

from __future__ import annotations

import os

if os.environ.get("CELLSHAPES_PURE_PYTHON", "") not in ("", "0"):
    from ._scan_py import scan_level, BACKEND as BACKEND_NAME
else:
    try:
        from ._scan_cy import scan_level, BACKEND as BACKEND_NAME
    except ImportError:
        from ._scan_py import scan_level, BACKEND as BACKEND_NAME

__all__ = ["scan_level", "BACKEND_NAME"]
