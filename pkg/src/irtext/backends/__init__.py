"""Kernel backend selection.

The numba backend is used when available; set IRTEXT_BACKEND=numpy to force
the pure-numpy fallback (or IRTEXT_BACKEND=numba to fail loudly when numba is
broken). The flag is read once at import time.
"""

from __future__ import annotations

import os

_requested = os.environ.get("IRTEXT_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ValueError(
        f"IRTEXT_BACKEND must be 'numba' or 'numpy', got {_requested!r}"
    )

if _requested == "numpy":
    from . import np_kernels as kernels

    BACKEND = "numpy"
elif _requested == "numba":
    from . import nb_kernels as kernels

    BACKEND = "numba"
else:
    try:
        from . import nb_kernels as kernels

        BACKEND = "numba"
    except ImportError:
        from . import np_kernels as kernels

        BACKEND = "numpy"

__all__ = ["kernels", "BACKEND"]
