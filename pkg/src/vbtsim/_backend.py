"""Select the raster kernel backend at import time.

The compiled extension is used when it was built; otherwise (or when
``VBTSIM_PURE_PYTHON=1``) the numpy fallback is used.  Both expose the same
functions with the same semantics.
"""
import os

from . import _fallback

fallback = _fallback

if os.environ.get("VBTSIM_PURE_PYTHON", "") not in ("", "0"):
    kernels = _fallback
    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        kernels = _fallback
        BACKEND = "python"

compiled = kernels if BACKEND == "cython" else None

disk_coverage = kernels.disk_coverage
capsule_coverage = kernels.capsule_coverage
shift_rows_linear = kernels.shift_rows_linear
label_moments = kernels.label_moments
