"""Selects the kernel backend at import time.

The compiled extension is preferred; set IPS_PURE_KERNELS=1 to force the
numpy fallback (used by the backend-agreement tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("IPS_PURE_KERNELS"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

gaussian_loglik = _impl.gaussian_loglik
se_kernel = _impl.se_kernel
