"""Hot scan kernels with two interchangeable backends.

The numba backend JIT-compiles the per-feature scans (best_split_scan,
mdl_boundary_scan); the numpy backend is a vectorized pure-numpy twin used
when numba is unavailable or explicitly disabled.  Both compute identical
quantities with the same floating-point formula, so results agree to the
last few ulps and tie-breaking (first maximal / first minimal index) is
preserved.

Set OPMAL_DISABLE_NUMBA=1 to force the numpy backend.
"""

import os

ENV_FLAG = "OPMAL_DISABLE_NUMBA"


def numba_disabled() -> bool:
    return os.environ.get(ENV_FLAG, "") not in ("", "0")


if numba_disabled():
    from . import numpy_backend as _impl

    BACKEND = "numpy"
else:
    try:
        from . import numba_backend as _impl

        BACKEND = "numba"
    except ImportError:
        from . import numpy_backend as _impl

        BACKEND = "numpy"

best_split_scan = _impl.best_split_scan
mdl_boundary_scan = _impl.mdl_boundary_scan

__all__ = ["BACKEND", "ENV_FLAG", "best_split_scan", "mdl_boundary_scan", "numba_disabled"]
