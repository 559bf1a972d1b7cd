"""Backend selection for the per-sample kernels.

The compiled extension is used when present; set ``POPSPEC_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _pykernels

BACKEND = "python"
companion_derivatives = _pykernels.companion_derivatives
companion_zeros = _pykernels.companion_zeros

if not os.environ.get("POPSPEC_PURE_PYTHON"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        companion_derivatives = _ckernels.companion_derivatives
        companion_zeros = _ckernels.companion_zeros

__all__ = ["BACKEND", "companion_derivatives", "companion_zeros"]
