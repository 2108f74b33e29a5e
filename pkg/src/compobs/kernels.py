"""Select the ADMM inner-loop backend at import time.

The compiled extension ``compobs._kernels`` is used when it was built;
otherwise, or when ``COMPOBS_PURE_PYTHON=1`` is set, the NumPy versions in
``compobs._kernels_py`` are used.  ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("COMPOBS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

bp_admm = _impl.bp_admm
bpdn_admm = _impl.bpdn_admm

BACKENDS = {"python": _kernels_py}
if BACKEND == "cython":
    BACKENDS["cython"] = _impl
else:
    try:
        from . import _kernels as _compiled

        BACKENDS["cython"] = _compiled
    except ImportError:
        pass
