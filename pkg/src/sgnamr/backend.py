"""Kernel backend selection.

The compiled extension is preferred; the pure-python module is a drop-in
replacement used when the extension is unavailable or when the environment
variable ``SGNAMR_PURE`` is set to a non-empty value other than ``0``.
"""

import os

from . import _kernels_py

if os.environ.get("SGNAMR_PURE", "0") not in ("", "0"):
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as _impl
        COMPILED = True
    except ImportError:  # pragma: no cover - depends on build environment
        _impl = _kernels_py
        COMPILED = False

BACKEND = "compiled" if COMPILED else "pure"

csr_matvec = _impl.csr_matvec
ilu0_factor = _impl.ilu0_factor
ilu0_solve = _impl.ilu0_solve
