"""Kernel backend selection.

The compiled Cython kernels are used when the extension built successfully;
otherwise the NumPy reference implementation takes over.  Set POSLOC_PURE=1
to force the pure backend (useful for benchmarking and debugging).
"""

import os

from . import _kernels_py

try:
    from . import _kernels_cy as _compiled
except ImportError:
    _compiled = None

_FORCE_PURE = os.environ.get("POSLOC_PURE", "").strip().lower() in ("1", "true", "yes")

_impl = _kernels_py if (_FORCE_PURE or _compiled is None) else _compiled


def kernels():
    """Module implementing the fused quadrature kernels."""
    return _impl


def pure_kernels():
    """Always the NumPy implementation (used for generic callables)."""
    return _kernels_py


def backend_name():
    return "pure" if _impl is _kernels_py else "compiled"


def compiled_available():
    return _compiled is not None
