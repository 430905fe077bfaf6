"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is always available.  Set XNORCONV_PURE_PYTHON=1 to skip the
extension entirely (useful for testing the fallback path).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("XNORCONV_PURE_PYTHON", "") not in ("", "0"):
    _kernels_cy = None
else:
    try:
        from . import _kernels_cy  # type: ignore[attr-defined]
    except ImportError:
        _kernels_cy = None

HAVE_COMPILED = _kernels_cy is not None
DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"

BACKENDS = ("compiled", "python")


def get_kernels(backend: str | None = None):
    """Return the kernel module for `backend` (None/'auto' picks the default)."""
    if backend is None or backend == "auto":
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if _kernels_cy is None:
            raise RuntimeError(
                "compiled kernels are not available; build the extension or "
                "use backend='python'"
            )
        return _kernels_cy
    if backend == "python":
        return _kernels_py
    raise ValueError(f"unknown backend {backend!r}; expected 'compiled' or 'python'")
