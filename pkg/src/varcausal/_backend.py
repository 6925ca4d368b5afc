"""Kernel backend selection.

The compiled Cython extension is preferred when it imported cleanly; the
pure-numpy fallback is used otherwise. ``VARCAUSAL_BACKEND=python`` or
``VARCAUSAL_BACKEND=compiled`` in the environment forces one side (the
latter raises if the extension is missing).
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("VARCAUSAL_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "VARCAUSAL_BACKEND=compiled but the varcausal._kernels "
                "extension is not built; run `python3 setup.py build_ext --inplace`"
            ) from None
        _impl = _kernels_py

BACKEND_NAME: str = _impl.BACKEND_NAME
forward_recursion = _impl.forward_recursion
lasso_cd = _impl.lasso_cd


def available_backends():
    """Names of the kernel implementations importable in this environment."""
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.append("compiled")
    except ImportError:
        pass
    return names
