"""Kernel selection: compiled extension if built, numpy fallback otherwise.

Set TOPOQC_PURE_PYTHON=1 to force the fallback regardless.
"""
from __future__ import annotations

import os

if os.environ.get("TOPOQC_PURE_PYTHON"):
    from . import _kernel_py as _impl
    _KERNEL = "python"
else:
    try:
        from . import _kernel as _impl  # type: ignore[attr-defined]
        _KERNEL = "cython"
    except ImportError:
        from . import _kernel_py as _impl
        _KERNEL = "python"


def kernel_name() -> str:
    """'cython' when the compiled extension is active, else 'python'."""
    return _KERNEL


def apply_circuit(mats, masks, eps):
    """Evolve |000><000| through 8x8 gate matrices with per-gate noise."""
    return _impl.apply_circuit(mats, masks, eps)
