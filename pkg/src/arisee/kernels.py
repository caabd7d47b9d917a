"""Kernel backend selection.

The compiled extension is used when it imports; otherwise (or when the
``ARISEE_PURE_PYTHON`` environment variable is set to ``1``) the numpy
implementation is used. Both expose the same three functions.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py
if os.environ.get("ARISEE_PURE_PYTHON", "0") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

effective_channels = _impl.effective_channels
sinr_from_effective = _impl.sinr_from_effective
batch_sinr = _impl.batch_sinr
