"""Backend selection for the hot kernels.

The compiled extension ``cra._kernels`` is used when it imports; otherwise
the NumPy versions in ``cra._kernels_py`` take over. Set the environment
variable ``CRA_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CRA_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

project_l1_ball = _impl.project_l1_ball
rip_range = _impl.rip_range
rip_subsets = _impl.rip_subsets

__all__ = ["BACKEND", "project_l1_ball", "rip_range", "rip_subsets"]
