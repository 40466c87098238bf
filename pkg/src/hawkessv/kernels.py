"""Backend selection for the inner loops.

The compiled extension is used when it has been built; otherwise, or when
``HSV_BACKEND=python`` is set, the pure-Python module is used.  ``BACKEND``
records which one is active.
"""
from __future__ import annotations

import os

from . import _pykernels

if os.environ.get("HSV_BACKEND", "").lower() == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels
        BACKEND = "python"

hawkes_path = _impl.hawkes_path
data_logdensity = _impl.data_logdensity
sweep_dnv = _impl.sweep_dnv
VBlock = _impl._VBlock
sample_v_blocks = _impl.sample_v_blocks
block_target = _impl.block_target
block_mode = _impl.block_mode
simulate_path = _impl.simulate_path

__all__ = [
    "BACKEND",
    "hawkes_path",
    "data_logdensity",
    "sweep_dnv",
    "VBlock",
    "sample_v_blocks",
    "block_target",
    "block_mode",
    "simulate_path",
]
