"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
kernels are used.  Setting ``EDC_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _kernels_py

if os.environ.get("EDC_PURE_PYTHON") == "1":
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "compiled"

conv_nest = _impl.conv_nest
simulate_loop_nest = _impl.simulate_loop_nest

PER_PE = _kernels_py.PER_PE
BROADCAST = _kernels_py.BROADCAST
STATIONARY = _kernels_py.STATIONARY
ACCUMULATE = _kernels_py.ACCUMULATE
SPILL = _kernels_py.SPILL
