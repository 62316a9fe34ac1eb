"""Kernel selection: the compiled extension when importable, else pure Python.

Set ``DGM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("DGM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels

simulate_codes = _impl.simulate_codes
simulate_batch = _impl.simulate_batch
equivalent_codes = _impl.equivalent_codes
reachable_counts = _impl.reachable_counts
