"""Hot kernels with a compiled backend and a numpy fallback.

The compiled extension is used when importable; set ``STRICHARTZ_LAB_PURE=1``
to force the fallback. ``BACKEND`` names the active implementation.
"""
import os

from . import _pykernels as python

compiled = None
if os.environ.get("STRICHARTZ_LAB_PURE") != "1":
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "cython" if compiled is not None else "python"

resonance_energy = _impl.resonance_energy
min_doubled_area = _impl.min_doubled_area
exp_sum_direct = _impl.exp_sum_direct

__all__ = [
    "BACKEND",
    "compiled",
    "python",
    "resonance_energy",
    "min_doubled_area",
    "exp_sum_direct",
]
