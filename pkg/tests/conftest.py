import pytest

from strichartz_lab import _kernels

BACKENDS = ["python"] + (["cython"] if _kernels.compiled is not None else [])
KERNELS = ("resonance_energy", "min_doubled_area", "exp_sum_direct")


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Route every kernel call through one backend."""
    mod = _kernels.python if request.param == "python" else _kernels.compiled
    for name in KERNELS:
        monkeypatch.setattr(_kernels, name, getattr(mod, name))
    return request.param
