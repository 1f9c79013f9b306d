"""Hot-loop kernels.

The numba-compiled versions are used by default. Setting the environment
variable ``BSFL_NO_NUMBA=1`` (or running without numba installed) selects the
pure-numpy versions instead; both produce the same selections and traces.
"""
import os

from . import numpy_kernels

BACKEND = "numpy"
if os.environ.get("BSFL_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes"):
    try:
        from . import numba_kernels as _active
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _active = numpy_kernels
else:
    _active = numpy_kernels

best_subset = _active.best_subset
anneal = _active.anneal
set_energy = _active.set_energy


def get_backend(name: str):
    """Kernel module by name (``"numba"`` or ``"numpy"``), for benchmarks and parity tests."""
    if name == "numpy":
        return numpy_kernels
    if name == "numba":
        from . import numba_kernels
        return numba_kernels
    raise ValueError(f"unknown kernel backend {name!r}")


__all__ = ["BACKEND", "best_subset", "anneal", "set_energy", "get_backend"]
