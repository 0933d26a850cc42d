"""Kernel backend selection.

The hot kernels (Bessel tables, Green matrices, weighted coefficient sums)
exist twice: numba ``@njit`` loops in ``_kernels_numba`` and vectorised
numpy/scipy code in ``_kernels_numpy``.  ``SCATMESH_BACKEND`` picks one at
import time (``numba`` or ``numpy``); numba is the default when importable.
``set_backend`` switches at runtime, which the tests and the benchmark use.
"""

import importlib
import importlib.util
import os

_VALID = ("numba", "numpy")


def _numba_available():
    return importlib.util.find_spec("numba") is not None


def _initial():
    name = os.environ.get("SCATMESH_BACKEND", "").strip().lower()
    if name in ("", "auto"):
        return "numba" if _numba_available() else "numpy"
    if name not in _VALID:
        raise ValueError(f"SCATMESH_BACKEND must be one of {_VALID}, got {name!r}")
    if name == "numba" and not _numba_available():
        raise ImportError("SCATMESH_BACKEND=numba but numba is not installed")
    return name


_name = _initial()
kernels = importlib.import_module(f"scatmesh._kernels_{_name}")


def backend_name():
    return _name


def set_backend(name):
    """Switch kernel implementation; returns the previous backend name."""
    global _name, kernels
    if name not in _VALID:
        raise ValueError(f"backend must be one of {_VALID}")
    previous = _name
    kernels = importlib.import_module(f"scatmesh._kernels_{name}")
    _name = name
    return previous


def get_kernels():
    return kernels
