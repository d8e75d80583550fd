"""Conv-kernel backend selection.

Two interchangeable implementations exist: numba-jitted loops ("numba") and
pure-numpy im2col ("numpy"). The FCCGAN_BACKEND environment variable picks
one at first use; set_backend() switches in-process (used by tests and the
benchmark). Default is the numpy/BLAS path, which wins on the single-core
boxes these desk-scale runs target — see benchmarks/bench_backends.py.
"""

import importlib
import os

_CHOICES = ("numpy", "numba")
_active = None
_name = None


def backend_name():
    global _name
    if _name is None:
        _resolve()
    return _name


def get_backend():
    global _active
    if _active is None:
        _resolve()
    return _active


def set_backend(name):
    global _active, _name
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}, choose from {_CHOICES}")
    _active = importlib.import_module(f".kernels_{name}", package=__package__)
    _name = name
    return _active


def _resolve():
    name = os.environ.get("FCCGAN_BACKEND", "").strip().lower()
    if name and name not in _CHOICES:
        raise ValueError(f"FCCGAN_BACKEND={name!r} not recognized; choose from {_CHOICES}")
    if not name:
        name = "numpy"
    set_backend(name)
