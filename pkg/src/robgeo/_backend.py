"""Select the kernel implementation at import time.

The compiled ``_ckernels`` extension is used when it imports cleanly; the
numpy fallback ``_pykernels`` is used otherwise, or when the environment
variable ``ROBGEO_PURE_PYTHON`` is set to a non-empty value other than "0".
"""
import importlib
import os

from . import _pykernels


def load(name=None):
    """Return the kernel module called ``name`` ("cython" or "python").

    With ``name=None`` the preferred available backend is returned.
    """
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("robgeo._ckernels")
    if name is not None:
        raise ValueError(f"unknown backend {name!r}")
    if os.environ.get("ROBGEO_PURE_PYTHON", "0") not in ("", "0"):
        return _pykernels
    try:
        return importlib.import_module("robgeo._ckernels")
    except ImportError:
        return _pykernels


def available():
    names = ["python"]
    try:
        load("cython")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


kernels = load()
BACKEND = kernels.NAME


def set_backend(name):
    """Switch the active kernels at run time; returns the previous name.

    Callers look kernels up through this module on every call, so the
    switch takes effect immediately for the whole package.
    """
    global kernels, BACKEND
    previous = BACKEND
    kernels = load(name)
    BACKEND = kernels.NAME
    return previous


def active():
    return BACKEND
