"""Selects the compiled local-time kernels when built, NumPy otherwise.

Set ``FEDWARDS_BACKEND=python`` to force the fallback.
"""

import importlib
import os

_MODULES = {"cython": "fedwards._localtime_c", "python": "fedwards._localtime_py"}


def available_backends():
    names = []
    for name, mod in _MODULES.items():
        try:
            importlib.import_module(mod)
        except ImportError:
            continue
        names.append(name)
    return names


def get_backend(name=None):
    """Return the kernel module ``name``, or the preferred available one."""
    if name is not None:
        return importlib.import_module(_MODULES[name])
    forced = os.environ.get("FEDWARDS_BACKEND")
    if forced:
        return importlib.import_module(_MODULES[forced])
    try:
        return importlib.import_module(_MODULES["cython"])
    except ImportError:
        return importlib.import_module(_MODULES["python"])


kernels = get_backend()
BACKEND = kernels.NAME
