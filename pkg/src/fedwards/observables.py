"""Built-in observables shared by the chain recorder and the oracle.

``f1``
    squared first basis coordinate of the first spatial component,
``f2``
    the mollified local time,
``f3``
    squared end-to-end distance ``|x(T)|^2``.

All functions broadcast over leading batch axes.
"""

import numpy as np

NAMES = ("f1", "f2", "f3")


def f1(coeffs):
    c = np.asarray(coeffs)
    return c[..., 0, 0] ** 2


def f2(local_time):
    return np.asarray(local_time, dtype=float)


def f3(path):
    p = np.asarray(path)
    return np.sum(p[..., :, -1] ** 2, axis=-1)


def evaluate(name, coeffs, local_time, path):
    if name == "f1":
        return f1(coeffs)
    if name == "f2":
        return f2(local_time)
    if name == "f3":
        return f3(path)
    raise KeyError(f"unknown observable {name!r}; built-ins are {NAMES}")


def gradient(name, coeffs, grad_local_time, path_matrix):
    """Exact coordinate gradient of a built-in observable, shape of ``coeffs``."""
    c = np.asarray(coeffs, dtype=float)
    out = np.zeros_like(c)
    if name == "f1":
        out[..., 0, 0] = 2.0 * c[..., 0, 0]
    elif name == "f2":
        out = np.array(grad_local_time, dtype=float, copy=True)
    elif name == "f3":
        end = path_matrix[:, -1]
        out = 2.0 * (c @ end)[..., None] * end
    else:
        raise KeyError(f"unknown observable {name!r}; built-ins are {NAMES}")
    return out
