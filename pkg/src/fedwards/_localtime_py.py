"""NumPy fallback for the local-time pair sums (same contract as the compiled module)."""

import numpy as np

NAME = "python"


def _pair_kernel(path, eps):
    p = np.asarray(path, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("path must be d x M")
    d = p.shape[0]
    diff = p[:, None, :] - p[:, :, None]  # diff[i, a, b] = x_b - x_a
    r2 = np.einsum("iab,iab->ab", diff, diff)
    phi = (2.0 * np.pi * eps) ** (-0.5 * d) * np.exp(-r2 / (2.0 * eps))
    return diff, phi


def value(path, eps, weight):
    _, phi = _pair_kernel(path, eps)
    return float(weight * phi.sum())


def value_force(path, eps, weight):
    diff, phi = _pair_kernel(path, eps)
    S = np.einsum("iab,ab->ib", diff, phi) * (-1.0 / eps)
    return float(weight * phi.sum()), S


def value_batch(paths, eps, weight):
    arr = np.asarray(paths, dtype=np.float64)
    return np.array([value(p, eps, weight) for p in arr])


def value_force_batch(paths, eps, weight):
    arr = np.asarray(paths, dtype=np.float64)
    vals = np.empty(arr.shape[0])
    forces = np.empty_like(arr)
    for n, p in enumerate(arr):
        vals[n], forces[n] = value_force(p, eps, weight)
    return vals, forces
