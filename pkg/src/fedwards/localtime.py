"""Mollified self-intersection local time and its basis-coordinate gradient.

The delta function in the double time integral is replaced by the heat kernel
at variance ``epsilon`` and the integral by a Riemann sum on the uniform grid,
diagonal pairs included::

    L = dtau**2 * sum_{a,b} phi(x_b - x_a)

The gradient with respect to the basis coordinates uses the antisymmetry of
``grad phi`` to collapse the pair sum to one ``M``-vector per spatial axis
before projecting onto the basis, so it costs ``O(M^2 d + M N d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import DomainError, ShapeError
from .kernel import GramBasis

__all__ = [
    "LocalTimeEval",
    "mollifier",
    "mollifier_grad",
    "local_time",
    "local_time_grad",
    "local_time_naive_grad",
    "grid_weight",
    "value_and_grad",
]


@dataclass(frozen=True, eq=False)
class LocalTimeEval:
    value: float
    grad: np.ndarray
    epsilon: float
    quadrature_weight: float


def mollifier(x, epsilon: float) -> float | np.ndarray:
    """Heat kernel ``(2 pi eps)^(-d/2) exp(-|x|^2 / (2 eps))``; ``x`` has shape ``(..., d)``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.shape[-1]
    out = (2.0 * np.pi * epsilon) ** (-0.5 * d) * np.exp(-np.sum(x * x, axis=-1) / (2.0 * epsilon))
    return float(out) if out.ndim == 0 else out


def mollifier_grad(x, epsilon: float) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return -x / epsilon * np.asarray(mollifier(x, epsilon))[..., None]


def grid_weight(grid) -> float:
    """Cell area ``dtau**2`` of a uniform grid ``dtau, 2 dtau, ..., M dtau``."""
    grid = np.asarray(grid, dtype=float)
    M = grid.shape[0]
    dtau = grid[-1] / M
    expected = dtau * np.arange(1, M + 1)
    if np.max(np.abs(grid - expected)) > 1e-9 * grid[-1]:
        raise DomainError("local time requires the uniform grid T/M, 2T/M, ..., T")
    return dtau * dtau


def _check_path(path, M: int) -> np.ndarray:
    path = np.asarray(path, dtype=float)
    if path.ndim != 2 or path.shape[1] != M:
        raise ShapeError(f"path must be d x {M}, got {path.shape}")
    return path


def local_time(path, epsilon: float, grid) -> float:
    """Mollified local time of a ``d x M`` path sampled on ``grid``."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    grid = np.asarray(grid, dtype=float)
    w = grid_weight(grid)
    return kernels.value(_check_path(path, grid.shape[0]), epsilon, w)


def local_time_grad(path, gb: GramBasis, epsilon: float) -> LocalTimeEval:
    """Local time and its gradient along every basis direction of every axis."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    w = grid_weight(gb.grid)
    path = _check_path(path, gb.M)
    value, S = kernels.value_force(path, epsilon, w)
    grad = (2.0 * w) * (S @ gb.path_matrix.T)
    return LocalTimeEval(value=value, grad=grad, epsilon=epsilon, quadrature_weight=w)


def value_and_grad(coeffs: np.ndarray, gb: GramBasis, epsilon: float, weight: float) -> tuple[float, np.ndarray, np.ndarray]:
    """Hot-path variant on coefficients: returns ``(value, grad, path)``.

    Skips validation; callers check the grid once via :func:`grid_weight`.
    """
    path = coeffs @ gb.path_matrix
    value, S = kernels.value_force(path, epsilon, weight)
    return value, (2.0 * weight) * (S @ gb.path_matrix.T), path


def local_time_naive_grad(path, gb: GramBasis, epsilon: float) -> np.ndarray:
    """Reference ``O(M^2 N d)`` gradient straight from the double sum."""
    w = grid_weight(gb.grid)
    path = _check_path(path, gb.M)
    diff = path[:, None, :] - path[:, :, None]  # [i, a, b] = x_b - x_a
    dphi = mollifier_grad(np.moveaxis(diff, 0, -1), epsilon)  # [a, b, i]
    P = gb.path_matrix
    dP = P[:, None, :] - P[:, :, None]  # [k, a, b] = P[k, b] - P[k, a]
    return w * np.einsum("abi,kab->ik", dphi, dP)
