"""Gaussian field states in orthonormal coordinates and polymer paths."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .kernel import GramBasis
from .model import RngStream

__all__ = ["FieldState", "sample_prior", "sample_prior_batch", "pair", "polymer_path", "path_at"]


@dataclass(frozen=True, eq=False)
class FieldState:
    """Chain state: ``d x N`` basis coordinates plus the compute time."""

    coeffs: np.ndarray
    compute_time: float = 0.0

    def __post_init__(self) -> None:
        c = np.array(self.coeffs, dtype=float, copy=True)
        if c.ndim != 2:
            raise ShapeError(f"coeffs must be d x N, got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("coeffs must be finite")
        if self.compute_time < 0:
            raise ValueError("compute_time must be >= 0")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def d(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    def advanced(self, coeffs: np.ndarray, dt: float) -> "FieldState":
        return FieldState(coeffs, self.compute_time + dt)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FieldState):
            return NotImplemented
        return self.compute_time == other.compute_time and np.array_equal(self.coeffs, other.coeffs)


def sample_prior_batch(gb: GramBasis, d: int, count: int, rng: RngStream | np.random.Generator) -> np.ndarray:
    """``count`` independent prior draws as a ``(count, d, N)`` array.

    Under the Gaussian reference measure the coordinates in an orthonormal
    basis are i.i.d. standard normal.
    """
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    return gen.standard_normal((count, d, gb.N))


def sample_prior(gb: GramBasis, d: int, rng: RngStream | np.random.Generator) -> FieldState:
    return FieldState(sample_prior_batch(gb, d, 1, rng)[0], 0.0)


def pair(state: FieldState, component: int, xi_coeffs) -> float:
    """Dual pairing of one spatial component with a test vector given in the basis."""
    if not 0 <= component < state.d:
        raise IndexError(f"component {component} out of range for d={state.d}")
    xi = np.asarray(xi_coeffs, dtype=float)
    if xi.shape != (state.N,):
        raise ShapeError(f"xi_coeffs must have shape ({state.N},), got {xi.shape}")
    return float(state.coeffs[component] @ xi)


def _coeffs_of(state) -> np.ndarray:
    return state.coeffs if isinstance(state, FieldState) else np.asarray(state, dtype=float)


def polymer_path(state: FieldState | np.ndarray, gb: GramBasis) -> np.ndarray:
    """``d x M`` polymer positions at the grid times.

    Also accepts a raw coefficient array with arbitrary leading batch axes.
    """
    c = _coeffs_of(state)
    if c.shape[-1] != gb.N:
        raise ShapeError(f"state has {c.shape[-1]} basis coordinates, basis has {gb.N}")
    return c @ gb.path_matrix


def path_at(state: FieldState | np.ndarray, gb: GramBasis, tau) -> np.ndarray:
    """Path at arbitrary times by linear interpolation between grid points.

    Intended for diagnostics only; ``tau = 0`` maps to the origin.
    """
    path = polymer_path(state, gb)
    knots = np.concatenate([[0.0], gb.grid])
    vals = np.concatenate([np.zeros(path.shape[:-1] + (1,)), path], axis=-1)
    tau = np.asarray(tau, dtype=float)
    flat = vals.reshape(-1, vals.shape[-1])
    out = np.stack([np.interp(tau, knots, row) for row in flat])
    return out.reshape(vals.shape[:-1] + tau.shape)
