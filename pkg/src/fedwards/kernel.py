"""fBm covariance, indicator Gram matrices and the truncated orthonormal basis.

The Hilbert space is spanned by indicators ``1_[0,s)`` with inner product
given by the fBm covariance. On a function-time grid we diagonalise the Gram
matrix of those indicators and keep the ``N`` leading eigenvectors, scaled so
that they are orthonormal in the covariance inner product (a discrete
Karhunen-Loeve basis).
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, RankError
from .io import read_npz, write_npz

__all__ = [
    "GramBasis",
    "cov",
    "gram_matrix",
    "uniform_grid",
    "build_basis",
    "reconstruction_error",
    "basis_for",
    "ORTHONORMAL_TOL",
    "PSD_RTOL",
]

PSD_RTOL = 1e-10
ORTHONORMAL_TOL = 1e-8


def cov(H: float, s, t):
    """fBm covariance ``(t^2H + s^2H - |t-s|^2H) / 2``; broadcasts over arrays."""
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("cov requires s, t >= 0")
    two_h = 2.0 * H
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return float(out) if out.ndim == 0 else out


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d sequence")
    if grid[0] <= 0:
        raise DomainError("grid entries must be > 0")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    return grid


def gram_matrix(H: float, grid) -> np.ndarray:
    """Pairwise covariances of the grid indicators, exactly symmetric."""
    grid = _check_grid(grid)
    g = cov(H, grid[:, None], grid[None, :])
    g = np.atleast_2d(g)
    # cov is symmetric in exact arithmetic but |t-s| vs |s-t| rounding is not
    return np.triu(g) + np.triu(g, 1).T


def uniform_grid(T: float, M: int) -> np.ndarray:
    """``M`` equally spaced function times ``T/M, 2T/M, ..., T``."""
    if T <= 0 or M < 1:
        raise DomainError("uniform_grid needs T > 0 and M >= 1")
    return T * np.arange(1, M + 1, dtype=float) / M


@dataclass(frozen=True, eq=False)
class GramBasis:
    """Truncated orthonormal basis on a function-time grid.

    Attributes
    ----------
    H : float
    grid : (M,) ndarray
    gram : (M, M) ndarray
        ``gram[i, j] = cov(grid[i], grid[j])``.
    basis : (M, N) ndarray
        Column ``k`` holds the indicator coefficients of basis vector ``k``.
    path_matrix : (N, M) ndarray
        ``path_matrix[k, m]`` is the inner product of basis vector ``k`` with
        the indicator of ``[0, grid[m])``; equals ``basis.T @ gram``.
    eigenvalues : (N,) ndarray
        Retained Gram eigenvalues in decreasing order.
    tol_psd : float
    """

    H: float
    grid: np.ndarray
    gram: np.ndarray
    basis: np.ndarray
    path_matrix: np.ndarray
    eigenvalues: np.ndarray
    tol_psd: float

    def __post_init__(self) -> None:
        for name in ("grid", "gram", "basis", "path_matrix", "eigenvalues"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def N(self) -> int:
        return self.basis.shape[1]

    @property
    def M(self) -> int:
        return self.grid.shape[0]

    @property
    def T(self) -> float:
        return float(self.grid[-1])

    def orthonormality_defect(self) -> float:
        """Max entrywise deviation of ``basis.T @ gram @ basis`` from identity."""
        g = self.basis.T @ self.gram @ self.basis
        return float(np.max(np.abs(g - np.eye(self.N))))

    def save(self, path: str | os.PathLike) -> Path:
        arrays = {
            "grid": self.grid,
            "gram": self.gram,
            "basis": self.basis,
            "path_matrix": self.path_matrix,
            "eigenvalues": self.eigenvalues,
        }
        meta = {
            "kind": "GramBasis",
            "H": self.H,
            "N": self.N,
            "M": self.M,
            "tol_psd": self.tol_psd,
            "orthonormal_tol": ORTHONORMAL_TOL,
        }
        return write_npz(path, arrays, meta)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "GramBasis":
        arrays, meta = read_npz(path)
        if meta.get("kind") != "GramBasis":
            raise ValueError(f"{path} does not hold a GramBasis")
        return cls(H=meta["H"], tol_psd=meta["tol_psd"], **arrays)


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Flip each column so that its first non-negligible entry is positive."""
    vecs = vecs.copy()
    for k in range(vecs.shape[1]):
        col = vecs[:, k]
        scale = np.max(np.abs(col))
        nz = np.flatnonzero(np.abs(col) > 1e-12 * scale)
        if nz.size and col[nz[0]] < 0:
            vecs[:, k] = -col
    return vecs


def build_basis(gram, N: int, *, H: float = float("nan"), grid=None) -> GramBasis:
    """Discrete Karhunen-Loeve basis of size ``N`` for a Gram matrix.

    The ``N`` leading eigenvectors are scaled by inverse square-root
    eigenvalues so that ``basis.T @ gram @ basis`` is the identity.

    Raises
    ------
    DomainError
        If ``gram`` is not symmetric or has eigenvalues below ``-tol_psd``.
    RankError
        If fewer than ``N`` eigenvalues exceed ``tol_psd``.
    """
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise DomainError("gram must be a square matrix")
    if not np.array_equal(gram, gram.T):
        if not np.allclose(gram, gram.T, rtol=1e-14, atol=0):
            raise DomainError("gram must be symmetric")
        gram = 0.5 * (gram + gram.T)
    M = gram.shape[0]
    if not 1 <= N <= M:
        raise RankError(f"basis size N={N} outside [1, {M}]")
    if grid is None:
        grid = np.arange(1, M + 1, dtype=float)
    grid = np.asarray(grid, dtype=float)

    lam, vecs = np.linalg.eigh(gram)
    order = np.argsort(-lam, kind="stable")  # ties keep grid order
    lam, vecs = lam[order], vecs[:, order]
    tol_psd = PSD_RTOL * max(float(lam[0]), 0.0)
    if lam[-1] < -tol_psd:
        raise DomainError(f"gram is not positive semidefinite (min eigenvalue {lam[-1]:.3e})")
    rank = int(np.count_nonzero(lam > tol_psd))
    if rank < N:
        raise RankError(f"only {rank} eigenvalues exceed tol_psd={tol_psd:.3e}; cannot build N={N}")

    vecs = _fix_signs(vecs[:, :N])
    lam = lam[:N]
    basis = vecs / np.sqrt(lam)
    path_matrix = basis.T @ gram
    gb = GramBasis(H=H, grid=grid, gram=gram, basis=basis, path_matrix=path_matrix, eigenvalues=lam, tol_psd=tol_psd)
    defect = gb.orthonormality_defect()
    if defect > ORTHONORMAL_TOL:
        raise RankError(f"basis not orthonormal to {ORTHONORMAL_TOL} (defect {defect:.3e}); reduce N")
    return gb


def reconstruction_error(gb: GramBasis) -> float:
    """Largest truncated-Parseval defect ``|gram[m,m] - sum_k P[k,m]^2|``."""
    captured = np.sum(gb.path_matrix**2, axis=0)
    return float(np.max(np.abs(np.diag(gb.gram) - captured)))


@functools.lru_cache(maxsize=32)
def _basis_cached(H: float, T: float, M: int, N: int) -> GramBasis:
    grid = uniform_grid(T, M)
    return build_basis(gram_matrix(H, grid), N, H=H, grid=grid)


def basis_for(params, *, M: int | None = None, N: int | None = None, cache_dir: str | os.PathLike | None = None) -> GramBasis:
    """Basis on the uniform grid described by ``params``.

    Results are memoised in-process; with ``cache_dir`` they are also stored
    on disk keyed by ``(H, T, M, N)``.
    """
    M = params.M if M is None else M
    N = params.N if N is None else N
    key = (float(params.H), float(params.T), int(M), int(N))
    if cache_dir is None:
        return _basis_cached(*key)
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    target = cache_dir / "gram_H{:.17g}_T{:.17g}_M{}_N{}.npz".format(*key)
    if target.exists():
        return GramBasis.load(target)
    gb = _basis_cached(*key)
    gb.save(target)
    return gb
