"""Independent ground truth for chain measurements.

Edwards-measure expectations are estimated by self-normalised importance
sampling from i.i.d. Gaussian prior draws with log weights ``-g L``; the
local-time gradient is checked against central finite differences.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import observables as obs
from .errors import DegenerateWeights, DomainError
from .field import FieldState, sample_prior_batch
from .io import read_npz, write_npz
from .kernel import GramBasis
from .localtime import grid_weight
from ._backend import kernels
from .model import ModelParams, RngStream, oracle_stream

__all__ = [
    "WeightedEnsemble",
    "build_ensemble",
    "expectation",
    "fd_gradient",
    "normalized_weights",
    "MIN_ESS",
]

MIN_ESS = 10.0
BATCH = 4096


def normalized_weights(log_weights) -> np.ndarray:
    lw = np.asarray(log_weights, dtype=float)
    if lw.size and np.all(lw == lw[0]):
        return np.full(lw.shape, 1.0 / lw.size)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def _ess(log_weights) -> float:
    lw = np.asarray(log_weights, dtype=float)
    if lw.size and np.all(lw == lw[0]):
        return float(lw.size)
    w = normalized_weights(lw)
    return float(1.0 / np.sum(w * w))


@dataclass(frozen=True, eq=False)
class WeightedEnsemble:
    """Prior draws with Edwards log weights.

    ``coeffs`` has shape ``(count, d, N)``; ``local_times`` and ``grads`` hold
    the local time and its gradient at each draw, and ``values`` caches the
    built-in observables.
    """

    params: ModelParams
    coeffs: np.ndarray
    local_times: np.ndarray
    grads: np.ndarray
    log_weights: np.ndarray
    ess: float
    values: dict = field(default_factory=dict)

    @property
    def count(self) -> int:
        return self.coeffs.shape[0]

    @property
    def weights(self) -> np.ndarray:
        return normalized_weights(self.log_weights)

    @property
    def states(self) -> list[FieldState]:
        return [FieldState(c) for c in self.coeffs]

    def reweighted(self, log_weights) -> "WeightedEnsemble":
        """Same draws under different log weights (used for invariance checks)."""
        lw = np.asarray(log_weights, dtype=float)
        return WeightedEnsemble(self.params, self.coeffs, self.local_times, self.grads, lw, _ess(lw), self.values)

    def save(self, path: str | os.PathLike):
        arrays = {
            "coeffs": self.coeffs,
            "local_times": self.local_times,
            "grads": self.grads,
            "log_weights": self.log_weights,
        }
        arrays.update({f"value_{k}": v for k, v in self.values.items()})
        meta = {"kind": "WeightedEnsemble", "params": self.params.to_dict(), "ess": self.ess}
        return write_npz(path, arrays, meta)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "WeightedEnsemble":
        arrays, meta = read_npz(path)
        if meta.get("kind") != "WeightedEnsemble":
            raise ValueError(f"{path} does not hold a WeightedEnsemble")
        values = {k[len("value_"):]: v for k, v in arrays.items() if k.startswith("value_")}
        return cls(
            params=ModelParams(**meta["params"]),
            coeffs=arrays["coeffs"],
            local_times=arrays["local_times"],
            grads=arrays["grads"],
            log_weights=arrays["log_weights"],
            ess=meta["ess"],
            values=values,
        )


def _batch(params: ModelParams, gb: GramBasis, n: int, gen: np.random.Generator, weight: float):
    coeffs = sample_prior_batch(gb, params.d, n, gen)
    paths = coeffs @ gb.path_matrix
    L, S = kernels.value_force_batch(paths, params.epsilon, weight)
    grads = (2.0 * weight) * (S @ gb.path_matrix.T)
    return coeffs, L, grads, paths[..., -1]


def build_ensemble(
    params: ModelParams,
    gb: GramBasis,
    count: int,
    rng: RngStream | None = None,
    *,
    workers: int = 1,
) -> WeightedEnsemble:
    """Draw ``count`` prior states and weight them by ``exp(-g L)``.

    Draws are generated in fixed-size batches; batch ``b`` uses the oracle
    stream ``b`` of ``params.seed`` (or sub-streams of ``rng`` when given),
    so the ensemble does not depend on ``workers``.
    """
    if count < 1:
        raise DomainError("count must be >= 1")
    weight = grid_weight(gb.grid)
    sizes = [min(BATCH, count - s) for s in range(0, count, BATCH)]

    def stream(b: int) -> RngStream:
        if rng is None:
            return oracle_stream(params, b)
        return RngStream(rng.seed, (rng.stream_id + b) % (1 << 64))

    def job(b: int):
        return _batch(params, gb, sizes[b], stream(b).generator(), weight)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(job, range(len(sizes))))
    else:
        parts = [job(b) for b in range(len(sizes))]

    coeffs = np.concatenate([p[0] for p in parts])
    L = np.concatenate([p[1] for p in parts])
    grads = np.concatenate([p[2] for p in parts])
    ends = np.concatenate([p[3] for p in parts])
    lw = -params.g * L if params.g else np.zeros_like(L)
    values = {"f1": obs.f1(coeffs), "f2": L.copy(), "f3": np.sum(ends**2, axis=-1)}
    return WeightedEnsemble(params, coeffs, L, grads, lw, _ess(lw), values)


def _values_of(ens: WeightedEnsemble, f) -> np.ndarray:
    if isinstance(f, str):
        return ens.values[f]
    if callable(f):
        return np.asarray(f(ens.coeffs), dtype=float)
    vals = np.asarray(f, dtype=float)
    if vals.shape != (ens.count,):
        raise ValueError(f"observable values must have shape ({ens.count},)")
    return vals


def expectation(ens: WeightedEnsemble, f: str | Callable | np.ndarray) -> tuple[float, float]:
    """Self-normalised estimate of ``E[f]`` and its delta-method standard error.

    ``f`` is a built-in observable name, a callable on the ``(count, d, N)``
    coefficient array, or precomputed per-draw values.
    """
    if ens.ess < MIN_ESS:
        raise DegenerateWeights(f"effective sample size {ens.ess:.3g} < {MIN_ESS}")
    w = ens.weights
    vals = _values_of(ens, f)
    est = float(np.sum(w * vals))
    se = float(math.sqrt(np.sum(w * w * (vals - est) ** 2)))
    return est, se


def fd_gradient(state: FieldState | np.ndarray, gb: GramBasis, params: ModelParams, h: float) -> np.ndarray:
    """Central-difference gradient of the local time in every coordinate."""
    if not h > 0:
        raise DomainError("h must be > 0")
    c = np.array(state.coeffs if isinstance(state, FieldState) else state, dtype=float)
    weight = grid_weight(gb.grid)
    out = np.empty_like(c)
    for idx in np.ndindex(c.shape):
        up = c.copy()
        up[idx] += h
        dn = c.copy()
        dn[idx] -= h
        lu = kernels.value(up @ gb.path_matrix, params.epsilon, weight)
        ld = kernels.value(dn @ gb.path_matrix, params.epsilon, weight)
        out[idx] = (lu - ld) / (2.0 * h)
    return out


def summary(ens: WeightedEnsemble, names=obs.NAMES) -> dict:
    """JSON-ready summary ``{count, ess, g, degenerate, observables: [...]}``."""
    doc = {"count": ens.count, "ess": ens.ess, "g": ens.params.g, "degenerate": ens.ess < MIN_ESS, "observables": []}
    for name in names:
        if doc["degenerate"]:
            est, se = float(np.mean(ens.values[name])), None
        else:
            est, se = expectation(ens, name)
        doc["observables"].append({"name": name, "estimate": est, "std_error": se})
    return doc
