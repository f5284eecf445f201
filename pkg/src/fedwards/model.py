"""Model parameters, validation and the random stream policy."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "ModelParams",
    "RngStream",
    "validate",
    "params_from_mapping",
    "chain_stream",
    "oracle_stream",
    "pilot_stream",
]

_U64 = 1 << 64

# stream_id namespaces: chains use [0, 2**32), everything else sits above
_ORACLE_BASE = 1 << 32
_PILOT_BASE = 2 << 32


@dataclass(frozen=True)
class ModelParams:
    """Physical and numerical configuration of one simulation.

    Parameters
    ----------
    H : float
        Hurst parameter, ``0 < H < 1``.
    d : int
        Spatial dimension; ``d * H < 1`` is required.
    g : float
        Coupling of the self-intersection penalty, ``g >= 0``.
    T : float
        Function-time horizon of the polymer.
    epsilon : float
        Variance of the Gaussian mollifier replacing the delta function.
    N : int
        Number of retained basis vectors.
    M : int
        Number of function-time grid points, ``M >= N``.
    dt : float
        Compute-time step of the samplers.
    seed : int
        Unsigned 64-bit master seed.
    """

    H: float = 0.4
    d: int = 2
    g: float = 0.1
    T: float = 1.0
    epsilon: float = 0.01
    N: int = 12
    M: int = 128
    dt: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        validate(self)

    def replace(self, **changes: Any) -> "ModelParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        """SHA-256 of the canonical JSON encoding; stable across runs."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @property
    def dtau(self) -> float:
        return self.T / self.M

    def stream(self, stream_id: int) -> "RngStream":
        return RngStream(self.seed, stream_id)


def _is_int(x: Any) -> bool:
    return isinstance(x, (int, np.integer)) and not isinstance(x, bool)


def validate(params: ModelParams) -> ModelParams:
    """Check every parameter constraint and return ``params`` unchanged.

    Raises
    ------
    DomainError
        Naming the first violated constraint.
    """
    p = params
    for name in ("d", "N", "M", "seed"):
        if not _is_int(getattr(p, name)):
            raise DomainError(f"{name} must be an integer, got {getattr(p, name)!r}")
    for name in ("H", "g", "T", "epsilon", "dt"):
        v = getattr(p, name)
        if isinstance(v, bool) or not isinstance(v, (int, float, np.floating, np.integer)):
            raise DomainError(f"{name} must be a real number, got {v!r}")
        if not math.isfinite(v):
            raise DomainError(f"{name} must be finite")
    if not 0.0 < p.H < 1.0:
        raise DomainError(f"0<H<1 violated (H={p.H})")
    if p.d < 1:
        raise DomainError(f"d>=1 violated (d={p.d})")
    if not p.d * p.H < 1.0:
        raise DomainError(f"dH<1 violated (d*H={p.d * p.H})")
    if p.g < 0:
        raise DomainError(f"g>=0 violated (g={p.g})")
    if p.T <= 0:
        raise DomainError(f"T>0 violated (T={p.T})")
    if p.epsilon <= 0:
        raise DomainError(f"epsilon>0 violated (epsilon={p.epsilon})")
    if p.dt <= 0:
        raise DomainError(f"dt>0 violated (dt={p.dt})")
    if p.N < 1:
        raise DomainError(f"N>=1 violated (N={p.N})")
    if p.M < p.N:
        raise DomainError(f"N<=M violated (N={p.N}, M={p.M})")
    if not 0 <= p.seed < _U64:
        raise DomainError(f"seed must be an unsigned 64-bit integer (seed={p.seed})")
    return params


PARAM_FIELDS = tuple(f.name for f in dataclasses.fields(ModelParams))


def params_from_mapping(
    mapping: Mapping[str, Any], extra_keys: frozenset[str] | set[str] = frozenset()
) -> tuple[ModelParams, dict[str, Any]]:
    """Split a flat config mapping into :class:`ModelParams` and extra keys.

    Unknown keys are rejected so that typos fail loudly.
    """
    unknown = set(mapping) - set(PARAM_FIELDS) - set(extra_keys)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    fields = {k: mapping[k] for k in PARAM_FIELDS if k in mapping}
    for k in ("H", "g", "T", "epsilon", "dt"):
        if k in fields and _is_int(fields[k]):
            fields[k] = float(fields[k])
    extras = {k: mapping[k] for k in mapping if k in extra_keys}
    return ModelParams(**fields), extras


@dataclass(frozen=True)
class RngStream:
    """Counter-based random stream keyed by ``(seed, stream_id)``.

    Backed by Philox, so equal keys reproduce the same numbers and distinct
    stream ids give independent sequences without coordination.
    """

    seed: int
    stream_id: int

    def __post_init__(self) -> None:
        if not (0 <= self.seed < _U64 and 0 <= self.stream_id < _U64):
            raise DomainError("seed and stream_id must be unsigned 64-bit integers")

    def bit_generator(self) -> np.random.Philox:
        return np.random.Philox(key=self.seed | (self.stream_id << 64))

    def generator(self) -> np.random.Generator:
        return np.random.Generator(self.bit_generator())


def chain_stream(params: ModelParams, chain: int = 0) -> RngStream:
    return params.stream(chain)


def oracle_stream(params: ModelParams, batch: int) -> RngStream:
    return params.stream(_ORACLE_BASE + batch)


def pilot_stream(params: ModelParams, chain: int = 0) -> RngStream:
    return params.stream(_PILOT_BASE + chain)
