"""Langevin dynamics for the truncated Edwards measure.

In orthonormal coordinates the target density is proportional to
``exp(-|x|^2/2 - g L(x))`` and the quantization SDE reads
``dX = sqrt(2) dW + b(X) dt`` with drift ``b(x) = -(x + g grad L(x))``.
At ``g = 0`` this is the Ornstein-Uhlenbeck process whose stationary law is
the Gaussian reference measure.

Three integrators are provided: Euler-Maruyama, a Strang splitting that
integrates the linear part exactly, and a Metropolis-adjusted Langevin step
that is exactly reversible for the truncated target.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .field import FieldState
from .kernel import GramBasis
from .localtime import grid_weight, value_and_grad
from .model import ModelParams, RngStream

__all__ = [
    "SCHEMES",
    "DriftEval",
    "StepperConfig",
    "Langevin",
    "drift",
    "drift_sign",
    "log_target",
    "log_proposal",
    "step_euler",
    "step_ou_split",
    "step_mala",
    "tune_mala_dt",
]

SCHEMES = ("euler_maruyama", "ou_splitting", "mala")

# Mutation hook for the verification suite: FEDWARDS_FLIP_DRIFT_SIGN=1 builds
# the drift with the wrong overall sign.
_DRIFT_SIGN = 1.0 if os.environ.get("FEDWARDS_FLIP_DRIFT_SIGN") else -1.0


def drift_sign() -> float:
    return _DRIFT_SIGN


@dataclass(frozen=True, eq=False)
class DriftEval:
    """Drift at one state, with the local-time quantities it was built from."""

    drift: np.ndarray
    local_time: float
    grad: np.ndarray
    path: np.ndarray


@dataclass(frozen=True)
class StepperConfig:
    scheme: str
    dt: float
    g: float

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise DomainError(f"unknown scheme {self.scheme!r}; expected one of {SCHEMES}")
        if not self.dt >= 0 or not math.isfinite(self.dt):
            raise DomainError(f"dt must be finite and >= 0, got {self.dt}")
        if self.g < 0:
            raise DomainError(f"g must be >= 0, got {self.g}")

    @classmethod
    def from_params(cls, params: ModelParams, scheme: str, dt: float | None = None) -> "StepperConfig":
        return cls(scheme=scheme, dt=params.dt if dt is None else dt, g=params.g)


def _gen(rng) -> np.random.Generator:
    return rng.generator() if isinstance(rng, RngStream) else rng


class Langevin:
    """Stateless transition kernels bound to one basis and parameter set.

    All transitions map ``(coeffs, cached DriftEval, generator)`` to the
    successor; the cache is the evaluation at ``coeffs`` and is reused by the
    next step, so each MALA step costs one local-time evaluation.
    """

    def __init__(self, gb: GramBasis, params: ModelParams, cfg: StepperConfig, sign: float | None = None):
        self.gb = gb
        self.params = params
        self.cfg = cfg
        self.g = cfg.g
        self.eps = params.epsilon
        self.weight = grid_weight(gb.grid)
        self.sign = drift_sign() if sign is None else sign
        self.shape = (params.d, gb.N)

    def evaluate(self, coeffs: np.ndarray) -> DriftEval:
        L, grad, path = value_and_grad(coeffs, self.gb, self.eps, self.weight)
        return DriftEval(drift=self.sign * (coeffs + self.g * grad), local_time=L, grad=grad, path=path)

    def log_target(self, coeffs: np.ndarray, ev: DriftEval) -> float:
        return -0.5 * float(np.sum(coeffs * coeffs)) - self.g * ev.local_time

    def log_proposal(self, x: np.ndarray, ev_x: DriftEval, y: np.ndarray, dt: float) -> float:
        """Log density (up to a constant) of proposing ``y`` from ``x``."""
        r = y - x - dt * ev_x.drift
        return -float(np.sum(r * r)) / (4.0 * dt)

    def euler(self, x, ev, gen):
        dt = self.cfg.dt
        y = x + dt * ev.drift + math.sqrt(2.0 * dt) * gen.standard_normal(self.shape)
        return y, self.evaluate(y)

    def ou_split(self, x, ev, gen):
        dt = self.cfg.dt
        half = 0.5 * dt * self.g
        y = x - half * ev.grad if self.g else x
        decay = math.exp(-dt)
        y = decay * y + math.sqrt(-math.expm1(-2.0 * dt)) * gen.standard_normal(self.shape)
        ev_y = self.evaluate(y)
        if self.g:
            y = y - half * ev_y.grad
            ev_y = self.evaluate(y)
        return y, ev_y

    def mala(self, x, ev, gen):
        """One MALA transition; returns ``(coeffs, eval, accepted, log_alpha)``."""
        dt = self.cfg.dt
        if dt == 0.0:
            return x, ev, True, 0.0
        y = x + dt * ev.drift + math.sqrt(2.0 * dt) * gen.standard_normal(self.shape)
        ev_y = self.evaluate(y)
        log_alpha = (
            self.log_target(y, ev_y)
            - self.log_target(x, ev)
            + self.log_proposal(y, ev_y, x, dt)
            - self.log_proposal(x, ev, y, dt)
        )
        u = gen.random()
        if log_alpha >= 0.0 or u < math.exp(log_alpha):
            return y, ev_y, True, log_alpha
        return x, ev, False, log_alpha


def drift(state: FieldState, gb: GramBasis, params: ModelParams) -> DriftEval:
    """Drift ``-(x + g grad L(x))`` at ``state``."""
    cfg = StepperConfig("euler_maruyama", params.dt, params.g)
    return Langevin(gb, params, cfg).evaluate(np.asarray(state.coeffs, dtype=float))


def log_target(state: FieldState, gb: GramBasis, params: ModelParams) -> float:
    """Unnormalised log density ``-|x|^2/2 - g L(x)`` of the truncated measure."""
    kern = Langevin(gb, params, StepperConfig("mala", params.dt, params.g))
    c = np.asarray(state.coeffs, dtype=float)
    return kern.log_target(c, kern.evaluate(c))


def log_proposal(x: FieldState, y: FieldState, gb: GramBasis, params: ModelParams, dt: float) -> float:
    kern = Langevin(gb, params, StepperConfig("mala", dt, params.g))
    cx = np.asarray(x.coeffs, dtype=float)
    return kern.log_proposal(cx, kern.evaluate(cx), np.asarray(y.coeffs, dtype=float), dt)


def _run_one(method: str, state, gb, params, cfg, rng, cache):
    kern = Langevin(gb, params, cfg)
    x = np.array(state.coeffs, dtype=float)
    ev = cache if cache is not None else kern.evaluate(x)
    return kern, x, ev, getattr(kern, method)(x, ev, _gen(rng))


def step_euler(state: FieldState, gb: GramBasis, params: ModelParams, cfg: StepperConfig, rng, cache: DriftEval | None = None) -> FieldState:
    """Euler-Maruyama: ``x + dt b(x) + sqrt(2 dt) xi``."""
    if cfg.scheme != "euler_maruyama":
        raise DomainError("step_euler needs scheme='euler_maruyama'")
    _, _, _, (y, _) = _run_one("euler", state, gb, params, cfg, rng, cache)
    return state.advanced(y, cfg.dt)


def step_ou_split(state: FieldState, gb: GramBasis, params: ModelParams, cfg: StepperConfig, rng, cache: DriftEval | None = None) -> FieldState:
    """Half kick by ``-g grad L``, exact OU flow over ``dt``, half kick."""
    if cfg.scheme != "ou_splitting":
        raise DomainError("step_ou_split needs scheme='ou_splitting'")
    _, _, _, (y, _) = _run_one("ou_split", state, gb, params, cfg, rng, cache)
    return state.advanced(y, cfg.dt)


def step_mala(state: FieldState, gb: GramBasis, params: ModelParams, cfg: StepperConfig, rng, cache: DriftEval | None = None):
    """Metropolis-adjusted Langevin step.

    Returns
    -------
    (FieldState, bool, float)
        Successor state, acceptance flag and the log acceptance ratio.
    """
    if cfg.scheme != "mala":
        raise DomainError("step_mala needs scheme='mala'")
    _, _, _, (y, _, accepted, log_alpha) = _run_one("mala", state, gb, params, cfg, rng, cache)
    return state.advanced(y, cfg.dt), accepted, log_alpha


def tune_mala_dt(
    gb: GramBasis,
    params: ModelParams,
    rng: RngStream | np.random.Generator,
    *,
    target: float = 0.6,
    band: tuple[float, float] = (0.4, 0.8),
    dt0: float | None = None,
    rounds: int = 12,
    steps_per_round: int = 400,
) -> tuple[float, float]:
    """Pick a MALA step whose acceptance rate lies in ``band``.

    Runs short pilot chains and adjusts ``log dt`` by the acceptance error.
    Only the returned ``dt`` is used afterwards, so the production chain keeps
    its exact stationary law.

    Returns
    -------
    dt, rate
        Chosen step and the acceptance rate of its final pilot round.
    """
    gen = _gen(rng)
    dt = params.dt if dt0 is None else dt0
    x = gen.standard_normal((params.d, gb.N))
    rate = 0.0
    for r in range(rounds):
        kern = Langevin(gb, params, StepperConfig("mala", dt, params.g))
        ev = kern.evaluate(x)
        acc = 0
        for _ in range(steps_per_round):
            x, ev, ok, _ = kern.mala(x, ev, gen)
            acc += ok
        rate = acc / steps_per_round
        if (band[0] <= rate <= band[1] and abs(rate - target) < 0.05) or r == rounds - 1:
            break
        dt *= math.exp(2.0 * (rate - target) / math.sqrt(r + 1))
    return dt, rate
