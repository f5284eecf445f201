"""Statistical checks on recorded chains and weighted ensembles.

Every diagnostic returns a :class:`DiagnosticReport` (or an estimate with a
standard error). Standard errors of chain averages use the integrated
autocorrelation time from Geyer's initial positive sequence estimator.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import stats

from . import observables as obs
from .dynamics import drift_sign
from .errors import InsufficientData, ShapeError
from .field import FieldState, polymer_path
from .kernel import GramBasis, basis_for
from .oracle import WeightedEnsemble, expectation

__all__ = [
    "DiagnosticReport",
    "autocorrelation",
    "integrated_autocorr_time",
    "ibp_residual",
    "fukushima_qv",
    "cross_variation",
    "ergodic_average",
    "holder_exponent",
    "continuity_defect",
    "refinement_defects",
    "ks_test",
    "z_report",
]


@dataclass
class DiagnosticReport:
    """Outcome of one check.

    ``details["rule"]`` states how ``statistic`` is compared to ``threshold``.
    """

    name: str
    statistic: float
    threshold: float | list[float]
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["passed"] = bool(d["passed"])
        return d


# -- autocorrelation ---------------------------------------------------------


def autocorrelation(x, max_lag: int | None = None) -> np.ndarray:
    """Normalised autocorrelation ``rho[0..max_lag]`` of a 1-d series (FFT based)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    y = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(y, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n] / n
    if acov[0] == 0:
        rho = np.zeros(n)
        rho[0] = 1.0
    else:
        rho = acov / acov[0]
    return rho if max_lag is None else rho[: max_lag + 1]


def integrated_autocorr_time(x) -> float:
    """``1 + 2 sum_t rho_t`` truncated by Geyer's initial monotone sequence."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 4:
        raise InsufficientData("need at least 4 samples for an autocorrelation time")
    rho = autocorrelation(x)
    if np.all(rho[1:] == 0):
        return 1.0
    m = n // 2
    pairs = rho[0 : 2 * m : 2] + rho[1 : 2 * m : 2]
    neg = np.flatnonzero(pairs <= 0)
    pairs = pairs[: neg[0]] if neg.size else pairs
    pairs = np.minimum.accumulate(pairs)
    return float(max(-1.0 + 2.0 * pairs.sum(), 1.0 / n))


def _mean_se(x) -> tuple[float, float, float]:
    x = np.asarray(x, dtype=float)
    mean = float(x.mean())
    var = float(x.var())
    if var == 0.0:
        return mean, 0.0, 1.0
    tau = integrated_autocorr_time(x)
    return mean, math.sqrt(var * tau / x.size), tau


def z_report(name: str, a: tuple[float, float], b: tuple[float, float], limit: float = 3.0, **details) -> DiagnosticReport:
    """Compare two ``(estimate, std_error)`` pairs in units of combined SE."""
    diff = a[0] - b[0]
    se = math.hypot(a[1], b[1])
    z = abs(diff) / se if se > 0 else (0.0 if diff == 0 else math.inf)
    details = {"rule": "statistic <= threshold", "a": a[0], "a_se": a[1], "b": b[0], "b_se": b[1], **details}
    return DiagnosticReport(name, z, limit, z <= limit, details)


# -- integration by parts ----------------------------------------------------


def _direction(k, d: int) -> tuple[int, int]:
    if isinstance(k, (tuple, list)):
        i, j = int(k[0]), int(k[1])
    else:
        i, j = 0, int(k)
    if not 0 <= i < d:
        raise IndexError(f"component {i} out of range for d={d}")
    return i, j


def ibp_residual(
    ens: WeightedEnsemble,
    k,
    u: str | Callable,
    gb: GramBasis,
    params,
    *,
    h: float = 1e-4,
    sign: float | None = None,
    limit: float = 3.0,
) -> DiagnosticReport:
    """Gibbs integration-by-parts check ``E[du/dk] + E[u b_k] = 0``.

    ``k`` is a basis index (first spatial component) or a
    ``(component, index)`` pair. ``u`` is ``"coord"`` (the coordinate itself),
    ``"one"``, a built-in observable name, or a callable on the
    ``(count, d, N)`` coefficient array, differentiated by central
    differences with step ``h``. ``b_k`` is the drift coordinate
    ``sign * (x_k + g dL/dk)``; ``sign`` defaults to the model's drift sign.

    The statistic is ``|estimate| / SE`` of the combined integrand.
    """
    i, j = _direction(k, params.d)
    if not 0 <= j < gb.N:
        raise IndexError(f"basis index {j} out of range for N={gb.N}")
    sgn = drift_sign() if sign is None else sign
    c = ens.coeffs
    b = sgn * (c[:, i, j] + params.g * ens.grads[:, i, j])
    if u == "coord":
        uv, du = c[:, i, j], np.ones(ens.count)
    elif u == "one":
        uv, du = np.ones(ens.count), np.zeros(ens.count)
    elif isinstance(u, str):
        uv = ens.values[u]
        du = obs.gradient(u, c, ens.grads, gb.path_matrix)[:, i, j]
    else:
        uv = np.asarray(u(c), dtype=float)
        up, dn = c.copy(), c.copy()
        up[:, i, j] += h
        dn[:, i, j] -= h
        du = (np.asarray(u(up), dtype=float) - np.asarray(u(dn), dtype=float)) / (2.0 * h)
    est, se = expectation(ens, du + uv * b)
    stat = abs(est) / se if se > 0 else (0.0 if est == 0 else math.inf)
    label = u if isinstance(u, str) else getattr(u, "__name__", "u")
    return DiagnosticReport(
        f"ibp[{label}]({i},{j})",
        stat,
        limit,
        stat <= limit,
        {"rule": "statistic <= threshold", "estimate": est, "std_error": se, "ess": ens.ess, "sign": sgn},
    )


# -- Fukushima decomposition -------------------------------------------------


def _martingale_increments(chain, k, t: float, start: int = 0) -> np.ndarray:
    coords = chain.traces.get("coords")
    drifts = chain.traces.get("drift")
    if coords is None or drifts is None:
        raise InsufficientData("chain must record per-step 'coords' and 'drift'")
    i, j = _direction(k, coords.shape[1])
    n = int(round(t / chain.dt))
    if start + n >= coords.shape[0]:
        raise InsufficientData(f"chain has {coords.shape[0] - 1} steps; need {start + n} for t={t}")
    x = coords[start : start + n + 1, i, j]
    b = drifts[start : start + n, i, j]
    return np.diff(x) - b * chain.dt


def fukushima_qv(chain, k, params=None, *, t: float = 50.0, delta: float = 0.05, start: int = 0) -> DiagnosticReport:
    """Realised quadratic variation of the martingale part of ``u_k(X)``.

    The martingale increments are the coordinate increments minus
    ``b_k dt`` from the recorded drift. For a unit basis vector the
    quadratic variation over ``[0, t]`` should be ``2 t``; the statistic is
    ``QV / (2 t)`` and passes inside ``[1 - delta, 1 + delta]``.
    """
    dm = _martingale_increments(chain, k, t, start)
    stat = float(np.sum(dm * dm) / (2.0 * t))
    i, j = _direction(k, chain.traces["coords"].shape[1])
    return DiagnosticReport(
        f"fukushima_qv({i},{j})",
        stat,
        [1.0 - delta, 1.0 + delta],
        abs(stat - 1.0) <= delta,
        {"rule": "threshold[0] <= statistic <= threshold[1]", "t": t, "steps": int(dm.size), "dt": chain.dt},
    )


def cross_variation(chain, k1, k2, *, t: float = 50.0, limit: float = 3.0, start: int = 0) -> DiagnosticReport:
    """Realised cross variation of the driving noises of two directions, over ``t``.

    Orthonormal directions have zero cross variation; the statistic is
    ``|<W^k1, W^k2>_t / t|`` in units of its standard error.
    """
    a = _martingale_increments(chain, k1, t, start)
    b = _martingale_increments(chain, k2, t, start)
    prod = a * b / 2.0  # noise enters as sqrt(2) dW
    value = float(prod.sum() / t)
    se = float(prod.std() * math.sqrt(prod.size) / t)
    z = abs(value) / se if se > 0 else math.inf
    return DiagnosticReport(
        f"cross_variation({k1},{k2})",
        z,
        limit,
        z <= limit,
        {"rule": "statistic <= threshold", "value": value, "std_error": se, "t": t},
    )


# -- ergodic averages ----------------------------------------------------------


def ergodic_average(chain, f, burn_in: int = 0) -> tuple[float, float]:
    """Time average of ``f`` after ``burn_in`` steps with an IAT-based SE.

    ``f`` is a recorded trace name, a per-step array, or a callable applied
    to each recorded state snapshot (in which case ``burn_in`` counts steps
    and is converted to snapshots).
    """
    if isinstance(f, str):
        x = np.asarray(chain.traces[f], dtype=float)
        x = x[burn_in:]
    elif callable(f):
        keep = chain.snapshot_steps >= burn_in
        x = np.array([f(c) for c in chain.snapshots[keep]], dtype=float)
    else:
        x = np.asarray(f, dtype=float)[burn_in:]
    if x.size < 4:
        raise InsufficientData(f"only {x.size} samples after burn-in {burn_in}")
    mean, se, _ = _mean_se(x)
    return mean, se


# -- path regularity -------------------------------------------------------------


def holder_exponent(paths, grid, lags=None) -> tuple[float, float]:
    """Log-log slope of mean squared increments against lag.

    ``paths`` is a ``(count, d, M)`` array; for fractional Brownian paths the
    slope estimates ``2H``. Lags default to dyadic multiples of the grid step
    up to ``M/4``.
    """
    P = np.asarray(paths, dtype=float)
    if P.ndim == 2:
        P = P[None]
    if P.shape[0] < 100:
        raise InsufficientData(f"need >= 100 paths, got {P.shape[0]}")
    grid = np.asarray(grid, dtype=float)
    M = grid.size
    if P.shape[-1] != M:
        raise ShapeError("paths and grid disagree")
    step = grid[1] - grid[0]
    if np.max(np.abs(np.diff(grid) - step)) > 1e-9 * grid[-1]:
        raise ShapeError("holder_exponent needs a uniform grid")
    if lags is None:
        lags = [1 << j for j in range(int(math.log2(max(M // 4, 2))) + 1)]
    if len(lags) < 2:
        raise InsufficientData("need at least two lags")
    msq = []
    for lag in lags:
        inc = P[..., lag:] - P[..., :-lag]
        msq.append(np.mean(np.sum(inc * inc, axis=-2)))
    fit = stats.linregress(np.log(np.asarray(lags) * step), np.log(msq))
    return float(fit.slope), float(fit.stderr)


def continuity_defect(state: FieldState | np.ndarray, gb_coarse: GramBasis, gb_fine: GramBasis) -> float:
    """Largest gap between the paths a state defines on two nested grids.

    The coefficients are read in each grid's own basis; the gap is measured
    at the coarse grid points, which the fine grid must contain.
    """
    c = state.coeffs if isinstance(state, FieldState) else np.asarray(state, dtype=float)
    if gb_coarse.N != gb_fine.N or c.shape[-1] != gb_coarse.N:
        raise ShapeError("state and both bases must share the basis size N")
    fine = gb_fine.grid
    idx = np.searchsorted(fine, gb_coarse.grid)
    idx = np.clip(idx, 0, fine.size - 1)
    lo = np.clip(idx - 1, 0, fine.size - 1)
    pick = np.where(np.abs(fine[lo] - gb_coarse.grid) < np.abs(fine[idx] - gb_coarse.grid), lo, idx)
    if np.max(np.abs(fine[pick] - gb_coarse.grid)) > 1e-9 * fine[-1]:
        raise ShapeError("fine grid does not contain the coarse grid")
    a = polymer_path(c, gb_coarse)
    b = polymer_path(c, gb_fine)[..., pick]
    return float(np.max(np.abs(a - b)))


def refinement_defects(state, params, levels: int = 3, M0: int | None = None) -> list[float]:
    """Continuity defects over ``levels`` dyadic refinements ``M -> 2M -> ...``."""
    M0 = params.M if M0 is None else M0
    bases = [basis_for(params, M=M0 << j) for j in range(levels + 1)]
    return [continuity_defect(state, bases[j], bases[j + 1]) for j in range(levels)]


# -- distribution tests ------------------------------------------------------------


def ks_test(samples, cdf="norm", *, thin: int | None = None, level: float = 0.01, name: str = "ks") -> DiagnosticReport:
    """Kolmogorov-Smirnov test after thinning by the autocorrelation time.

    ``cdf`` may be a scipy distribution name, a callable CDF, or a second
    sample (two-sample test). The statistic reported is the p-value; the
    test passes when it is at least ``level``.
    """
    x = np.asarray(samples, dtype=float)
    if thin is None:
        thin = max(1, int(math.ceil(integrated_autocorr_time(x)))) if x.size >= 4 else 1
    x = x[::thin]
    if x.size < 100:
        raise InsufficientData(f"only {x.size} samples after thinning by {thin}; need >= 100")
    if isinstance(cdf, (str,)) or callable(cdf):
        res = stats.kstest(x, cdf)
    else:
        res = stats.ks_2samp(x, np.asarray(cdf, dtype=float))
    return DiagnosticReport(
        name,
        float(res.pvalue),
        level,
        bool(res.pvalue >= level),
        {"rule": "statistic >= threshold", "D": float(res.statistic), "n": int(x.size), "thin": int(thin)},
    )
