"""Full diagnostic suite run by ``fedwards verify``."""

from __future__ import annotations

import logging
from pathlib import Path

from . import diagnostics as dg
from . import observables as obs
from .chain import ChainRecord
from .errors import IncompatibleConfigs, InsufficientData
from .kernel import basis_for
from .oracle import WeightedEnsemble, expectation

__all__ = ["COMPAT_FIELDS", "check_compatible", "run_suite", "load_oracle"]

log = logging.getLogger(__name__)

COMPAT_FIELDS = ("H", "d", "g", "T", "epsilon", "N", "M")
ENSEMBLE_FILE = "ensemble.npz"
SUMMARY_FILE = "summary.json"
# sd of QV/(2t) is sqrt(2 dt / t); keep it below a third of the 0.05 band at t=50
QV_MAX_DT = 50.0 * (0.05 / 3.0) ** 2 / 2.0


def check_compatible(a, b) -> None:
    diff = [f for f in COMPAT_FIELDS if getattr(a, f) != getattr(b, f)]
    if diff:
        detail = ", ".join(f"{f}: {getattr(a, f)!r} vs {getattr(b, f)!r}" for f in diff)
        raise IncompatibleConfigs(f"chain and oracle disagree on {detail}")


def load_oracle(path) -> WeightedEnsemble:
    p = Path(path)
    if p.is_dir():
        p = p / ENSEMBLE_FILE
    elif p.suffix == ".json":
        p = p.with_name(ENSEMBLE_FILE)
    return WeightedEnsemble.load(p)


def run_suite(chain: ChainRecord, ens: WeightedEnsemble, *, burn_in: int | None = None) -> tuple[list[dg.DiagnosticReport], list[dict]]:
    """Run every applicable diagnostic; returns ``(reports, skipped)``."""
    check_compatible(chain.params, ens.params)
    params = chain.params
    gb = basis_for(params)
    burn = chain.steps // 10 if burn_in is None else burn_in
    reports: list[dg.DiagnosticReport] = []
    skipped: list[dict] = []

    for name in obs.NAMES:
        if name not in chain.traces:
            skipped.append({"name": f"chain_vs_oracle[{name}]", "reason": "observable not recorded"})
            continue
        try:
            a = dg.ergodic_average(chain, name, burn)
        except InsufficientData as exc:
            skipped.append({"name": f"chain_vs_oracle[{name}]", "reason": str(exc)})
            continue
        b = expectation(ens, name)
        reports.append(dg.z_report(f"chain_vs_oracle[{name}]", a, b, burn_in=burn))

    for u in ("coord", "one"):
        for i in range(params.d):
            for k in range(gb.N):
                reports.append(dg.ibp_residual(ens, (i, k), u, gb, params))

    has_noise = {"coords", "drift"} <= set(chain.traces)
    if chain.scheme == "mala" or not has_noise:
        skipped.append({"name": "fukushima", "reason": "needs an unadjusted scheme with coords and drift recorded"})
    elif chain.dt > QV_MAX_DT:
        skipped.append({"name": "fukushima", "reason": f"dt={chain.dt} too coarse; realised QV over t=50 needs dt <= {QV_MAX_DT:.4g}"})
    else:
        try:
            reports.append(dg.fukushima_qv(chain, (0, 0), params))
            other = (0, 1) if gb.N > 1 else (1, 0)
            if other[0] < params.d:
                reports.append(dg.cross_variation(chain, (0, 0), other))
        except InsufficientData as exc:
            skipped.append({"name": "fukushima", "reason": str(exc)})

    if params.g == 0 and "coords" in chain.traces:
        coords = chain.traces["coords"][burn:]
        for i in range(params.d):
            for k in range(gb.N):
                try:
                    reports.append(dg.ks_test(coords[:, i, k], "norm", name=f"ks({i},{k})"))
                except InsufficientData as exc:
                    skipped.append({"name": f"ks({i},{k})", "reason": str(exc)})

    defects = dg.refinement_defects(chain.snapshots[-1], params)
    ratios = [defects[j + 1] / defects[j] if defects[j] > 0 else 0.0 for j in range(len(defects) - 1)]
    worst = max(ratios) if ratios else 0.0
    reports.append(
        dg.DiagnosticReport(
            "continuity_refinement",
            worst,
            1.0,
            worst < 1.0,
            {"rule": "statistic < threshold (largest ratio of successive defects)", "defects": defects},
        )
    )
    reports.append(
        dg.DiagnosticReport(
            "bounded_second_moment",
            chain.max_sq_norm,
            10.0,
            chain.max_sq_norm <= 10.0,
            {"rule": "statistic <= threshold (max |x|^2/(dN) along the chain)"},
        )
    )
    return reports, skipped
