"""Command-line entry point: ``fedwards quantize | oracle | verify | paths``.

Exit codes: 0 success (all diagnostics pass), 1 diagnostic failure,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .chain import CHAIN_FILE, load_chain, load_config, manifest, run_chains
from .errors import ConfigError, DomainError, FedwardsError
from .field import polymer_path
from .io import write_json, write_path_csv
from .kernel import basis_for
from .oracle import build_ensemble, summary
from .verify import ENSEMBLE_FILE, SUMMARY_FILE, load_oracle, run_suite

log = logging.getLogger("fedwards")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def cmd_quantize(args) -> int:
    params, run = load_config(args.config)
    k = args.chains if args.chains is not None else run.n_chains
    dirs = run_chains(params, run, args.out, n_chains=k, resume=args.resume)
    for d in dirs:
        log.info("wrote %s", Path(d) / CHAIN_FILE)
    return EXIT_OK


def cmd_oracle(args) -> int:
    params, run = load_config(args.config)
    gb = basis_for(params)
    ens = build_ensemble(params, gb, run.count)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    doc = summary(ens)
    ens.save(out / ENSEMBLE_FILE)
    write_json(out / SUMMARY_FILE, doc)
    write_json(out / "manifest.json", manifest(params, run, kind="oracle", files=[ENSEMBLE_FILE, SUMMARY_FILE]))
    if doc["degenerate"]:
        log.warning("ensemble is degenerate (ess=%.3g); standard errors undefined", doc["ess"])
    log.info("oracle: count=%d ess=%.1f", doc["count"], doc["ess"])
    return EXIT_OK


def cmd_verify(args) -> int:
    chain = load_chain(args.chain)
    ens = load_oracle(args.oracle)
    reports, skipped = run_suite(chain, ens)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "reports.json", [r.to_dict() for r in reports])
    write_json(
        out / "manifest.json",
        manifest(chain.params, chain.run, kind="verify", oracle_seed=ens.params.seed, skipped=skipped,
                 chain_config_hash=chain.params.digest(), oracle_config_hash=ens.params.digest()),
    )
    failed = [r for r in reports if not r.passed]
    for r in reports:
        log.info("%-32s %s  statistic=%.4g", r.name, "PASS" if r.passed else "FAIL", r.statistic)
    log.info("%d/%d diagnostics passed", len(reports) - len(failed), len(reports))
    return EXIT_FAIL if failed else EXIT_OK


def _parse_selection(selection: str | None, count: int | None, available: int) -> list[int]:
    if selection is not None and count is not None:
        raise ConfigError("use either --snapshots or --count")
    if count is not None:
        if not 1 <= count <= available:
            raise ConfigError(f"requested {count} snapshots; available range is 1..{available}")
        return list(range(available - count, available))
    if selection is None or selection == "all":
        return list(range(available))
    picks = [int(s) for s in selection.split(",") if s.strip()]
    bad = [i for i in picks if not 0 <= i < available]
    if bad:
        raise ConfigError(f"snapshot indices {bad} out of range; available 0..{available - 1}")
    return picks


def cmd_paths(args) -> int:
    chain = load_chain(args.chain)
    gb = basis_for(chain.params)
    picks = _parse_selection(args.snapshots, args.count, chain.snapshots.shape[0])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for i in picks:
        step = int(chain.snapshot_steps[i])
        write_path_csv(out / f"path_{step:09d}.csv", gb.grid, polymer_path(chain.snapshots[i], gb))
    log.info("wrote %d path files to %s", len(picks), out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fedwards", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="only report errors")
    sub = parser.add_subparsers(dest="command", required=True)

    q = sub.add_parser("quantize", help="run Langevin/MALA chains")
    q.add_argument("--config", required=True)
    q.add_argument("--out", required=True)
    q.add_argument("--resume", default=None, help="checkpoint file (or run directory) to continue from")
    q.add_argument("--chains", type=int, default=None)
    q.set_defaults(func=cmd_quantize)

    o = sub.add_parser("oracle", help="importance-sampling reference estimates")
    o.add_argument("--config", required=True)
    o.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    v = sub.add_parser("verify", help="run the diagnostic suite on a chain and an oracle")
    v.add_argument("chain")
    v.add_argument("oracle")
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    p = sub.add_parser("paths", help="export polymer paths of recorded snapshots as CSV")
    p.add_argument("chain")
    p.add_argument("--out", required=True)
    p.add_argument("--snapshots", default=None, help="comma-separated snapshot indices or 'all'")
    p.add_argument("--count", type=int, default=None, help="export the last COUNT snapshots")
    p.set_defaults(func=cmd_paths)

    for sp in (q, o, v, p):
        sp.add_argument("--quiet", action="store_true", help=argparse.SUPPRESS, default=argparse.SUPPRESS)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, DomainError) as exc:
        log.error("error: %s", exc)
        return EXIT_USAGE
    except FedwardsError as exc:
        log.error("error: %s", exc)
        return EXIT_FAIL
    except OSError as exc:
        log.error("error: %s", exc)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
