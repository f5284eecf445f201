"""Chain execution, recording and checkpoint/resume.

A chain records cheap per-step traces (the built-in observables and,
optionally, the coordinates and drift needed to rebuild the Fukushima
decomposition) and thinned full-state snapshots. Checkpoints hold
everything recorded so far plus the generator state, so a resumed run
writes exactly the bytes an uninterrupted run would.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
import platform
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from . import observables as obs
from ._backend import BACKEND
from .dynamics import SCHEMES, Langevin, StepperConfig
from .errors import CheckpointMismatch, ConfigError
from .io import read_json, read_npz, write_json, write_npz
from .kernel import GramBasis, basis_for
from .model import ModelParams, chain_stream, params_from_mapping

__all__ = ["RunConfig", "ChainRecord", "run_chain", "run_chains", "load_config", "load_chain", "manifest"]

log = logging.getLogger(__name__)

TRACE_NAMES = ("f1", "f2", "f3", "drift", "coords")
CHAIN_FILE = "chain.npz"
CHECKPOINT_FILE = "checkpoint.npz"


@dataclass(frozen=True)
class RunConfig:
    """Run-level settings that sit next to :class:`ModelParams` in a config file."""

    scheme: str = "mala"
    steps: int = 1000
    thin: int = 10
    checkpoint_every: int = 0
    n_chains: int = 1
    observables: tuple[str, ...] = TRACE_NAMES
    count: int = 100_000

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("steps", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("thin", "n_chains", "count"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        object.__setattr__(self, "observables", tuple(self.observables))
        bad = set(self.observables) - set(TRACE_NAMES)
        if bad:
            raise ConfigError(f"unknown observables {sorted(bad)}; choose from {TRACE_NAMES}")

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["observables"] = list(self.observables)
        return d


RUN_KEYS = frozenset(f.name for f in dataclasses.fields(RunConfig))


def load_config(path: str | os.PathLike) -> tuple[ModelParams, RunConfig]:
    """Read a flat JSON config holding model and run keys; unknown keys fail."""
    try:
        doc = read_json(path)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a flat JSON object")
    params, extras = params_from_mapping(doc, RUN_KEYS)
    try:
        return params, RunConfig(**extras)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


@dataclass(eq=False)
class ChainRecord:
    """Recorded trajectory of one chain.

    ``traces`` maps observable names to per-step arrays of length
    ``steps + 1`` (index 0 is the initial state); ``snapshots`` holds the
    full coefficients every ``thin`` steps.
    """

    params: ModelParams
    run: RunConfig
    scheme: str
    dt: float
    steps: int
    snapshots: np.ndarray
    snapshot_steps: np.ndarray
    traces: dict[str, np.ndarray]
    acceptance_rate: float | None
    rng_provenance: dict[str, Any]
    max_sq_norm: float
    chain_index: int = 0

    @property
    def compute_time(self) -> float:
        return self.steps * self.dt

    def _meta(self) -> dict[str, Any]:
        return {
            "kind": "ChainRecord",
            "params": self.params.to_dict(),
            "config_hash": self.params.digest(),
            "run": self.run.to_dict(),
            "scheme": self.scheme,
            "dt": self.dt,
            "steps": self.steps,
            "acceptance_rate": self.acceptance_rate,
            "rng_provenance": self.rng_provenance,
            "max_sq_norm": self.max_sq_norm,
            "chain_index": self.chain_index,
        }

    def save(self, path: str | os.PathLike) -> Path:
        arrays = {"snapshots": self.snapshots, "snapshot_steps": self.snapshot_steps}
        arrays.update({f"trace_{k}": v for k, v in self.traces.items()})
        return write_npz(path, arrays, self._meta())

    @classmethod
    def from_arrays(cls, arrays: dict, meta: dict) -> "ChainRecord":
        run = meta["run"]
        return cls(
            params=ModelParams(**meta["params"]),
            run=RunConfig(**run),
            scheme=meta["scheme"],
            dt=meta["dt"],
            steps=meta["steps"],
            snapshots=arrays["snapshots"],
            snapshot_steps=arrays["snapshot_steps"],
            traces={k[len("trace_"):]: v for k, v in arrays.items() if k.startswith("trace_")},
            acceptance_rate=meta["acceptance_rate"],
            rng_provenance=meta["rng_provenance"],
            max_sq_norm=meta["max_sq_norm"],
            chain_index=meta.get("chain_index", 0),
        )

    @classmethod
    def load(cls, path: str | os.PathLike) -> "ChainRecord":
        arrays, meta = read_npz(path)
        if meta.get("kind") != "ChainRecord":
            raise ValueError(f"{path} does not hold a ChainRecord")
        return cls.from_arrays(arrays, meta)

    def write_traces_csv(self, path: str | os.PathLike) -> Path:
        """Scalar traces as CSV: ``step,compute_time,<observables>``."""
        names = [n for n in obs.NAMES if n in self.traces]
        cols = [np.arange(self.steps + 1) * self.dt] + [self.traces[n] for n in names]
        body = np.column_stack(cols) if cols else np.empty((0, 0))
        lines = ["step,compute_time," + ",".join(names)]
        fmt = ",".join(["{:.17g}"] * len(cols))
        lines.extend(f"{i}," + fmt.format(*row) for i, row in enumerate(body))
        path = Path(path)
        path.write_text("\n".join(lines) + "\n")
        return path


def load_chain(path: str | os.PathLike) -> ChainRecord:
    p = Path(path)
    return ChainRecord.load(p / CHAIN_FILE if p.is_dir() else p)


def manifest(params: ModelParams, run: RunConfig, **extra) -> dict[str, Any]:
    return {
        "config_hash": params.digest(),
        "params": params.to_dict(),
        "run": run.to_dict(),
        "seed": params.seed,
        "versions": {
            "fedwards": __version__,
            "numpy": np.__version__,
            "python": platform.python_version(),
            "kernel_backend": BACKEND,
        },
        **extra,
    }


def _rng_state_json(gen: np.random.Generator) -> str:
    state = gen.bit_generator.state

    def enc(v):
        if isinstance(v, np.ndarray):
            return {"__array__": v.dtype.str, "data": v.tolist()}
        if isinstance(v, dict):
            return {k: enc(x) for k, x in v.items()}
        return v

    return json.dumps(enc(state), sort_keys=True)


def _restore_rng(gen: np.random.Generator, blob: str) -> None:
    def dec(v):
        if isinstance(v, dict) and "__array__" in v:
            return np.array(v["data"], dtype=np.dtype(v["__array__"]))
        if isinstance(v, dict):
            return {k: dec(x) for k, x in v.items()}
        return v

    gen.bit_generator.state = dec(json.loads(blob))


class _Recorder:
    def __init__(self, params: ModelParams, run: RunConfig, gb: GramBasis):
        n = run.steps + 1
        d, N = params.d, gb.N
        self.names = run.observables
        self.traces: dict[str, np.ndarray] = {}
        for name in self.names:
            shape = (n, d, N) if name in ("drift", "coords") else (n,)
            self.traces[name] = np.empty(shape)
        n_snap = run.steps // run.thin + 1
        self.snapshots = np.empty((n_snap, d, N))
        self.snapshot_steps = np.arange(n_snap, dtype=np.int64) * run.thin
        self.thin = run.thin
        self.end = gb.path_matrix[:, -1].copy()
        self.scale = 1.0 / (d * N)
        self.max_sq_norm = 0.0
        self.accepted = 0

    def record(self, n: int, x: np.ndarray, ev) -> None:
        t = self.traces
        if "f1" in t:
            t["f1"][n] = x[0, 0] * x[0, 0]
        if "f2" in t:
            t["f2"][n] = ev.local_time
        if "f3" in t:
            e = ev.path[:, -1]
            t["f3"][n] = float(e @ e)
        if "drift" in t:
            t["drift"][n] = ev.drift
        if "coords" in t:
            t["coords"][n] = x
        if n % self.thin == 0:
            self.snapshots[n // self.thin] = x
        q = float(np.vdot(x, x)) * self.scale
        if q > self.max_sq_norm:
            self.max_sq_norm = q

    def arrays_upto(self, n: int) -> dict[str, np.ndarray]:
        out = {f"trace_{k}": v[: n + 1] for k, v in self.traces.items()}
        k = n // self.thin + 1
        out["snapshots"] = self.snapshots[:k]
        return out

    def restore(self, arrays: dict[str, np.ndarray], n: int) -> None:
        for k, v in self.traces.items():
            v[: n + 1] = arrays[f"trace_{k}"]
        k = n // self.thin + 1
        self.snapshots[:k] = arrays["snapshots"]


def _write_checkpoint(path: Path, rec: _Recorder, n: int, x: np.ndarray, gen, params, run, dt, chain_index) -> None:
    arrays = rec.arrays_upto(n)
    arrays["coeffs"] = x
    meta = {
        "kind": "Checkpoint",
        "config_hash": params.digest(),
        "scheme": run.scheme,
        "dt": dt,
        "step": n,
        "thin": run.thin,
        "observables": list(run.observables),
        "chain_index": chain_index,
        "rng_state": _rng_state_json(gen),
        "accepted": rec.accepted,
        "max_sq_norm": rec.max_sq_norm,
    }
    write_npz(path, arrays, meta)


def run_chain(
    params: ModelParams,
    run: RunConfig,
    *,
    gb: GramBasis | None = None,
    chain_index: int = 0,
    out_dir: str | os.PathLike | None = None,
    resume: str | os.PathLike | None = None,
    dt: float | None = None,
    x0: np.ndarray | None = None,
    progress: bool = False,
) -> ChainRecord:
    """Run one chain of ``run.steps`` transitions.

    The initial state is a prior draw from the chain's stream unless ``x0``
    is given; ``dt`` overrides ``params.dt`` (e.g. a tuned MALA step). With
    ``out_dir`` the record, manifest, trace CSV and checkpoints are written
    there.
    """
    gb = basis_for(params) if gb is None else gb
    dt = params.dt if dt is None else float(dt)
    cfg = StepperConfig(run.scheme, dt, params.g)
    kern = Langevin(gb, params, cfg)
    move = {"euler_maruyama": kern.euler, "ou_splitting": kern.ou_split, "mala": kern.mala}[run.scheme]
    stream = chain_stream(params, chain_index)
    gen = stream.generator()
    rec = _Recorder(params, run, gb)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    if resume is not None:
        arrays, meta = read_npz(resume)
        if meta.get("kind") != "Checkpoint":
            raise CheckpointMismatch(f"{resume} is not a checkpoint")
        if meta["config_hash"] != params.digest():
            raise CheckpointMismatch("checkpoint was written under different model parameters")
        for key, want in (("scheme", run.scheme), ("dt", dt), ("thin", run.thin), ("observables", list(run.observables)), ("chain_index", chain_index)):
            if meta[key] != want:
                raise CheckpointMismatch(f"checkpoint {key}={meta[key]!r} differs from run {want!r}")
        start = int(meta["step"])
        if start > run.steps:
            raise CheckpointMismatch(f"checkpoint at step {start} is beyond steps={run.steps}")
        rec.restore(arrays, start)
        rec.accepted = int(meta["accepted"])
        rec.max_sq_norm = float(meta["max_sq_norm"])
        _restore_rng(gen, meta["rng_state"])
        x = np.array(arrays["coeffs"], dtype=float)
        ev = kern.evaluate(x)
    else:
        start = 0
        x = gen.standard_normal((params.d, gb.N)) if x0 is None else np.array(x0, dtype=float)
        ev = kern.evaluate(x)
        rec.record(0, x, ev)

    mala = run.scheme == "mala"
    every = run.checkpoint_every
    report_every = max(run.steps // 20, 1)
    for n in range(start + 1, run.steps + 1):
        if mala:
            x, ev, ok, _ = move(x, ev, gen)
            rec.accepted += ok
        else:
            x, ev = move(x, ev, gen)
        if not np.isfinite(ev.local_time):
            raise FloatingPointError(f"non-finite state at step {n}")
        rec.record(n, x, ev)
        if out is not None and every and n % every == 0 and n < run.steps:
            _write_checkpoint(out / CHECKPOINT_FILE, rec, n, x, gen, params, run, dt, chain_index)
        if progress and n % report_every == 0:
            log.info("chain %d: step %d/%d", chain_index, n, run.steps)

    record = ChainRecord(
        params=params,
        run=run,
        scheme=run.scheme,
        dt=dt,
        steps=run.steps,
        snapshots=rec.snapshots,
        snapshot_steps=rec.snapshot_steps,
        traces=rec.traces,
        acceptance_rate=(rec.accepted / run.steps if run.steps else 1.0) if mala else None,
        rng_provenance={"seed": stream.seed, "stream_id": stream.stream_id, "final_state": _rng_state_json(gen)},
        max_sq_norm=rec.max_sq_norm,
        chain_index=chain_index,
    )
    if out is not None:
        _write_checkpoint(out / CHECKPOINT_FILE, rec, run.steps, x, gen, params, run, dt, chain_index)
        record.save(out / CHAIN_FILE)
        record.write_traces_csv(out / "traces.csv")
        write_json(
            out / "manifest.json",
            manifest(params, run, kind="chain", dt=dt, chain_index=chain_index, stream_id=stream.stream_id,
                     files=[CHAIN_FILE, CHECKPOINT_FILE, "traces.csv"]),
        )
    return record


def _chain_job(args):
    params, run, index, out, resume, dt = args
    rec = run_chain(params, run, chain_index=index, out_dir=out, resume=resume, dt=dt)
    return rec.acceptance_rate


def run_chains(
    params: ModelParams,
    run: RunConfig,
    out_dir: str | os.PathLike,
    *,
    n_chains: int | None = None,
    resume: str | os.PathLike | None = None,
    dt: float | None = None,
) -> list[Path]:
    """Run independent chains, in parallel processes when more than one.

    A single chain writes straight into ``out_dir``; several chains use
    ``out_dir/chain_000``, ``chain_001``, ... each on its own stream.
    """
    k = run.n_chains if n_chains is None else n_chains
    out = Path(out_dir)
    if k == 1:
        run_chain(params, run, out_dir=out, resume=_resume_for(resume, 0, 1), dt=dt, progress=True)
        return [out]
    dirs = [out / f"chain_{i:03d}" for i in range(k)]
    jobs = [(params, run, i, dirs[i], _resume_for(resume, i, k), dt) for i in range(k)]
    workers = min(k, os.cpu_count() or 1)
    if workers == 1:
        for job in jobs:
            _chain_job(job)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_chain_job, jobs))
    return dirs


def _resume_for(resume, index: int, k: int):
    if resume is None:
        return None
    p = Path(resume)
    if p.is_dir():
        p = p / (f"chain_{index:03d}" if k > 1 else "") / CHECKPOINT_FILE
    elif k > 1:
        raise ConfigError("--resume must name a directory when running several chains")
    return p
