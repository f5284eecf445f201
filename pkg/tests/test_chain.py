import json

import numpy as np
import pytest

from fedwards.chain import CHAIN_FILE, CHECKPOINT_FILE, ChainRecord, RunConfig, load_chain, load_config, run_chain, run_chains
from fedwards.errors import CheckpointMismatch, ConfigError
from fedwards.model import ModelParams

P = ModelParams(seed=17)
FILES = (CHAIN_FILE, CHECKPOINT_FILE, "traces.csv", "manifest.json")


def _bytes(d):
    return {f: (d / f).read_bytes() for f in FILES}


def test_zero_steps_keeps_initial_state():
    rec = run_chain(P, RunConfig(steps=0, thin=5))
    assert rec.snapshots.shape == (1, P.d, P.N)
    assert all(v.shape[0] == 1 for v in rec.traces.values())
    np.testing.assert_array_equal(rec.traces["coords"][0], rec.snapshots[0])
    assert rec.acceptance_rate == 1.0


def test_traces_consistent_with_snapshots():
    rec = run_chain(P, RunConfig(scheme="mala", steps=40, thin=10), dt=0.4)
    np.testing.assert_array_equal(rec.traces["coords"][::10], rec.snapshots)
    np.testing.assert_allclose(rec.traces["f1"], rec.traces["coords"][:, 0, 0] ** 2)
    assert 0.0 <= rec.acceptance_rate <= 1.0
    assert rec.max_sq_norm == pytest.approx(np.max(np.sum(rec.traces["coords"] ** 2, axis=(1, 2))) / (P.d * P.N))


@pytest.mark.parametrize("scheme", ["mala", "ou_splitting", "euler_maruyama"])
def test_identical_runs_are_byte_identical(tmp_path, scheme):
    run = RunConfig(scheme=scheme, steps=60, thin=7, checkpoint_every=25)
    run_chain(P, run, out_dir=tmp_path / "a")
    run_chain(P, run, out_dir=tmp_path / "b")
    assert _bytes(tmp_path / "a") == _bytes(tmp_path / "b")


@pytest.mark.parametrize("scheme", ["mala", "ou_splitting"])
def test_resume_equals_uninterrupted(tmp_path, scheme):
    full = RunConfig(scheme=scheme, steps=90, thin=8, checkpoint_every=30)
    half = RunConfig(scheme=scheme, steps=45, thin=8, checkpoint_every=30)
    run_chain(P, full, out_dir=tmp_path / "full")
    run_chain(P, half, out_dir=tmp_path / "part")
    run_chain(P, full, out_dir=tmp_path / "resumed", resume=tmp_path / "part" / CHECKPOINT_FILE)
    assert _bytes(tmp_path / "full") == _bytes(tmp_path / "resumed")


def test_resume_rejects_other_config(tmp_path):
    run = RunConfig(steps=10, thin=5)
    run_chain(P, run, out_dir=tmp_path)
    ck = tmp_path / CHECKPOINT_FILE
    with pytest.raises(CheckpointMismatch):
        run_chain(P.replace(g=0.2), RunConfig(steps=20, thin=5), resume=ck)
    with pytest.raises(CheckpointMismatch):
        run_chain(P, RunConfig(steps=20, thin=4), resume=ck)
    with pytest.raises(CheckpointMismatch):
        run_chain(P, RunConfig(steps=5, thin=5), resume=ck)
    with pytest.raises(CheckpointMismatch):
        run_chain(P, run, resume=tmp_path / CHAIN_FILE)


def test_record_round_trip(tmp_path):
    rec = run_chain(P, RunConfig(scheme="ou_splitting", steps=12, thin=3), out_dir=tmp_path)
    back = load_chain(tmp_path)
    assert back.params == rec.params and back.run == rec.run and back.dt == rec.dt
    for k in rec.traces:
        np.testing.assert_array_equal(back.traces[k], rec.traces[k])
    np.testing.assert_array_equal(back.snapshot_steps, np.arange(0, 13, 3))
    lines = (tmp_path / "traces.csv").read_text().splitlines()
    assert lines[0] == "step,compute_time,f1,f2,f3" and len(lines) == 14
    with pytest.raises(ValueError):
        ChainRecord.load(tmp_path / CHECKPOINT_FILE)


def test_manifest_contents(tmp_path):
    run_chain(P, RunConfig(steps=3, thin=1), out_dir=tmp_path)
    m = json.loads((tmp_path / "manifest.json").read_text())
    assert m["config_hash"] == P.digest() and m["seed"] == P.seed
    assert {"fedwards", "numpy", "python", "kernel_backend"} <= set(m["versions"])


def test_independent_chains(tmp_path):
    run = RunConfig(scheme="ou_splitting", steps=20, thin=5)
    dirs = run_chains(P, run, tmp_path, n_chains=2)
    a, b = load_chain(dirs[0]), load_chain(dirs[1])
    assert a.chain_index == 0 and b.chain_index == 1
    assert not np.allclose(a.snapshots, b.snapshots)
    single = run_chain(P, run, chain_index=1)
    np.testing.assert_array_equal(single.snapshots, b.snapshots)


def test_run_config_validation():
    with pytest.raises(ConfigError):
        RunConfig(scheme="rk4")
    with pytest.raises(ConfigError):
        RunConfig(thin=0)
    with pytest.raises(ConfigError):
        RunConfig(observables=("f1", "f9"))


def test_load_config(tmp_path):
    good = tmp_path / "ok.json"
    good.write_text(json.dumps({"H": 0.3, "g": 0.0, "scheme": "mala", "steps": 7}))
    p, run = load_config(good)
    assert p.H == 0.3 and run.steps == 7
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"H": 0.3, "stepz": 7}))
    with pytest.raises(ConfigError, match="stepz"):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
