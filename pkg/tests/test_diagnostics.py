import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedwards import diagnostics as dg
from fedwards.chain import RunConfig, run_chain
from fedwards.errors import InsufficientData, ShapeError
from fedwards.field import polymer_path, sample_prior_batch
from fedwards.kernel import basis_for
from fedwards.model import ModelParams, RngStream
from fedwards.oracle import build_ensemble


@pytest.fixture(scope="module")
def ou_chains():
    p = ModelParams(g=0.0, seed=21)
    out = {}
    for dt in (0.005, 0.0025):
        run = RunConfig(scheme="ou_splitting", steps=int(round(50 / dt)) + 10, thin=1000, observables=("f1", "coords", "drift"))
        out[dt] = run_chain(p, run, dt=dt)
    return out


@pytest.fixture(scope="module")
def ens_g0(params, gb):
    return build_ensemble(params.replace(g=0.0), gb, 20_000)


def _ar1(phi, n, seed):
    gen = np.random.default_rng(seed)
    x = np.empty(n)
    x[0] = gen.standard_normal() / math.sqrt(1 - phi * phi)
    eps = gen.standard_normal(n)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + eps[i]
    return x


def test_autocorrelation_of_white_noise():
    rho = dg.autocorrelation(np.random.default_rng(0).standard_normal(20_000), 5)
    assert rho[0] == 1.0
    assert np.all(np.abs(rho[1:]) < 4 / math.sqrt(20_000))


def test_iat_of_ar1():
    phi = 0.8
    tau = dg.integrated_autocorr_time(_ar1(phi, 200_000, 1))
    assert tau == pytest.approx((1 + phi) / (1 - phi), rel=0.1)
    assert dg.integrated_autocorr_time(np.ones(10)) == 1.0
    with pytest.raises(InsufficientData):
        dg.integrated_autocorr_time([1.0, 2.0])


def test_ergodic_average_constant_and_mismatch():
    chain = SimpleNamespace(traces={"c": np.full(100, 2.5)})
    assert dg.ergodic_average(chain, "c", 10) == (2.5, 0.0)
    with pytest.raises(InsufficientData):
        dg.ergodic_average(chain, "c", 99)


def test_ergodic_average_gaussian_second_moment():
    p = ModelParams(g=0.0, seed=22)
    chain = run_chain(p, RunConfig(scheme="ou_splitting", steps=40_000, thin=1000, observables=("f1",)))
    est, se = dg.ergodic_average(chain, "f1", 1000)
    # x^2 decorrelates at rate 2, so tau is about 1/dt = 10 steps
    assert 5 < se * se * (chain.steps - 1000) / 2.0 < 20
    assert abs(est - 1.0) < 3 * se


def test_ergodic_average_callable_on_snapshots(ou_chains):
    chain = ou_chains[0.005]
    est, _ = dg.ergodic_average(chain, lambda c: c[0, 0], 0)
    np.testing.assert_allclose(est, chain.snapshots[:, 0, 0].mean())


def test_z_report():
    r = dg.z_report("x", (1.0, 0.3), (0.0, 0.4))
    assert r.statistic == pytest.approx(2.0) and r.passed
    assert not dg.z_report("x", (2.0, 0.3), (0.0, 0.4)).passed


@pytest.mark.parametrize("u", ["coord", "one"])
def test_ibp_gaussian(ens_g0, gb, params, u):
    for k in [(0, 0), (1, 5), (0, 11)]:
        r = dg.ibp_residual(ens_g0, k, u, gb, params.replace(g=0.0))
        assert r.passed, r


def test_ibp_flipped_sign_fails(ens_g0, gb, params):
    r = dg.ibp_residual(ens_g0, 0, "coord", gb, params.replace(g=0.0), sign=+1.0)
    assert not r.passed
    assert r.details["estimate"] == pytest.approx(2.0, abs=0.1)


def test_ibp_callable_matches_builtin(ens_g0, gb, params):
    p0 = params.replace(g=0.0)
    a = dg.ibp_residual(ens_g0, (0, 0), "f1", gb, p0)
    b = dg.ibp_residual(ens_g0, (0, 0), lambda c: c[:, 0, 0] ** 2, gb, p0)
    assert a.details["estimate"] == pytest.approx(b.details["estimate"], rel=1e-6)


def test_fukushima_qv_and_refinement(ou_chains):
    a = dg.fukushima_qv(ou_chains[0.005], 0)
    b = dg.fukushima_qv(ou_chains[0.0025], 0)
    assert a.passed and b.passed
    assert abs(a.statistic - b.statistic) < 0.05


def test_cross_variation(ou_chains):
    assert dg.cross_variation(ou_chains[0.005], (0, 0), (0, 1)).passed


def test_fukushima_needs_long_chain(ou_chains):
    with pytest.raises(InsufficientData):
        dg.fukushima_qv(ou_chains[0.005], 0, t=1e4)
    bare = SimpleNamespace(traces={"f1": np.zeros(3)}, dt=0.1)
    with pytest.raises(InsufficientData):
        dg.fukushima_qv(bare, 0)


def test_holder_linear_path():
    grid = np.arange(1, 65) / 64
    paths = np.tile((3.0 * grid)[None, None, :], (100, 1, 1))
    slope, _ = dg.holder_exponent(paths, grid)
    assert slope / 2 == pytest.approx(1.0, abs=1e-12)


def test_holder_brownian():
    p = ModelParams(H=0.5, d=1, N=128, M=128)
    gb = basis_for(p)
    paths = polymer_path(sample_prior_batch(gb, 1, 10_000, RngStream(31, 0)), gb)
    slope, _ = dg.holder_exponent(paths, gb.grid)
    assert 0.47 <= slope / 2 <= 0.53


def test_holder_input_checks():
    grid = np.arange(1, 9) / 8
    with pytest.raises(InsufficientData):
        dg.holder_exponent(np.zeros((10, 1, 8)), grid)
    with pytest.raises(ShapeError):
        dg.holder_exponent(np.zeros((100, 1, 7)), grid)


def test_continuity_trivial_cases():
    p = ModelParams(N=16, M=16)
    gb = basis_for(p)
    c = RngStream(1, 2).generator().standard_normal((2, 16))
    assert dg.continuity_defect(c, gb, gb) == 0.0
    assert dg.continuity_defect(np.zeros((2, 12)), basis_for(ModelParams()), basis_for(ModelParams(), M=256)) == 0.0
    with pytest.raises(ShapeError):
        dg.continuity_defect(c, gb, basis_for(p, M=32, N=12))


def test_continuity_defect_decreases(params, gb):
    for c in sample_prior_batch(gb, 2, 3, RngStream(41, 0)):
        d = dg.refinement_defects(c, params)
        assert d[0] > d[1] > d[2]


def test_ks_behaviour():
    x = np.random.default_rng(5).standard_normal(10_000)
    same = dg.ks_test(x, x, thin=1)
    assert same.details["D"] == 0.0 and same.passed
    assert dg.ks_test(x, "norm").passed
    assert not dg.ks_test(x + 0.5, "norm").passed
    with pytest.raises(InsufficientData):
        dg.ks_test(x[:50], "norm")


def test_report_serialises():
    r = dg.z_report("x", (1.0, 0.1), (1.0, 0.1))
    d = r.to_dict()
    assert d["passed"] is True and d["details"]["rule"] == "statistic <= threshold"


@settings(max_examples=25, deadline=None)
@given(phi=st.floats(-0.5, 0.95), seed=st.integers(0, 1000))
def test_iat_at_least_floor(phi, seed):
    x = _ar1(phi, 2000, seed)
    tau = dg.integrated_autocorr_time(x)
    assert tau >= 1.0 / x.size
    assert tau < x.size
