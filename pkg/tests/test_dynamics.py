import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedwards.dynamics import (
    Langevin,
    StepperConfig,
    drift,
    log_proposal,
    log_target,
    step_euler,
    step_mala,
    step_ou_split,
    tune_mala_dt,
)
from fedwards.errors import DomainError
from fedwards.field import FieldState, sample_prior
from fedwards.kernel import basis_for
from fedwards.model import ModelParams, RngStream
from fedwards.oracle import fd_gradient

SMALL = ModelParams(H=0.4, d=1, N=4, M=8, g=0.0)


@pytest.fixture(scope="module")
def small_gb():
    return basis_for(SMALL)


class _ZeroNoise:
    def standard_normal(self, shape):
        return np.zeros(shape)


def test_drift_ou_part(gb, params):
    c = RngStream(1, 0).generator().standard_normal((2, gb.N))
    np.testing.assert_array_equal(drift(FieldState(c), gb, params.replace(g=0.0)).drift, -c)


def test_drift_zero_state(gb, params):
    ev = drift(FieldState(np.zeros((2, gb.N))), gb, params)
    np.testing.assert_array_equal(ev.drift, 0.0)


def test_drift_matches_fd(gb, params):
    c = RngStream(2, 0).generator().standard_normal((2, gb.N))
    want = -(c + params.g * fd_gradient(c, gb, params, 1e-4))
    got = drift(FieldState(c), gb, params).drift
    assert np.max(np.abs(got - want)) <= 1e-5 * np.max(np.abs(want))


def test_config_validation():
    with pytest.raises(DomainError):
        StepperConfig("leapfrog", 0.1, 0.0)
    with pytest.raises(DomainError):
        StepperConfig("mala", -0.1, 0.0)
    with pytest.raises(DomainError):
        StepperConfig("mala", 0.1, -1.0)


def test_scheme_mismatch(gb, params):
    s = FieldState(np.zeros((2, gb.N)))
    with pytest.raises(DomainError):
        step_euler(s, gb, params, StepperConfig("mala", 0.1, params.g), RngStream(0, 0))


def test_euler_tiny_step_is_near_identity(gb, params):
    s = sample_prior(gb, 2, RngStream(3, 0))
    t = step_euler(s, gb, params, StepperConfig("euler_maruyama", 1e-12, params.g), RngStream(3, 1))
    np.testing.assert_allclose(t.coeffs, s.coeffs, atol=1e-5)
    assert t.compute_time == pytest.approx(1e-12)


@pytest.mark.parametrize("scheme,step", [("ou_splitting", step_ou_split), ("mala", step_mala), ("euler_maruyama", step_euler)])
def test_zero_step_is_identity(gb, params, scheme, step):
    s = sample_prior(gb, 2, RngStream(4, 0))
    out = step(s, gb, params, StepperConfig(scheme, 0.0, params.g), RngStream(4, 1))
    out = out[0] if isinstance(out, tuple) else out
    np.testing.assert_array_equal(out.coeffs, s.coeffs)


def test_euler_one_step_law(small_gb):
    dt, reps = 0.05, 100_000
    cfg = StepperConfig("euler_maruyama", dt, 0.0)
    gen = RngStream(5, 0).generator()
    zero = FieldState(np.zeros((1, small_gb.N)))
    out = np.array([step_euler(zero, small_gb, SMALL, cfg, gen).coeffs for _ in range(reps)]).reshape(reps, -1)
    var = out.var(axis=0)
    se = 2 * dt * math.sqrt(2 / reps)
    assert np.all(np.abs(var - 2 * dt) < 3 * se)
    assert np.all(np.abs(out.mean(axis=0)) < 3 * math.sqrt(2 * dt / reps))


def test_ou_transition_variance(small_gb):
    dt, n, reps = 0.25, 4, 25_000
    cfg = StepperConfig("ou_splitting", dt, 0.0)
    gen = RngStream(6, 0).generator()
    out = np.empty((reps, small_gb.N))
    for r in range(reps):
        s = FieldState(np.zeros((1, small_gb.N)))
        for _ in range(n):
            s = step_ou_split(s, small_gb, SMALL, cfg, gen)
        out[r] = s.coeffs[0]
    want = 1 - math.exp(-2 * n * dt)
    se = want * math.sqrt(2 / reps)
    assert np.all(np.abs(out.var(axis=0) - want) < 3 * se)


def test_ou_autocorrelation(small_gb):
    dt, steps = 0.1, 200_000
    kern = Langevin(small_gb, SMALL, StepperConfig("ou_splitting", dt, 0.0))
    gen = RngStream(7, 0).generator()
    x = gen.standard_normal((1, small_gb.N))
    ev = kern.evaluate(x)
    xs = np.empty((steps, small_gb.N))
    for n in range(steps):
        x, ev = kern.ou_split(x, ev, gen)
        xs[n] = x[0]
    xs -= xs.mean(axis=0)
    var = np.mean(xs * xs)
    for lag in (1, 5, 10, 20):
        rho = np.mean(xs[lag:] * xs[:-lag]) / var
        assert abs(rho - math.exp(-lag * dt)) < 0.02


def test_mala_degenerate_proposal(gb, params):
    kern = Langevin(gb, params, StepperConfig("mala", 0.1, params.g))
    x = np.zeros((2, gb.N))
    ev = kern.evaluate(x)
    la = kern.log_target(x, ev) - kern.log_target(x, ev) + kern.log_proposal(x, ev, x, 0.1) - kern.log_proposal(x, ev, x, 0.1)
    assert la == 0.0


def test_mala_small_step_accepts(small_gb):
    cfg = StepperConfig("mala", 1e-4, 0.0)
    gen = RngStream(8, 0).generator()
    s = FieldState(gen.standard_normal((1, small_gb.N)))
    acc = 0
    for _ in range(5000):
        s, ok, _ = step_mala(s, small_gb, SMALL, cfg, gen)
        acc += ok
    assert acc / 5000 > 0.99


def _log_balance(kern, x, y, dt):
    ex, ey = kern.evaluate(x), kern.evaluate(y)
    la = kern.log_target(y, ey) - kern.log_target(x, ex) + kern.log_proposal(y, ey, x, dt) - kern.log_proposal(x, ex, y, dt)
    lhs = kern.log_target(x, ex) + kern.log_proposal(x, ex, y, dt) + min(0.0, la)
    rhs = kern.log_target(y, ey) + kern.log_proposal(y, ey, x, dt) + min(0.0, -la)
    return lhs, rhs


def test_detailed_balance(gb, params):
    kern = Langevin(gb, params, StepperConfig("mala", 0.3, params.g))
    gen = RngStream(9, 0).generator()
    for _ in range(20):
        x = gen.standard_normal((2, gb.N))
        y = x + 0.5 * gen.standard_normal((2, gb.N))
        lhs, rhs = _log_balance(kern, x, y, 0.3)
        assert abs(lhs - rhs) <= 1e-10


def test_public_wrappers_agree(gb, params):
    s = sample_prior(gb, 2, RngStream(10, 0))
    t = sample_prior(gb, 2, RngStream(10, 1))
    kern = Langevin(gb, params, StepperConfig("mala", 0.2, params.g))
    ex = kern.evaluate(np.array(s.coeffs))
    assert log_target(s, gb, params) == kern.log_target(np.array(s.coeffs), ex)
    assert log_proposal(s, t, gb, params, 0.2) == kern.log_proposal(np.array(s.coeffs), ex, np.array(t.coeffs), 0.2)


@pytest.mark.parametrize("scheme,step", [("ou_splitting", step_ou_split), ("mala", step_mala), ("euler_maruyama", step_euler)])
def test_fixed_seed_is_deterministic(gb, params, scheme, step):
    s = sample_prior(gb, 2, RngStream(11, 0))
    cfg = StepperConfig(scheme, 0.1, params.g)
    a = step(s, gb, params, cfg, RngStream(11, 5))
    b = step(s, gb, params, cfg, RngStream(11, 5))
    a = a[0] if isinstance(a, tuple) else a
    b = b[0] if isinstance(b, tuple) else b
    assert a == b


def _one_step_gap(gb, params, x, dt, rng_factory):
    s = FieldState(x)
    e = step_euler(s, gb, params, StepperConfig("euler_maruyama", dt, params.g), rng_factory())
    o = step_ou_split(s, gb, params, StepperConfig("ou_splitting", dt, params.g), rng_factory())
    return np.sqrt(np.mean((e.coeffs - o.coeffs) ** 2))


DTS = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4]


def test_euler_and_splitting_deterministic_parts_agree_to_second_order(gb, params):
    x = RngStream(12, 0).generator().standard_normal((2, gb.N))
    gaps = [_one_step_gap(gb, params, x, dt, _ZeroNoise) for dt in DTS]
    slope = np.polyfit(np.log(DTS), np.log(gaps), 1)[0]
    assert slope >= 1.9


def test_euler_and_splitting_matched_noise_gap_is_order_three_halves(gb, params):
    # sqrt(2 dt) and sqrt(1 - exp(-2 dt)) differ by O(dt^1.5), which dominates the gap
    x = RngStream(13, 0).generator().standard_normal((2, gb.N))
    gaps = []
    for dt in DTS:
        reps = [_one_step_gap(gb, params, x, dt, lambda r=r: RngStream(13, 100 + r)) for r in range(20)]
        gaps.append(np.sqrt(np.mean(np.square(reps))))
    slope = np.polyfit(np.log(DTS), np.log(gaps), 1)[0]
    assert 1.4 <= slope <= 1.6


def test_tune_mala_dt_hits_band(gb, params):
    dt, rate = tune_mala_dt(gb, params, RngStream(14, 0), steps_per_round=200)
    assert 0.4 <= rate <= 0.8
    assert dt > 0


@settings(max_examples=20, deadline=None)
@given(
    x=arrays(np.float64, (2, 12), elements=st.floats(-3, 3)),
    y=arrays(np.float64, (2, 12), elements=st.floats(-3, 3)),
    dt=st.floats(0.01, 1.0),
)
def test_detailed_balance_property(gb, params, x, y, dt):
    kern = Langevin(gb, params, StepperConfig("mala", dt, params.g))
    lhs, rhs = _log_balance(kern, x, y, dt)
    assert abs(lhs - rhs) <= 1e-10
