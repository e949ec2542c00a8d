import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dcsim.errors import ModelError
from dcsim.stochastic import (JumpParams, OuParams, PulseParams, RngStream, jump_step,
                              ou_step, pulse_value)


def test_ou_fixed_point_without_noise():
    p = OuParams(a_per_s=3.0, b_per_sqrt_s=0.0)
    rng = RngStream(1)
    for dt in (1e-5, 1e-3, 0.1):
        assert ou_step(0.0, dt, p, rng) == 0.0


def test_ou_deterministic_euler_step():
    p = OuParams(a_per_s=2.0, b_per_sqrt_s=0.0)
    assert ou_step(1.0, 0.01, p, RngStream(0)) == pytest.approx(0.98, abs=1e-15)


def test_ou_stationary_moments():
    p = OuParams(a_per_s=1.0, b_per_sqrt_s=0.1)
    rng = RngStream(2024)
    dt, n = 0.01, 1_000_000
    eta = 0.0
    xs = np.empty(n)
    for k in range(n):
        eta = ou_step(eta, dt, p, rng)
        xs[k] = eta
    # analytic stationary variance b^2 / (2a) = 0.005
    assert xs.var() == pytest.approx(0.005, rel=0.05)
    assert abs(xs.mean()) < 0.05 * math.sqrt(0.005)


def test_ou_clamped_at_three_sigma():
    p = OuParams(a_per_s=1.0, b_per_sqrt_s=0.1)
    assert ou_step(10.0, 1e-3, p, RngStream(0)) == pytest.approx(p.bound)
    assert p.bound == pytest.approx(3 * math.sqrt(0.005))


def test_ou_rejects_non_finite_state():
    p = OuParams(a_per_s=1.0, b_per_sqrt_s=0.1)
    with pytest.raises(ModelError):
        ou_step(float("nan"), 1e-3, p, RngStream(0))


def test_jump_rate_zero_leaves_u():
    p = JumpParams(rate_per_s=0.0, amp_lo=-0.5, amp_hi=0.5)
    assert jump_step(0.37, 1e-3, p, RngStream(0)) == 0.37


def test_jump_clamps_at_one():
    # rate*dt = 1 forces a jump every step
    p = JumpParams(rate_per_s=100.0, amp_lo=0.1, amp_hi=0.5)
    rng = RngStream(5)
    for _ in range(50):
        assert jump_step(1.0, 0.01, p, rng) == 1.0


def test_jump_count_matches_poisson_rate():
    p = JumpParams(rate_per_s=0.2, amp_lo=0.01, amp_hi=0.02)
    rng = RngStream(11)
    dt, n = 0.01, 1_000_000
    count = 0
    u = 0.0
    for _ in range(n):
        u_new = jump_step(u, dt, p, rng)
        if u_new != u:
            count += 1
        u = 0.0 if u_new > 0.5 else u_new
    assert count == pytest.approx(2000, rel=0.05)


def test_jump_rejects_non_finite():
    p = JumpParams(rate_per_s=1.0, amp_lo=0.0, amp_hi=0.1)
    with pytest.raises(ModelError):
        jump_step(float("inf"), 1e-3, p, RngStream(0))


def test_pulse_edges():
    p = PulseParams(period_s=10.0, width_s=8.0, high=1.0, low=0.0)
    assert pulse_value(0.0, p) == 1.0
    assert pulse_value(8.0 + 1e-9, p) == 0.0
    # half-open: the right edge already belongs to the low phase
    assert pulse_value(8.0, p) == 0.0
    assert pulse_value(10.0, p) == 1.0


def test_pulse_period_average_is_duty_cycle():
    p = PulseParams(period_s=10.0, width_s=8.0, high=3.0, low=-1.0)
    dt = 1e-3
    t = np.arange(10_000) * dt
    avg = np.mean([pulse_value(x, p) for x in t])
    assert avg == pytest.approx(0.8 * 3.0 + 0.2 * -1.0, abs=1e-12)
    assert p.mean == pytest.approx(avg, abs=1e-12)


def test_pulse_phase_offset():
    p = PulseParams(period_s=300.0, width_s=10.0, high=10.0, phase_offset_s=100.0)
    assert pulse_value(99.9, p) == 0.0
    assert pulse_value(100.0, p) == 10.0
    assert pulse_value(409.0, p) == 10.0


def test_pulse_width_above_period_rejected():
    with pytest.raises(ValueError):
        PulseParams(period_s=1.0, width_s=2.0)


def test_identical_seed_identical_draws():
    a, b = RngStream(42, (3, 1)), RngStream(42, (3, 1))
    assert [a.normal() for _ in range(100)] == [b.normal() for _ in range(100)]


def test_sub_streams_independent_of_creation_order():
    root = RngStream(7)
    first = root.child(1, 0)
    root.child(0, 0).normal()
    again = RngStream(7).child(1, 0)
    assert first.normal() == again.normal()
    assert root.child(0, 0).normal() != root.child(0, 1).normal()


@settings(max_examples=200, deadline=None)
@given(u=st.floats(0.0, 1.0), lo=st.floats(-2.0, 0.0), hi=st.floats(0.0, 2.0),
       seed=st.integers(0, 2**32))
def test_jump_output_in_unit_interval(u, lo, hi, seed):
    p = JumpParams(rate_per_s=50.0, amp_lo=lo, amp_hi=hi)
    rng = RngStream(seed)
    for _ in range(20):
        u = jump_step(u, 0.01, p, rng)
        assert 0.0 <= u <= 1.0


@settings(max_examples=200, deadline=None)
@given(t=st.floats(0.0, 1e4), k=st.integers(0, 50),
       period=st.sampled_from([0.5, 1.0, 10.0, 300.0]), frac=st.floats(0.05, 1.0))
def test_pulse_is_periodic(t, k, period, frac):
    p = PulseParams(period_s=period, width_s=frac * period)
    phase = math.fmod(t, period)
    # skip instants within rounding distance of an edge
    if min(abs(phase - p.width_s), phase, period - phase) < 1e-6:
        return
    assert pulse_value(t, p) == pulse_value(t + k * period, p)
