import pytest
from hypothesis import given, settings, strategies as st

from dcsim.dcload import DcDemand, dc_demand
from dcsim.errors import ConfigError
from dcsim.ups import (CountingReconnect, DelayedReconnect, GridMeasurement, InstantReconnect,
                       ManualReconnect, Mode, Segment, Topology, UpsConfig, UpsState,
                       check_disconnect, internal_phasor, reconnection_permitted,
                       segmented_ups_step, ups_step)

DT = 1e-3
LEGAL = {(Mode.NORMAL, Mode.EMERGENCY), (Mode.CHARGING, Mode.EMERGENCY),
         (Mode.EMERGENCY, Mode.CHARGING), (Mode.CHARGING, Mode.NORMAL)}


def meas(t, v=1.0, f_dev=0.0, phi=0.0):
    return GridMeasurement(v=v, phi=phi, f_dev=f_dev, t=t)


def demand(p=100.0, q=10.0):
    return dc_demand(p, (0.0, q), (0.0, 0.0))


def config(**kw):
    kw.setdefault("p_charge_mw", 10.0)
    kw.setdefault("e_max_mwh", 5.0)
    return UpsConfig(**kw)


# ---------------------------------------------------------------- predicate

@pytest.mark.parametrize("v, f_dev, expected", [
    (0.85, 0.0, True),
    (1.0, -0.3, False),
    (1.0, 0.3, False),
    (1.0, 0.0, False),
    (1.0, -0.3000001, True),
    (1.0, 0.31, True),
    (1.12, 0.0, True),
])
def test_disconnect_truth_table(v, f_dev, expected):
    m = GridMeasurement(v=v, phi=0.0, f_dev=f_dev, t=0.0)
    assert check_disconnect(m, UpsConfig()) is expected


@pytest.mark.parametrize("v, expected", [
    (0.875, False), (1.125, False), (0.874, True), (1.126, True),
])
def test_voltage_boundary_is_strict(v, expected):
    # thresholds chosen exactly representable so 1 + v_dev hits the limit exactly
    c = UpsConfig(v_min_pu=-0.125, v_max_pu=0.125)
    assert check_disconnect(GridMeasurement(v=v, phi=0.0, f_dev=0.0, t=0.0), c) is expected


@settings(max_examples=300)
@given(v=st.floats(0.0, 2.0), f=st.floats(-2.0, 2.0))
def test_disconnect_matches_strict_inequalities(v, f):
    c = UpsConfig()
    m = meas(0.0, v=v, f_dev=f)
    expected = (m.v_dev < -0.1 or m.v_dev > 0.1 or f < -0.3 or f > 0.3)
    assert check_disconnect(m, c) is expected


# ---------------------------------------------------------------- schemes

def test_delayed_scheme_threshold():
    c = config(reconnection=DelayedReconnect(t_delay_s=30.0))
    s = UpsState.initial(c)
    s.t_ok = 30.0
    assert reconnection_permitted(s, c, True, 100.0)
    s.t_ok = 29.9
    assert not reconnection_permitted(s, c, True, 100.0)
    s.t_ok = 100.0
    assert not reconnection_permitted(s, c, False, 100.0)


def test_counting_scheme_blocks_after_three():
    c = config(reconnection=CountingReconnect(n_max=3, window_s=60.0, t_delay_s=1.0))
    s = UpsState.initial(c)
    s.disturbance_times = [10.0, 30.0, 50.0]
    s.t_ok = 1e3
    assert not reconnection_permitted(s, c, True, 60.0)
    # the first disturbance has slid out of the window
    assert reconnection_permitted(s, c, True, 70.5)


def test_instant_and_manual_schemes():
    ci = config(reconnection=InstantReconnect())
    assert reconnection_permitted(UpsState.initial(ci), ci, True, 0.0)
    cm = config(reconnection=ManualReconnect())
    s = UpsState.initial(cm)
    s.t_ok = 1e6
    assert not reconnection_permitted(s, cm, True, 0.0)
    s.operator_release = True
    assert reconnection_permitted(s, cm, True, 0.0)


# ---------------------------------------------------------------- power per mode

def test_normal_mode_draw():
    c = config()
    s = UpsState.initial(c)
    _, p, q = ups_step(s, meas(0.0), dc_demand(300.0, (60.0, 31.0), (0.0, 0.0)), DT, c)
    assert (p, q) == (360.0, 31.0)


def test_emergency_draws_nothing():
    c = config()
    s = UpsState.initial(c)
    _, p, q = ups_step(s, meas(0.0, v=0.5), demand(), DT, c)
    assert s.mode == Mode.EMERGENCY
    assert (p, q) == (0.0, 0.0)


def test_charging_with_converter_loss():
    c = config(beta=0.05, topology=Topology.ONLINE, p_charge_mw=10.0)
    s = UpsState(mode=Mode.CHARGING, e=1.0)
    e0 = s.e
    for k in range(1000):
        _, p, q = ups_step(s, meas(k * DT), demand(100.0), DT, c)
        assert p == pytest.approx(115.0)
    assert s.e - e0 == pytest.approx(10.0 * 1.0 / 3600.0, rel=1e-9)


def test_beta_requires_online_topology():
    with pytest.raises(ValueError):
        UpsConfig(beta=0.05)


def test_energy_bookkeeping_over_cycle():
    c = config(reconnection=DelayedReconnect(t_delay_s=2.0), p_charge_mw=50.0, e_max_mwh=1.0)
    s = UpsState.initial(c)
    dc = demand(100.0)
    t, k = 0.0, 0
    e_trip = None
    modes = []
    while k < 200_000:
        t = k * DT
        bad = 1.0 <= t < 4.0
        ups_step(s, meas(t, v=0.5 if bad else 1.0), dc, DT, c)
        if s.mode == Mode.EMERGENCY and e_trip is None:
            e_trip = s.e + 100.0 * DT / 3600.0
        modes.append(s.mode)
        k += 1
        if s.mode == Mode.NORMAL and e_trip is not None:
            break
    n_em = modes.count(Mode.EMERGENCY)
    n_ch = modes.count(Mode.CHARGING)
    assert e_trip == pytest.approx(1.0)
    # discharge at p_dc while islanded, recharge at p_charge until full
    drop = 100.0 * n_em * DT / 3600.0
    assert n_ch * DT == pytest.approx(drop * 3600.0 / 50.0, abs=2 * DT)
    assert s.e == pytest.approx(1.0)


def test_battery_depletion_event():
    c = config(e_max_mwh=0.01, reconnection=ManualReconnect())
    s = UpsState.initial(c)
    kinds = []
    for k in range(2000):
        ups_step(s, meas(k * DT, v=0.5), demand(100.0), DT, c)
        kinds += [e[1] for e in s.events]
    assert "battery_depleted" in kinds
    assert s.e == 0.0
    assert internal_phasor(s, meas(2.0, v=0.5), c)[0] == 0.0


# ---------------------------------------------------------------- internal phasor

def _trip_after_history(c, v_before):
    s = UpsState.initial(c)
    t = 0.0
    for k in range(100):
        t = k * DT
        ups_step(s, meas(t, v=v_before, phi=0.2), demand(), DT, c)
    ups_step(s, meas(t + DT, v=0.3, phi=1.0), demand(), DT, c)
    assert s.mode == Mode.EMERGENCY
    return s


def test_nominal_scheme_holds_one():
    c = config(v_scheme="nominal")
    s = _trip_after_history(c, 0.95)
    assert internal_phasor(s, meas(0.2, v=0.3), c) == (1.0, 0.2)


def test_prefault_scheme_holds_previous_voltage():
    c = config(v_scheme="prefault")
    s = _trip_after_history(c, 0.95)
    v_i, phi_i = internal_phasor(s, meas(0.2, v=0.3), c)
    assert v_i == 0.95
    assert phi_i == 0.2


def test_grid_tied_passes_through():
    c = config()
    s = UpsState.initial(c)
    m = meas(0.0, v=0.987, phi=-0.31)
    assert internal_phasor(s, m, c) == (0.987, -0.31)


def test_history_underflow_uses_oldest(caplog):
    c = config(delta_s=0.01)
    s = UpsState.initial(c)
    ups_step(s, meas(0.0, v=0.97), demand(), DT, c)
    ups_step(s, meas(DT, v=0.3), demand(), DT, c)
    assert any(e[1] == "history_underflow" for e in s.events)
    assert s.held_v == 0.97
    assert "history" in caplog.text


# ---------------------------------------------------------------- segments

def test_single_segment_equals_plain_step():
    c = config()
    a, b = UpsState.initial(c), UpsState.initial(c)
    segs = [Segment(b, c, 1.0)]
    for k, v in enumerate([1.0, 1.0, 0.5, 0.5, 1.0]):
        _, p1, q1 = ups_step(a, meas(k * DT, v=v), demand(), DT, c)
        _, p2, q2 = segmented_ups_step(segs, meas(k * DT, v=v), demand(), DT)
        assert (p1, q1, a.mode) == (p2, q2, b.mode)


def test_segment_shares_must_sum_to_one():
    c = config()
    segs = [Segment(UpsState.initial(c), c, 0.1) for _ in range(9)]
    with pytest.raises(ConfigError):
        segmented_ups_step(segs, meas(0.0), demand(), DT)


def test_all_segments_islanded():
    c = config()
    segs = [Segment(UpsState(mode=Mode.EMERGENCY, e=1.0), c, 0.5) for _ in range(2)]
    _, p, q = segmented_ups_step(segs, meas(0.0, v=0.5), demand(), DT)
    assert (p, q) == (0.0, 0.0)


def test_staggered_segments_ramp_in_ten_steps():
    segs = []
    for i in range(10):
        c = config(reconnection=DelayedReconnect(t_delay_s=5.0 + i), p_charge_mw=0.0)
        segs.append(Segment(UpsState.initial(c), c, 0.1))
    dc = demand(100.0, 0.0)
    levels = []
    for k in range(int(20.0 / DT)):
        t = k * DT
        _, p, _ = segmented_ups_step(segs, meas(t, v=0.5 if 0.5 <= t < 1.0 else 1.0), dc, DT)
        if not levels or abs(p - levels[-1]) > 1e-9:
            levels.append(p)
    # 100 -> 0 at the trip, then ten increments of 10 MW
    assert levels[0] == pytest.approx(100.0)
    assert levels[1:] == pytest.approx([10.0 * j for j in range(11)])


# ---------------------------------------------------------------- properties

scheme_st = st.sampled_from([
    InstantReconnect(), DelayedReconnect(t_delay_s=0.005),
    CountingReconnect(n_max=2, window_s=0.05, t_delay_s=0.003), ManualReconnect(),
])


@settings(max_examples=150, deadline=None)
@given(scheme=scheme_st,
       seq=st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=80))
def test_mode_graph_and_causality(scheme, seq):
    c = config(reconnection=scheme, e_max_mwh=0.0005, p_charge_mw=200.0)
    s = UpsState.initial(c)
    for k, (bad, release) in enumerate(seq):
        m = meas(k * DT, v=0.5 if bad else 1.0)
        before = s.mode
        if release:
            s.operator_release = True
        _, p, q = ups_step(s, m, demand(100.0, 20.0), DT, c)
        if before != s.mode:
            assert (before, s.mode) in LEGAL
        if before == Mode.EMERGENCY and s.mode == Mode.CHARGING:
            assert not bad
        if before != Mode.EMERGENCY and bad:
            # trip within the same step the predicate holds
            assert s.mode == Mode.EMERGENCY
        if p == 0.0:
            assert q == 0.0


@settings(max_examples=100, deadline=None)
@given(p_dc=st.floats(0.0, 500.0), p_charge=st.floats(0.0, 100.0),
       beta=st.floats(0.0, 0.2), mode=st.sampled_from(list(Mode)))
def test_energy_rate_per_mode(p_dc, p_charge, beta, mode):
    c = config(beta=beta, topology=Topology.ONLINE, p_charge_mw=p_charge, e_max_mwh=1e6,
               reconnection=ManualReconnect())
    s = UpsState(mode=mode, e=1e5)
    m = meas(0.0, v=0.5) if mode == Mode.EMERGENCY else meas(0.0)
    dc = DcDemand(p_dc, 0.0, p_dc, 0.0, 0.0, 0.0, 0.0)
    _, p, _ = ups_step(s, m, dc, 1.0, c)
    rate = (s.e - 1e5) * 3600.0
    expected = {Mode.NORMAL: 0.0, Mode.CHARGING: p_charge,
                Mode.EMERGENCY: -(1 + beta) * p_dc}[mode]
    assert rate == pytest.approx(expected, abs=1e-6)
