"""Fixed-step hybrid simulation loop.

Per step, at ``t_{k+1} = (k + 1) dt``:

1. stochastic drivers and load patterns,
2. IT filters and cooling motor, fed with the internal phasor of step k,
3. data-center demand,
4. UPS logic using the grid measurement of step k,
5. network solve,
6. generator and frequency estimator,
7. scenario events whose time is reached before the next solve,
8. log.

The generator state used by the solve at ``t_{k+1}`` was advanced during step
k, so step (6) prepares the rotor angle for the next solve.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dcload import (ZERO_DEMAND, DcDemand, ItState, MotorParams, MotorState, check_filter_step,
                     cpu_raw, dc_demand, gpu_raw, it_filter_step, it_power, motor_step,
                     size_motor, steady_state, zip_power)
from .dcload.motor import steady_power
from .errors import DcsimError, InitializationError, ModelError
from .grid import (BusLoads, FreqEstimator, GenParams, GenState, LinearPart, NetworkModel,
                   estimate_frequency, gen_step, network_solve)
from .scenario import DcParams, Scenario
from .stochastic import RngStream, jump_step, ou_step
from .ups import (GridMeasurement, Mode, Segment, UpsState, aggregate_mode, internal_phasor,
                  operator_disconnect, ups_step)

log = logging.getLogger(__name__)

INIT_TOL = 1e-12
INIT_MAX_ITER = 100
COLLAPSE_PU = 0.2
COLLAPSE_HOLD_S = 0.5


@dataclass
class SimLog:
    """Time series on a uniform grid plus discrete event records."""

    t: np.ndarray
    bus_names: list
    dc_names: list
    v: np.ndarray            # (N, buses) pu
    f_hz: np.ndarray         # (N, buses) estimated bus frequency
    rocof: np.ndarray        # (N, buses) Hz/s
    f_sys_hz: np.ndarray     # (N,) generator speed
    p_gen_mw: np.ndarray
    p_grid: np.ndarray       # (N, dcs) MW
    q_grid: np.ndarray
    mode: np.ndarray         # int8 Mode values
    e_mwh: np.ndarray
    p_dc: np.ndarray
    p_it: np.ndarray
    p_cooling: np.ndarray
    p_zip: np.ndarray
    v_int: np.ndarray        # voltage magnitude applied to the DC loads
    slip: np.ndarray
    events: list = field(default_factory=list)   # (t, kind, dc_id, detail)
    f0_hz: float = 50.0

    @classmethod
    def allocate(cls, n_rows, dt, bus_names, dc_names, f0_hz):
        nb, nd = len(bus_names), len(dc_names)

        def z(*shape):
            return np.zeros(shape)

        return cls(
            t=np.arange(n_rows) * dt, bus_names=list(bus_names), dc_names=list(dc_names),
            v=z(n_rows, nb), f_hz=z(n_rows, nb), rocof=z(n_rows, nb), f_sys_hz=z(n_rows),
            p_gen_mw=z(n_rows), p_grid=z(n_rows, nd), q_grid=z(n_rows, nd),
            mode=np.zeros((n_rows, nd), dtype=np.int8), e_mwh=z(n_rows, nd), p_dc=z(n_rows, nd),
            p_it=z(n_rows, nd), p_cooling=z(n_rows, nd), p_zip=z(n_rows, nd),
            v_int=z(n_rows, nd), slip=z(n_rows, nd), f0_hz=f0_hz,
        )

    def bus(self, name) -> int:
        return self.bus_names.index(name)

    def dc(self, name) -> int:
        return self.dc_names.index(name)

    def events_of(self, kind, dc_id=None) -> list:
        return [e for e in self.events if e[1] == kind and (dc_id is None or e[2] == dc_id)]

    def emergency_entries(self, dc_id=None) -> list:
        return [e for e in self.events_of("mode_change", dc_id) if "->EMERGENCY" in e[3]]


@dataclass
class DcRuntime:
    spec: DcParams
    bus: int
    pattern: str
    it: ItState
    motor: MotorState | None
    motor_params: MotorParams | None
    rng_jump: RngStream
    rng_noise: RngStream
    segments: list
    offset_mw: float = 0.0
    demand: DcDemand = ZERO_DEMAND
    v_int: float = 1.0
    phi_int: float = 0.0
    p_grid: float = 0.0
    q_grid: float = 0.0

    @property
    def mode(self) -> Mode:
        return aggregate_mode([s.state for s in self.segments])

    @property
    def energy(self) -> float:
        return sum(s.state.e for s in self.segments)


@dataclass
class World:
    scenario: Scenario
    dt: float
    k: int
    net: NetworkModel
    y: np.ndarray
    y_gen: complex
    gen_idx: int
    gen_params: GenParams
    gen: GenState
    bg: BusLoads
    V: np.ndarray
    p_elec: float
    est: FreqEstimator
    dcs: list
    events: list
    next_event: int
    log: SimLog
    low_since: float | None = None
    lin: LinearPart | None = None
    delta_solved: float = 0.0

    @property
    def t(self) -> float:
        return self.k * self.dt

    def measurement(self, d: DcRuntime) -> GridMeasurement:
        b = d.bus
        return GridMeasurement(abs(self.V[b]), float(self.est.phi[b]),
                               float(self.est.f_est[b]), self.t)


# --------------------------------------------------------------------------
# initialisation
# --------------------------------------------------------------------------

def _raw_it(d: DcRuntime, t: float) -> tuple[float, float]:
    spec = d.spec
    raw_cpu = cpu_raw(d.it.u_cpu, t, spec.cpu) + d.offset_mw
    raw_gpu = gpu_raw(t, spec.gpu, pulsing=d.pattern == "ai") if spec.gpu else 0.0
    return raw_cpu, raw_gpu


def _dc_injection(d: DcRuntime) -> complex:
    return complex(d.p_grid, d.q_grid)


def _loads(world_bg: BusLoads, dcs, s_sys) -> BusLoads:
    sp = world_bg.sp.copy()
    for d in dcs:
        sp[d.bus] += _dc_injection(d) / s_sys
    return BusLoads(sp, world_bg.si, world_bg.sz, world_bg.v_break)


def _grid_draw(d: DcRuntime) -> tuple[float, float]:
    p = q = 0.0
    for seg in d.segments:
        part = d.demand.scaled(seg.share)
        loss = 1.0 + seg.config.beta
        p += loss * part.p_dc
        q += part.q_dc
    return p, q


def _make_dc(i: int, spec: DcParams, net: NetworkModel, root: RngStream, dt: float) -> DcRuntime:
    check_filter_step(dt, spec.cpu, spec.gpu)
    it = ItState(spec.cpu.u0, 0.0, 0.0, 0.0)
    mp = None
    if spec.cooling.p_mw > 0:
        try:
            mp = size_motor(spec.cooling.p_mw, 1.0, spec.cooling.motor)
        except DcsimError as exc:
            raise InitializationError(f"cooling motor of {spec.name!r}: {exc}") from exc
    rating = spec.rating_mw
    segments = []
    for seg in spec.ups_segments():
        cfg = seg.ups.resolved(rating * seg.share)
        segments.append(Segment(UpsState.initial(cfg), cfg, seg.share))
    d = DcRuntime(spec, net.index(spec.bus), spec.pattern, it, None, mp,
                  root.child(i, 0), root.child(i, 1), segments)
    raw_cpu, raw_gpu = _raw_it(d, 0.0)
    d.it = ItState(spec.cpu.u0, raw_cpu, raw_gpu, 0.0)
    return d


def _dc_equilibrium(d: DcRuntime, v: complex) -> None:
    vmag = abs(v)
    motor_pq = (0.0, 0.0)
    if d.motor_params is not None:
        try:
            d.motor = steady_state(v, d.motor_params)
        except DcsimError as exc:
            raise InitializationError(f"cooling motor of {d.spec.name!r}: {exc}") from exc
        p_pu, q_pu = steady_power(vmag, d.motor.slip, d.motor_params)
        motor_pq = (p_pu * d.motor_params.s_base_mva, q_pu * d.motor_params.s_base_mva)
    d.demand = dc_demand(it_power(d.it), motor_pq, zip_power(vmag, d.spec.zip))
    d.p_grid, d.q_grid = _grid_draw(d)
    d.v_int, d.phi_int = vmag, float(np.angle(v))


def initialize(scenario: Scenario) -> World:
    """Pre-disturbance equilibrium: power flow with the DC demand at t = 0."""
    g = scenario.grid
    dt = scenario.dt_s
    net = NetworkModel.build(g.buses, g.lines, g.s_sys_mva)
    s_sys = g.s_sys_mva
    gen_idx = net.index(g.gen_bus)
    bg = BusLoads.empty(net.n, g.v_break_pu)
    for b in g.background:
        bg.add_zip(net.index(b.bus), b.zip, s_sys)
    root = RngStream(scenario.seed)
    dcs = [_make_dc(i, spec, net, root, dt) for i, spec in enumerate(scenario.dcs)]

    V = np.full(net.n, complex(g.v_gen_pu, 0.0))
    y_lines = net.y_bus()
    zero_src = np.zeros(net.n, dtype=complex)
    for _ in range(INIT_MAX_ITER):
        for d in dcs:
            _dc_equilibrium(d, V[d.bus])
        try:
            V_new, _ = network_solve(y_lines, zero_src, _loads(bg, dcs, s_sys), V,
                                     fixed={gen_idx: complex(g.v_gen_pu, 0.0)})
        except DcsimError as exc:
            raise InitializationError(f"initial power flow: {exc}") from exc
        change = float(np.max(np.abs(V_new - V)))
        V = V_new
        if change < INIT_TOL:
            break
    else:
        raise InitializationError(
            f"initial power flow and data-center demand did not agree after "
            f"{INIT_MAX_ITER} iterations (last change {change:.2e})")
    for d in dcs:
        _dc_equilibrium(d, V[d.bus])

    # generator behind transient reactance, expressed on the system base
    loads = _loads(bg, dcs, s_sys)
    i_inj = y_lines @ V + np.conj(loads.power(np.abs(V)) / V)
    i_g = i_inj[gen_idx]
    x_sys = g.gen.xd_t_pu * s_sys / g.gen.s_base_mva
    e_int = V[gen_idx] + 1j * x_sys * i_g
    p_elec = (e_int * np.conj(i_g)).real * s_sys / g.gen.s_base_mva
    gp = g.gen.model_copy(update={
        "e_mag_pu": abs(e_int) if g.gen.e_mag_pu is None else g.gen.e_mag_pu,
        "p_ref_pu": p_elec if g.gen.p_ref_pu is None else g.gen.p_ref_pu,
    })
    y_gen = 1.0 / (1j * x_sys)
    y_full = y_lines.copy()
    y_full[gen_idx, gen_idx] += y_gen
    gen0 = GenState(float(np.angle(e_int)), 0.0, p_elec)

    est = FreqEstimator.start(np.angle(V), g.t_w_s)
    for d in dcs:
        for seg in d.segments:
            # the grid sat at this operating point before t = 0
            v0, phi0 = abs(V[d.bus]), float(np.angle(V[d.bus]))
            seg.state.history.extend([(-seg.config.delta_s, v0, phi0), (0.0, v0, phi0)])

    events = _expand_events(scenario)
    n_rows = scenario.n_steps + 1
    slog = SimLog.allocate(n_rows, dt, net.bus_names, [d.spec.name for d in dcs], g.f0_hz)
    world = World(scenario, dt, 0, net, y_full, y_gen, gen_idx, gp, gen0, bg, V, p_elec, est,
                  dcs, events, 0, slog, delta_solved=gen0.delta)
    # solve with the internal source to confirm the equilibrium and obtain p_elec
    world.V, world.p_elec = _solve(world, gen0)
    world.gen = gen_step(gen0, world.p_elec, dt, gp, g.f0_hz)
    _apply_due_events(world)
    _log_row(world, gen0)
    return world


def _expand_events(scenario: Scenario) -> list:
    out = []
    for e in scenario.events:
        out.append((e.t_s, e))
        if e.kind == "fault" and e.duration_s is not None:
            out.append((e.t_s + e.duration_s, ("clear", e.bus)))
    out.sort(key=lambda pair: pair[0])
    return out


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------

def _solve(world: World, gen: GenState) -> tuple[np.ndarray, float]:
    n = world.net.n
    gp = world.gen_params
    s_sys = world.scenario.grid.s_sys_mva
    e_int = gp.e_mag_pu * complex(math.cos(gen.delta), math.sin(gen.delta))
    i_src = np.zeros(n, dtype=complex)
    i_src[world.gen_idx] = e_int * world.y_gen
    loads = _loads(world.bg, world.dcs, s_sys)
    if world.lin is None:
        world.lin = LinearPart.prepare(world.y, loads.sz)
    # the whole profile turns with the rotor angle; start from the turned one
    v0 = world.V * complex(math.cos(gen.delta - world.delta_solved),
                           math.sin(gen.delta - world.delta_solved))
    V, _ = network_solve(world.y, i_src, loads, v0, lin=world.lin)
    world.delta_solved = gen.delta
    i_g = (e_int - V[world.gen_idx]) * world.y_gen
    p_elec = (e_int * np.conj(i_g)).real * s_sys / gp.s_base_mva
    return V, float(p_elec)


def _advance_dc(world: World, d: DcRuntime, t1: float) -> None:
    dt = world.dt
    spec = d.spec
    # (1) drivers
    u = d.it.u_cpu
    if d.pattern == "batched":
        u = jump_step(u, dt, spec.cpu.jumps, d.rng_jump)
    eta = d.it.eta_it
    if spec.noise is not None:
        eta = ou_step(eta, dt, spec.noise, d.rng_noise)
    d.it = ItState(u, d.it.p_cpu, d.it.p_gpu, eta)
    raw_cpu, raw_gpu = _raw_it(d, t1)
    # (2) continuous states on the previous internal phasor
    d.it = it_filter_step(d.it, max(raw_cpu, 0.0), raw_gpu, dt, spec.cpu, spec.gpu)
    v_int = d.v_int * complex(math.cos(d.phi_int), math.sin(d.phi_int))
    motor_pq = (0.0, 0.0)
    if d.motor is not None:
        d.motor, p_m, q_m = motor_step(d.motor, v_int, dt, d.motor_params,
                                       spec.cooling.flux_dynamics)
        motor_pq = (p_m, q_m)
    # (3) demand; a depleted, islanded DC has no supply at all
    if d.v_int == 0.0:
        d.demand = ZERO_DEMAND
    else:
        d.demand = dc_demand(it_power(d.it), motor_pq, zip_power(d.v_int, spec.zip))


def _ups(world: World, d: DcRuntime, m: GridMeasurement, t1: float) -> None:
    p = q = 0.0
    for seg in d.segments:
        _, ps, qs = ups_step(seg.state, m, d.demand.scaled(seg.share), world.dt, seg.config)
        p += ps
        q += qs
        for (te, kind, detail) in seg.state.events:
            world.log.events.append((te, kind, _dc_id(d, seg), detail))
    d.p_grid, d.q_grid = p, q


def _dc_id(d: DcRuntime, seg: Segment) -> str:
    if len(d.segments) == 1:
        return d.spec.name
    return f"{d.spec.name}/{d.segments.index(seg)}"


def _update_internal(world: World, d: DcRuntime) -> None:
    m = world.measurement(d)
    tied = [s for s in d.segments if s.state.grid_tied]
    if tied:
        d.v_int, d.phi_int = m.v, m.phi
    else:
        seg = d.segments[0]
        d.v_int, d.phi_int = internal_phasor(seg.state, m, seg.config)


def step(world: World) -> World:
    k1 = world.k + 1
    t1 = k1 * world.dt
    try:
        measurements = [world.measurement(d) for d in world.dcs]
        for d in world.dcs:
            _advance_dc(world, d, t1)
        for d, m in zip(world.dcs, measurements):
            _ups(world, d, m, t1)
        # (5) network at t1 with the rotor angle prepared last step
        world.V, world.p_elec = _solve(world, world.gen)
        world.k = k1
        # (6)
        estimate_frequency(world.est, np.angle(world.V), world.dt)
        gen_now = world.gen
        world.gen = gen_step(gen_now, world.p_elec, world.dt, world.gen_params,
                             world.scenario.grid.f0_hz)
        for d in world.dcs:
            _update_internal(world, d)
        _watch_collapse(world)
        # (7)
        _apply_due_events(world)
    except ModelError as exc:
        if getattr(exc, "t", None) is None:
            exc.t = t1
            exc.args = (f"t={t1:.6f}s (step {k1}): {exc}",)
        raise
    # (8)
    _log_row(world, gen_now)
    return world


def _watch_collapse(world: World) -> None:
    vmin = float(np.min(np.abs(world.V)))
    if vmin < COLLAPSE_PU:
        if world.low_since is None:
            world.low_since = world.t
        elif world.t - world.low_since >= COLLAPSE_HOLD_S - 1e-9:
            world.log.events.append((world.t, "voltage_collapse", "",
                                     f"min bus voltage {vmin:.4f} pu for {COLLAPSE_HOLD_S} s"))
            log.warning("sustained low voltage at t=%.3f s", world.t)
            world.low_since = math.inf
    else:
        world.low_since = None


def _apply_due_events(world: World) -> None:
    t_next = (world.k + 1) * world.dt
    eps = 1e-9 * max(1.0, t_next)
    evs = world.events
    while world.next_event < len(evs) and evs[world.next_event][0] <= t_next + eps:
        _, ev = evs[world.next_event]
        world.next_event += 1
        _apply_event(world, ev)


def _find_dc(world, name) -> DcRuntime:
    for d in world.dcs:
        if d.spec.name == name:
            return d
    raise KeyError(name)


def _refresh_y(world: World) -> None:
    world.y = world.net.y_bus()
    world.y[world.gen_idx, world.gen_idx] += world.y_gen
    world.lin = None


def _apply_event(world: World, ev) -> None:
    # takes effect at the next solve
    t = (world.k + 1) * world.dt
    rec = world.log.events
    net = world.net
    if isinstance(ev, tuple) or ev.kind == "clear":
        bus = ev[1] if isinstance(ev, tuple) else ev.bus
        net.faults.pop(net.index(bus), None)
        _refresh_y(world)
        rec.append((t, "clear", "", f"bus={bus}"))
    elif ev.kind == "fault":
        net.faults[net.index(ev.bus)] = ev.y_fault
        _refresh_y(world)
        rec.append((t, "fault", "", f"bus={ev.bus} y={ev.g_pu:g}{ev.b_pu:+g}j"))
    elif ev.kind == "operator_reconnect":
        for seg in _find_dc(world, ev.dc).segments:
            seg.state.operator_release = True
        rec.append((t, "operator_reconnect", ev.dc, ""))
    elif ev.kind == "operator_disconnect":
        d = _find_dc(world, ev.dc)
        rec.append((t, "operator_disconnect", ev.dc, ""))
        m = world.measurement(d)
        for seg in d.segments:
            seg.state.events = []
            operator_disconnect(seg.state, m, seg.config, t)
            for (te, kind, detail) in seg.state.events:
                rec.append((te, kind, _dc_id(d, seg), detail))
        _update_internal(world, d)
    elif ev.kind == "demand_step":
        _find_dc(world, ev.dc).offset_mw += ev.delta_mw
        rec.append((t, "demand_step", ev.dc, f"delta_mw={ev.delta_mw:g}"))
    elif ev.kind == "pattern_switch":
        _find_dc(world, ev.dc).pattern = ev.pattern
        rec.append((t, "pattern_switch", ev.dc, f"pattern={ev.pattern}"))


def _log_row(world: World, gen: GenState) -> None:
    k = world.k
    lg = world.log
    if k >= lg.t.size:
        return
    f0 = world.scenario.grid.f0_hz
    lg.v[k] = np.abs(world.V)
    lg.f_hz[k] = f0 + world.est.f_est
    lg.rocof[k] = world.est.rocof
    lg.f_sys_hz[k] = f0 * (1.0 + gen.omega_dev)
    lg.p_gen_mw[k] = world.p_elec * world.gen_params.s_base_mva
    for j, d in enumerate(world.dcs):
        lg.p_grid[k, j] = d.p_grid
        lg.q_grid[k, j] = d.q_grid
        lg.mode[k, j] = int(d.mode)
        lg.e_mwh[k, j] = d.energy
        dem = d.demand
        lg.p_dc[k, j] = dem.p_dc
        lg.p_it[k, j] = dem.p_it
        lg.p_cooling[k, j] = dem.p_cooling
        lg.p_zip[k, j] = dem.p_zip
        lg.v_int[k, j] = d.v_int
        lg.slip[k, j] = d.motor.slip if d.motor is not None else 0.0


def run(scenario: Scenario, world: World | None = None) -> SimLog:
    """Initialise and step to the end of the scenario."""
    world = world or initialize(scenario)
    for _ in range(scenario.n_steps - world.k):
        step(world)
    return world.log
