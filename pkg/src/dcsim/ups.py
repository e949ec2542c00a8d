"""UPS mode logic: disconnection, reconnection schemes, battery energy, and the
internal voltage phasor seen by the data-center loads.

Modes and grid draw (``beta`` = converter losses, online topology only)::

    NORMAL     p_grid = (1 + beta) p_dc              q_grid = q_dc
    EMERGENCY  p_grid = 0                            q_grid = 0
    CHARGING   p_grid = (1 + beta) p_dc + p_charge   q_grid = q_dc

Stored energy follows ``e' = p_grid - (1 + beta) p_dc`` clamped to
``[0, e_max]``. The only legal transitions are NORMAL->EMERGENCY,
CHARGING->EMERGENCY, EMERGENCY->CHARGING and CHARGING->NORMAL.

Timing convention: :func:`ups_step` receives the measurement from the previous
network solution (time ``m.t``) and acts at ``m.t + dt``.
"""

from __future__ import annotations

import enum
import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Annotated, Literal, Union

from pydantic import Field, model_validator

from ._base import Params
from .dcload.demand import DcDemand
from .errors import ConfigError

log = logging.getLogger(__name__)

_T_EPS = 1e-9
_SHARE_TOL = 1e-9


class Mode(enum.IntEnum):
    NORMAL = 0
    EMERGENCY = 1
    CHARGING = 2


class Topology(str, enum.Enum):
    OFFLINE = "offline"
    ONLINE = "online"
    DRUPS = "drups"


class InstantReconnect(Params):
    scheme: Literal["instant"] = "instant"


class DelayedReconnect(Params):
    scheme: Literal["delayed"] = "delayed"
    t_delay_s: float = Field(default=30.0, ge=0)


class CountingReconnect(Params):
    scheme: Literal["disturbance_counting"] = "disturbance_counting"
    n_max: int = Field(default=3, ge=1)
    window_s: float = Field(default=60.0, gt=0)
    t_delay_s: float = Field(default=30.0, ge=0)


class ManualReconnect(Params):
    scheme: Literal["manual"] = "manual"


ReconnectScheme = Annotated[
    Union[InstantReconnect, DelayedReconnect, CountingReconnect, ManualReconnect],
    Field(discriminator="scheme"),
]


class UpsConfig(Params):
    f_min_hz: float = -0.3
    f_max_hz: float = 0.3
    v_min_pu: float = -0.1
    v_max_pu: float = 0.1
    beta: float = Field(default=0.0, ge=0)
    # None: resolved from the data-center rating at initialisation
    p_charge_mw: float | None = Field(default=None, ge=0)
    e_max_mwh: float | None = Field(default=None, gt=0)
    topology: Topology = Topology.OFFLINE
    reconnection: ReconnectScheme = Field(default_factory=DelayedReconnect)
    v_scheme: Literal["nominal", "prefault"] = "prefault"
    angle_comp: bool = True
    delta_s: float = Field(default=0.01, gt=0)
    # phase slew available to the inverter when re-synchronising (1 Hz offset)
    sync_rate_rad_s: float = Field(default=2 * math.pi, gt=0)

    @model_validator(mode="after")
    def _signs(self):
        if not self.f_min_hz < 0 < self.f_max_hz:
            raise ValueError("frequency thresholds must satisfy f_min_hz < 0 < f_max_hz")
        if not self.v_min_pu < 0 < self.v_max_pu:
            raise ValueError("voltage thresholds must satisfy v_min_pu < 0 < v_max_pu")
        if self.beta != 0 and self.topology != Topology.ONLINE:
            raise ValueError("beta must be 0 unless topology is online")
        return self

    def resolved(self, p_rating_mw: float) -> "UpsConfig":
        """Fill unset charge power (5 % of rating) and capacity (5 min at rating)."""
        update = {}
        if self.p_charge_mw is None:
            update["p_charge_mw"] = 0.05 * p_rating_mw
        if self.e_max_mwh is None:
            update["e_max_mwh"] = max(p_rating_mw, 1e-6) * 5.0 / 60.0
        return self.model_copy(update=update) if update else self


@dataclass(frozen=True)
class GridMeasurement:
    v: float
    phi: float
    f_dev: float
    t: float

    @property
    def v_dev(self) -> float:
        return self.v - 1.0


@dataclass
class UpsState:
    mode: Mode
    e: float
    t_ok: float = 0.0
    in_bounds_since: float | None = None
    disturbance_times: list = field(default_factory=list)
    held_v: float = 1.0
    held_phi: float = 0.0
    angle_offset: float = 0.0
    history: deque = field(default_factory=deque)
    operator_release: bool = False
    depleted: bool = False
    # records produced by the most recent ups_step: (t, kind, detail)
    events: list = field(default_factory=list)
    _underflow_warned: bool = False

    @classmethod
    def initial(cls, c: UpsConfig) -> "UpsState":
        return cls(mode=Mode.NORMAL, e=c.e_max_mwh)

    @property
    def grid_tied(self) -> bool:
        return self.mode != Mode.EMERGENCY


def violations(m: GridMeasurement, c: UpsConfig) -> list[str]:
    out = []
    if m.v_dev < c.v_min_pu:
        out.append("undervoltage")
    if m.v_dev > c.v_max_pu:
        out.append("overvoltage")
    if m.f_dev < c.f_min_hz:
        out.append("underfrequency")
    if m.f_dev > c.f_max_hz:
        out.append("overfrequency")
    return out


def check_disconnect(m: GridMeasurement, c: UpsConfig) -> bool:
    """Strict-inequality threshold test; a value exactly on a limit is in range."""
    return (m.f_dev < c.f_min_hz or m.f_dev > c.f_max_hz
            or m.v_dev < c.v_min_pu or m.v_dev > c.v_max_pu)


def _recent_disturbances(s, window, t):
    return sum(1 for td in s.disturbance_times if td > t - window - _T_EPS)


def reconnection_permitted(s: UpsState, c: UpsConfig, grid_in_bounds: bool, t: float) -> bool:
    if not grid_in_bounds:
        return False
    r = c.reconnection
    if r.scheme == "instant":
        return True
    if r.scheme == "manual":
        return s.operator_release
    if s.t_ok < r.t_delay_s - _T_EPS:
        return False
    if r.scheme == "disturbance_counting":
        return _recent_disturbances(s, r.window_s, t) < r.n_max
    return True


def _lookback(s, t_target):
    """Latest history sample at or before ``t_target`` (oldest on underflow)."""
    hist = s.history
    chosen = None
    for sample in hist:
        if sample[0] <= t_target + _T_EPS:
            chosen = sample
        else:
            break
    if chosen is None:
        chosen = hist[0]
        if not s._underflow_warned:
            s._underflow_warned = True
            log.warning("UPS look-back history shorter than delta; using oldest sample")
            s.events.append((t_target, "history_underflow", f"oldest t={chosen[0]:.6f}"))
    return chosen


def _record(s, m, c):
    hist = s.history
    hist.append((m.t, m.v, m.phi))
    horizon = m.t - c.delta_s
    # keep one sample at or before the look-back horizon
    while len(hist) > 2 and hist[1][0] <= horizon + _T_EPS:
        hist.popleft()


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _transition(s, new_mode, t, cause, m):
    old = s.mode
    s.mode = new_mode
    s.events.append((
        t, "mode_change",
        f"{old.name}->{new_mode.name} cause={cause} v={m.v:.6f} f_dev={m.f_dev:.6f} e={s.e:.6f}",
    ))


def _enter_emergency(s, m, c, t, causes):
    _transition(s, Mode.EMERGENCY, t, "+".join(causes), m)
    s.disturbance_times.append(t)
    s.in_bounds_since = None
    s.t_ok = 0.0
    s.operator_release = False
    before = _lookback(s, m.t - c.delta_s)
    if c.topology == Topology.ONLINE:
        # inverter keeps feeding the last value seen before the disturbance
        held = s.history[-2] if len(s.history) >= 2 else s.history[-1]
        s.held_v = held[1]
    elif c.v_scheme == "nominal":
        s.held_v = 1.0
    else:
        s.held_v = before[1]
    s.held_phi = before[2]
    s.angle_offset = 0.0


def _sync_angle(s, m, c, dt, snap):
    target = _lookback(s, m.t - c.delta_s)[2] - s.held_phi
    err = _wrap(target - s.angle_offset)
    if snap:
        s.angle_offset += err
    else:
        step = c.sync_rate_rad_s * dt
        s.angle_offset += max(-step, min(step, err))


def ups_step(s: UpsState, m: GridMeasurement, dc: DcDemand, dt: float,
             c: UpsConfig) -> tuple[UpsState, float, float]:
    """Advance the UPS one step. ``s`` is updated in place and returned."""
    t = m.t + dt
    s.events = []
    _record(s, m, c)
    causes = violations(m, c)
    out = bool(causes)

    if s.mode == Mode.EMERGENCY:
        if out:
            s.in_bounds_since = None
            s.t_ok = 0.0
        else:
            if s.in_bounds_since is None:
                s.in_bounds_since = m.t
            s.t_ok = t - s.in_bounds_since
        r = c.reconnection
        if r.scheme == "disturbance_counting":
            s.disturbance_times = [td for td in s.disturbance_times
                                   if td > t - r.window_s - _T_EPS]
        if reconnection_permitted(s, c, not out, t):
            if c.angle_comp:
                _sync_angle(s, m, c, dt, snap=True)
            _transition(s, Mode.CHARGING, t, f"reconnect:{r.scheme}", m)
            s.operator_release = False
            s.depleted = False
        elif c.angle_comp and not out:
            _sync_angle(s, m, c, dt, snap=False)
    elif out:
        _enter_emergency(s, m, c, t, causes)
    elif s.mode == Mode.CHARGING and s.e >= c.e_max_mwh - 1e-12:
        _transition(s, Mode.NORMAL, t, "charged", m)

    loss = 1.0 + c.beta
    if s.mode == Mode.NORMAL:
        p_grid, q_grid = loss * dc.p_dc, dc.q_dc
    elif s.mode == Mode.CHARGING:
        p_grid, q_grid = loss * dc.p_dc + c.p_charge_mw, dc.q_dc
    else:
        p_grid, q_grid = 0.0, 0.0

    e = s.e + (p_grid - loss * dc.p_dc) * dt / 3600.0
    if e <= 0.0:
        e = 0.0
        if s.mode == Mode.EMERGENCY and not s.depleted:
            s.depleted = True
            s.events.append((t, "battery_depleted", "internal load dropped"))
    s.e = min(e, c.e_max_mwh)
    return s, p_grid, q_grid


def operator_disconnect(s: UpsState, m: GridMeasurement, c: UpsConfig, t: float) -> bool:
    """Island on operator command. Returns False when already islanded."""
    if not s.grid_tied:
        return False
    _record(s, m, c)
    _enter_emergency(s, m, c, t, ["operator"])
    return True


def internal_phasor(s: UpsState, m: GridMeasurement, c: UpsConfig) -> tuple[float, float]:
    """Voltage magnitude and angle applied to the data-center loads."""
    if s.grid_tied:
        return m.v, m.phi
    if s.depleted:
        return 0.0, s.held_phi + s.angle_offset
    return s.held_v, s.held_phi + s.angle_offset


@dataclass
class Segment:
    state: UpsState
    config: UpsConfig
    share: float


def check_shares(shares) -> None:
    total = sum(shares)
    if abs(total - 1.0) > _SHARE_TOL:
        raise ConfigError(f"UPS segment shares must sum to 1, got {total:.6g}")


def segmented_ups_step(segments: list[Segment], m: GridMeasurement, dc: DcDemand,
                       dt: float) -> tuple[list[Segment], float, float]:
    check_shares([seg.share for seg in segments])
    p_total = q_total = 0.0
    for seg in segments:
        _, p, q = ups_step(seg.state, m, dc.scaled(seg.share), dt, seg.config)
        p_total += p
        q_total += q
    return segments, p_total, q_total


def aggregate_mode(states) -> Mode:
    """Single mode for a segmented UPS: any segment islanded reports EMERGENCY."""
    modes = [s.mode for s in states]
    if Mode.EMERGENCY in modes:
        return Mode.EMERGENCY
    if Mode.CHARGING in modes:
        return Mode.CHARGING
    return Mode.NORMAL
