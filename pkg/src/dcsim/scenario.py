"""Scenario model, file parsing/serialisation and the bundled scenarios.

Scenario files are YAML documents (``.scn``) that map one-to-one onto
:class:`Scenario`. Physical quantities carry their unit in the key name.
"""

from __future__ import annotations

import math
from importlib import resources
from pathlib import Path
from typing import Annotated, Literal, Union

import yaml
from pydantic import Field, ValidationError, model_validator

from ._base import Params
from .dcload.demand import ZipParams
from .dcload.it import CpuParams, GpuParams
from .dcload.motor import MotorParams
from .errors import ConfigError
from .grid.machine import GenParams
from .grid.network import BOLTED, BackgroundLoad, BusParams, LineParams
from .stochastic import OuParams
from .ups import UpsConfig

SCHEMA_VERSION = 1
DT_MIN, DT_MAX = 1e-5, 1e-2
DEFAULT_CLEARING_S = 0.15

Pattern = Literal["constant", "batched", "ai"]


class CoolingParams(Params):
    p_mw: float = Field(default=60.0, ge=0)
    flux_dynamics: bool = False
    motor: MotorParams = Field(default_factory=MotorParams)


class SegmentParams(Params):
    share: float = Field(gt=0, le=1)
    ups: UpsConfig = Field(default_factory=UpsConfig)


class DcParams(Params):
    name: str
    bus: str
    pattern: Pattern = "constant"
    cpu: CpuParams
    gpu: GpuParams | None = None
    noise: OuParams | None = None
    zip: ZipParams = Field(default_factory=ZipParams)
    cooling: CoolingParams = Field(default_factory=CoolingParams)
    ups: UpsConfig | None = None
    segments: list[SegmentParams] | None = None

    @model_validator(mode="after")
    def _consistency(self):
        if self.ups is not None and self.segments is not None:
            raise ValueError("give either 'ups' or 'segments', not both")
        if self.segments is not None:
            if not self.segments:
                raise ValueError("'segments' must not be empty")
            total = sum(s.share for s in self.segments)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"segment shares must sum to 1, got {total:.6g}")
        _check_pattern(self.pattern, self)
        return self

    def ups_segments(self) -> list[SegmentParams]:
        if self.segments is not None:
            return list(self.segments)
        return [SegmentParams(share=1.0, ups=self.ups or UpsConfig())]

    @property
    def rating_mw(self) -> float:
        gpu = self.gpu.p_full_mw if self.gpu else 0.0
        return self.cpu.p_full_mw + gpu + self.cooling.p_mw + self.zip.p0_mw


def _check_pattern(pattern, dc):
    if pattern == "ai" and (dc.gpu is None or dc.gpu.pulse is None):
        raise ValueError("pattern 'ai' needs gpu.pulse")
    if pattern == "batched" and dc.cpu.jumps is None:
        raise ValueError("pattern 'batched' needs cpu.jumps")


def default_buses():
    return [BusParams(name="GEN"), BusParams(name="DC"), BusParams(name="LOAD")]


def default_lines():
    return [LineParams(from_bus="GEN", to_bus="DC", r_pu=0.005, x_pu=0.05),
            LineParams(from_bus="GEN", to_bus="LOAD", r_pu=0.005, x_pu=0.05),
            LineParams(from_bus="DC", to_bus="LOAD", r_pu=0.005, x_pu=0.05)]


def default_background():
    zp = ZipParams(p0_mw=3000.0, q0_mvar=600.0, a_p=0.8, b_p=0.1, c_p=0.1,
                   a_q=0.2, b_q=0.3, c_q=0.5)
    return [BackgroundLoad(bus="LOAD", zip=zp)]


class GridParams(Params):
    s_sys_mva: float = Field(default=1000.0, gt=0)
    f0_hz: float = Field(default=50.0, gt=0)
    buses: list[BusParams] = Field(default_factory=default_buses)
    lines: list[LineParams] = Field(default_factory=default_lines)
    gen_bus: str = "GEN"
    gen: GenParams = Field(default_factory=GenParams)
    v_gen_pu: float = Field(default=1.0, gt=0)
    background: list[BackgroundLoad] = Field(default_factory=default_background)
    t_w_s: float = Field(default=0.05, gt=0)
    v_break_pu: float = Field(default=0.7, gt=0, le=1)

    @model_validator(mode="after")
    def _references(self):
        names = {b.name for b in self.buses}
        if len(names) != len(self.buses):
            raise ValueError("bus names must be unique")
        refs = [self.gen_bus] + [b.bus for b in self.background]
        for ln in self.lines:
            refs += [ln.from_bus, ln.to_bus]
        for r in refs:
            if r not in names:
                raise ValueError(f"unknown bus {r!r}")
        return self


class FaultEvent(Params):
    kind: Literal["fault"] = "fault"
    t_s: float = Field(ge=0)
    bus: str
    g_pu: float = 0.0
    b_pu: float = -BOLTED
    # clearing time; None leaves the fault until an explicit 'clear'
    duration_s: float | None = Field(default=DEFAULT_CLEARING_S, gt=0)

    @property
    def y_fault(self) -> complex:
        return complex(self.g_pu, self.b_pu)


class ClearEvent(Params):
    kind: Literal["clear"] = "clear"
    t_s: float = Field(ge=0)
    bus: str


class OperatorReconnectEvent(Params):
    kind: Literal["operator_reconnect"] = "operator_reconnect"
    t_s: float = Field(ge=0)
    dc: str


class OperatorDisconnectEvent(Params):
    kind: Literal["operator_disconnect"] = "operator_disconnect"
    t_s: float = Field(ge=0)
    dc: str


class DemandStepEvent(Params):
    kind: Literal["demand_step"] = "demand_step"
    t_s: float = Field(ge=0)
    dc: str
    delta_mw: float


class PatternSwitchEvent(Params):
    kind: Literal["pattern_switch"] = "pattern_switch"
    t_s: float = Field(ge=0)
    dc: str
    pattern: Pattern


Event = Annotated[
    Union[FaultEvent, ClearEvent, OperatorReconnectEvent, OperatorDisconnectEvent,
          DemandStepEvent, PatternSwitchEvent],
    Field(discriminator="kind"),
]


class Scenario(Params):
    schema_version: Literal[1] = SCHEMA_VERSION
    name: str = "scenario"
    description: str = ""
    duration_s: float = Field(gt=0)
    dt_s: float = Field(default=1e-3, ge=DT_MIN, le=DT_MAX)
    seed: int = Field(default=0, ge=0)
    grid: GridParams = Field(default_factory=GridParams)
    dcs: list[DcParams] = Field(default_factory=list)
    events: list[Event] = Field(default_factory=list)

    @model_validator(mode="after")
    def _references(self):
        times = [e.t_s for e in self.events]
        if times != sorted(times):
            raise ValueError("events must be sorted by t_s")
        buses = {b.name for b in self.grid.buses}
        names = [d.name for d in self.dcs]
        if len(set(names)) != len(names):
            raise ValueError("data-center names must be unique")
        for d in self.dcs:
            if d.bus not in buses:
                raise ValueError(f"data center {d.name!r} on unknown bus {d.bus!r}")
            if d.bus == self.grid.gen_bus:
                raise ValueError(f"data center {d.name!r} cannot sit on the generator bus")
        by_name = {d.name: d for d in self.dcs}
        for e in self.events:
            if hasattr(e, "bus") and e.bus not in buses:
                raise ValueError(f"event at t={e.t_s} references unknown bus {e.bus!r}")
            if hasattr(e, "dc"):
                if e.dc not in by_name:
                    raise ValueError(f"event at t={e.t_s} references unknown data center {e.dc!r}")
                if e.kind == "pattern_switch":
                    _check_pattern(e.pattern, by_name[e.dc])
        return self

    @property
    def n_steps(self) -> int:
        return int(round(self.duration_s / self.dt_s))

    def with_overrides(self, *, seed=None, dt_s=None, duration_s=None) -> "Scenario":
        data = self.model_dump()
        for key, val in (("seed", seed), ("dt_s", dt_s), ("duration_s", duration_s)):
            if val is not None:
                data[key] = val
        try:
            return Scenario.model_validate(data)
        except ValidationError as exc:
            raise ScenarioError(_format_errors(exc, None, "<overrides>")) from None


# --------------------------------------------------------------------------
# file I/O
# --------------------------------------------------------------------------

class ScenarioError(ConfigError):
    """Schema or invariant violation in a scenario document."""


def _node_for(root, loc):
    """Deepest YAML node along a pydantic error location."""
    node = root
    for part in loc:
        if isinstance(node, yaml.MappingNode) and isinstance(part, str):
            for key, value in node.value:
                if key.value == part:
                    node = value
                    break
            # a discriminator tag or missing key: stay on the parent
        elif isinstance(node, yaml.SequenceNode) and isinstance(part, int):
            if 0 <= part < len(node.value):
                node = node.value[part]
            else:
                break
    return node


def _format_errors(exc: ValidationError, root, source) -> str:
    lines = [f"{source}: invalid scenario"]
    for err in exc.errors():
        loc = tuple(err["loc"])
        key = ".".join(str(p) for p in loc) or "<document>"
        where = source
        if root is not None:
            node = _node_for(root, loc)
            where = f"{source}:{node.start_mark.line + 1}"
        lines.append(f"  {where}: {key}: {err['msg']}")
    return "\n".join(lines)


def load_scenario_text(text: str, source: str = "<string>") -> Scenario:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{source}: not valid YAML: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{source}: top level must be a mapping")
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ScenarioError(_format_errors(exc, root, source)) from None


def builtin_names() -> list[str]:
    folder = resources.files("dcsim") / "scenarios"
    return sorted(p.name[:-4] for p in folder.iterdir() if p.name.endswith(".scn"))


def builtin_text(name: str) -> str:
    return (resources.files("dcsim") / "scenarios" / f"{name}.scn").read_text()


def parse_scenario(path) -> Scenario:
    """Read a scenario file, or a bundled scenario when ``path`` names one."""
    p = Path(path)
    if not p.exists():
        name = p.name[:-4] if p.name.endswith(".scn") else p.name
        if str(path) == p.name and name in builtin_names():
            return load_scenario_text(builtin_text(name), f"{name}.scn")
    try:
        text = p.read_text()
    except OSError as exc:
        raise OSError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return load_scenario_text(text, str(path))


def dump_scenario(scn: Scenario) -> str:
    return yaml.safe_dump(scn.model_dump(mode="json"), sort_keys=False)


def write_scenario(scn: Scenario, path) -> None:
    Path(path).write_text(dump_scenario(scn))


def flat_shares(n: int) -> list[float]:
    """``n`` equal shares that sum to one exactly in floating point."""
    shares = [1.0 / n] * n
    shares[-1] = 1.0 - math.fsum(shares[:-1])
    return shares
