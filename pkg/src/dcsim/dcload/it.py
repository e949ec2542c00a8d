"""Server (IT) load: CPU and GPU raw demand, low-pass smoothing, noise."""

from __future__ import annotations

from dataclasses import dataclass

from pydantic import Field, model_validator

from .._base import Params
from ..errors import ConfigError
from ..stochastic import JumpParams, OuParams, PulseParams, pulse_value


class CpuParams(Params):
    p_idle_mw: float = Field(ge=0)
    p_full_mw: float = Field(ge=0)
    t_filter_s: float = Field(default=0.05, gt=0)
    u0: float = Field(default=1.0, ge=0, le=1)
    burst: PulseParams | None = None
    jumps: JumpParams | None = None

    @model_validator(mode="after")
    def _ordered(self):
        if self.p_idle_mw > self.p_full_mw:
            raise ValueError("p_idle_mw must not exceed p_full_mw")
        return self


class GpuParams(Params):
    p_idle_mw: float = Field(ge=0)
    p_full_mw: float = Field(ge=0)
    t_filter_s: float = Field(default=0.05, gt=0)
    pulse: PulseParams | None = None
    # usage when the pulse train is inactive (non-AI pattern)
    u_const: float = Field(default=0.0, ge=0, le=1)

    @model_validator(mode="after")
    def _checks(self):
        if self.p_idle_mw > self.p_full_mw:
            raise ValueError("p_idle_mw must not exceed p_full_mw")
        if self.pulse is not None:
            for level in (self.pulse.low, self.pulse.high):
                if not 0.0 <= level <= 1.0:
                    raise ValueError("GPU pulse levels must lie in [0, 1]")
        return self


@dataclass
class ItState:
    u_cpu: float
    p_cpu: float
    p_gpu: float
    eta_it: float = 0.0


def cpu_raw(u_cpu: float, t: float, p: CpuParams) -> float:
    """Linear idle-to-full CPU power plus the periodic burst term."""
    if not 0.0 <= u_cpu <= 1.0:
        raise ValueError(f"u_cpu={u_cpu} outside [0, 1]")
    raw = p.p_idle_mw + (p.p_full_mw - p.p_idle_mw) * u_cpu
    if p.burst is not None:
        raw += pulse_value(t, p.burst)
    return raw


def gpu_raw(t: float, p: GpuParams, pulsing: bool = True) -> float:
    if pulsing and p.pulse is not None:
        u = pulse_value(t, p.pulse)
    else:
        u = p.u_const
    return p.p_idle_mw + (p.p_full_mw - p.p_idle_mw) * u


def check_filter_step(dt: float, cpu: CpuParams, gpu: GpuParams | None) -> None:
    t_min = cpu.t_filter_s if gpu is None else min(cpu.t_filter_s, gpu.t_filter_s)
    if not dt < t_min / 2.0:
        raise ConfigError(
            f"dt={dt} s too large for IT filter time constant {t_min} s (need dt < T/2)"
        )


def _lowpass(p: float, raw: float, dt: float, t_filter: float) -> float:
    # implicit Euler of T p' = raw - p; monotone for any dt
    return (t_filter * p + dt * raw) / (t_filter + dt)


def it_filter_step(state: ItState, raw_cpu: float, raw_gpu: float, dt: float,
                   cpu: CpuParams, gpu: GpuParams | None) -> ItState:
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_cpu = _lowpass(state.p_cpu, raw_cpu, dt, cpu.t_filter_s)
    p_gpu = 0.0 if gpu is None else _lowpass(state.p_gpu, raw_gpu, dt, gpu.t_filter_s)
    return ItState(state.u_cpu, p_cpu, p_gpu, state.eta_it)


def it_power(state: ItState) -> float:
    """Total server demand, floored at zero because the noise is unbounded below."""
    return max(0.0, state.p_cpu + state.p_gpu + state.eta_it)


__all__ = [
    "CpuParams", "GpuParams", "ItState", "OuParams", "JumpParams",
    "cpu_raw", "gpu_raw", "it_filter_step", "it_power", "check_filter_step",
]
