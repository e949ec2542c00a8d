"""Seeded random drivers and pulse trains for the data-center load patterns.

Three primitives live here:

* an Ornstein-Uhlenbeck noise process, integrated with Euler-Maruyama and
  clamped to three stationary standard deviations,
* a compound Poisson jump process acting on a utilisation fraction,
* a deterministic rectangular pulse train.

Every random draw goes through :class:`RngStream`, so a simulation is a pure
function of its seed.
"""

from __future__ import annotations

import math

import numpy as np
from pydantic import Field, model_validator

from ._base import Params
from .errors import ModelError

OU_CLAMP_SIGMAS = 3.0


class RngStream:
    """Seeded generator with deterministic, non-overlapping sub-streams.

    Sub-streams are derived from ``(seed, key)`` through numpy's
    ``SeedSequence`` spawn keys, so the stream handed to one consumer does not
    depend on how many other consumers were created before it.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = int(seed)
        self.key = tuple(key)
        self._gen = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(self.seed, spawn_key=self.key))
        )

    def child(self, *key: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(key))

    def normal(self, scale: float = 1.0) -> float:
        return scale * self._gen.standard_normal()

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        return lo + (hi - lo) * self._gen.random()

    def __repr__(self):
        return f"RngStream(seed={self.seed}, key={self.key})"


class OuParams(Params):
    """Mean-reverting noise parameters; the state carries the caller's unit."""

    a_per_s: float = Field(gt=0)
    b_per_sqrt_s: float = Field(ge=0)

    @property
    def stationary_std(self) -> float:
        return self.b_per_sqrt_s / math.sqrt(2.0 * self.a_per_s)

    @property
    def bound(self) -> float:
        return OU_CLAMP_SIGMAS * self.stationary_std


class JumpParams(Params):
    c_cpu: float = 1.0
    rate_per_s: float = Field(ge=0)
    amp_lo: float
    amp_hi: float

    @model_validator(mode="after")
    def _ordered(self):
        if self.amp_lo > self.amp_hi:
            raise ValueError("amp_lo must not exceed amp_hi")
        return self


class PulseParams(Params):
    period_s: float = Field(gt=0)
    width_s: float = Field(gt=0)
    high: float = 1.0
    low: float = 0.0
    phase_offset_s: float = 0.0

    @model_validator(mode="after")
    def _width_within_period(self):
        if self.width_s > self.period_s:
            raise ValueError("width_s must not exceed period_s")
        return self

    @property
    def duty_cycle(self) -> float:
        return self.width_s / self.period_s

    @property
    def mean(self) -> float:
        d = self.duty_cycle
        return d * self.high + (1.0 - d) * self.low


def _require_finite(name, value):
    if not math.isfinite(value):
        raise ModelError(f"non-finite {name}: {value!r}")


def ou_step(eta: float, dt: float, p: OuParams, rng: RngStream) -> float:
    """One Euler-Maruyama step of ``d eta = -a eta dt + b dW``, clamped."""
    _require_finite("noise state", eta)
    if dt <= 0:
        raise ValueError("dt must be positive")
    eta = eta - p.a_per_s * eta * dt + p.b_per_sqrt_s * rng.normal(math.sqrt(dt))
    bound = p.bound
    if bound == 0.0:
        # noiseless: pure decay, the clamp would pin the state at zero
        return eta
    if eta > bound:
        return bound
    if eta < -bound:
        return -bound
    return eta


def jump_step(u: float, dt: float, p: JumpParams, rng: RngStream) -> float:
    """Advance a utilisation fraction by at most one compound-Poisson jump.

    A jump occurs with probability ``rate * dt`` (Bernoulli thinning of the
    Poisson process, accurate while ``rate * dt << 1``).
    """
    _require_finite("utilisation", u)
    if p.rate_per_s == 0.0:
        return u
    if rng.uniform() < p.rate_per_s * dt:
        u = u + p.c_cpu * rng.uniform(p.amp_lo, p.amp_hi)
    return min(1.0, max(0.0, u))


def pulse_value(t: float, p: PulseParams) -> float:
    """Level of the pulse train at ``t``; high on ``[0, width)`` of each period."""
    phase = math.fmod(t - p.phase_offset_s, p.period_s)
    if phase < 0.0:
        phase += p.period_s
    # fmod leaves values one ulp below period when t is a float multiple of it
    if p.period_s - phase < 1e-12 * max(1.0, p.period_s):
        phase = 0.0
    return p.high if phase < p.width_s else p.low
