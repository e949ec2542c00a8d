"""Aggregate synchronous machine with governor, and bus-frequency estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from pydantic import Field

from .._base import Params
from ..errors import InstabilityError

log = logging.getLogger(__name__)

OMEGA_LIMIT_PU = 0.1


class GenParams(Params):
    """Classical machine (constant EMF behind transient reactance) on its own base."""

    h_s: float = Field(default=6.0, gt=0)
    d_pu: float = Field(default=2.8, ge=0)
    r_droop_pu: float = Field(default=0.05, gt=0)
    t_gov_s: float = Field(default=6.0, gt=0)
    xd_t_pu: float = Field(default=0.3, gt=0)
    s_base_mva: float = Field(default=7083.0, gt=0)
    # both resolved by the initial power flow when left unset
    e_mag_pu: float | None = Field(default=None, gt=0)
    p_ref_pu: float | None = None


@dataclass
class GenState:
    delta: float
    omega_dev: float = 0.0
    p_gov: float = 0.0


def gen_step(s: GenState, p_elec: float, dt: float, p: GenParams,
             f0_hz: float = 50.0) -> GenState:
    """Trapezoidal step of swing + first-order governor, ``p_elec`` held over the step.

    ``2H w' = p_gov - p_elec - D w``,
    ``T_g p_gov' = -w/R - p_gov + p_ref``,
    ``delta' = w_b w``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    p_ref = p.p_ref_pu if p.p_ref_pu is not None else p_elec
    two_h = 2.0 * p.h_s
    tg = p.t_gov_s
    a11, a12 = -p.d_pu / two_h, 1.0 / two_h
    a21, a22 = -1.0 / (p.r_droop_pu * tg), -1.0 / tg
    b1, b2 = -p_elec / two_h, p_ref / tg
    h = 0.5 * dt
    w0, g0 = s.omega_dev, s.p_gov
    r1 = w0 + h * (a11 * w0 + a12 * g0) + dt * b1
    r2 = g0 + h * (a21 * w0 + a22 * g0) + dt * b2
    m11, m12, m21, m22 = 1 - h * a11, -h * a12, -h * a21, 1 - h * a22
    det = m11 * m22 - m12 * m21
    w1 = (r1 * m22 - m12 * r2) / det
    g1 = (m11 * r2 - m21 * r1) / det
    if abs(w1) > OMEGA_LIMIT_PU:
        raise InstabilityError(f"generator speed deviation {w1:.4f} pu exceeds {OMEGA_LIMIT_PU}")
    omega_b = 2.0 * math.pi * f0_hz
    return GenState(s.delta + h * omega_b * (w0 + w1), w1, g1)


def _wrap(x):
    return (x + np.pi) % (2 * np.pi) - np.pi


@dataclass
class FreqEstimator:
    """Washout of the bus-angle derivative; also tracks the unwrapped angle."""

    t_w_s: float
    phi: np.ndarray
    f_est: np.ndarray
    rocof: np.ndarray
    _warned: bool = False

    @classmethod
    def start(cls, phi0, t_w_s: float = 0.05) -> "FreqEstimator":
        if t_w_s <= 0:
            raise ValueError("washout time constant must be positive")
        phi0 = np.asarray(phi0, dtype=float)
        return cls(t_w_s, phi0.copy(), np.zeros_like(phi0), np.zeros_like(phi0))


def estimate_frequency(est: FreqEstimator, phi, dt: float) -> np.ndarray:
    """Update the estimator with new bus angles; returns deviations in Hz.

    ``phi`` may be wrapped; increments are taken modulo 2*pi.
    """
    dphi = _wrap(np.asarray(phi, dtype=float) - est.phi)
    if np.any(np.abs(dphi) > 0.5 * np.pi) and not est._warned:
        est._warned = True
        log.warning("bus angle moved more than pi/2 in one step; frequency estimate unreliable")
    est.phi = est.phi + dphi
    tw = est.t_w_s
    f_new = (tw * est.f_est + dphi / (2.0 * np.pi)) / (tw + dt)
    est.rocof = (tw * est.rocof + (f_new - est.f_est)) / (tw + dt)
    est.f_est = f_new
    return f_new
