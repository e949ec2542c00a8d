"""Squirrel-cage induction motor driving the cooling plant.

Per-unit model on the motor's own MVA base, written in a reference frame
rotating at nominal synchronous speed. Space vectors are complex numbers
``x = x_d + j x_q``; motor convention (positive power is consumption).

Flux-linkage form::

    dPsi_s/dt = w_b (V - rs I_s - j Psi_s)
    dPsi_r/dt = w_b (-rr I_r - j s Psi_r)
    ds/dt     = (T_m - T_e) / (2 H),     T_e = Im(conj(Psi_s) I_s)

with ``Psi_s = Xs I_s + Xm I_r`` and ``Psi_r = Xm I_s + Xr I_r``,
``Xs = xls + xm``, ``Xr = xlr + xm``. Setting the flux derivatives to zero
recovers the textbook equivalent circuit ``rs + j xls + (j xm || (rr/s + j xlr))``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from pydantic import Field

from .._base import Params
from ..errors import SolverError, StalledMotorError

_NEWTON_TOL = 1e-12
_NEWTON_MAXITER = 30


class MotorParams(Params):
    rs_pu: float = Field(default=0.01, ge=0)
    xls_pu: float = Field(default=0.1, gt=0)
    xm_pu: float = Field(default=3.5, gt=0)
    rr_pu: float = Field(default=0.009, ge=0)
    xlr_pu: float = Field(default=0.09, gt=0)
    h_s: float = Field(default=0.6, gt=0)
    t_mech_pu: float = Field(default=0.8, ge=0)
    # None: sized from the cooling demand when the scenario is initialised
    s_base_mva: float | None = Field(default=None, gt=0)
    omega_b_rad_s: float = Field(default=2 * math.pi * 50, gt=0)

    @property
    def xs(self):
        return self.xls_pu + self.xm_pu

    @property
    def xr(self):
        return self.xlr_pu + self.xm_pu


@dataclass
class MotorState:
    psi_ds: float
    psi_qs: float
    psi_dr: float
    psi_qr: float
    slip: float

    @property
    def psi_s(self) -> complex:
        return complex(self.psi_ds, self.psi_qs)

    @property
    def psi_r(self) -> complex:
        return complex(self.psi_dr, self.psi_qr)

    @classmethod
    def from_complex(cls, psi_s: complex, psi_r: complex, slip: float) -> "MotorState":
        return cls(psi_s.real, psi_s.imag, psi_r.real, psi_r.imag, slip)


# --------------------------------------------------------------------------
# steady state (equivalent circuit)
# --------------------------------------------------------------------------

def _rotor_branch(slip, p):
    """Impedance of the magnetising branch in parallel with the rotor, and the
    rotor current per unit stator current. Written in a form regular at s=0."""
    num = p.rr_pu + 1j * slip * p.xlr_pu
    den = p.rr_pu + 1j * slip * p.xr
    z_par = 1j * p.xm_pu * num / den
    ir_per_is = -1j * p.xm_pu * slip / den
    return z_par, ir_per_is


def equivalent_impedance(slip: float, p: MotorParams) -> complex:
    z_par, _ = _rotor_branch(slip, p)
    return p.rs_pu + 1j * p.xls_pu + z_par


def steady_currents(v: complex, slip: float, p: MotorParams) -> tuple[complex, complex]:
    z_par, ratio = _rotor_branch(slip, p)
    i_s = v / (p.rs_pu + 1j * p.xls_pu + z_par)
    return i_s, ratio * i_s


def steady_torque(vmag: float, slip: float, p: MotorParams) -> float:
    """Electromagnetic (air-gap) torque in steady state; depends on |v| only."""
    i_s, _ = steady_currents(complex(vmag, 0.0), slip, p)
    return vmag * i_s.real - p.rs_pu * abs(i_s) ** 2


def steady_power(vmag: float, slip: float, p: MotorParams) -> tuple[float, float]:
    """Stator (P, Q) in motor pu; angle-independent by construction."""
    z = equivalent_impedance(slip, p)
    s = vmag * vmag / z.conjugate()
    return s.real, s.imag


def steady_fluxes(v: complex, slip: float, p: MotorParams) -> tuple[complex, complex]:
    i_s, i_r = steady_currents(v, slip, p)
    return p.xs * i_s + p.xm_pu * i_r, p.xm_pu * i_s + p.xr * i_r


def _peak_torque_slip(p):
    # Thevenin equivalent seen by the rotor resistance
    z_th = 1j * p.xm_pu * (p.rs_pu + 1j * p.xls_pu) / (p.rs_pu + 1j * p.xs)
    return p.rr_pu / abs(complex(z_th.real, z_th.imag + p.xlr_pu))


def equilibrium_slip(vmag: float, p: MotorParams) -> float:
    """Stable-branch slip where steady torque equals the mechanical torque."""
    if p.t_mech_pu == 0.0:
        return 0.0
    s_hi = min(_peak_torque_slip(p), 0.999)
    if steady_torque(vmag, s_hi, p) < p.t_mech_pu:
        raise StalledMotorError(
            f"mechanical torque {p.t_mech_pu} pu exceeds breakdown torque at |v|={vmag:.4f}"
        )
    # Newton from the linearised small-slip estimate, safeguarded by bisection
    lo, hi = 0.0, s_hi
    s = min(p.t_mech_pu * p.rr_pu / max(vmag * vmag, 1e-12), 0.5 * s_hi)
    for _ in range(100):
        f = steady_torque(vmag, s, p) - p.t_mech_pu
        if f > 0:
            hi = s
        else:
            lo = s
        h = 1e-7 * max(s, 1e-6)
        df = (steady_torque(vmag, s + h, p) - steady_torque(vmag, s - h, p)) / (2 * h)
        s_new = s - f / df if df > 0 else 0.5 * (lo + hi)
        if not lo < s_new < hi:
            s_new = 0.5 * (lo + hi)
        if abs(s_new - s) < 1e-15:
            return s_new
        s = s_new
    return s


def steady_state(v: complex, p: MotorParams) -> MotorState:
    slip = equilibrium_slip(abs(v), p)
    psi_s, psi_r = steady_fluxes(v, slip, p)
    return MotorState.from_complex(psi_s, psi_r, slip)


def size_motor(p_mw: float, vmag: float, p: MotorParams) -> MotorParams:
    """Return ``p`` with ``s_base_mva`` chosen so the motor draws ``p_mw`` at ``vmag``."""
    slip = equilibrium_slip(vmag, p)
    p_pu, _ = steady_power(vmag, slip, p)
    if p_pu <= 0:
        raise ValueError("motor with zero mechanical load cannot be sized from active power")
    return p.model_copy(update={"s_base_mva": p_mw / p_pu})


# --------------------------------------------------------------------------
# dynamics
# --------------------------------------------------------------------------

def _currents(psi_s, psi_r, p):
    det = p.xs * p.xr - p.xm_pu ** 2
    i_s = (p.xr * psi_s - p.xm_pu * psi_r) / det
    i_r = (p.xs * psi_r - p.xm_pu * psi_s) / det
    return i_s, i_r


def _flux_rhs(psi_s, psi_r, slip, v, p):
    i_s, i_r = _currents(psi_s, psi_r, p)
    wb = p.omega_b_rad_s
    d_s = wb * (v - p.rs_pu * i_s - 1j * psi_s)
    d_r = wb * (-p.rr_pu * i_r - 1j * slip * psi_r)
    t_e = (psi_s.conjugate() * i_s).imag
    return d_s, d_r, t_e, i_s


def _check_slip(slip):
    if not -1.0 < slip < 1.0:
        raise StalledMotorError(f"slip {slip:.4f} left (-1, 1)")


def _step_flux(state, v, dt, p):
    """Implicit trapezoidal step of the fifth-order model.

    For a trial end-of-step slip the flux equations are linear, so the fluxes
    follow from a 2x2 complex solve; Newton then runs on the slip alone.
    """
    psi_s0, psi_r0, s0 = state.psi_s, state.psi_r, state.slip
    d_s0, d_r0, te0, _ = _flux_rhs(psi_s0, psi_r0, s0, v, p)
    half = 0.5 * dt
    k = half * p.omega_b_rad_s
    det = p.xs * p.xr - p.xm_pu ** 2
    a, b, c = p.xr / det, -p.xm_pu / det, p.xs / det
    m11 = 1 + k * p.rs_pu * a + 1j * k
    m12 = k * p.rs_pu * b
    m21 = k * p.rr_pu * b
    m22_base = 1 + k * p.rr_pu * c
    rhs_s = psi_s0 + half * d_s0 + k * v
    rhs_r = psi_r0 + half * d_r0
    two_h = 2.0 * p.h_s
    tm = p.t_mech_pu

    def solve(s1):
        m22 = m22_base + 1j * k * s1
        d = m11 * m22 - m12 * m21
        psi_s = (rhs_s * m22 - m12 * rhs_r) / d
        psi_r = (m11 * rhs_r - m21 * rhs_s) / d
        # sensitivity of the fluxes to s1: M dpsi = -(dM/ds) psi
        g = -1j * k * psi_r
        dpsi_s = (-m12 * g) / d
        dpsi_r = (m11 * g) / d
        return psi_s, psi_r, dpsi_s, dpsi_r

    s1 = s0
    for _ in range(_NEWTON_MAXITER):
        psi_s, psi_r, dpsi_s, dpsi_r = solve(s1)
        i_s = a * psi_s + b * psi_r
        di_s = a * dpsi_s + b * dpsi_r
        te1 = (psi_s.conjugate() * i_s).imag
        dte1 = (dpsi_s.conjugate() * i_s + psi_s.conjugate() * di_s).imag
        res = s1 - s0 - half * ((tm - te0) + (tm - te1)) / two_h
        jac = 1.0 + half * dte1 / two_h
        delta = res / jac
        s1 -= delta
        if abs(delta) < _NEWTON_TOL:
            psi_s, psi_r, _, _ = solve(s1)
            break
    else:
        raise SolverError("motor slip Newton did not converge",
                          iterations=_NEWTON_MAXITER, residual=abs(res))
    _check_slip(s1)
    i_s, _ = _currents(psi_s, psi_r, p)
    return MotorState.from_complex(psi_s, psi_r, s1), i_s


def _step_algebraic(state, v, dt, p):
    """Trapezoidal slip step with the electrical part in steady state."""
    vmag = abs(v)
    s0 = state.slip
    half = 0.5 * dt
    two_h = 2.0 * p.h_s
    tm = p.t_mech_pu
    te0 = steady_torque(vmag, s0, p)
    s1 = s0
    for _ in range(_NEWTON_MAXITER):
        te1 = steady_torque(vmag, s1, p)
        h = 1e-7 * max(abs(s1), 1e-6)
        dte = (steady_torque(vmag, s1 + h, p) - steady_torque(vmag, s1 - h, p)) / (2 * h)
        res = s1 - s0 - half * ((tm - te0) + (tm - te1)) / two_h
        delta = res / (1.0 + half * dte / two_h)
        s1 -= delta
        if abs(delta) < _NEWTON_TOL:
            break
    else:
        raise SolverError("motor slip Newton did not converge",
                          iterations=_NEWTON_MAXITER, residual=abs(res))
    _check_slip(s1)
    psi_s, psi_r = steady_fluxes(v, s1, p)
    return MotorState.from_complex(psi_s, psi_r, s1)


def motor_step(state: MotorState, v: complex, dt: float, p: MotorParams,
               flux_dynamics: bool) -> tuple[MotorState, float, float]:
    """Advance the motor one step with supply phasor ``v`` held over the step.

    Returns the new state and the stator active/reactive power in MW/Mvar.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if p.s_base_mva is None:
        raise ValueError("motor s_base_mva is not resolved")
    if flux_dynamics:
        new, i_s = _step_flux(state, v, dt, p)
        s = v * i_s.conjugate()
        p_pu, q_pu = s.real, s.imag
    else:
        new = _step_algebraic(state, v, dt, p)
        p_pu, q_pu = steady_power(abs(v), new.slip, p)
    return new, p_pu * p.s_base_mva, q_pu * p.s_base_mva


def electrical_torque(state: MotorState, p: MotorParams) -> float:
    i_s, _ = _currents(state.psi_s, state.psi_r, p)
    return (state.psi_s.conjugate() * i_s).imag


def losses(state: MotorState, p: MotorParams) -> float:
    i_s, i_r = _currents(state.psi_s, state.psi_r, p)
    return p.rs_pu * abs(i_s) ** 2 + p.rr_pu * abs(i_r) ** 2


def polar(vmag: float, angle: float) -> complex:
    return cmath.rect(vmag, angle)
