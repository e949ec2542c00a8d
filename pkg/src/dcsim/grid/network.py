"""Admittance-matrix network model and its Newton solution.

Loads are described per bus by three complex coefficients on the system base:
constant power ``sp``, constant current ``si`` (``S = si |V|``) and constant
impedance ``sz`` (``S = sz |V|^2``). Below ``v_break`` the constant-power part
is scaled by ``(|V|/v_break)^2`` so that bolted faults stay solvable.

The solver works on the current mismatch ``Y V + I_load(V) - I_src`` in
rectangular coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from pydantic import Field

from .._base import Params
from ..dcload.demand import ZipParams
from ..errors import ConfigError, SolverError

TOL = 1e-8
MAX_ITER = 50
BOLTED = 1e6


class BusParams(Params):
    name: str
    kv: float = Field(default=220.0, gt=0)


class LineParams(Params):
    from_bus: str
    to_bus: str
    r_pu: float = Field(default=0.0, ge=0)
    x_pu: float = Field(gt=0)
    b_pu: float = Field(default=0.0, ge=0)


class BackgroundLoad(Params):
    bus: str
    zip: ZipParams


@dataclass
class NetworkModel:
    bus_names: list
    kv: list
    y_lines: np.ndarray
    s_sys_mva: float
    faults: dict = field(default_factory=dict)

    @classmethod
    def build(cls, buses, lines, s_sys_mva):
        names = [b.name for b in buses]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate bus names")
        idx = {n: i for i, n in enumerate(names)}
        y = np.zeros((len(names), len(names)), dtype=complex)
        for ln in lines:
            for end in (ln.from_bus, ln.to_bus):
                if end not in idx:
                    raise ConfigError(f"line references unknown bus {end!r}")
            i, j = idx[ln.from_bus], idx[ln.to_bus]
            if i == j:
                raise ConfigError(f"line {ln.from_bus}-{ln.to_bus} connects a bus to itself")
            ys = 1.0 / complex(ln.r_pu, ln.x_pu)
            ysh = 0.5j * ln.b_pu
            y[i, i] += ys + ysh
            y[j, j] += ys + ysh
            y[i, j] -= ys
            y[j, i] -= ys
        return cls(names, [b.kv for b in buses], y, s_sys_mva)

    @property
    def n(self) -> int:
        return len(self.bus_names)

    def index(self, bus: str) -> int:
        try:
            return self.bus_names.index(bus)
        except ValueError:
            raise ConfigError(f"unknown bus {bus!r}") from None

    def y_bus(self) -> np.ndarray:
        y = self.y_lines.copy()
        for k, yf in self.faults.items():
            y[k, k] += yf
        return y


@dataclass(frozen=True)
class FaultAction:
    t: float
    bus: str
    y_fault: complex
    on: bool


def apply_fault(net: NetworkModel, bus: str, y_fault: complex, t_on: float,
                t_off: float) -> list[FaultAction]:
    """Schedule insertion and removal of a shunt fault admittance."""
    net.index(bus)
    if not t_on < t_off:
        raise ConfigError(f"fault on bus {bus!r}: t_on={t_on} must precede t_off={t_off}")
    if y_fault == 0:
        return []
    return [FaultAction(t_on, bus, complex(y_fault), True),
            FaultAction(t_off, bus, complex(y_fault), False)]


@dataclass
class BusLoads:
    sp: np.ndarray
    si: np.ndarray
    sz: np.ndarray
    v_break: float = 0.7

    @classmethod
    def empty(cls, n, v_break=0.7):
        z = np.zeros(n, dtype=complex)
        return cls(z.copy(), z.copy(), z.copy(), v_break)

    def add_zip(self, k: int, zp: ZipParams, s_sys_mva: float) -> None:
        self.sp[k] += complex(zp.p0_mw * zp.a_p, zp.q0_mvar * zp.a_q) / s_sys_mva
        self.si[k] += complex(zp.p0_mw * zp.b_p, zp.q0_mvar * zp.b_q) / s_sys_mva
        self.sz[k] += complex(zp.p0_mw * zp.c_p, zp.q0_mvar * zp.c_q) / s_sys_mva

    def power(self, v: np.ndarray) -> np.ndarray:
        """Complex power drawn at each bus for voltage magnitudes ``v``."""
        kappa = np.where(v >= self.v_break, 1.0, (v / self.v_break) ** 2)
        return self.sp * kappa + self.si * v + self.sz * v * v


def _nonlinear_current(V, loads, jacobian=True):
    """Current of the constant-power and constant-current parts and, optionally,
    its 2x2 real Jacobian blocks d(Ire, Iim)/d(e, f) per bus.

    With ``I = conj(S(|V|)) / conj(V)`` the Wirtinger derivatives are
    ``A = dI/dV = conj(S') / (2|V|)`` and
    ``B = dI/dconj(V) = conj(S') V / (2|V| conj(V)) - conj(S) / conj(V)^2``.
    """
    v = np.abs(V)
    v[v < 1e-12] = 1e-12
    vb = loads.v_break
    low = v < vb
    Vc = V.conjugate()
    if low.any():
        kappa = np.where(low, (v / vb) ** 2, 1.0)
        s = loads.sp * kappa + loads.si * v
        ds = loads.sp * np.where(low, 2.0 * v / (vb * vb), 0.0) + loads.si
    else:
        s = loads.sp + loads.si * v
        ds = loads.si
    i_nl = s.conjugate() / Vc
    if not jacobian:
        return i_nl, None
    a = ds.conjugate() / (2.0 * v)
    b = (a * V - i_nl) / Vc
    apb, amb = a + b, a - b
    return i_nl, (apb.real, -amb.imag, apb.imag, amb.real)


def mismatch(y, i_src, loads, V):
    i_nl, _ = _nonlinear_current(V, loads, jacobian=False)
    return y @ V + np.conj(loads.sz) * V + i_nl - i_src


@dataclass
class LinearPart:
    """Voltage-independent part of the Newton system, reusable while the
    admittance matrix and the constant-impedance loads are unchanged."""

    y_eff: np.ndarray
    rows: object
    j_lin: np.ndarray
    fixed: dict
    # flat positions of the four diagonals of the 2x2 block structure
    diag_idx: np.ndarray

    @classmethod
    def prepare(cls, y: np.ndarray, sz: np.ndarray, fixed: dict | None = None) -> "LinearPart":
        n = y.shape[0]
        y_eff = y + np.diag(np.conj(sz))
        fixed = dict(fixed or {})
        if fixed:
            free = np.ones(n, dtype=bool)
            free[list(fixed)] = False
            rows = np.flatnonzero(free)
            y_ff = y_eff[np.ix_(rows, rows)]
        else:
            rows = slice(None)
            y_ff = y_eff
        m = y_ff.shape[0]
        j_lin = np.empty((2 * m, 2 * m))
        j_lin[:m, :m] = y_ff.real
        j_lin[:m, m:] = -y_ff.imag
        j_lin[m:, :m] = y_ff.imag
        j_lin[m:, m:] = y_ff.real
        d1 = np.arange(m)
        d2 = d1 + m
        diag_idx = np.concatenate((d1 * 2 * m + d1, d1 * 2 * m + d2, d2 * 2 * m + d1,
                                   d2 * 2 * m + d2))
        return cls(y_eff, rows, j_lin, fixed, diag_idx)


def network_solve(y: np.ndarray, i_src: np.ndarray, loads: BusLoads, v0: np.ndarray,
                  fixed: dict | None = None, tol: float = TOL, max_iter: int = MAX_ITER,
                  lin: LinearPart | None = None) -> tuple[np.ndarray, int]:
    """Bus voltages satisfying Kirchhoff's current law.

    ``fixed`` maps bus index to a prescribed voltage (used for the initial
    power flow). ``lin`` may carry a cached :class:`LinearPart` for ``y``,
    ``loads.sz`` and ``fixed``. Returns ``(V, iterations)``.
    """
    if lin is None:
        lin = LinearPart.prepare(y, loads.sz, fixed)
    y_eff, rows, j_lin = lin.y_eff, lin.rows, lin.j_lin
    V = np.array(v0, dtype=complex)
    for k, vk in lin.fixed.items():
        V[k] = vk
    m = j_lin.shape[0] // 2
    rhs = np.empty(2 * m)

    res = math.inf
    for it in range(max_iter + 1):
        i_nl, (a, b, c, d) = _nonlinear_current(V, loads)
        F = (y_eff @ V + i_nl - i_src)[rows]
        rhs[:m] = F.real
        rhs[m:] = F.imag
        res = float(np.abs(rhs).max()) if m else 0.0
        if res < tol:
            return V, it
        if it == max_iter or not math.isfinite(res):
            break
        J = j_lin.copy()
        J.flat[lin.diag_idx] += np.concatenate((a[rows], b[rows], c[rows], d[rows]))
        dx = np.linalg.solve(J, rhs)
        V[rows] -= dx[:m] + 1j * dx[m:]
    raise SolverError("network Newton iteration did not converge",
                      iterations=max_iter, residual=float(res))
