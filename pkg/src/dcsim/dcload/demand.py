"""Miscellaneous ZIP load and the aggregate data-center demand."""

from __future__ import annotations

from dataclasses import dataclass

from pydantic import model_validator

from .._base import Params

_SUM_TOL = 1e-9


class ZipParams(Params):
    p0_mw: float = 0.0
    q0_mvar: float = 0.0
    a_p: float = 1.0
    b_p: float = 0.0
    c_p: float = 0.0
    a_q: float = 1.0
    b_q: float = 0.0
    c_q: float = 0.0

    @model_validator(mode="after")
    def _coefficients_sum_to_one(self):
        for tag, coeffs in (("p", (self.a_p, self.b_p, self.c_p)),
                            ("q", (self.a_q, self.b_q, self.c_q))):
            total = sum(coeffs)
            if abs(total - 1.0) > _SUM_TOL:
                raise ValueError(
                    f"ZIP coefficients a_{tag}+b_{tag}+c_{tag} must sum to 1, got {total:.6g}"
                )
        return self


def zip_power(v_i: float, p: ZipParams) -> tuple[float, float]:
    if v_i < 0:
        raise ValueError("voltage magnitude must be non-negative")
    v2 = v_i * v_i
    return (p.p0_mw * (p.a_p + p.b_p * v_i + p.c_p * v2),
            p.q0_mvar * (p.a_q + p.b_q * v_i + p.c_q * v2))


@dataclass(frozen=True)
class DcDemand:
    p_dc: float
    q_dc: float
    p_it: float
    p_cooling: float
    q_cooling: float
    p_zip: float
    q_zip: float

    def scaled(self, share: float) -> "DcDemand":
        return DcDemand(*(share * x for x in (
            self.p_dc, self.q_dc, self.p_it, self.p_cooling,
            self.q_cooling, self.p_zip, self.q_zip)))


ZERO_DEMAND = DcDemand(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def dc_demand(p_it: float, motor: tuple[float, float], zip_pq: tuple[float, float]) -> DcDemand:
    """Aggregate demand; the IT load draws no reactive power."""
    p_cool, q_cool = motor
    p_zip, q_zip = zip_pq
    return DcDemand(
        p_dc=p_cool + p_zip + p_it,
        q_dc=q_cool + q_zip,
        p_it=p_it,
        p_cooling=p_cool,
        q_cooling=q_cool,
        p_zip=p_zip,
        q_zip=q_zip,
    )
