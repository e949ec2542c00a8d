"""Continuous-time data-center load: servers, cooling motor, ZIP auxiliaries."""

from .demand import ZERO_DEMAND, DcDemand, ZipParams, dc_demand, zip_power
from .it import (CpuParams, GpuParams, ItState, check_filter_step, cpu_raw, gpu_raw,
                 it_filter_step, it_power)
from .motor import MotorParams, MotorState, motor_step, size_motor, steady_state

__all__ = [
    "CpuParams", "DcDemand", "GpuParams", "ItState", "MotorParams", "MotorState",
    "ZERO_DEMAND", "ZipParams", "check_filter_step", "cpu_raw", "dc_demand", "gpu_raw",
    "it_filter_step", "it_power", "motor_step", "size_motor", "steady_state", "zip_power",
]
