"""Reduced test power system: network, aggregate machine, frequency estimation."""

from .machine import FreqEstimator, GenParams, GenState, estimate_frequency, gen_step
from .network import (BOLTED, BackgroundLoad, BusLoads, BusParams, FaultAction, LinearPart,
                      LineParams, NetworkModel, apply_fault, network_solve)

__all__ = [
    "BOLTED", "BackgroundLoad", "BusLoads", "BusParams", "FaultAction", "FreqEstimator",
    "GenParams", "GenState", "LineParams", "LinearPart", "NetworkModel", "apply_fault",
    "estimate_frequency", "gen_step", "network_solve",
]
