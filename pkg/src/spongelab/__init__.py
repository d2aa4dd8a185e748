"""Desk-scale laboratory for energy-latency (sponge) attacks on neural inference."""

from .energy import (
    DENSE_ASIC,
    ActivationTrace,
    AsicCostModel,
    EnergyReport,
    LayerTraceEntry,
    PhysicalEnergyParams,
    dram_traffic,
    physical_energy,
    simulate_energy,
)

__version__ = "0.1.0"

__all__ = [
    "DENSE_ASIC",
    "ActivationTrace",
    "AsicCostModel",
    "EnergyReport",
    "LayerTraceEntry",
    "PhysicalEnergyParams",
    "dram_traffic",
    "physical_energy",
    "simulate_energy",
]
