"""Simulation, estimation and control toolkit for a recirculating
chemostat with switchable DNA filtration."""

from .model import (
    DEFAULT_PLANT,
    NOMINAL_KINETICS,
    ControlInput,
    KineticParams,
    PlantConstants,
    ProcessState,
)

__all__ = [
    "ControlInput",
    "DEFAULT_PLANT",
    "KineticParams",
    "NOMINAL_KINETICS",
    "PlantConstants",
    "ProcessState",
]
