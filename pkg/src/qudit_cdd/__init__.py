"""Continuous dynamical decoupling of Zeeman-encoded optical qudits.

Simulation of RF-dressed |m-1>, |m0>, |m+1> sublevels of a trapped ion,
compilation of optical pulses onto the dressed states and virtual
spectroscopy / Ramsey experiments under classical noise.
"""

from .physics import LevelScheme, ZeemanParams, Tone, DriveField
from .dressing import Monochromatic, Bichromatic, dressed_basis, hierarchy_check
from .noise import NoiseModel, OUProcess, FieldTone, sample_trace

__all__ = [
    "LevelScheme",
    "ZeemanParams",
    "Tone",
    "DriveField",
    "Monochromatic",
    "Bichromatic",
    "dressed_basis",
    "hierarchy_check",
    "NoiseModel",
    "OUProcess",
    "FieldTone",
    "sample_trace",
]
