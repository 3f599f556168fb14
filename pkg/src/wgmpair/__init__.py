"""Photon-pair generation in crystalline whispering-gallery-mode resonators.

Submodules: :mod:`modes` (eigenfrequencies), :mod:`phasematch` (selection
rules, clusters, energy conservation), :mod:`photonstream` (Monte Carlo
time tags), :mod:`correlate` (g2 histograms and fits), :mod:`cli`.
"""
from .errors import (ConfigError, ContractError, ConvergenceError, DomainError, NotFoundError,
                     UnsupportedScaleError, WGMPairError)
from .materials import MaterialModel, Polarization, constant_index, load_material, mgo_linbo3
from .modes import (ModeFrequency, ModeIndex, ResonatorGeometry, airy_negative_zero,
                    free_spectral_range, linewidth_to_q_factor, mode_frequency, refractive_index)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ContractError", "ConvergenceError", "DomainError", "NotFoundError",
    "UnsupportedScaleError", "WGMPairError",
    "MaterialModel", "Polarization", "constant_index", "load_material", "mgo_linbo3",
    "ModeFrequency", "ModeIndex", "ResonatorGeometry", "airy_negative_zero",
    "free_spectral_range", "linewidth_to_q_factor", "mode_frequency", "refractive_index",
]
