"""Simulation and parameter extraction for laterally excited ferroelectric Lamb-mode resonators."""

from .circuit import FrequencyResponse, ModalBranch, ResonatorModel, parallel_resonance, synthesize
from .extract import find_resonances, fit_mbvd, k2_from_pair, q_3db

__version__ = "0.1.0"

__all__ = [
    "FrequencyResponse",
    "ModalBranch",
    "ResonatorModel",
    "find_resonances",
    "fit_mbvd",
    "k2_from_pair",
    "parallel_resonance",
    "q_3db",
    "synthesize",
]
