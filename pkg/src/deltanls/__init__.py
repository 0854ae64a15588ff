"""Numerical workbench for solitary waves of the nonlinear Schroedinger equation with a delta defect.

i u_t = -(1/2) u_xx + q delta(x) u + sigma |u|^p u,  q < 0, sigma = -1 (focusing) or +1 (defocusing).
"""
from .errors import (
    BlowUpError,
    DecompositionError,
    DeltaNLSError,
    FitError,
    NumericalError,
    ParameterError,
    SearchError,
    SpectralConditionError,
    UsageError,
)
from .soliton_family import Grid, SolitonParams, critical_frequency, soliton_mass, soliton_profile

__version__ = "0.1.0"

__all__ = [
    "BlowUpError",
    "DecompositionError",
    "DeltaNLSError",
    "FitError",
    "NumericalError",
    "ParameterError",
    "SearchError",
    "SpectralConditionError",
    "UsageError",
    "Grid",
    "SolitonParams",
    "critical_frequency",
    "soliton_mass",
    "soliton_profile",
]
