"""Steady-state Floquet-Keldysh DMFT for the periodically driven Hubbard model.

Energies are measured in units of the half-bandwidth ``D`` and ``ħ = 1``.
"""
from .dmft import SolverConfig, SolverResult, lattice_green, solve, weiss_field
from .floquet import (
    ConfigurationError,
    FloquetIndexSet,
    FrequencyGrid,
    InversionError,
    KeldyshPropagator,
)
from .ipt import SelfEnergy, ipt_self_energy
from .lattice import BandModel, Quadrature
from .noninteracting import DriveParams, g0_inverse_tridiagonal, g0_retarded_bessel
from .observables import SpectralResult, distribution, ldos, sum_rule_check

__version__ = "0.1.0"

__all__ = [
    "BandModel",
    "ConfigurationError",
    "DriveParams",
    "FloquetIndexSet",
    "FrequencyGrid",
    "InversionError",
    "KeldyshPropagator",
    "Quadrature",
    "SelfEnergy",
    "SolverConfig",
    "SolverResult",
    "SpectralResult",
    "distribution",
    "g0_inverse_tridiagonal",
    "g0_retarded_bessel",
    "ipt_self_energy",
    "lattice_green",
    "ldos",
    "solve",
    "sum_rule_check",
    "weiss_field",
]
