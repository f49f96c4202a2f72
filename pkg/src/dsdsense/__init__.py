"""STIRAP with dressed-state driving: three-level propagation, detuning sweeps
and the sensor models built on them."""

__version__ = "0.1.0"

from .propagator import IntegrationError, IntegratorConfig, propagate, transfer_population
from .pulses import PulseSchedule, tau_min
from .qcore import DetuningPair, Hamiltonian3, UnitSystem, eigensystem_resonant

__all__ = [
    "DetuningPair",
    "Hamiltonian3",
    "IntegrationError",
    "IntegratorConfig",
    "PulseSchedule",
    "UnitSystem",
    "__version__",
    "eigensystem_resonant",
    "propagate",
    "tau_min",
    "transfer_population",
]
