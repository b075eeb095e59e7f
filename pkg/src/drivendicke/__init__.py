"""Selective sideband control of a driven biased Dicke model coupled to a resonator."""

from .core import (
    DICKE_FOCK,
    INTERACTION,
    MAGNON_FOCK,
    TRANSFORMED,
    DriveSchedule,
    DriveSegment,
    StateVector,
    SystemParams,
    basis_state,
    superposition_state,
)
from .dynamics import EvolutionResult, evolve, fidelity, to_interaction_picture
from .hamiltonian import bare_spectrum, build_transformed_hamiltonian, gap
from .magnon import MagnonParams, magnon_gap, magnon_rabi
from .protocols import dicke_ladder, ghz_sequence, magnon_fock_protocol, simulate_protocol, trapping_schedule
from .sidebands import EffectiveChoice, rabi_frequency, resonance_frequency, rwa_report

__version__ = "0.1.0"

__all__ = [
    "DICKE_FOCK",
    "INTERACTION",
    "MAGNON_FOCK",
    "TRANSFORMED",
    "DriveSchedule",
    "DriveSegment",
    "StateVector",
    "SystemParams",
    "basis_state",
    "superposition_state",
    "EvolutionResult",
    "evolve",
    "fidelity",
    "to_interaction_picture",
    "bare_spectrum",
    "build_transformed_hamiltonian",
    "gap",
    "MagnonParams",
    "magnon_gap",
    "magnon_rabi",
    "dicke_ladder",
    "ghz_sequence",
    "magnon_fock_protocol",
    "simulate_protocol",
    "trapping_schedule",
    "EffectiveChoice",
    "rabi_frequency",
    "resonance_frequency",
    "rwa_report",
]
