"""Noise-protected quantum gates from two alternating control Hamiltonians.

Submodules
----------
sun_algebra
    su(N) generators, unitary exponentials, roots and phase-invariant distance.
propagation
    Piecewise-constant evolution and exact first-order noise response.
nogo_analysis
    Noise directions no two-valued sequence can cancel.
synthesis
    Timings that realize a target gate.
protection
    Waiting times that cancel the first-order response.
model_atom
    The four-level l = 0, 1 atom and the CNOT target.
verification
    Noise-scaling sweeps.
fileio, cli
    File formats and the ``safegate`` command.
"""
from .errors import (
    ContractError,
    DegenerateInputError,
    DegenerateModelError,
    ProtectionFailure,
    SafegateError,
    UncontrollableSystemError,
)
from .propagation import ControlSystem, PulseSequence, PulseStep

__version__ = "0.1.0"

__all__ = [
    "ContractError",
    "ControlSystem",
    "DegenerateInputError",
    "DegenerateModelError",
    "ProtectionFailure",
    "PulseSequence",
    "PulseStep",
    "SafegateError",
    "UncontrollableSystemError",
]
