"""
Four-level l = 0, 1 atom driven by a resonant electric field and a static
magnetic field, in the rotating-wave frame.

Basis order: |0> = |l=0>, |1> = |m=-1>, |2> = |m=0>, |3> = |m=+1>.
"""
from __future__ import annotations

from dataclasses import astuple, dataclass

import numpy as np

from .errors import ContractError, DegenerateModelError
from .propagation import ControlSystem
from .sun_algebra import fix_det_su


def _ket_bra(i, j):
    m = np.zeros((4, 4), dtype=complex)
    m[i, j] = 1.0
    return m


SIGMA_MINUS = _ket_bra(1, 0) + _ket_bra(0, 1)
SIGMA_ZERO = _ket_bra(2, 0) + _ket_bra(0, 2)
SIGMA_PLUS = _ket_bra(3, 0) + _ket_bra(0, 3)
LAMBDA_PERP = _ket_bra(1, 2) + _ket_bra(2, 3) + _ket_bra(2, 1) + _ket_bra(3, 2)
LAMBDA_Z = _ket_bra(3, 3) - _ket_bra(1, 1)

COUPLINGS = (SIGMA_MINUS, SIGMA_ZERO, SIGMA_PLUS, LAMBDA_PERP, LAMBDA_Z)

CNOT = np.array([[1, 0, 0, 0],
                 [0, 1, 0, 0],
                 [0, 0, 0, 1],
                 [0, 0, 1, 0]], dtype=complex)

MAX_RETRIES = 32


@dataclass(frozen=True)
class AtomParameters:
    """Electric (``e_*``) and magnetic (``b_*``) coupling strengths."""

    e_minus: float
    e_zero: float
    e_plus: float
    b_perp: float
    b_z: float

    def __post_init__(self):
        if not np.all(np.isfinite(astuple(self))):
            raise ContractError(f"non-finite atom parameters {astuple(self)}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


def build_atom_hamiltonian(p: AtomParameters) -> np.ndarray:
    return np.tensordot(p.as_array(), np.array(COUPLINGS), axes=1)


def atom_system(pa: AtomParameters, pb: AtomParameters) -> ControlSystem:
    return ControlSystem.from_matrices(build_atom_hamiltonian(pa), build_atom_hamiltonian(pb))


def default_system(seed: int):
    """Seeded random A/B parameter sets that satisfy bracket generation.

    Returns the system and the two parameter sets used.
    """
    rng = np.random.default_rng(seed)
    for _ in range(MAX_RETRIES):
        pa = AtomParameters(*rng.uniform(-1.0, 1.0, 5))
        pb = AtomParameters(*rng.uniform(-1.0, 1.0, 5))
        sys = atom_system(pa, pb)
        if sys.controllable:
            return sys, (pa, pb)
    raise DegenerateModelError(f"no controllable atom pair after {MAX_RETRIES} draws (seed {seed})")


def cnot_target() -> np.ndarray:
    return fix_det_su(CNOT)
