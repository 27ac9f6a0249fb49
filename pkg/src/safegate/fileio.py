"""JSON system and sequence files.

Complex matrices are nested lists of ``[re, im]`` pairs. Floats go through
Python's round-trip ``repr`` so a write followed by a read is exact, and keys
keep a fixed order so identical inputs give identical bytes.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import ContractError
from .model_atom import AtomParameters, build_atom_hamiltonian
from .propagation import ControlSystem, PulseSequence, PulseStep
from .sun_algebra import check_unitary


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_json(rows) -> np.ndarray:
    try:
        arr = np.array(rows, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ContractError(f"malformed complex matrix: {exc}") from None
    if arr.ndim != 3 or arr.shape[2] != 2 or arr.shape[0] != arr.shape[1]:
        raise ContractError(f"expected an N x N array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def dump_json(path, obj) -> None:
    text = json.dumps(obj, indent=1, allow_nan=False) + "\n"
    Path(path).write_text(text)


def load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ContractError(f"{path}: not valid JSON ({exc})") from None


def system_to_dict(sys: ControlSystem, model: str = "random", params=None) -> dict:
    out = {
        "n": sys.dim,
        "A": matrix_to_json(sys.A.matrix),
        "B": matrix_to_json(sys.B.matrix),
        "closure_rank": int(sys.closure_rank),
        "model": model,
    }
    if params is not None:
        out["params"] = params
    return out


def atom_params_to_dict(pa: AtomParameters, pb: AtomParameters) -> dict:
    names = ("e_minus", "e_zero", "e_plus", "b_perp", "b_z")
    return {label: {k: float(getattr(p, k)) for k in names}
            for label, p in (("A", pa), ("B", pb))}


def system_from_dict(d: dict) -> ControlSystem:
    """Rebuild a :class:`ControlSystem`; atom files may give ``params`` instead of matrices."""
    if "A" in d and "B" in d:
        a, b = matrix_from_json(d["A"]), matrix_from_json(d["B"])
    elif d.get("model") == "atom" and "params" in d:
        a = build_atom_hamiltonian(AtomParameters(**d["params"]["A"]))
        b = build_atom_hamiltonian(AtomParameters(**d["params"]["B"]))
    else:
        raise ContractError("system file needs A and B matrices (or atom params)")
    sys = ControlSystem.from_matrices(a, b)
    if "n" in d and int(d["n"]) != sys.dim:
        raise ContractError(f"system file says n = {d['n']} but matrices are {sys.dim}x{sys.dim}")
    return sys


def write_system(path, sys: ControlSystem, model: str = "random", params=None) -> None:
    dump_json(path, system_to_dict(sys, model, params))


def read_system(path) -> ControlSystem:
    return system_from_dict(load_json(path))


def sequence_to_dict(seq: PulseSequence, meta: dict | None = None) -> dict:
    return {
        "n": seq.dim,
        "alternating": bool(seq.alternation_flag),
        "steps": [{"h": s.label, "t": float(s.duration), "wait": float(s.wait)}
                  for s in seq.steps],
        "meta": dict(meta or {}),
    }


def sequence_from_dict(d: dict) -> tuple[PulseSequence, dict]:
    try:
        steps = tuple(PulseStep(s["h"], float(s["t"]), float(s.get("wait", 0.0)))
                      for s in d["steps"])
        seq = PulseSequence(int(d["n"]), steps)
    except (KeyError, TypeError) as exc:
        raise ContractError(f"malformed sequence file: missing {exc}") from None
    return seq, dict(d.get("meta", {}))


def write_sequence(path, seq: PulseSequence, meta: dict | None = None) -> None:
    dump_json(path, sequence_to_dict(seq, meta))


def read_sequence(path) -> tuple[PulseSequence, dict]:
    return sequence_from_dict(load_json(path))


def read_unitary(path) -> np.ndarray:
    """Target gate from ``{"U": matrix}`` or a bare matrix in the same pair format."""
    d = load_json(path)
    rows = d["U"] if isinstance(d, dict) else d
    return check_unitary(matrix_from_json(rows))
