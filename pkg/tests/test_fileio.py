import json

import numpy as np
import pytest

from oracles import random_sequence, random_system
from safegate import fileio
from safegate.errors import ContractError
from safegate.model_atom import default_system
from safegate.propagation import PulseSequence, PulseStep


def test_matrix_round_trip():
    rng = np.random.default_rng(0)
    m = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    back = fileio.matrix_from_json(json.loads(json.dumps(fileio.matrix_to_json(m))))
    assert np.array_equal(back, m)


def test_malformed_matrix():
    with pytest.raises(ContractError):
        fileio.matrix_from_json([[1, 2], [3, 4]])


def test_system_round_trip(tmp_path):
    sys = random_system(3, np.random.default_rng(1))
    fileio.write_system(tmp_path / "s.json", sys)
    back = fileio.read_system(tmp_path / "s.json")
    assert np.array_equal(back.A.matrix, sys.A.matrix)
    assert np.array_equal(back.B.matrix, sys.B.matrix)
    assert back.closure_rank == sys.closure_rank


def test_atom_system_from_params_only(tmp_path):
    sys, (pa, pb) = default_system(2)
    d = {"n": 4, "model": "atom", "params": fileio.atom_params_to_dict(pa, pb)}
    (tmp_path / "a.json").write_text(json.dumps(d))
    back = fileio.read_system(tmp_path / "a.json")
    assert np.array_equal(back.A.matrix, sys.A.matrix)
    assert back.closure_rank == 15


def test_system_dimension_mismatch(tmp_path):
    sys = random_system(2, np.random.default_rng(3))
    d = fileio.system_to_dict(sys)
    d["n"] = 3
    (tmp_path / "s.json").write_text(json.dumps(d))
    with pytest.raises(ContractError):
        fileio.read_system(tmp_path / "s.json")


def test_sequence_round_trip(tmp_path):
    rng = np.random.default_rng(4)
    seq = random_sequence(3, 7, rng, waits=True)
    seq = PulseSequence(3, seq.steps + (PulseStep("idle", 0.0, 1 / 3),))
    fileio.write_sequence(tmp_path / "q.json", seq, {"target_distance": 1e-17, "seed": 5})
    back, meta = fileio.read_sequence(tmp_path / "q.json")
    assert back == seq
    assert meta == {"target_distance": 1e-17, "seed": 5}
    raw = json.loads((tmp_path / "q.json").read_text())
    assert raw["alternating"] is False and raw["steps"][0]["h"] == "B"


def test_sequence_missing_field(tmp_path):
    (tmp_path / "q.json").write_text(json.dumps({"n": 2, "steps": [{"h": "A"}]}))
    with pytest.raises(ContractError):
        fileio.read_sequence(tmp_path / "q.json")


def test_invalid_json(tmp_path):
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ContractError):
        fileio.read_system(tmp_path / "x.json")


def test_read_unitary(tmp_path):
    u = np.array([[0, 1j], [1j, 0]])
    (tmp_path / "u.json").write_text(json.dumps({"U": fileio.matrix_to_json(u)}))
    assert np.array_equal(fileio.read_unitary(tmp_path / "u.json"), u)
    (tmp_path / "bad.json").write_text(json.dumps({"U": fileio.matrix_to_json(2 * u)}))
    with pytest.raises(ContractError):
        fileio.read_unitary(tmp_path / "bad.json")
