import numpy as np
import pytest

from oracles import random_sequence, random_system
from safegate.errors import ContractError
from safegate.verification import (
    epsilon_grid,
    fit_slope,
    scaling_sweep,
    unit_direction,
    verify_scaling,
)


def test_grid():
    g = epsilon_grid(1e-4, 1e-2, 9)
    assert g[0] == pytest.approx(1e-4) and g[-1] == pytest.approx(1e-2)
    assert np.allclose(np.diff(np.log10(g)), 0.25)
    for bad in [(0, 1e-2), (-1e-4, 1e-2), (1e-2, 1e-4)]:
        with pytest.raises(ContractError):
            epsilon_grid(*bad, 5)


def test_fit_slope_exact_power_law():
    eps = np.geomspace(1e-4, 1e-2, 5)
    assert fit_slope(eps, 3.0 * eps ** 2) == pytest.approx(2.0)
    assert fit_slope(np.repeat(eps, 2), np.repeat(0.5 * eps, 2)) == pytest.approx(1.0)


def test_fit_slope_drops_zero_errors():
    eps = np.geomspace(1e-3, 1e-1, 4)
    errs = eps ** 2
    errs[1] = 0.0
    assert fit_slope(eps, errs) == pytest.approx(2.0)
    assert np.isnan(fit_slope(eps, np.zeros(4)))


def test_unit_direction():
    v = unit_direction(15, 3)
    assert np.linalg.norm(v) == pytest.approx(1.0)
    assert np.array_equal(v, unit_direction(15, 3))


def test_zero_direction_gives_exact_zero():
    rng = np.random.default_rng(0)
    sys = random_system(2, rng)
    seq = random_sequence(2, 4, rng)
    rows = scaling_sweep(seq, sys, [1e-3, 1e-2], 1, directions=[np.zeros(3)])
    assert all(r.error_protected == 0.0 for r in rows)


def test_sweep_ordering_and_seeds():
    rng = np.random.default_rng(1)
    sys = random_system(2, rng)
    seq = random_sequence(2, 4, rng)
    rows = scaling_sweep(seq, sys, [1e-4, 1e-3], 3, seed=10, baseline=seq)
    assert [(r.epsilon, r.trial, r.noise_seed) for r in rows] == [
        (1e-4, 0, 10), (1e-4, 1, 11), (1e-4, 2, 12),
        (1e-3, 0, 10), (1e-3, 1, 11), (1e-3, 2, 12)]
    assert all(r.error_protected == r.error_unprotected for r in rows)


def test_unprotected_slope_one():
    rng = np.random.default_rng(2)
    sys = random_system(3, rng)
    seq = random_sequence(3, 9, rng)
    rep = verify_scaling(seq, sys, 1e-5, 1e-3, points=5, trials=3, baseline=seq)
    assert rep.fit_points == 3
    assert 0.9 <= rep.slope_protected <= 1.1
    assert rep.slope_unprotected == rep.slope_protected
    assert rep.errors().shape == (5, 3)
