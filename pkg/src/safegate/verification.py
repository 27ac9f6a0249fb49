"""
Noise-scaling sweeps.

A sequence whose first-order response vanishes leaves a gate error of order
``eps**2`` under static noise of strength ``eps``; an unprotected one leaves
order ``eps``. The sweep measures the error on a log grid of strengths and
fits the log-log slope.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .propagation import ControlSystem, NoiseModel, PulseSequence, interaction_error


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    trial: int
    noise_seed: int
    error_protected: float
    error_unprotected: float | None = None


@dataclass(frozen=True)
class VerificationReport:
    rows: tuple[SweepRow, ...]
    slope_protected: float
    slope_unprotected: float | None
    fit_points: int

    def errors(self, which: str = "protected") -> np.ndarray:
        """Errors as an (points, trials) array."""
        eps = sorted({r.epsilon for r in self.rows})
        trials = sorted({r.trial for r in self.rows})
        out = np.full((len(eps), len(trials)), np.nan)
        for r in self.rows:
            val = r.error_protected if which == "protected" else r.error_unprotected
            out[eps.index(r.epsilon), trials.index(r.trial)] = np.nan if val is None else val
        return out


def epsilon_grid(eps_min: float, eps_max: float, points: int) -> np.ndarray:
    if not (eps_min > 0 and eps_max > 0):
        raise ContractError(f"noise bounds must be positive, got [{eps_min}, {eps_max}]")
    if eps_max < eps_min:
        raise ContractError(f"eps_max {eps_max} is below eps_min {eps_min}")
    if points < 1:
        raise ContractError("need at least one grid point")
    return np.geomspace(eps_min, eps_max, points)


def unit_direction(n_coeffs: int, noise_seed: int) -> np.ndarray:
    """Uniformly random unit vector of noise coefficients."""
    v = np.random.default_rng(noise_seed).standard_normal(n_coeffs)
    return v / np.linalg.norm(v)


def fit_slope(eps, errors) -> float:
    """Least-squares slope of log(error) against log(eps); zero errors are dropped."""
    eps = np.asarray(eps, dtype=float).ravel()
    errors = np.asarray(errors, dtype=float).ravel()
    keep = (errors > 0) & np.isfinite(errors)
    x, y = np.log(eps[keep]), np.log(errors[keep])
    if x.size < 2 or np.ptp(x) == 0:
        return float("nan")
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def scaling_sweep(seq: PulseSequence, sys: ControlSystem, eps_grid, trials: int,
                  seed: int = 0, baseline: PulseSequence | None = None,
                  directions=None) -> list[SweepRow]:
    """Interaction error of ``seq`` (and ``baseline``) for every strength and trial.

    Trial ``t`` uses one noise direction, drawn from seed ``seed + t`` unless
    ``directions[t]`` is given, scaled by each grid value. Rows are ordered by
    (strength index, trial).
    """
    if trials < 1:
        raise ContractError("need at least one trial")
    if baseline is not None and baseline.dim != seq.dim:
        raise ContractError("baseline and sequence act on different dimensions")
    d = len(sys.basis)
    if directions is None:
        directions = [unit_direction(d, seed + t) for t in range(trials)]
    directions = np.asarray(directions, dtype=float).reshape(trials, d)
    rows = []
    for eps in np.asarray(eps_grid, dtype=float):
        for t in range(trials):
            noise = NoiseModel.from_coefficients(eps * directions[t], sys.basis)
            base = None if baseline is None else interaction_error(baseline, sys, noise)
            rows.append(SweepRow(float(eps), t, seed + t,
                                 interaction_error(seq, sys, noise), base))
    return rows


def verify_scaling(seq: PulseSequence, sys: ControlSystem, eps_min: float = 1e-4,
                   eps_max: float = 1e-2, points: int = 9, trials: int = 8, seed: int = 0,
                   baseline: PulseSequence | None = None) -> VerificationReport:
    """Sweep and fit over the smaller ``ceil(points / 2)`` strengths."""
    grid = epsilon_grid(eps_min, eps_max, points)
    rows = scaling_sweep(seq, sys, grid, trials, seed, baseline)
    fit_points = math.ceil(points / 2)
    low = [r for r in rows if r.epsilon <= grid[fit_points - 1]]
    slope_p = fit_slope([r.epsilon for r in low], [r.error_protected for r in low])
    slope_u = None
    if baseline is not None:
        slope_u = fit_slope([r.epsilon for r in low], [r.error_unprotected for r in low])
    return VerificationReport(tuple(rows), slope_p, slope_u, fit_points)
