"""
Timings for the alternating product ``exp(-i T_K H_K) ... exp(-i T_2 A) exp(-i T_1 B)``
that realize a target unitary up to global phase.

The solver is a damped Gauss-Newton iteration on the su(N) coordinates of
``log(target^dag U(T))``. Durations are parametrized as ``T_k = theta_k**2``
so they stay nonnegative, and the iteration is restarted from random
timings until the phase-invariant distance drops below ``tol``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractError, SafegateError, UncontrollableSystemError
from .propagation import ControlSystem, PulseSequence, propagate
from .sun_algebra import (
    _clustered_phases,
    check_unitary,
    dagger,
    expm_unitary,
    phase_invariant_distance,
    principal_root,
    project_su_many,
)

log = logging.getLogger(__name__)


class SynthesisFailure(SafegateError):
    """No restart reached the requested distance; carries the best attempt."""

    def __init__(self, message, result=None, sequence=None):
        super().__init__(message)
        self.result = result
        self.sequence = sequence


@dataclass(frozen=True)
class SynthesisProblem:
    sys: ControlSystem
    target: np.ndarray = field(repr=False)
    K: int | None = None
    max_restarts: int = 64
    tol: float = 1e-8
    max_iter: int = 200

    def __post_init__(self):
        n = self.sys.dim
        object.__setattr__(self, "target", check_unitary(self.target))
        if self.target.shape != (n, n):
            raise ContractError(f"target shape {self.target.shape} does not match N={n}")
        if self.K is None:
            object.__setattr__(self, "K", n * n)
        if self.K < n * n:
            raise ContractError(f"K = {self.K} is below N**2 = {n * n}")
        if not self.tol > 0:
            raise ContractError(f"tolerance must be positive, got {self.tol}")
        if self.max_restarts < 1:
            raise ContractError("need at least one restart")


@dataclass(frozen=True)
class SynthesisResult:
    timings: np.ndarray
    achieved: np.ndarray = field(repr=False)
    distance: float
    iterations: int
    restarts_used: int
    success: bool

    def sequence(self, dim: int) -> PulseSequence:
        return PulseSequence.alternating(dim, self.timings)


def _hamiltonians(sys: ControlSystem, k: int):
    return [sys.B if j % 2 == 0 else sys.A for j in range(k)]


def product_and_derivatives(hams, timings):
    """Alternating product and its derivatives with respect to each timing.

    ``dU/dT_k = -i S_k H_k S_k^dag U`` where ``S_k`` is the product of all
    factors applied after step ``k``.
    """
    n = hams[0].dim
    factors = [expm_unitary(h, t) for h, t in zip(hams, timings)]
    u = np.eye(n, dtype=complex)
    for f in factors:
        u = f @ u
    suffix = np.eye(n, dtype=complex)
    derivs = np.empty((len(hams), n, n), dtype=complex)
    for k in range(len(hams) - 1, -1, -1):
        derivs[k] = -1j * (suffix @ hams[k].matrix @ dagger(suffix)) @ u
        suffix = suffix @ factors[k]
    return u, derivs


def log_error(target, u, du, basis):
    """su(N) coordinates of ``-i log(target^dag U)`` and their derivatives."""
    w = dagger(target) @ u
    tr = np.trace(w)
    # A global phase only shifts the trace part; removing it keeps the
    # spectrum away from the branch cut near a solution.
    c = np.conj(tr) / abs(tr) if abs(tr) > 1e-12 else 1.0
    w = c * w
    t, z = scipy.linalg.schur(w, output="complex")
    eigs = np.diag(t)
    phases = _clustered_phases(eigs)
    logs = 1j * phases
    err = project_su_many(-1j * (z * logs) @ dagger(z), basis)
    if du is None:
        return err, None
    diff_w = eigs[:, None] - eigs[None, :]
    diff_l = logs[:, None] - logs[None, :]
    close = np.abs(diff_w) < 1e-9
    phi = np.where(close, 1.0 / eigs[:, None], diff_l / np.where(close, 1.0, diff_w))
    dw = c * (dagger(target) @ du)
    dlog = z @ (phi * (dagger(z) @ dw @ z)) @ dagger(z)
    return err, project_su_many(-1j * dlog, basis).T


def _initial_timings(sys, k, rng):
    hams = _hamiltonians(sys, k)
    scale = np.array([2 * np.pi / max(np.linalg.norm(h.matrix, 2), 1e-12) for h in hams])
    return rng.uniform(0.0, 1.0, k) * scale


def _solve_from(prob: SynthesisProblem, timings0):
    sys = prob.sys
    hams = _hamiltonians(sys, prob.K)
    theta = np.sqrt(timings0)
    mu = 1e-3
    u, du = product_and_derivatives(hams, theta ** 2)
    err, jac = log_error(prob.target, u, du, sys.basis)
    cost = err @ err
    # Newton converges quadratically, so iterate past tol to near roundoff.
    goal = min(prob.tol, 1e-13)
    it = 0
    for it in range(1, prob.max_iter + 1):
        if phase_invariant_distance(u, prob.target) <= goal:
            break
        j = jac * (2 * theta)
        jjt = j @ j.T
        accepted = False
        for _ in range(30):
            step = -j.T @ np.linalg.solve(jjt + mu * np.eye(len(err)), err)
            trial = theta + step
            u_t, du_t = product_and_derivatives(hams, trial ** 2)
            err_t, jac_t = log_error(prob.target, u_t, du_t, sys.basis)
            cost_t = err_t @ err_t
            if cost_t < cost:
                theta, u, err, jac, cost = trial, u_t, err_t, jac_t, cost_t
                mu = max(mu * 0.3, 1e-12)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
    return theta ** 2, it


def synthesize_timings(prob: SynthesisProblem, seed: int = 0) -> SynthesisResult:
    """Find nonnegative alternating timings realizing ``prob.target``.

    Restarts are seeded from ``(seed, restart)`` so results are reproducible.
    On failure the best restart is returned with ``success=False``.
    """
    sys = prob.sys
    if not sys.controllable:
        raise UncontrollableSystemError(
            f"Lie closure rank {sys.closure_rank} < {sys.dim ** 2 - 1}")

    def evaluate(timings):
        achieved, _ = propagate(PulseSequence.alternating(sys.dim, timings), sys)
        return achieved, phase_invariant_distance(achieved, prob.target)

    zeros = np.zeros(prob.K)
    achieved, dist = evaluate(zeros)
    best = SynthesisResult(zeros, achieved, dist, 0, 0, dist <= prob.tol)
    if best.success:
        return best
    for restart in range(prob.max_restarts):
        rng = np.random.default_rng([seed, restart])
        timings, iters = _solve_from(prob, _initial_timings(sys, prob.K, rng))
        achieved, dist = evaluate(timings)
        log.debug("restart %d: distance %.3e after %d iterations", restart, dist, iters)
        if dist < best.distance:
            best = SynthesisResult(timings, achieved, dist, iters, restart + 1,
                                   dist <= prob.tol)
        if best.success:
            break
    if not best.success:
        best = SynthesisResult(best.timings, best.achieved, best.distance,
                               best.iterations, prob.max_restarts, False)
    return best


def synthesize_repeated(sys: ControlSystem, target, reps: int | None = None,
                        K: int | None = None, seed: int = 0, tol: float = 1e-8,
                        max_restarts: int = 64):
    """Realize ``target`` as ``reps`` copies of a sequence for its ``reps``-th root.

    Returns the concatenated sequence and the synthesis result for the root.
    Raises :class:`SynthesisFailure` (carrying both) when the root is missed.
    """
    n = sys.dim
    reps = n * n - 1 if reps is None else int(reps)
    if reps < 1:
        raise ContractError(f"reps must be >= 1, got {reps}")
    root = principal_root(target, reps)
    result = synthesize_timings(
        SynthesisProblem(sys, root, K=K, max_restarts=max_restarts, tol=tol), seed)
    seq = result.sequence(n).repeated(reps)
    if not result.success:
        raise SynthesisFailure(
            f"root synthesis stalled at distance {result.distance:.3e} > {tol:.1e}",
            result, seq)
    return seq, result
