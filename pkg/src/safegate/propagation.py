"""
Piecewise-constant control evolution and its first-order noise response.

A sequence is a list of steps. Each step applies ``A``, ``B`` or nothing
(``idle``) for ``duration`` and is followed by ``wait`` time with the control
switched off. Internally it is flattened into segments ``(H, T, U_before)``
where ``U_before`` is the control propagator at the start of the segment;
every quantity below is a sum over segments.

The first-order response of a noise operator ``X`` is

    F[X] = integral_0^Tc  U_c(s)^dag X U_c(s) ds,

evaluated exactly per segment in the eigenbasis of its Hamiltonian.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ContractError
from .sun_algebra import (
    GeneratorBasis,
    HermitianOperator,
    as_hermitian,
    build_generator_basis,
    dagger,
    expm_unitary,
    lie_closure_rank,
    phase_invariant_distance,
    project_su_many,
)

LABELS = ("A", "B", "idle")
DEGENERATE_GAP = 1e-12


@dataclass(frozen=True)
class ControlSystem:
    """The two control Hamiltonians together with the su(N) basis."""

    dim: int
    A: HermitianOperator
    B: HermitianOperator
    basis: GeneratorBasis = field(repr=False)
    closure_rank: int

    @classmethod
    def from_matrices(cls, a, b) -> "ControlSystem":
        a = as_hermitian(a)
        b = as_hermitian(b)
        if a.dim != b.dim:
            raise ContractError(f"A is {a.dim}x{a.dim} but B is {b.dim}x{b.dim}")
        return cls(a.dim, a, b, build_generator_basis(a.dim),
                   lie_closure_rank(a.matrix, b.matrix))

    @property
    def controllable(self) -> bool:
        return self.closure_rank == self.dim ** 2 - 1

    def hamiltonian(self, label: str) -> HermitianOperator:
        if label == "A":
            return self.A
        if label == "B":
            return self.B
        if label == "idle":
            return _zero_hamiltonian(self.dim)
        raise ContractError(f"unknown step label {label!r}")


_ZEROS: dict[int, HermitianOperator] = {}


def _zero_hamiltonian(n: int) -> HermitianOperator:
    if n not in _ZEROS:
        _ZEROS[n] = HermitianOperator.zeros(n)
    return _ZEROS[n]


@dataclass(frozen=True)
class PulseStep:
    label: str
    duration: float
    wait: float = 0.0

    def __post_init__(self):
        if self.label not in LABELS:
            raise ContractError(f"step label must be one of {LABELS}, got {self.label!r}")
        if not (self.duration >= 0.0):
            raise ContractError(f"negative step duration {self.duration}")
        if not (self.wait >= 0.0):
            raise ContractError(f"negative waiting time {self.wait}")


@dataclass(frozen=True)
class PulseSequence:
    dim: int
    steps: tuple[PulseStep, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    @classmethod
    def alternating(cls, dim: int, timings: Iterable[float],
                    waits: Iterable[float] | None = None) -> "PulseSequence":
        """B, A, B, A, ... steps with the given durations (first factor is B)."""
        timings = [float(t) for t in timings]
        waits = [0.0] * len(timings) if waits is None else [float(w) for w in waits]
        if len(waits) != len(timings):
            raise ContractError("timings and waits differ in length")
        labels = ("B", "A")
        return cls(dim, tuple(PulseStep(labels[k % 2], t, w)
                              for k, (t, w) in enumerate(zip(timings, waits))))

    def __len__(self):
        return len(self.steps)

    @property
    def alternation_flag(self) -> bool:
        return all(s.label == ("B", "A")[k % 2] for k, s in enumerate(self.steps))

    @property
    def two_valued(self) -> bool:
        """Strictly alternating with every wait equal to zero."""
        return self.alternation_flag and all(s.wait == 0.0 for s in self.steps)

    @property
    def durations(self) -> np.ndarray:
        return np.array([s.duration for s in self.steps], dtype=float)

    @property
    def waits(self) -> np.ndarray:
        return np.array([s.wait for s in self.steps], dtype=float)

    @property
    def control_duration(self) -> float:
        return float(sum(s.duration for s in self.steps if s.label != "idle"))

    @property
    def total_wait(self) -> float:
        return float(sum(s.wait + (s.duration if s.label == "idle" else 0.0)
                         for s in self.steps))

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration + s.wait for s in self.steps))

    def with_waits(self, waits: Sequence[float]) -> "PulseSequence":
        if len(waits) != len(self.steps):
            raise ContractError(f"need {len(self.steps)} waits, got {len(waits)}")
        return PulseSequence(self.dim, tuple(
            PulseStep(s.label, s.duration, float(w)) for s, w in zip(self.steps, waits)))

    def repeated(self, reps: int) -> "PulseSequence":
        return PulseSequence(self.dim, self.steps * reps)


@dataclass(frozen=True)
class FirstOrderMap:
    """First-order responses of a list of noise operators.

    ``operators[i]`` is the integrated operator for the i-th input and row i
    of ``coeff_matrix`` holds its su(N) coefficients.
    """

    operators: np.ndarray
    coeff_matrix: np.ndarray

    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.operators, axis=(-2, -1))


@dataclass(frozen=True)
class NoiseModel:
    coefficients: np.ndarray
    operator: np.ndarray = field(repr=False)

    @classmethod
    def from_coefficients(cls, eps, basis: GeneratorBasis) -> "NoiseModel":
        eps = np.asarray(eps, dtype=float)
        if eps.shape != (len(basis),):
            raise ContractError(f"need {len(basis)} noise coefficients, got {eps.shape}")
        op = np.tensordot(eps, basis.generators, axes=1)
        return cls(eps, 0.5 * (op + dagger(op)))


def _check_dims(seq: PulseSequence, sys: ControlSystem):
    if seq.dim != sys.dim:
        raise ContractError(f"sequence is for N={seq.dim}, system has N={sys.dim}")


def segments(seq: PulseSequence, sys: ControlSystem):
    """Flatten a sequence into ``(H, T, U_before)`` segments.

    Zero-length segments are dropped; idle steps and waits get ``H = 0``.
    """
    _check_dims(seq, sys)
    zero = _zero_hamiltonian(sys.dim)
    u = np.eye(sys.dim, dtype=complex)
    out = []
    for step in seq.steps:
        h = sys.hamiltonian(step.label)
        if step.duration > 0:
            out.append((h, step.duration, u))
            u = expm_unitary(h, step.duration) @ u
        if step.wait > 0:
            out.append((zero, step.wait, u))
    return out


def propagate(seq: PulseSequence, sys: ControlSystem):
    """Noiseless propagator and the prefix products.

    Returns
    -------
    u_final : ndarray
    prefixes : list of ndarray
        ``prefixes[n]`` is the product of the first ``n`` step exponentials,
        so ``prefixes[0]`` is the identity. Waits contribute nothing.
    """
    _check_dims(seq, sys)
    u = np.eye(sys.dim, dtype=complex)
    prefixes = [u]
    for step in seq.steps:
        if step.duration > 0 and step.label != "idle":
            u = expm_unitary(sys.hamiltonian(step.label), step.duration) @ u
        prefixes.append(u)
    return u, prefixes


def _divided_phase(evals, t):
    """Entries ``(exp(i t d) - 1) / (i d)`` with ``d = l_a - l_b``; ``t`` where d ~ 0."""
    d = evals[:, None] - evals[None, :]
    small = np.abs(d) <= DEGENERATE_GAP
    safe = np.where(small, 1.0, d)
    return np.where(small, t, (np.exp(1j * t * safe) - 1.0) / (1j * safe))


def step_integral(h, g, t: float) -> np.ndarray:
    """``integral_0^t exp(isH) G exp(-isH) ds`` for one matrix or a stack.

    ``g`` may have shape ``(N, N)`` or ``(M, N, N)``.
    """
    h = as_hermitian(h)
    if t < 0:
        raise ContractError(f"negative integration time {t}")
    v = h.evecs
    gt = dagger(v) @ np.asarray(g) @ v
    return v @ (_divided_phase(h.evals, t) * gt) @ dagger(v)


def first_order_integrals(seq: PulseSequence, sys: ControlSystem, ops) -> np.ndarray:
    """Stack of ``integral U_c^dag X U_c ds`` for each ``X`` in ``ops``."""
    ops = np.asarray(ops, dtype=complex)
    single = ops.ndim == 2
    if single:
        ops = ops[None]
    if ops.shape[1:] != (sys.dim, sys.dim):
        raise ContractError(f"operators of shape {ops.shape[1:]} for N={sys.dim}")
    total = np.zeros_like(ops)
    for h, t, u0 in segments(seq, sys):
        total += dagger(u0) @ step_integral(h, ops, t) @ u0
    return total[0] if single else total


def first_order_map(seq: PulseSequence, sys: ControlSystem, ops=None) -> FirstOrderMap:
    """First-order map of ``ops`` (default: the generator basis of ``sys``)."""
    ops = sys.basis.generators if ops is None else ops
    integrals = first_order_integrals(seq, sys, np.asarray(ops, dtype=complex).reshape(
        -1, sys.dim, sys.dim))
    return FirstOrderMap(integrals, project_su_many(integrals, sys.basis))


def propagate_noisy(seq: PulseSequence, sys: ControlSystem, noise: NoiseModel) -> np.ndarray:
    """Exact propagator of ``H_c(t) + noise`` over the whole sequence."""
    noise_op = np.asarray(noise.operator)
    if noise_op.shape != (sys.dim, sys.dim):
        raise ContractError("noise operator dimension does not match the system")
    u = np.eye(sys.dim, dtype=complex)
    cache: dict[int, HermitianOperator] = {}
    for h, t, _ in segments(seq, sys):
        key = id(h)
        if key not in cache:
            cache[key] = HermitianOperator(h.matrix + noise_op)
        u = expm_unitary(cache[key], t) @ u
    return u


def interaction_error(seq: PulseSequence, sys: ControlSystem, noise: NoiseModel) -> float:
    """Phase-minimized distance of the interaction-picture propagator from I."""
    u_c, _ = propagate(seq, sys)
    return phase_invariant_distance(propagate_noisy(seq, sys, noise), u_c)


def _simpson_weights(t: float, panels: int) -> np.ndarray:
    w = np.ones(2 * panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (t / (6.0 * panels))


def second_order_integral(seq: PulseSequence, sys: ControlSystem, x, y,
                          panels: int = 256) -> np.ndarray:
    """``integral_0^Tc dt integral_0^t ds F_x(t) F_y(s)``, ``F_z = U_c^dag Z U_c``.

    The inner integral is exact (running first-order partials); the outer one
    uses composite Simpson with ``panels`` panels per segment.
    """
    if panels < 1:
        raise ContractError("need at least one Simpson panel")
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    n = sys.dim
    result = np.zeros((n, n), dtype=complex)
    inner = np.zeros((n, n), dtype=complex)
    for h, t, u0 in segments(seq, sys):
        v = h.evecs
        w = dagger(v) @ u0
        xt = v.conj().T @ x @ v
        yt = v.conj().T @ y @ v
        nodes = np.linspace(0.0, t, 2 * panels + 1)
        d = h.evals[:, None] - h.evals[None, :]
        rot = np.exp(1j * nodes[:, None, None] * d)
        fx = dagger(w) @ (rot * xt) @ w
        part = np.stack([_divided_phase(h.evals, s) for s in nodes])
        iy = inner + dagger(w) @ (part * yt) @ w
        result += np.einsum("k,kab,kbc->ac", _simpson_weights(t, panels), fx, iy)
        inner = inner + dagger(w) @ (_divided_phase(h.evals, t) * yt) @ w
    return result


def second_order_residual(seq: PulseSequence, sys: ControlSystem, m: int, n: int,
                          panels: int = 256) -> np.ndarray:
    """Second-order double integral for generators ``G_m``, ``G_n`` (1-based)."""
    count = len(sys.basis)
    for idx in (m, n):
        if not 1 <= idx <= count:
            raise ContractError(f"generator index {idx} outside [1, {count}]")
    return second_order_integral(seq, sys, sys.basis[m - 1], sys.basis[n - 1], panels)
