"""
Noise directions that no purely two-valued A/B sequence can correct.

For ``X = B - A`` the operators ``C_n = [A + B, X**n] / 2`` satisfy, for any
sequence alternating between ``A`` and ``B`` with final propagator ``U``,

    integral U_c^dag C_n U_c ds = -i (U^dag X**n U - X**n),

independently of the timings. With ``exp(-i t H)`` propagators the prefactor
is ``-i``; the same chain written with ``exp(+i t H)`` factors gives ``+i``
(see :func:`closed_form`). The span of ``{i C_n}`` has dimension
``1 <= D <= N - 1`` because ``X`` satisfies its characteristic polynomial.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateInputError
from .propagation import ControlSystem, PulseSequence, first_order_integrals, propagate
from .sun_algebra import commutator, dagger

RANK_TOL = 1e-9


@dataclass(frozen=True)
class NoGoReport:
    """Uncorrectable subspace of a control pair and, optionally, its check on a sequence."""

    dim_D: int
    hermitized_basis: np.ndarray = field(repr=False)
    closed_form_residual: float | None = None
    target_dependence_flag: bool | None = None
    closed_form_norms: tuple[float, ...] = ()


def _difference_powers(sys: ControlSystem, max_n: int):
    x = sys.B.matrix - sys.A.matrix
    powers = [x]
    for _ in range(max_n - 1):
        powers.append(powers[-1] @ x)
    return powers


def uncorrectable_operators(sys: ControlSystem, max_n: int | None = None) -> list[np.ndarray]:
    """``C_1 ... C_max_n``; each is anti-Hermitian."""
    max_n = sys.dim if max_n is None else int(max_n)
    if max_n < sys.dim:
        raise ContractError(f"max_n = {max_n} must be at least N = {sys.dim}")
    s = sys.A.matrix + sys.B.matrix
    return [0.5 * commutator(s, p) for p in _difference_powers(sys, max_n)]


def _krylov_powers(x, n):
    """Frobenius-orthonormal basis of span{X, X**2, ..., X**n} (Arnoldi style)."""
    norm = np.linalg.norm(x)
    if norm == 0:
        return []
    q = [x / norm]
    for _ in range(n - 1):
        v = x @ q[-1]
        scale = np.linalg.norm(v)
        for _ in range(2):
            for b in q:
                v = v - np.vdot(b, v).real * b
        vn = np.linalg.norm(v)
        if vn <= RANK_TOL * scale:
            break
        q.append(v / vn)
    return q


def uncorrectable_dimension(sys: ControlSystem) -> NoGoReport:
    """Dimension of span{i C_n : n <= N} and an orthonormal Hermitian basis of it.

    The powers of ``B - A`` are orthonormalized before the commutator is
    taken; the rank cut is ``1e-9`` relative to the largest singular value.
    """
    x = sys.B.matrix - sys.A.matrix
    if np.max(np.abs(x)) == 0:
        raise DegenerateInputError("A == B: no noise directions are defined")
    s = sys.A.matrix + sys.B.matrix
    herm = np.array([1j * 0.5 * commutator(s, q) for q in _krylov_powers(x, sys.dim)])
    n = sys.dim
    vecs = np.concatenate([herm.real.reshape(len(herm), -1),
                           herm.imag.reshape(len(herm), -1)], axis=1)
    u, sv, vt = np.linalg.svd(vecs, full_matrices=False)
    if sv.size == 0 or sv[0] == 0:
        raise DegenerateInputError("A and B commute: every C_n vanishes")
    d = int(np.sum(sv > RANK_TOL * sv[0]))
    basis = vt[:d, : n * n].reshape(d, n, n) + 1j * vt[:d, n * n:].reshape(d, n, n)
    basis = 0.5 * (basis + dagger(basis))
    basis /= np.linalg.norm(basis, axis=(1, 2))[:, None, None]
    return NoGoReport(d, basis)


def closed_form(u, sys: ControlSystem, n: int, sign: complex = -1j) -> np.ndarray:
    """``sign * (U^dag X**n U - X**n)`` with ``X = B - A``.

    ``sign=-1j`` matches the first-order map of this package; ``sign=+1j``
    is the variant obtained with ``exp(+i t H)`` step propagators.
    """
    xn = np.linalg.matrix_power(sys.B.matrix - sys.A.matrix, n)
    return sign * (dagger(u) @ xn @ u - xn)


def _require_two_valued(seq: PulseSequence):
    if any(s.wait != 0 for s in seq.steps) or any(s.label == "idle" for s in seq.steps):
        raise ContractError("the closed form only holds for sequences without waits or idle steps")


def closed_form_residuals(seq: PulseSequence, sys: ControlSystem, sign: complex = -1j):
    """Per-n Frobenius gaps between the integrated ``C_n`` and the closed form."""
    _require_two_valued(seq)
    u, _ = propagate(seq, sys)
    cs = np.array(uncorrectable_operators(sys))
    lhs = first_order_integrals(seq, sys, cs)
    return np.array([np.linalg.norm(lhs[k] - closed_form(u, sys, k + 1, sign))
                     for k in range(sys.dim)])


def verify_closed_form(seq: PulseSequence, sys: ControlSystem) -> float:
    """Largest gap over ``n <= N``; of order machine precision for any timings."""
    return float(np.max(closed_form_residuals(seq, sys)))


def nogo_report(seq: PulseSequence, sys: ControlSystem, zero_tol: float = 1e-9) -> NoGoReport:
    """Dimension ``D`` plus the closed-form check on ``seq``.

    ``target_dependence_flag`` is set when some ``||U^dag X**n U - X**n||``
    exceeds ``zero_tol`` relative to ``||X**n||``, i.e. the uncorrectable
    response is nonzero for this gate.
    """
    report = uncorrectable_dimension(sys)
    residual = verify_closed_form(seq, sys)
    u, _ = propagate(seq, sys)
    x = sys.B.matrix - sys.A.matrix
    norms, rel = [], []
    for n in range(1, sys.dim + 1):
        val = float(np.linalg.norm(closed_form(u, sys, n)))
        norms.append(val)
        rel.append(val / max(np.linalg.norm(np.linalg.matrix_power(x, n)), 1e-300))
    return NoGoReport(report.dim_D, report.hermitized_basis, residual,
                      bool(max(rel) > zero_tol), tuple(norms))
