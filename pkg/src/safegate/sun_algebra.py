"""
Linear algebra on su(N): generator bases, unitary exponentials, projections,
Lie closure and matrix roots.

All Hamiltonians are dimensionless angular frequencies (hbar = 1). The
generator basis is the generalized Gell-Mann set normalized as
``tr(G_i G_j) = 2 delta_ij``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ContractError, InvalidDimensionError, NumericFailureError

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
CLOSURE_TOL = 1e-9
CLUSTER_GAP = 1e-10


def dagger(x):
    return np.conj(np.swapaxes(x, -1, -2))


def commutator(x, y):
    return x @ y - y @ x


def hermiticity_error(x) -> float:
    x = np.asarray(x)
    return float(np.max(np.abs(x - dagger(x)), initial=0.0))


def unitarity_error(u) -> float:
    u = np.asarray(u)
    return float(np.linalg.norm(dagger(u) @ u - np.eye(u.shape[-1])))


def check_unitary(u, tol: float = UNITARY_TOL) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {u.shape}")
    err = unitarity_error(u)
    if err > tol:
        raise ContractError(f"matrix is not unitary (||U^dag U - I||_F = {err:.3e})")
    return u


class HermitianOperator:
    """Hermitian matrix with its spectrum computed once at construction.

    Parameters
    ----------
    matrix : array_like, shape (N, N)
        Must equal its conjugate transpose to within ``1e-12`` (max entry).
        The stored matrix is exactly symmetrized.
    """

    __slots__ = ("matrix", "evals", "evecs")

    def __init__(self, matrix, tol: float = HERMITIAN_TOL):
        m = np.array(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractError(f"expected a square matrix, got shape {m.shape}")
        err = hermiticity_error(m)
        if err > tol:
            raise ContractError(f"matrix is not Hermitian (max deviation {err:.3e})")
        m = 0.5 * (m + dagger(m))
        m.setflags(write=False)
        evals, evecs = np.linalg.eigh(m)
        evals.setflags(write=False)
        evecs.setflags(write=False)
        self.matrix = m
        self.evals = evals
        self.evecs = evecs

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)

    def __repr__(self):
        return f"HermitianOperator(dim={self.dim})"

    @classmethod
    def zeros(cls, n: int) -> "HermitianOperator":
        return cls(np.zeros((n, n)))


def as_hermitian(h) -> HermitianOperator:
    return h if isinstance(h, HermitianOperator) else HermitianOperator(h)


@dataclass(frozen=True)
class GeneratorBasis:
    """Ordered generalized Gell-Mann basis of su(N).

    ``generators`` has shape ``(N**2 - 1, N, N)``: symmetric off-diagonal
    pairs ordered by (row, col), then antisymmetric pairs in the same order,
    then the traceless diagonal ladder.
    """

    dim: int
    generators: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.generators)

    def __getitem__(self, i):
        return self.generators[i]

    def __iter__(self):
        return iter(self.generators)


def build_generator_basis(n: int) -> GeneratorBasis:
    if int(n) != n or n < 2:
        raise InvalidDimensionError(f"su(N) basis needs N >= 2, got {n}")
    n = int(n)
    pairs = [(j, k) for j in range(n) for k in range(j + 1, n)]
    gens = []
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = g[k, j] = 1.0
        gens.append(g)
    for j, k in pairs:
        g = np.zeros((n, n), dtype=complex)
        g[j, k] = -1j
        g[k, j] = 1j
        gens.append(g)
    for l in range(1, n):
        d = np.zeros(n)
        d[:l] = 1.0
        d[l] = -l
        gens.append(np.diag(d * np.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    arr = np.array(gens)
    arr.setflags(write=False)
    return GeneratorBasis(n, arr)


def expm_unitary(h, t: float) -> np.ndarray:
    """Return ``exp(-i t H)`` from the cached eigendecomposition of ``H``."""
    h = as_hermitian(h)
    v = h.evecs
    return (v * np.exp(-1j * t * h.evals)) @ dagger(v)


def project_su(x, basis: GeneratorBasis):
    """Coefficients of the Hermitian part of ``x`` in ``basis``.

    Returns
    -------
    coeffs : ndarray, shape (N**2 - 1,)
        ``tr(G_i X_H) / 2`` with ``X_H = (X + X^dag) / 2``.
    trace_part : complex
        ``tr(X) / N``.
    """
    x = np.asarray(x)
    if x.shape != (basis.dim, basis.dim):
        raise ContractError(f"shape {x.shape} does not match su({basis.dim})")
    xh = 0.5 * (x + dagger(x))
    # tr(G X) = sum_ab G_ab X_ba
    coeffs = 0.5 * np.einsum("iab,ba->i", basis.generators, xh).real
    return coeffs, complex(np.trace(x)) / basis.dim


def project_su_many(xs, basis: GeneratorBasis) -> np.ndarray:
    """Vectorized :func:`project_su` coefficients for a stack of matrices."""
    xs = np.asarray(xs)
    xh = 0.5 * (xs + dagger(xs))
    return 0.5 * np.einsum("iab,...ba->...i", basis.generators, xh).real


def reconstruct_su(coeffs, basis: GeneratorBasis, trace_part: complex = 0.0):
    out = np.tensordot(np.asarray(coeffs, dtype=float), basis.generators, axes=1)
    return out + trace_part * np.eye(basis.dim)


def traceless_part(x) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    return x - np.trace(x) / x.shape[0] * np.eye(x.shape[0])


def lie_closure_rank(a, b) -> int:
    """Dimension of the real Lie algebra generated by ``iA0`` and ``iB0``.

    ``A0`` and ``B0`` are the traceless parts. Elements are tracked through
    Hermitian representatives (``X -> iX``), whose bracket is ``i[X, Y]``.
    A bracket opens a new direction when the part orthogonal to the current
    span exceeds ``1e-9`` times its own norm.
    """
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"shape mismatch: {a.shape} vs {b.shape}")
    n = a.shape[0]
    max_dim = n * n - 1
    span: list[np.ndarray] = []

    def add(x) -> bool:
        vec = np.concatenate([x.real.ravel(), x.imag.ravel()])
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            return False
        r = vec
        for _ in range(2):
            for q in span:
                r = r - (q @ r) * q
        rn = np.linalg.norm(r)
        if rn <= CLOSURE_TOL * norm:
            return False
        span.append(r / rn)
        return True

    elements = []
    for x in (traceless_part(a), traceless_part(b)):
        x = 0.5 * (x + dagger(x))
        if add(x):
            elements.append(x)
    frontier = list(range(len(elements)))
    while frontier and len(span) < max_dim:
        new_frontier = []
        for i in frontier:
            for j in range(len(elements)):
                if len(span) >= max_dim:
                    break
                c = 1j * commutator(elements[i], elements[j])
                if add(c):
                    elements.append(c)
                    new_frontier.append(len(elements) - 1)
        frontier = new_frontier
    return len(span)


def _schur_unitary(u):
    t, z = scipy.linalg.schur(u, output="complex")
    if unitarity_error(z) > 1e-9:
        raise NumericFailureError("Schur basis of the unitary is not unitary")
    return np.diag(t).copy(), z


def _clustered_phases(eigs) -> np.ndarray:
    """Eigenphases in (-pi, pi], with near-degenerate clusters sharing a branch."""
    phases = np.angle(eigs)
    phases[phases <= -np.pi] += 2 * np.pi
    n = len(eigs)
    # Union near-equal eigenvalues; each cluster takes the phase of its first
    # member plus small unwrapped offsets so the branch is common.
    labels = list(range(n))
    for i in range(n):
        for j in range(i + 1, n):
            if abs(eigs[i] - eigs[j]) < CLUSTER_GAP:
                labels[j] = labels[i]
    out = phases.copy()
    for i in range(n):
        root = labels[i]
        if root != i:
            out[i] = phases[root] + np.angle(eigs[i] / eigs[root])
    return out


def principal_root(u, m: int) -> np.ndarray:
    """``m``-th root of a unitary with eigenphases taken in ``(-pi, pi]``."""
    if int(m) != m or m < 1:
        raise ContractError(f"root order must be a positive integer, got {m}")
    u = check_unitary(u)
    if m == 1:
        return u.copy()
    eigs, z = _schur_unitary(u)
    phases = _clustered_phases(eigs)
    return (z * np.exp(1j * phases / m)) @ dagger(z)


def principal_log(u) -> np.ndarray:
    """Principal logarithm of a unitary; the result is anti-Hermitian."""
    eigs, z = _schur_unitary(np.asarray(u, dtype=complex))
    return (z * (1j * _clustered_phases(eigs))) @ dagger(z)


def fix_det_su(u) -> np.ndarray:
    """Strip a global phase so that ``det = 1``."""
    u = check_unitary(u)
    theta = np.angle(np.linalg.det(u))
    if theta <= -np.pi:
        theta += 2 * np.pi
    return np.exp(-1j * theta / u.shape[0]) * u


def phase_invariant_distance(u, v) -> float:
    """``min_phi ||U - exp(i phi) V||_F``.

    Equal to ``sqrt(2N - 2|tr(U^dag V)|)``, but evaluated at the optimal
    phase so that distances far below ``sqrt(eps)`` stay resolvable.
    """
    u = np.asarray(u)
    v = np.asarray(v)
    if u.shape != v.shape:
        raise ContractError(f"shape mismatch: {u.shape} vs {v.shape}")
    overlap = np.vdot(v, u)  # tr(V^dag U)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.linalg.norm(u - phase * v))


def random_hermitian(n: int, rng: np.random.Generator, traceless: bool = True):
    x = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    h = 0.5 * (x + dagger(x))
    return traceless_part(h) if traceless else h


def random_su(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random element of SU(N)."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return fix_det_su(q)
