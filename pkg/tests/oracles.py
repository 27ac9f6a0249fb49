"""Independent brute-force references for the analytic routines.

Everything here goes through scipy's Pade exponential and plain quadrature,
sharing no code path with the package except the data types.
"""
import numpy as np
import scipy.integrate
import scipy.linalg

from safegate.propagation import ControlSystem, PulseSequence
from safegate.sun_algebra import random_hermitian


def random_system(n, rng, attempts=20):
    for _ in range(attempts):
        sys = ControlSystem.from_matrices(random_hermitian(n, rng), random_hermitian(n, rng))
        if sys.controllable:
            return sys
    raise RuntimeError("no controllable pair drawn")


def random_sequence(n, k, rng, waits=False, scale=1.0):
    t = rng.uniform(0.05, scale, k)
    w = rng.uniform(0.0, scale, k) if waits else None
    return PulseSequence.alternating(n, t, w)


def _raw_segments(seq, sys):
    """(H matrix, length) pairs: each step followed by its wait."""
    zero = np.zeros((sys.dim, sys.dim), dtype=complex)
    mats = {"A": sys.A.matrix, "B": sys.B.matrix, "idle": zero}
    out = []
    for s in seq.steps:
        out.append((mats[s.label], s.duration))
        out.append((zero, s.wait))
    return out


def oracle_propagate(seq, sys):
    mats = {"A": sys.A.matrix, "B": sys.B.matrix}
    u = np.eye(sys.dim, dtype=complex)
    for s in seq.steps:
        if s.label != "idle":
            u = scipy.linalg.expm(-1j * s.duration * mats[s.label]) @ u
    return u


def control_path(seq, sys, panels):
    """Yield ``(nodes, simpson_weights, U_c(nodes))`` per nonempty segment."""
    u0 = np.eye(sys.dim, dtype=complex)
    for h, t in _raw_segments(seq, sys):
        if t == 0:
            continue
        s = np.linspace(0.0, t, 2 * panels + 1)
        w = np.ones_like(s)
        w[1:-1:2], w[2:-1:2] = 4.0, 2.0
        w *= t / (6.0 * panels)
        us = scipy.linalg.expm(-1j * s[:, None, None] * h[None]) @ u0
        yield s, w, us
        u0 = us[-1]


def simpson_first_order(seq, sys, x, panels=10_000):
    """Composite Simpson of ``U_c^dag X U_c`` with ``panels`` panels per segment."""
    total = np.zeros((sys.dim, sys.dim), dtype=complex)
    for _, w, us in control_path(seq, sys, panels):
        total += np.einsum("k,kba,bc,kcd->ad", w, us.conj(), x, us)
    return total


def simpson_step_integral(h, g, t, panels=10_000):
    s = np.linspace(0.0, t, 2 * panels + 1)
    w = np.ones_like(s)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w *= t / (6.0 * panels)
    e = scipy.linalg.expm(1j * s[:, None, None] * np.asarray(h)[None])
    return np.einsum("k,kab,bc,kdc->ad", w, e, g, e.conj())


def trotter_noisy(seq, sys, noise_op, slices=100_000):
    """Strang-split propagator of ``H_c + noise`` with about ``slices`` slices in total."""
    segs = [(h, t) for h, t in _raw_segments(seq, sys) if t > 0]
    total = sum(t for _, t in segs)
    u = np.eye(sys.dim, dtype=complex)
    for h, t in segs:
        m = max(1, int(round(slices * t / total)))
        dt = t / m
        half = scipy.linalg.expm(-0.5j * dt * noise_op)
        step = half @ scipy.linalg.expm(-1j * dt * h) @ half
        u = np.linalg.matrix_power(step, m) @ u
    return u


def double_quadrature(seq, sys, x, y, panels=2000):
    """``int dt int_0^t ds F_x(t) F_y(s)`` by cumulative Simpson inside Simpson."""
    result = np.zeros((sys.dim, sys.dim), dtype=complex)
    carried = np.zeros((sys.dim, sys.dim), dtype=complex)
    for s, w, us in control_path(seq, sys, panels):
        fx = us.conj().transpose(0, 2, 1) @ x @ us
        fy = us.conj().transpose(0, 2, 1) @ y @ us
        # cumulative_simpson drops imaginary parts, so integrate them separately
        cum = [scipy.integrate.cumulative_simpson(part, x=s, axis=0, initial=0.0)
               for part in (fy.real, fy.imag)]
        inner = carried + cum[0] + 1j * cum[1]
        result += np.einsum("k,kab,kbc->ac", w, fx, inner)
        carried = inner[-1]
    return result
