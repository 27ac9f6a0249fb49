"""
Nonnegative waiting times that cancel the first-order response of every
static noise generator.

A wait of length ``tau_n`` after step ``n`` adds ``tau_n U_n^dag G_i U_n`` to
the first-order response of ``G_i`` and leaves the noiseless gate alone.
Stacking the su(N) coefficients of all ``N**2 - 1`` responses gives the
linear system ``g + F tau = 0`` with ``(N**2 - 1)**2`` rows, solved here for
``tau >= 0`` by linear programming with a nonnegative least-squares fallback.

With only about as many slots as equations the nonnegative cone of the
columns rarely contains ``-g``. :func:`refine_jointly` then moves the pulse
durations together with the waits (damped Gauss-Newton on both), holding the
noiseless gate fixed, which keeps the slot count unchanged.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from .errors import ContractError, ProtectionFailure
from .propagation import (
    ControlSystem,
    PulseSequence,
    PulseStep,
    first_order_map,
    phase_invariant_distance,
    propagate,
    step_integral,
)
from .sun_algebra import dagger, expm_unitary, project_su_many
from .synthesis import log_error

log = logging.getLogger(__name__)

COLUMN_NORM_TOL = 1e-10


@dataclass(frozen=True)
class ProtectionSystem:
    """``g + F tau = 0``; row ``i * (N**2 - 1) + j`` is component ``j`` of noise ``i``.

    ``slot_steps[c]`` is the number of steps completed before slot ``c``
    (0 for a leading wait).
    """

    F: np.ndarray = field(repr=False)
    g: np.ndarray = field(repr=False)
    slot_steps: tuple[int, ...] = ()
    tau: np.ndarray | None = field(default=None, repr=False)
    residual: float | None = None

    @property
    def shape(self):
        return self.F.shape


def wait_columns(prefixes, sys: ControlSystem) -> np.ndarray:
    """Stacked coefficients of ``U^dag G_i U`` for each prefix ``U``; shape (d*d, M)."""
    p = np.asarray(prefixes)
    conj = np.einsum("nba,ibc,ncd->inad", p.conj(), sys.basis.generators, p)
    coeffs = project_su_many(conj, sys.basis)  # (i, n, j)
    d = len(sys.basis)
    return coeffs.transpose(0, 2, 1).reshape(d * d, len(p))


def assemble_protection_system(seq: PulseSequence, sys: ControlSystem,
                               leading_slot: bool = False) -> ProtectionSystem:
    """Build ``F`` from the step prefixes and ``g`` from the sequence's own response.

    Slots sit after every step; ``leading_slot`` adds one before the first
    step. Waits already present in ``seq`` are part of ``g``.
    """
    _, prefixes = propagate(seq, sys)
    slots = list(range(0 if leading_slot else 1, len(seq) + 1))
    F = wait_columns([prefixes[k] for k in slots], sys) if slots else np.zeros(
        (len(sys.basis) ** 2, 0))
    # Conjugation preserves ||G_i||_F, so each column has norm sqrt(N**2 - 1).
    if F.shape[1]:
        norms = np.linalg.norm(F, axis=0)
        if np.max(np.abs(norms - np.sqrt(len(sys.basis)))) > COLUMN_NORM_TOL:
            raise ContractError("wait columns lost their norm; prefixes are not unitary")
    g = first_order_map(seq, sys).coeff_matrix.ravel()
    return ProtectionSystem(F, g, tuple(slots))


def _polish(F, g, tau):
    """Re-solve exactly on the LP support; keep the result only if it stays >= 0."""
    support = tau > 1e-12 * max(1.0, tau.max(initial=0.0))
    if not support.any():
        return tau
    sol, *_ = np.linalg.lstsq(F[:, support], -g, rcond=None)
    if np.all(sol >= 0):
        out = np.zeros_like(tau)
        out[support] = sol
        if np.linalg.norm(g + F @ out) <= np.linalg.norm(g + F @ tau):
            return out
    return tau


def solve_waits(psys: ProtectionSystem, tol: float = 1e-8):
    """Minimum-total-wait nonnegative solution of ``F tau = -g``.

    Returns ``(tau, residual)`` with ``residual = ||g + F tau||_2``. Raises
    :class:`ProtectionFailure` (carrying the best ``tau``) when the residual
    exceeds ``tol * ||g||``.
    """
    F, g = psys.F, psys.g
    m = F.shape[1]
    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        return np.zeros(m), 0.0
    tau = None
    if m:
        lp = scipy.optimize.linprog(np.ones(m), A_eq=F, b_eq=-g, bounds=(0, None),
                                    method="highs")
        if lp.status == 0:
            tau = _polish(F, g, np.maximum(lp.x, 0.0))
        else:
            log.info("wait LP did not solve (%s); falling back to NNLS", lp.message)
    if tau is None or np.linalg.norm(g + F @ tau) > tol * gnorm:
        if m:
            nn, _ = scipy.optimize.nnls(F, -g, maxiter=50 * m)
        else:
            nn = np.zeros(0)
        if tau is None or np.linalg.norm(g + F @ nn) < np.linalg.norm(g + F @ tau):
            tau = nn
    residual = float(np.linalg.norm(g + F @ tau))
    if residual > tol * gnorm:
        raise ProtectionFailure(
            f"waits leave residual {residual:.3e} > {tol:.1e} * ||g|| ({gnorm:.3e})",
            residual=residual, tau=tau)
    return tau, residual


def _apply_waits(seq: PulseSequence, slots, tau) -> PulseSequence:
    steps = list(seq.steps)
    lead = 0.0
    for slot, t in zip(slots, tau):
        if slot == 0:
            lead += float(t)
        else:
            s = steps[slot - 1]
            steps[slot - 1] = PulseStep(s.label, s.duration, s.wait + float(t))
    if lead > 0:
        steps.insert(0, PulseStep("idle", 0.0, lead))
    return PulseSequence(seq.dim, tuple(steps))


def split_steps(seq: PulseSequence, parts: int = 2) -> PulseSequence:
    """Cut every pulse into ``parts`` equal pieces (more wait slots, same gate)."""
    steps = []
    for s in seq.steps:
        steps.extend(PulseStep(s.label, s.duration / parts, 0.0) for _ in range(parts - 1))
        steps.append(PulseStep(s.label, s.duration / parts, s.wait))
    return PulseSequence(seq.dim, tuple(steps))


def _joint_model(sys: ControlSystem, hams, durations, waits, target, want_jac=True):
    """First-order coefficients and gate error, with derivatives in durations and waits.

    Stretching pulse ``k`` adds the integrand at its end, ``P_k^dag G P_k``, and
    right-rotates every later contribution ``Y`` by ``Q_k = P_k^dag H_k P_k``,
    giving ``i [Q_k, Y]``.
    """
    gens = sys.basis.generators
    n = sys.dim
    k_steps = len(hams)
    prefixes = [np.eye(n, dtype=complex)]
    for h, t in zip(hams, durations):
        prefixes.append(expm_unitary(h, t) @ prefixes[-1])
    p = np.array(prefixes)
    pulse = np.array([dagger(p[k]) @ step_integral(hams[k], gens, durations[k]) @ p[k]
                      for k in range(k_steps)])
    conj = np.einsum("kba,ibc,kcd->kiad", p[1:].conj(), gens, p[1:])
    wait = waits[:, None, None, None] * conj
    g = project_su_many(pulse.sum(0) + wait.sum(0), sys.basis).ravel()
    u = p[-1]
    if not want_jac:
        return g, log_error(target, u, None, sys.basis)[0], None, None, None
    q = np.array([dagger(p[k + 1]) @ hams[k].matrix @ p[k + 1] for k in range(k_steps)])
    later = np.empty_like(pulse)
    acc = np.zeros_like(pulse[0])
    for k in range(k_steps - 1, -1, -1):
        acc = acc + wait[k]
        later[k] = acc
        acc = acc + pulse[k]
    d_dur = conj + 1j * (q[:, None] @ later - later @ q[:, None])
    jg_dur = project_su_many(d_dur, sys.basis).reshape(k_steps, -1).T
    jg_wait = project_su_many(conj, sys.basis).reshape(k_steps, -1).T
    e, je_dur = log_error(target, u, -1j * (u[None] @ q), sys.basis)
    return g, e, jg_dur, jg_wait, je_dur


@dataclass(frozen=True)
class JointRefinement:
    sequence: PulseSequence = field(repr=False)
    residual: float
    gate_distance: float
    iterations: int
    converged: bool


def refine_jointly(seq: PulseSequence, sys: ControlSystem, target=None, tau0=None,
                   tol: float = 1e-8, gate_tol: float = 1e-10, max_iter: int = 500,
                   gate_weight: float = 10.0, wait_floor: float | None = None) -> JointRefinement:
    """Solve for waits and pulse durations together so that every first-order
    response vanishes while the noiseless gate stays at ``target``.

    Durations and waits are parametrized as squares. ``tol`` is relative to
    the norm of the stacked first-order vector of ``seq`` with the initial
    waits ``tau0``; iteration stops once both conditions hold near roundoff.
    """
    hams = [sys.hamiltonian(s.label) for s in seq.steps]
    k_steps = len(hams)
    if target is None:
        target, _ = propagate(seq, sys)
    durations = seq.durations
    if wait_floor is None:
        wait_floor = 0.1 * float(durations.mean()) if k_steps else 0.0
    waits = seq.waits if tau0 is None else seq.waits + np.asarray(tau0, dtype=float)
    waits = np.maximum(waits, wait_floor)
    theta, phi = np.sqrt(durations), np.sqrt(waits)
    d = len(sys.basis)

    def evaluate(theta, phi):
        g, e, jg_dur, jg_wait, je_dur = _joint_model(sys, hams, theta ** 2, phi ** 2, target)
        r = np.concatenate([g, gate_weight * e])
        jac = np.block([[jg_dur * (2 * theta), jg_wait * (2 * phi)],
                        [gate_weight * je_dur * (2 * theta), np.zeros((d, k_steps))]])
        return r, jac

    r, jac = evaluate(theta, phi)
    scale = float(np.linalg.norm(r[:-d]))
    mu = 1e-2
    it = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(r[:-d]) <= 1e-3 * tol * scale and np.linalg.norm(r[-d:]) <= 1e-14:
            break
        cost = r @ r
        accepted = False
        for _ in range(25):
            step = -jac.T @ np.linalg.solve(jac @ jac.T + mu * np.eye(len(r)), r)
            x = np.concatenate([theta, phi]) + step
            r_t, jac_t = evaluate(x[:k_steps], x[k_steps:])
            if r_t @ r_t < cost:
                theta, phi, r, jac = x[:k_steps], x[k_steps:], r_t, jac_t
                mu = max(mu * 0.3, 1e-12)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
    out = PulseSequence(seq.dim, tuple(
        PulseStep(s.label, float(t), float(w))
        for s, t, w in zip(seq.steps, theta ** 2, phi ** 2)))
    u_out, _ = propagate(out, sys)
    gate = phase_invariant_distance(u_out, target)
    residual = float(np.linalg.norm(first_order_map(out, sys).coeff_matrix))
    return JointRefinement(out, residual, gate, it,
                           residual <= tol * scale and gate <= gate_tol)


@dataclass(frozen=True)
class ProtectionReport:
    """Outcome of :func:`protect_sequence`.

    ``residual`` is the norm of the stacked first-order coefficients of the
    protected output; ``g_norm`` is the same norm for the unprotected input.
    """

    sequence: PulseSequence = field(repr=False)
    tau: np.ndarray = field(repr=False)
    residual: float
    g_norm: float
    max_first_order_norm: float
    total_wait: float
    control_duration: float
    method: str = "lp"  # 'lp', 'joint' or 'none' (input already protected)
    splits: int = 0
    gate_shift: float = 0.0
    slots: int = 0

    @property
    def wait_ratio(self) -> float:
        return self.total_wait / self.control_duration if self.control_duration else float("nan")


def protect_sequence(seq: PulseSequence, sys: ControlSystem, tol: float = 1e-8,
                     refine: bool = True, max_splits: int = 0,
                     leading_slot: bool = False, gate_tol: float = 1e-10,
                     atol: float = 1e-10) -> ProtectionReport:
    """Fill the waits of ``seq`` so the first-order response of every generator vanishes.

    Ladder on failure: waits alone by linear programming; then waits and
    durations jointly (``refine``); then halve every pulse to double the
    slots, up to ``max_splits`` times. Raises :class:`ProtectionFailure`.

    Input whose response is already below ``atol * max(1, total_duration)``
    counts as protected and gets no extra waits.
    """
    if not tol > 0:
        raise ContractError(f"tolerance must be positive, got {tol}")
    u_before, _ = propagate(seq, sys)
    g_norm = float(np.linalg.norm(first_order_map(seq, sys).coeff_matrix))
    if g_norm <= atol * max(1.0, seq.total_duration):
        fom = first_order_map(seq, sys)
        return ProtectionReport(seq, np.zeros(len(seq)), g_norm, g_norm,
                                float(fom.norms().max()), seq.total_wait,
                                seq.control_duration, "none", 0, 0.0, 0)
    current = seq
    best_failure = None
    for splits in range(max_splits + 1):
        psys = assemble_protection_system(current, sys, leading_slot)
        try:
            tau, _ = solve_waits(psys, tol)
            out = _apply_waits(current, psys.slot_steps, tau)
            method = "lp"
            break
        except ProtectionFailure as exc:
            log.info("LP over %d slots failed (residual %.3e)", psys.F.shape[1], exc.residual)
            best_failure = exc
        if refine:
            tau0 = np.zeros(len(current))
            if best_failure.tau is not None and not leading_slot:
                tau0 = np.asarray(best_failure.tau)
            ref = refine_jointly(current, sys, u_before, tau0, tol=tol, gate_tol=gate_tol)
            log.info("joint refinement: residual %.3e, gate %.3e after %d iterations",
                     ref.residual, ref.gate_distance, ref.iterations)
            if ref.converged and ref.residual <= tol * g_norm:
                out = ref.sequence
                tau = out.waits - current.waits
                method = "joint"
                break
            if ref.residual < best_failure.residual:
                best_failure = ProtectionFailure(str(best_failure), ref.residual, None)
        if splits == max_splits:
            raise ProtectionFailure(
                f"no nonnegative waits cancel the first-order terms "
                f"(best residual {best_failure.residual:.3e}, ||g|| = {g_norm:.3e})",
                residual=best_failure.residual, tau=best_failure.tau)
        current = split_steps(current)
    u_after, _ = propagate(out, sys)
    shift = phase_invariant_distance(u_after, u_before)
    if method == "lp" and shift != 0.0:
        raise ContractError("inserting waits changed the noiseless gate")
    fom = first_order_map(out, sys)
    return ProtectionReport(out, np.asarray(tau), float(np.linalg.norm(fom.coeff_matrix)),
                            g_norm, float(fom.norms().max()), out.total_wait,
                            out.control_duration, method, splits, shift,
                            psys.F.shape[1])
