"""Synthesis followed by protection, as one call."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import ControlSystem, PulseSequence, propagate
from .protection import ProtectionReport, protect_sequence
from .sun_algebra import phase_invariant_distance
from .synthesis import SynthesisResult, synthesize_repeated


@dataclass(frozen=True)
class GatePipeline:
    unprotected: PulseSequence
    synthesis: SynthesisResult
    protection: ProtectionReport
    unprotected_distance: float
    protected_distance: float

    @property
    def protected(self) -> PulseSequence:
        return self.protection.sequence


def protected_gate(sys: ControlSystem, target, reps: int | None = None, K: int | None = None,
                   seed: int = 0, tol: float = 1e-8, protect_tol: float = 1e-8,
                   max_restarts: int = 64, **protect_kwargs) -> GatePipeline:
    """``reps`` copies of a sequence for ``target**(1/reps)``, then waits.

    Raises :class:`~safegate.synthesis.SynthesisFailure` or
    :class:`~safegate.errors.ProtectionFailure`.
    """
    target = np.asarray(target, dtype=complex)
    seq, result = synthesize_repeated(sys, target, reps=reps, K=K, seed=seed, tol=tol,
                                      max_restarts=max_restarts)
    report = protect_sequence(seq, sys, tol=protect_tol, **protect_kwargs)
    u0, _ = propagate(seq, sys)
    u1, _ = propagate(report.sequence, sys)
    return GatePipeline(seq, result, report, phase_invariant_distance(u0, target),
                        phase_invariant_distance(u1, target))
