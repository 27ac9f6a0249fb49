"""
``safegate`` command line: generate a system, synthesize a gate, protect it,
sweep the noise scaling and report the uncorrectable directions.

Exit codes: 0 success, 1 usage or precondition, 2 model or controllability
failure, 3 convergence or protection failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import sys as _sys

import numpy as np

from . import fileio
from .errors import (
    ContractError,
    DegenerateModelError,
    NumericFailureError,
    ProtectionFailure,
    UncontrollableSystemError,
)
from .model_atom import cnot_target, default_system
from .nogo_analysis import nogo_report
from .propagation import ControlSystem, propagate
from .protection import protect_sequence
from .sun_algebra import phase_invariant_distance, random_hermitian
from .synthesis import SynthesisFailure, synthesize_repeated
from .verification import epsilon_grid, fit_slope, scaling_sweep

EXIT_OK, EXIT_USAGE, EXIT_MODEL, EXIT_CONVERGENCE = 0, 1, 2, 3
SWEEP_HEADER = ["epsilon", "trial", "noise_seed", "error_protected", "error_unprotected"]

log = logging.getLogger("safegate")


class UsageError(Exception):
    pass


def _fail(message: str, code: int) -> int:
    print(f"safegate: {message}", file=_sys.stderr)
    return code


def cmd_gen_system(args) -> int:
    if not 2 <= args.n <= 8:
        raise UsageError(f"--n must be in 2..8, got {args.n}")
    params = None
    if args.model == "atom":
        if args.n != 4:
            raise UsageError("the atom model is four-dimensional; use --n 4")
        system, (pa, pb) = default_system(args.seed)
        params = fileio.atom_params_to_dict(pa, pb)
    else:
        rng = np.random.default_rng(args.seed)
        system = ControlSystem.from_matrices(random_hermitian(args.n, rng),
                                             random_hermitian(args.n, rng))
    fileio.write_system(args.out, system, args.model, params)
    if not system.controllable:
        return _fail(f"closure rank {system.closure_rank} < {args.n ** 2 - 1}", EXIT_MODEL)
    print(f"closure_rank {system.closure_rank}")
    return EXIT_OK


def _resolve_target(name: str, n: int) -> np.ndarray:
    if name == "cnot":
        if n != 4:
            raise UsageError("the cnot target needs a four-dimensional system")
        return cnot_target()
    if name == "identity":
        return np.eye(n, dtype=complex)
    u = fileio.read_unitary(name)
    if u.shape != (n, n):
        raise UsageError(f"target is {u.shape[0]}x{u.shape[1]} but the system has N = {n}")
    return u


def cmd_synthesize(args) -> int:
    system = fileio.read_system(args.system)
    n = system.dim
    target = _resolve_target(args.target, n)
    reps = n * n - 1 if args.reps == "auto" else int(args.reps)
    if reps < 1:
        raise UsageError("--reps must be a positive integer or 'auto'")
    if not system.controllable:
        raise UncontrollableSystemError(
            f"closure rank {system.closure_rank} < {n * n - 1}")
    code = EXIT_OK
    try:
        seq, result = synthesize_repeated(system, target, reps=reps, K=args.k, seed=args.seed,
                                          tol=args.tol, max_restarts=args.max_restarts)
    except SynthesisFailure as exc:
        seq, result = exc.sequence, exc.result
        code = EXIT_CONVERGENCE
    u, _ = propagate(seq, system)
    distance = phase_invariant_distance(u, target)
    if distance > args.tol:
        code = EXIT_CONVERGENCE
    meta = {"target_distance": distance, "seed": args.seed, "target": args.target,
            "k": len(result.timings), "reps": reps, "root_distance": result.distance,
            "restarts_used": result.restarts_used}
    fileio.write_sequence(args.out, seq, meta)
    print(f"steps {len(seq)} target_distance {distance:.3e} restarts {result.restarts_used}")
    if code != EXIT_OK:
        return _fail(f"distance {distance:.3e} above tolerance {args.tol:.1e}", code)
    return code


def cmd_protect(args) -> int:
    system = fileio.read_system(args.system)
    seq, meta = fileio.read_sequence(args.seq)
    try:
        rep = protect_sequence(seq, system, tol=args.tol, refine=not args.no_refine,
                               max_splits=args.max_splits, leading_slot=args.leading_slot)
    except ProtectionFailure as exc:
        fileio.dump_json(args.report, {"success": False, "residual": exc.residual})
        return _fail(f"protection failed: {exc}", EXIT_CONVERGENCE)
    out_meta = dict(meta)
    out_meta.update({"protected": True, "protection_residual": rep.residual})
    fileio.write_sequence(args.out, rep.sequence, out_meta)
    report = {
        "success": True,
        "method": rep.method,
        "residual": rep.residual,
        "g_norm": rep.g_norm,
        "max_first_order_norm": rep.max_first_order_norm,
        "gate_shift": rep.gate_shift,
        "pulses": len(rep.sequence),
        "slots": rep.slots,
        "schedule_steps": len(rep.sequence) + rep.slots,
        "splits": rep.splits,
        "total_wait": rep.total_wait,
        "control_duration": rep.control_duration,
        "wait_ratio": rep.wait_ratio,
        "tau": [float(t) for t in rep.tau],
    }
    fileio.dump_json(args.report, report)
    print(f"method {rep.method} residual {rep.residual:.3e} wait_ratio {rep.wait_ratio:.4f}")
    return EXIT_OK


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def cmd_verify(args) -> int:
    try:
        grid = epsilon_grid(args.eps_min, args.eps_max, args.points)
    except ContractError as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    system = fileio.read_system(args.system)
    seq, _ = fileio.read_sequence(args.seq)
    baseline = fileio.read_sequence(args.baseline)[0] if args.baseline else None
    rows = scaling_sweep(seq, system, grid, args.trials, args.seed, baseline)
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_HEADER)
        for r in rows:
            writer.writerow([_fmt(r.epsilon), r.trial, r.noise_seed,
                             _fmt(r.error_protected), _fmt(r.error_unprotected)])
    cut = grid[math.ceil(args.points / 2) - 1]
    low = [r for r in rows if r.epsilon <= cut]
    eps = [r.epsilon for r in low]
    print(f"slope_protected {fit_slope(eps, [r.error_protected for r in low]):.4f}")
    if baseline is not None:
        print(f"slope_unprotected {fit_slope(eps, [r.error_unprotected for r in low]):.4f}")
    return EXIT_OK


def cmd_nogo(args) -> int:
    system = fileio.read_system(args.system)
    seq, _ = fileio.read_sequence(args.seq)
    rep = nogo_report(seq, system)
    fileio.dump_json(args.out, {
        "D": rep.dim_D,
        "closed_form_residual": rep.closed_form_residual,
        "closed_form_norms": list(rep.closed_form_norms),
        "target_dependence_flag": rep.target_dependence_flag,
        "hermitized_basis": [fileio.matrix_to_json(m) for m in rep.hermitized_basis],
    })
    print(f"D {rep.dim_D} closed_form_residual {rep.closed_form_residual:.3e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="safegate", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-system", help="write a control-pair system file")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--model", choices=("atom", "random"), default="random")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_system)

    s = sub.add_parser("synthesize", help="timings for a target gate")
    s.add_argument("--system", required=True)
    s.add_argument("--target", default="cnot", help="cnot, identity or a unitary JSON file")
    s.add_argument("--k", type=int, default=None, help="steps per repetition (default N**2)")
    s.add_argument("--reps", default="auto", help="repetitions, or 'auto' for N**2 - 1")
    s.add_argument("--tol", type=float, default=1e-8)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-restarts", type=int, default=64)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synthesize)

    r = sub.add_parser("protect", help="add waiting times that cancel first-order noise")
    r.add_argument("--system", required=True)
    r.add_argument("--seq", required=True)
    r.add_argument("--tol", type=float, default=1e-8, help="residual bound relative to ||g||")
    r.add_argument("--max-splits", type=int, default=0)
    r.add_argument("--no-refine", action="store_true", help="waits only, no joint refinement")
    r.add_argument("--leading-slot", action="store_true", help="also allow a wait before step 1")
    r.add_argument("--out", required=True)
    r.add_argument("--report", required=True)
    r.set_defaults(func=cmd_protect)

    v = sub.add_parser("verify", help="noise-scaling sweep to CSV")
    v.add_argument("--system", required=True)
    v.add_argument("--seq", required=True)
    v.add_argument("--baseline", default=None)
    v.add_argument("--eps-min", type=float, default=1e-4)
    v.add_argument("--eps-max", type=float, default=1e-2)
    v.add_argument("--points", type=int, default=9)
    v.add_argument("--trials", type=int, default=8)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", required=True)
    v.set_defaults(func=cmd_verify)

    n = sub.add_parser("nogo", help="uncorrectable noise report for a two-valued sequence")
    n.add_argument("--system", required=True)
    n.add_argument("--seq", required=True)
    n.add_argument("--out", required=True)
    n.set_defaults(func=cmd_nogo)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.verbose:
        logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ContractError, OSError, KeyError) as exc:
        return _fail(str(exc), EXIT_USAGE)
    except (UncontrollableSystemError, DegenerateModelError) as exc:
        return _fail(str(exc), EXIT_MODEL)
    except (SynthesisFailure, ProtectionFailure, NumericFailureError) as exc:
        return _fail(str(exc), EXIT_CONVERGENCE)


if __name__ == "__main__":
    _sys.exit(main())
