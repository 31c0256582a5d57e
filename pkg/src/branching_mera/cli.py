"""Command-line front end.

Exit status: 0 success, 2 usage or malformed input, 3 numerical failure
(including a failed ``verify`` suite).
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from functools import reduce
from typing import Optional

import numpy as np

from .circuit import CircuitSpec, build_circuit
from .cone import energy as cone_energy
from .cone import expectation
from .errors import InvalidInputError, NumericalError, StallError
from .scaling import EntropyCurve, entropy_curve, fit_forms
from .variational import (circuit_energy, gates_unitary, initial_circuit, ising_hamiltonian,
                          optimize)

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3

PAULI = {
    "I": np.eye(2),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]]),
    "Y": np.array([[0.0, -1j], [1j, 0.0]]),
    "Z": np.diag([1.0, -1.0]),
}

# command-specific defaults, applied below the spec file and inline flags
COMMAND_DEFAULTS = {
    "entropy-scan": {"gate_mode": "random_gaussian", "T": 10},
    "optimize": {"T": 3},  # regular-MERA tree unless given
}


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list, got {text!r}")


def _add_spec_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("circuit spec (inline values override --spec)")
    g.add_argument("--spec", help="CircuitSpec JSON file")
    g.add_argument("--dim", type=int, choices=(1, 2))
    g.add_argument("--T", type=int)
    g.add_argument("--chi", type=int)
    g.add_argument("--tree", type=_int_list, help="branch factors, e.g. 2,1,2,1")
    g.add_argument("--gate-mode", dest="gate_mode")
    g.add_argument("--uniform", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--seed", type=int)


def resolve_spec(args, command: str) -> CircuitSpec:
    """Command defaults, then the ``--spec`` file, then inline flags."""
    values = {}
    if args.spec:
        try:
            with open(args.spec) as fh:
                values = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInputError(f"cannot read spec file: {exc}") from None
        if not isinstance(values, dict):
            raise InvalidInputError("spec JSON must be an object")
    for key in ("dim", "T", "chi", "tree", "gate_mode", "uniform", "seed"):
        v = getattr(args, key, None)
        if v is not None:
            values[key] = v
    if "tree" in values and "T" not in values:
        values["T"] = len(values["tree"])
    for key, v in COMMAND_DEFAULTS.get(command, {}).items():
        values.setdefault(key, v)
    if command == "optimize":
        values.setdefault("tree", [1] * values["T"])
    return CircuitSpec.from_dict(values)


def _emit(text: str, out: Optional[str]):
    if out:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def pauli_operator(word: str) -> np.ndarray:
    word = word.upper()
    if len(word) != 3 or any(c not in PAULI for c in word):
        raise InvalidInputError(f"observable must be a 3-letter Pauli word, got {word!r}")
    return reduce(np.kron, [PAULI[c] for c in word])


def _cmd_entropy_scan(args):
    spec = resolve_spec(args, "entropy-scan")
    workers = args.workers if args.workers else (os.cpu_count() or 1)
    curve = entropy_curve(spec, args.L, n_seeds=args.seeds, n_offsets=args.offsets,
                          workers=workers)
    _emit(curve.to_json() + "\n" if args.format == "json" else curve.to_csv(), args.out)


def _cmd_fit(args):
    try:
        with open(args.input) as fh:
            text = fh.read()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {args.input}: {exc}") from None
    curve = EntropyCurve.from_csv(text)
    report = fit_forms(curve, args.dim)
    out = {"spec": curve.spec.to_dict(), **report.to_dict()}
    _emit(_dump(out), args.out)


def _cmd_expval(args):
    spec = resolve_spec(args, "expval")
    op = pauli_operator(args.op)
    value = expectation(build_circuit(spec), op, args.site)
    _emit(_dump({"spec": spec.to_dict(), "observable": args.op.upper(), "site": args.site,
                 "value": value}), args.out)


def _cmd_energy(args):
    spec = resolve_spec(args, "energy")
    circuit = build_circuit(spec)
    ham = ising_hamiltonian(spec.n_wires, args.h)
    value = cone_energy(circuit, ham)
    _emit(_dump({"spec": spec.to_dict(), "hamiltonian": {"model": "ising", "h": args.h},
                 "energy": value}), args.out)


def _cmd_optimize(args):
    spec = resolve_spec(args, "optimize")
    ham = ising_hamiltonian(spec.n_wires, args.h)
    circuit = initial_circuit(spec, noise=args.noise)
    header = {"spec": circuit.spec.to_dict(), "hamiltonian": {"model": "ising", "h": args.h},
              "init_noise": args.noise, "max_steps": args.max_steps, "tol": args.tol}
    try:
        trace = optimize(circuit, ham, max_steps=args.max_steps, tol=args.tol)
    except StallError as exc:
        if exc.trace is not None:
            _emit(json.dumps(header, sort_keys=True) + "\n" + exc.trace.to_jsonl(), args.out)
        raise
    _emit(json.dumps(header, sort_keys=True) + "\n" + trace.to_jsonl(), args.out)
    final = trace.iterations[-1]
    summary = {"final_energy": final["energy"], "steps": final["step"],
               "converged": trace.converged, "gates_unitary": gates_unitary(trace.circuit),
               "energy_check": circuit_energy(trace.circuit, ham, "cone")}
    # with --out the summary goes to stdout; otherwise stdout carries the trace
    (sys.stdout if args.out else sys.stderr).write(_dump(summary))


def _cmd_verify(args):
    from .verify import run_checks

    results = run_checks()
    for r in results:
        sys.stdout.write(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail}\n")
    failed = sum(not r.ok for r in results)
    sys.stdout.write(f"{len(results) - failed}/{len(results)} checks passed\n")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="branching-mera",
                                     description="Branching MERA circuits and entropy scaling")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy-scan", help="entropy vs block size of Gaussian circuits")
    _add_spec_args(p)
    p.add_argument("--L", type=_int_list, help="block sizes (default powers of two)")
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--offsets", type=int, default=8)
    p.add_argument("--workers", type=int, default=None, help="default: logical cores")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_entropy_scan)

    p = sub.add_parser("fit", help="fit scaling forms to an entropy-scan CSV")
    p.add_argument("input", help="CSV written by entropy-scan")
    p.add_argument("--dim", type=int, choices=(1, 2))
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("expval", help="three-site expectation value via the causal cone")
    _add_spec_args(p)
    p.add_argument("--op", required=True, help="Pauli word on three sites, e.g. ZII")
    p.add_argument("--site", type=int, default=0)
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_expval)

    p = sub.add_parser("energy", help="transverse-field Ising energy of a circuit")
    _add_spec_args(p)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--format", choices=("json",), default="json")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("optimize", help="variational Ising ground state")
    _add_spec_args(p)
    p.add_argument("--h", type=float, default=1.0)
    p.add_argument("--max-steps", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--noise", type=float, default=1e-2)
    p.add_argument("--out", help="trace file (JSON lines)")
    p.set_defaults(func=_cmd_optimize)

    p = sub.add_parser("verify", help="oracle-equivalence and invariant checks")
    p.set_defaults(func=_cmd_verify)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        status = args.func(args)
    except InvalidInputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return EXIT_NUMERICAL
    return EXIT_OK if status is None else status
