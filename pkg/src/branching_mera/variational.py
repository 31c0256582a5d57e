"""Variational energy minimisation over the gates of a branching circuit.

Each stored gate ``U`` is perturbed as ``U exp(eps B)`` with ``B`` running
over an orthonormal basis of anti-Hermitian matrices, so the gradient of a
gate is itself an anti-Hermitian matrix. Descent steps are retracted onto
the unitary group with a polar decomposition.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np
import scipy.linalg

from .circuit import BranchingCircuit, CircuitSpec, build_circuit
from .cone import energy as cone_energy
from .errors import InvalidInputError, StallError
from .oracle import dense_expectation, full_state
from .tensor_core import is_unitary, polar_unitary, unitary_generators

_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_Z = np.diag([1.0, -1.0])
_I = np.eye(2)

FD_STEP = 1e-4
DENSE_MAX_WIRES = 16


@dataclass
class LocalHamiltonian:
    N: int
    terms: list  # (position, chi**3 x chi**3 matrix), one per position

    def __post_init__(self):
        positions = sorted(int(l) for l, _ in self.terms)
        if positions != list(range(self.N)):
            raise InvalidInputError("need exactly one term per position 0..N-1")
        for l, h in self.terms:
            h = np.asarray(h)
            if h.ndim != 2 or h.shape[0] != h.shape[1]:
                raise InvalidInputError(f"term {l} is not square")
            if np.max(np.abs(h - h.conj().T)) > 1e-12:
                raise InvalidInputError(f"term {l} is not Hermitian")
        self.terms = sorted(((int(l), np.asarray(h)) for l, h in self.terms), key=lambda x: x[0])


def ising_hamiltonian(N: int, h: float) -> LocalHamiltonian:
    """Periodic ``H = -sum X_i X_{i+1} - h sum Z_i`` packed as ``-XXI - h ZII`` per window."""
    if N < 4:
        raise InvalidInputError("ising_hamiltonian needs N >= 4")
    term = -np.kron(np.kron(_X, _X), _I) - h * np.kron(np.kron(_Z, _I), _I)
    return LocalHamiltonian(N, [(l, term.copy()) for l in range(N)])


def ising_ground_energy(N: int, h: float) -> float:
    """Free-fermion ground energy of the periodic chain (even-parity sector)."""
    k = 2 * np.pi * (np.arange(N) + 0.5) / N
    return float(-np.sum(np.sqrt(1 + h * h - 2 * h * np.cos(k))))


def circuit_energy(circuit: BranchingCircuit, hamiltonian, evaluator: str = "auto") -> float:
    """Energy via the causal cone, or the dense state for small chains.

    ``evaluator`` is ``"cone"``, ``"dense"`` or ``"auto"`` (dense when
    ``N <= 16``). Both give the same number to rounding.
    """
    if evaluator == "auto":
        evaluator = "dense" if circuit.n_wires <= DENSE_MAX_WIRES else "cone"
    if evaluator == "cone":
        return cone_energy(circuit, hamiltonian)
    if evaluator == "dense":
        return dense_expectation(full_state(circuit), getattr(hamiltonian, "terms", hamiltonian))
    raise InvalidInputError(f"unknown evaluator {evaluator!r}")


def gate_ids(circuit: BranchingCircuit) -> list:
    """Identifiers ``(level, branch, layer, position)`` of every stored gate."""
    return [key + (pos,) for key in sorted(circuit.gates) for pos in range(len(circuit.gates[key]))]


def with_gate(circuit: BranchingCircuit, gate_id, u) -> BranchingCircuit:
    key, pos = tuple(gate_id[:3]), gate_id[3]
    gates = dict(circuit.gates)
    stack = np.array(gates[key], dtype=complex)
    stack[pos] = u
    gates[key] = stack
    return BranchingCircuit(circuit.spec, gates, circuit.pruned)


def _get(circuit, gate_id):
    return circuit.gates[tuple(gate_id[:3])][gate_id[3]]


def gate_gradient(circuit: BranchingCircuit, hamiltonian, gate_id, step: float = FD_STEP,
                  evaluator: str = "auto", stencil: int = 3) -> np.ndarray:
    """Riemannian gradient of the energy with respect to one gate.

    Returns ``sum_k dE/d eps_k B_k`` for ``U -> U exp(eps_k B_k)``, from
    central differences (``stencil=3``) or the 5-point stencil.
    """
    u = _get(circuit, gate_id)
    basis = unitary_generators(u.shape[0])
    out = np.zeros_like(basis[0])

    def e(eps, b):
        return circuit_energy(with_gate(circuit, gate_id, u @ scipy.linalg.expm(eps * b)),
                              hamiltonian, evaluator)

    for b in basis:
        if stencil == 3:
            d = (e(step, b) - e(-step, b)) / (2 * step)
        elif stencil == 5:
            d = (-e(2 * step, b) + 8 * e(step, b) - 8 * e(-step, b) + e(-2 * step, b)) / (12 * step)
        else:
            raise InvalidInputError("stencil must be 3 or 5")
        out += d * b
    return out


def _inner(a, b) -> float:
    return float(np.real(np.vdot(a, b)))


@dataclass
class OptimizationTrace:
    iterations: list = field(default_factory=list)  # dicts: step, energy, grad_norm, step_size
    circuit: Optional[BranchingCircuit] = field(default=None, repr=False)
    converged: bool = False

    @property
    def energies(self) -> np.ndarray:
        return np.array([r["energy"] for r in self.iterations])

    @property
    def accepted_steps(self) -> int:
        return sum(1 for r in self.iterations if r["step_size"] > 0)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.iterations)


def initial_circuit(spec: CircuitSpec, noise: float = 1e-2, seed: Optional[int] = None) -> BranchingCircuit:
    """Identity gates times ``exp(noise * A)`` with random anti-Hermitian ``A``."""
    base = build_circuit(CircuitSpec(**{**spec.to_dict(), "gate_mode": "identity"}))
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    gates = {}
    for key in sorted(base.gates):
        stack = np.array(base.gates[key], dtype=complex)
        for pos in range(len(stack)):
            z = rng.standard_normal(stack[pos].shape) + 1j * rng.standard_normal(stack[pos].shape)
            a = (z - z.conj().T) / 2
            stack[pos] = stack[pos] @ scipy.linalg.expm(noise * a)
        gates[key] = stack
    spec_x = CircuitSpec(**{**spec.to_dict(), "gate_mode": "explicit"})
    return BranchingCircuit(spec_x, gates, base.pruned)


def optimize(circuit: BranchingCircuit, hamiltonian, max_steps: int = 200, tol: float = 1e-6,
             step0: float = 0.1, armijo: float = 1e-4, max_failures: int = 50,
             evaluator: str = "auto", callback: Optional[Callable] = None) -> OptimizationTrace:
    """Riemannian gradient descent with backtracking (Armijo) line search.

    Stops when the gradient norm drops below ``tol`` or after ``max_steps``
    accepted steps. ``max_failures`` consecutive rejected trial steps raise
    :class:`StallError` carrying the trace so far.
    """
    if circuit.chi != 2 or circuit.n_wires > 32:
        raise InvalidInputError("optimize is limited to chi=2 and N <= 32")
    ids = gate_ids(circuit)
    trace = OptimizationTrace(circuit=circuit)
    e0 = circuit_energy(circuit, hamiltonian, evaluator)
    alpha = step0
    failures = 0
    for it in range(max_steps + 1):
        grads: Dict[tuple, np.ndarray] = {g: gate_gradient(circuit, hamiltonian, g, evaluator=evaluator)
                                          for g in ids}
        gnorm2 = sum(_inner(g, g) for g in grads.values())
        gnorm = float(np.sqrt(gnorm2))
        if it == 0:
            trace.iterations.append({"step": 0, "energy": e0, "grad_norm": gnorm, "step_size": 0.0})
        else:
            trace.iterations[-1]["grad_norm"] = gnorm
        if callback is not None:
            callback(trace)
        if gnorm < tol:
            trace.converged = True
            break
        if it == max_steps:
            break
        while True:
            trial = circuit
            for g, d in grads.items():
                u = _get(circuit, g)
                trial = with_gate(trial, g, polar_unitary(u @ (np.eye(u.shape[0]) - alpha * d)))
            e1 = circuit_energy(trial, hamiltonian, evaluator)
            if e1 <= e0 - armijo * alpha * gnorm2:
                break
            failures += 1
            if failures >= max_failures:
                trace.circuit = circuit
                raise StallError(f"line search failed {failures} consecutive times", trace=trace)
            alpha /= 2
        failures = 0
        circuit, e0 = trial, e1
        trace.iterations.append({"step": it + 1, "energy": e1, "grad_norm": None, "step_size": alpha})
        trace.circuit = circuit
        alpha *= 2
    return trace


def gates_unitary(circuit: BranchingCircuit, tol: float = 1e-10) -> bool:
    return all(is_unitary(u, tol) for stack in circuit.gates.values() for u in stack)
