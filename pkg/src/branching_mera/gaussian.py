"""Fermionic Gaussian simulation of branching circuits with free-fermion gates.

A pure Gaussian state of M modes is stored as its real antisymmetric
Majorana covariance matrix ``Gamma_ab = -i <g_a g_b>`` (a != b), with
``g_2k = c_k + c_k^dag`` and ``g_2k+1 = i (c_k^dag - c_k)``. The vacuum has
``Gamma_{2k,2k+1} = +1``. A gate ``U`` with ``U^dag g_a U = sum_b R_ab g_b``
acts as ``Gamma -> R Gamma R^T``; reordering wires only permutes rows and
columns, so fermionic swap signs never appear explicitly.

Circuits are simulated branch by branch: before the final merge the state is
a direct sum over branches, so each merge only touches the covariance of
one parent branch.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .circuit import (BranchingCircuit, CircuitSpec, build_circuit, live_branches,
                      step_layout, step_layout_2d)
from .errors import InvalidInputError, NumericalError
from .tensor_core import haar_so  # noqa: F401  (re-exported sampler)

RESYMMETRIZE_EVERY = 64
_VAC = np.array([[0.0, 1.0], [-1.0, 0.0]])


@dataclass
class CovarianceMatrix:
    gamma: np.ndarray
    _pending: int = field(default=0, repr=False)

    @property
    def modes(self) -> int:
        return self.gamma.shape[0] // 2

    def antisymmetry_error(self) -> float:
        g = self.gamma
        return float(np.max(np.abs(g + g.T)))

    def purity_error(self) -> float:
        g = self.gamma
        return float(np.max(np.abs(g @ g.T - np.eye(g.shape[0]))))

    def resymmetrize(self):
        g = self.gamma
        self.gamma = (g - g.T) / 2
        self._pending = 0

    def occupations(self) -> np.ndarray:
        return (1 - np.diagonal(self.gamma, 1)[::2]) / 2


@dataclass(frozen=True)
class GaussianGate:
    wires: tuple
    rotation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        k = len(self.wires)
        if r.shape != (2 * k, 2 * k):
            raise InvalidInputError(f"{k} wires need a {2 * k}x{2 * k} rotation")
        if np.max(np.abs(r.T @ r - np.eye(2 * k))) > 1e-12:
            raise InvalidInputError("rotation is not orthogonal")
        if abs(np.linalg.det(r) - 1) > 1e-10:
            raise InvalidInputError("rotation has determinant -1")
        object.__setattr__(self, "wires", tuple(int(w) for w in self.wires))
        object.__setattr__(self, "rotation", r)


def init_vacuum(M: int) -> CovarianceMatrix:
    if M < 1:
        raise InvalidInputError("need at least one mode")
    return CovarianceMatrix(np.kron(np.eye(M), _VAC))


def _majorana_index(wires) -> np.ndarray:
    wires = np.asarray(wires)
    return (2 * wires[..., None] + np.arange(2)).reshape(wires.shape[:-1] + (-1,))


def _note_gates(state: CovarianceMatrix, count: int, defer: bool = False):
    state._pending += count
    if state._pending >= RESYMMETRIZE_EVERY and not defer:
        state.resymmetrize()


def apply_gaussian_gate(state: CovarianceMatrix, wires: Sequence[int], gate) -> CovarianceMatrix:
    """Conjugate the rows/columns of ``wires`` by the rotation ``gate`` (in place).

    ``gate`` is a rotation matrix or a :class:`GaussianGate` (whose own wires
    are then ignored in favour of ``wires``; pass ``None`` to use them).
    """
    if isinstance(gate, GaussianGate):
        wires = gate.wires if wires is None else wires
        gate = gate.rotation
    wires = [int(w) for w in wires]
    if len(set(wires)) != len(wires) or any(not 0 <= w < state.modes for w in wires):
        raise InvalidInputError(f"invalid wires {wires}")
    r = np.asarray(gate, dtype=float)
    if r.shape != (2 * len(wires),) * 2:
        raise InvalidInputError("rotation size does not match the number of wires")
    idx = _majorana_index([wires])[0]
    g = state.gamma
    g[idx, :] = r @ g[idx, :]
    g[:, idx] = g[:, idx] @ r.T
    _note_gates(state, 1)
    return state


def _conjugate_tiled(g: np.ndarray, rot: np.ndarray) -> np.ndarray:
    """``R g R^T`` for block-diagonal ``R`` tiling all indices in order."""
    n = g.shape[0]
    count, width, _ = rot.shape
    g = np.matmul(rot, g.reshape(count, width, n)).reshape(n, n)
    rt = np.swapaxes(rot, 1, 2)
    return np.matmul(g.reshape(n, count, 1, width), rt).reshape(n, n)


def apply_gate_layer(state: CovarianceMatrix, wires: np.ndarray, rotations: np.ndarray,
                     defer: bool = False):
    """Apply gates on disjoint wire groups (``wires`` is ``(count, k)``) at once.

    With ``defer`` the periodic re-antisymmetrization is left to the caller.
    """
    wires = np.asarray(wires)
    if wires.size == 0:
        return state
    idx = _majorana_index(wires)
    rot = np.asarray(rotations, dtype=float)
    g = state.gamma
    n = g.shape[0]
    flat = idx.ravel()
    shift = int(flat[0])
    if np.array_equal(flat, (np.arange(n) + shift) % n):
        # the gates tile the whole ring contiguously after a cyclic shift
        if shift:
            g = np.roll(g, (-shift, -shift), axis=(0, 1))
        g = _conjugate_tiled(g, rot)
        if shift:
            g = np.roll(g, (shift, shift), axis=(0, 1))
    else:
        count, width = idx.shape
        g = g.copy()
        g[flat] = np.matmul(rot, g[flat].reshape(count, width, n)).reshape(-1, n)
        cols = g[:, flat].reshape(n, count, 1, width)
        g[:, flat] = np.matmul(cols, np.swapaxes(rot, 1, 2)).reshape(n, -1)
    state.gamma = g
    _note_gates(state, len(wires), defer)
    return state


def _merge_1d(children, m):
    """Interleave two branch covariances (A on even, B on odd merged wires)."""
    g = np.zeros((m, 2, 2, m, 2, 2))
    for k, child in enumerate(children):
        g[:, k, :, :, k, :] = child.reshape(m, 2, m, 2)
    return g.reshape(4 * m, 4 * m)


def _merge_2d(children, t):
    lay = step_layout_2d(t)
    S = lay.side
    g = np.zeros((2 * S * S, 2 * S * S))
    for k, child in enumerate(children):
        idx = _majorana_index(lay.interleave_map[k][:, None]).ravel()
        g[np.ix_(idx, idx)] = child
    return g


def _vacuum_block(n_modes):
    return np.kron(np.eye(n_modes), _VAC)


def _rotations(stack) -> np.ndarray:
    stack = np.asarray(stack)
    if np.iscomplexobj(stack):
        if np.max(np.abs(stack.imag), initial=0.0) > 1e-12:
            raise InvalidInputError("Gaussian gates must be real rotations")
        stack = stack.real
    eye = np.eye(stack.shape[-1])
    if np.max(np.abs(np.swapaxes(stack, -1, -2) @ stack - eye), initial=0.0) > 1e-10:
        raise InvalidInputError("Gaussian gates must be orthogonal")
    return stack


def _ensure_circuit(spec_or_circuit) -> BranchingCircuit:
    if isinstance(spec_or_circuit, BranchingCircuit):
        circuit = spec_or_circuit
    else:
        circuit = build_circuit(spec_or_circuit)
    spec = circuit.spec
    if spec.gate_mode not in ("random_gaussian", "identity", "explicit"):
        raise InvalidInputError("Gaussian simulation needs rotation gates "
                                "(gate_mode random_gaussian, identity or explicit)")
    if spec.chi != 2:
        raise InvalidInputError("Gaussian simulation uses one mode per wire (chi=2)")
    return circuit


def branch_states(spec_or_circuit) -> Iterator[tuple]:
    """Yield ``(level, {branch: CovarianceMatrix})`` for levels 1..T.

    Branches are the live ones at that level; pruned inputs are vacuum.
    Local wire order inside a branch is its ring (1D) or row-major patch (2D)
    order, so the top level is in output order.
    """
    circuit = _ensure_circuit(spec_or_circuit)
    spec = circuit.spec
    letters = "AB" if spec.dim == 1 else "ABCD"
    current = {p: CovarianceMatrix(_VAC.copy()) for p in live_branches(spec, 0)}
    for t in range(spec.T):
        nxt = {}
        n_child = 2 ** t if spec.dim == 1 else 4 ** t
        for parent in live_branches(spec, t + 1):
            kids = [current.pop(parent + c).gamma for c in letters[:spec.tree[t]]]
            kids += [_vacuum_block(n_child)] * (spec.max_branch - spec.tree[t])
            if spec.dim == 1:
                state = CovarianceMatrix(_merge_1d(kids, 2 ** t))
                lay = step_layout(t)
            else:
                state = CovarianceMatrix(_merge_2d(kids, t))
                lay = step_layout_2d(t)
            for layer, wires in ((1, lay.layer1), (2, lay.layer2)):
                if len(wires):
                    apply_gate_layer(state, wires,
                                     _rotations(circuit.layer_gates(t, parent, layer)),
                                     defer=True)
            if state._pending >= RESYMMETRIZE_EVERY:
                state.resymmetrize()
            nxt[parent] = state
        current = nxt
        yield t + 1, dict(current)


def run_branching_gaussian(spec_or_circuit) -> CovarianceMatrix:
    """Covariance matrix of the full output lattice (1D ring or 2D torus)."""
    state = None
    for _, states in branch_states(spec_or_circuit):
        state = states
    return state[""]


def _binary_entropy(p):
    p = np.clip(p, 0.0, 1.0)
    out = np.zeros_like(p)
    for q in (p, 1 - p):
        nz = q > 0
        out[nz] -= q[nz] * np.log2(q[nz])
    return out


def block_entropy(state: CovarianceMatrix, block: Sequence[int], tol: float = 1e-9) -> float:
    """Von Neumann entropy (bits) of the modes in ``block``.

    The eigenvalues of the restricted covariance are ``+-i nu``; they are
    read off as the doubly degenerate eigenvalues ``nu**2`` of
    ``Gamma_A Gamma_A^T``.
    """
    block = np.unique(np.asarray(block, dtype=int) % state.modes)
    if block.size == 0 or block.size >= state.modes:
        raise InvalidInputError("block must be a non-empty proper subset of the modes")
    idx = _majorana_index(block[:, None]).ravel()
    ga = state.gamma[np.ix_(idx, idx)]
    nu2 = np.linalg.eigvalsh(ga @ ga.T)
    if nu2[0] < -tol or nu2[-1] > (1 + tol) ** 2:
        raise NumericalError(f"covariance spectrum out of range [{nu2[0]:.3e}, {nu2[-1]:.3e}]")
    nu = np.sqrt(np.clip(nu2, 0.0, 1.0))
    return float(0.5 * np.sum(_binary_entropy((1 + nu) / 2)))


def mode_adjacency(spec: CircuitSpec) -> list:
    """Gate placements as ``(level, layer, output wire, output wire)`` (1D).

    Derived from the same reshape/roll tiling the simulator applies, mapped
    to output positions by following each ring position up the tree.
    """
    if spec.dim != 1:
        raise InvalidInputError("mode_adjacency is 1D only")
    out = []
    for t in range(spec.T):
        ring = np.arange(2 ** (t + 1))
        tilings = [(1, ring.reshape(-1, 2))]
        if t >= 1:
            tilings.append((2, np.roll(ring, -1).reshape(-1, 2)))
        for parent in live_branches(spec, t + 1):
            base = 0
            for c in reversed(parent):
                base = 2 * base + (c == "B")
            for layer, pairs in tilings:
                for w1, w2 in pairs:
                    # ring position j of a branch at depth d ends at j * 2**d + base
                    d = len(parent)
                    out.append((t, layer, int(w1) * 2 ** d + base, int(w2) * 2 ** d + base))
    return sorted(out)
