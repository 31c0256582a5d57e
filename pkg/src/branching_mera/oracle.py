"""Brute-force reference computations for small systems.

Everything here works on full state vectors and is exponential in the number
of wires. These routines are the ground truth the efficient paths are checked
against, so they deliberately share no contraction code with them.

Conventions: a :class:`StateVector` keeps its amplitudes as a tensor whose
axis ``k`` is wire ``k``; the flat ``amplitudes`` vector is little-endian
(wire 0 least significant). Reduced density matrices are returned in kron
order of the requested wire list (first listed wire most significant).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .circuit import ALPHABET, BranchingCircuit, live_branches, step_layout
from .errors import InvalidInputError, NumericalError, ResourceLimitError

MAX_DIM = 2 ** 20


@dataclass(frozen=True)
class StateVector:
    tensor: np.ndarray

    def __post_init__(self):
        norm = np.linalg.norm(self.tensor)
        if abs(norm - 1) > 1e-12:
            raise NumericalError(f"state norm {norm!r} deviates from 1")

    @property
    def n_wires(self) -> int:
        return self.tensor.ndim

    @property
    def chi(self) -> int:
        return self.tensor.shape[0]

    @property
    def amplitudes(self) -> np.ndarray:
        return np.transpose(self.tensor, tuple(range(self.n_wires))[::-1]).reshape(-1)

    @classmethod
    def from_amplitudes(cls, amps, chi: int = 2) -> "StateVector":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log(amps.size) / np.log(chi)))
        return cls(np.transpose(amps.reshape((chi,) * n), tuple(range(n))[::-1]))


def _apply(psi, u, axes):
    """Apply a k-wire operator (kron order over ``axes``) to tensor ``psi``."""
    k = len(axes)
    chi = psi.shape[axes[0]]
    op = u.reshape((chi,) * (2 * k))
    out = np.tensordot(op, psi, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _vacuum(n, chi):
    psi = np.zeros((chi,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    return psi


def output_position(T: int, level: int, path: str, j: int) -> int:
    """Final output wire of position ``j`` of branch ``path`` at ``level`` (1D)."""
    for c in reversed(path):
        j = 2 * j + ALPHABET[1].index(c)
    return j


def full_state(circuit: BranchingCircuit, return_levels: bool = False):
    """Evolve ``|0...0>`` through every layer of the circuit on all N wires.

    Axis ``k`` of the working tensor is the wire that ends at output ``k``,
    so swaps never move data. With ``return_levels`` the state after each
    level (the factorised ``|Psi_t>`` products) is returned as well.
    """
    spec = circuit.spec
    if spec.dim != 1:
        raise InvalidInputError("full_state is 1D only")
    n = spec.n_wires
    if spec.chi ** n > MAX_DIM:
        raise ResourceLimitError(f"chi**N = {spec.chi}**{n} exceeds 2**20")
    psi = _vacuum(n, spec.chi)
    levels = [StateVector(psi)]
    for t in range(spec.T):
        lay = step_layout(t)
        for parent in live_branches(spec, t + 1):
            def axis(k):
                child = parent + ("A" if k % 2 == 0 else "B")
                return output_position(spec.T, t, child, k // 2)
            for layer, pairs in ((1, lay.layer1), (2, lay.layer2)):
                for pos, (w1, w2) in enumerate(pairs):
                    psi = _apply(psi, circuit.gate(t, parent, layer, pos), (axis(w1), axis(w2)))
        levels.append(StateVector(psi))
    return (levels[-1], levels) if return_levels else levels[-1]


def _apply_le(vec, u, w1, w2, n, chi):
    """Apply a two-wire gate to a little-endian vector by index arithmetic."""
    idx = np.arange(chi ** n)
    d1 = (idx // chi ** w1) % chi
    d2 = (idx // chi ** w2) % chi
    base = idx - d1 * chi ** w1 - d2 * chi ** w2
    out = np.zeros_like(vec)
    for a1 in range(chi):
        for a2 in range(chi):
            src = base + a1 * chi ** w1 + a2 * chi ** w2
            out += u[d1 * chi + d2, a1 * chi + a2] * vec[src]
    return out


def branch_state(circuit: BranchingCircuit, level: int, path: str) -> np.ndarray:
    """Little-endian amplitudes of ``|Psi_level>`` for one branch.

    Built recursively as ``V(|Psi_A> (x) |Psi_B>)``: children are combined by
    a Kronecker product, wires are reordered by an explicit permutation of
    basis indices, and gates act through index arithmetic.
    """
    spec = circuit.spec
    chi = spec.chi
    if level == 0:
        v = np.zeros(chi, dtype=complex)
        v[0] = 1
        return v
    t = level - 1
    m = 2 ** t
    if chi ** (2 * m) > MAX_DIM:
        raise ResourceLimitError("branch too large for a dense vector")
    va = branch_state(circuit, t, path + "A")
    if spec.tree[t] == 2:
        vb = branch_state(circuit, t, path + "B")
    else:
        vb = np.zeros(chi ** m, dtype=complex)
        vb[0] = 1
    # little-endian: B wires are the high digits of the product
    prod = np.kron(vb, va)
    n = 2 * m
    lay = step_layout(t)
    idx = np.arange(chi ** n)
    digits = (idx[:, None] // chi ** np.arange(n)) % chi  # digit of input wire i
    target = (digits * chi ** lay.interleave_map[None, :]).sum(axis=1)
    vec = np.zeros_like(prod)
    vec[target] = prod
    for layer, pairs in ((1, lay.layer1), (2, lay.layer2)):
        for pos, (w1, w2) in enumerate(pairs):
            vec = _apply_le(vec, circuit.gate(t, path, layer, pos), w1, w2, n, chi)
    return vec


def exact_reduced(state: StateVector, wires: Sequence[int]) -> np.ndarray:
    """Dense reduced density matrix of ``|Psi><Psi|`` on ``wires``."""
    wires = [int(w) for w in wires]
    if len(wires) > 6:
        raise InvalidInputError("exact_reduced keeps at most 6 wires")
    if len(set(wires)) != len(wires) or any(not 0 <= w < state.n_wires for w in wires):
        raise InvalidInputError(f"invalid wire list {wires}")
    psi = state.tensor
    traced = [k for k in range(state.n_wires) if k not in wires]
    psi = np.transpose(psi, wires + traced).reshape(state.chi ** len(wires), -1)
    return psi @ psi.conj().T


def _entropy_bits(probs, floor=1e-14):
    p = np.asarray(probs, dtype=float)
    p = p[p > floor]
    return float(-np.sum(p * np.log2(p)))


def exact_block_entropy(state: StateVector, block: Sequence[int]) -> float:
    """Von Neumann entropy (bits) of a block of wires, via Schmidt values."""
    block = [int(w) % state.n_wires for w in block]
    if len(block) > state.n_wires // 2:
        raise InvalidInputError("block larger than N/2")
    rest = [k for k in range(state.n_wires) if k not in block]
    psi = np.transpose(state.tensor, block + rest).reshape(state.chi ** len(block), -1)
    s = np.linalg.svd(psi, compute_uv=False)
    return _entropy_bits(s ** 2)


def hamiltonian_terms(hamiltonian):
    """Accept a LocalHamiltonian or a bare list of ``(position, matrix)`` terms."""
    return getattr(hamiltonian, "terms", hamiltonian)


def apply_local_hamiltonian(psi: np.ndarray, terms) -> np.ndarray:
    n = psi.ndim
    out = np.zeros_like(psi)
    for l, h in terms:
        if not np.any(h):
            continue
        out += _apply(psi, np.asarray(h), [l % n, (l + 1) % n, (l + 2) % n])
    return out


def dense_expectation(state: StateVector, terms) -> float:
    hpsi = apply_local_hamiltonian(state.tensor, terms)
    return float(np.real(np.vdot(state.tensor, hpsi)))


def exact_ground_energy(hamiltonian, N: int, tol: float = 1e-8, maxiter: int = 20000) -> float:
    """Lowest eigenvalue of a sum of 3-site terms on an ``N``-site ring (qubits)."""
    if 2 ** N > 2 ** 16:
        raise ResourceLimitError("exact_ground_energy supports 2**N <= 2**16")
    terms = hamiltonian_terms(hamiltonian)
    for _, h in terms:
        h = np.asarray(h)
        if np.max(np.abs(h - h.conj().T)) > 1e-12:
            raise InvalidInputError("Hamiltonian term is not Hermitian")
    shape = (2,) * N

    def matvec(v):
        return apply_local_hamiltonian(np.asarray(v).reshape(shape), terms).reshape(-1)

    dim = 2 ** N
    if dim <= 64:
        dense = np.array([matvec(e) for e in np.eye(dim, dtype=complex)]).T
        return float(np.linalg.eigvalsh(dense)[0])
    op = LinearOperator((dim, dim), matvec=matvec, dtype=complex)
    v0 = np.ones(dim, dtype=complex) / np.sqrt(dim)
    try:
        vals, vecs = eigsh(op, k=1, which="SA", tol=1e-12, maxiter=maxiter, v0=v0)
    except ArpackNoConvergence as exc:
        raise NumericalError(f"eigensolver did not converge: {exc}") from None
    e, v = vals[0], vecs[:, 0]
    res = np.linalg.norm(matvec(v) - e * v)
    if res > tol:
        raise NumericalError(f"ground-state residual {res:.2e} above {tol}")
    return float(e)


# -- Jordan-Wigner Fock-space realization of Gaussian circuits ---------------

_ANNIHILATE = np.array([[0, 1], [0, 0]], dtype=complex)
_Z = np.diag([1.0, -1.0]).astype(complex)
FSWAP = np.diag([1.0, 1.0, 1.0, -1.0]).astype(complex)[[0, 2, 1, 3]]


def majorana_operators(n_modes: int) -> list:
    """Dense Majorana operators ``gamma_{2k} = c + c^dag``, ``gamma_{2k+1} = i(c^dag - c)``.

    Mode ``k`` is qubit ``k`` in kron order, with the Jordan-Wigner string
    on the qubits before it.
    """
    ops = []
    for k in range(n_modes):
        factors = [_Z] * k + [_ANNIHILATE] + [np.eye(2)] * (n_modes - k - 1)
        c = factors[0]
        for f in factors[1:]:
            c = np.kron(c, f)
        ops.append(c + c.conj().T)
        ops.append(1j * (c.conj().T - c))
    return ops


_MAJ2 = majorana_operators(2)


def fock_unitary(generator) -> np.ndarray:
    """Two-mode Fock-space unitary ``exp(1/4 sum_ab A_ab g_a g_b)`` (kron order)."""
    a = np.asarray(generator, dtype=float)
    q = sum(a[i, j] * _MAJ2[i] @ _MAJ2[j] for i in range(4) for j in range(4) if a[i, j])
    return scipy.linalg.expm(0.25 * q) if np.ndim(q) else np.eye(4, dtype=complex)


def majorana_generator(op, n_modes: int) -> np.ndarray:
    """Real antisymmetric ``A`` with ``op = 1/4 sum_ab A_ab g_a g_b`` for a quadratic ``op``."""
    maj = majorana_operators(n_modes)
    dim = 2 ** n_modes
    a = np.zeros((2 * n_modes, 2 * n_modes))
    for i in range(2 * n_modes):
        for j in range(i + 1, 2 * n_modes):
            c = 2 * np.trace((maj[i] @ maj[j]).conj().T @ op) / dim
            if abs(c.imag) > 1e-12:
                raise InvalidInputError("operator is not a real Majorana bilinear")
            a[i, j], a[j, i] = c.real, -c.real
    return a


def rotation_generator(rotation) -> np.ndarray:
    r = np.asarray(rotation, dtype=float)
    a = scipy.linalg.logm(r)
    if np.max(np.abs(np.imag(a))) > 1e-9:
        raise NumericalError("rotation has no real logarithm")
    a = np.real(a)
    return (a - a.T) / 2


def _apply_adjacent(psi, u, q, n_jw):
    if not 0 <= q < n_jw - 1:
        raise InvalidInputError("gate is not on adjacent wires")
    return _apply(psi, u, (q, q + 1))


def jw_fock_state(circuit: BranchingCircuit, max_wires: int = 16) -> StateVector:
    """Fock-space evolution of a 1D Gaussian circuit (rotation gates).

    Qubits are kept in Jordan-Wigner order. Interleaving is done with
    fermionic swaps between neighbours; each SO(4) gate is turned into the
    exponential of its quadratic Majorana generator and applied to a pair of
    adjacent qubits (the ring-closing gate is first brought next to its
    partner by fermionic swaps).
    """
    spec = circuit.spec
    if spec.dim != 1 or spec.chi != 2:
        raise InvalidInputError("jw_fock_state needs a 1D qubit circuit")
    n = spec.n_wires
    if n > max_wires:
        raise ResourceLimitError(f"jw_fock_state limited to N <= {max_wires}")
    T = spec.T
    # JW order holds (path, j) labels; level-0 wires sit in lexicographic path order
    order = [(p, 0) for p in sorted(_all_paths(T))]
    psi = _vacuum(n, 2)

    def fswap(q):
        nonlocal psi
        psi = _apply_adjacent(psi, FSWAP, q, n)
        order[q], order[q + 1] = order[q + 1], order[q]

    def move(src, dst):
        while src > dst:
            fswap(src - 1)
            src -= 1
        while src < dst:
            fswap(src)
            src += 1

    for t in range(T):
        m = 2 ** t
        lay = step_layout(t)
        live = set(live_branches(spec, t + 1))
        for parent in sorted(_all_paths(T - t - 1)):
            seg = [k for k, lab in enumerate(order) if lab[0][:-1] == parent and len(lab[0]) == T - t]
            start = min(seg)
            # target merged position of every label in the segment
            def target(lab):
                child, j = lab
                return lay.interleave_map[j + (m if child[-1] == "B" else 0)]
            for i in range(2 * m):  # selection sort by fermionic swaps
                want = next(k for k in range(start + i, start + 2 * m) if target(order[k]) == i)
                move(want, start + i)
            order[start:start + 2 * m] = [(parent, k) for k in range(2 * m)]
            if parent not in live:
                continue
            for layer, pairs in ((1, lay.layer1), (2, lay.layer2)):
                for pos, (w1, w2) in enumerate(pairs):
                    gen = rotation_generator(circuit.gate(t, parent, layer, pos))
                    a1, a2 = start + w1, start + w2
                    if a2 == a1 + 1:
                        psi = _apply_adjacent(psi, fock_unitary(gen), a1, n)
                    else:
                        # ring-closing gate: carry w1 to the left of w2 and back
                        move(a1, a2)
                        psi = _apply_adjacent(psi, fock_unitary(gen), a2, n)
                        move(a2, a1)
    if order != [("", k) for k in range(n)]:
        raise NumericalError("wire bookkeeping failed")  # pragma: no cover
    return StateVector(psi)


def _all_paths(length):
    return ["".join(p) for p in itertools.product("AB", repeat=length)]
