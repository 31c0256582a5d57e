"""Causal-cone evaluation of three-wire reduced density matrices (1D).

Going down one level, a window of three contiguous wires widens to four
wires across the second gate layer and to six across the first. Those six
are three consecutive (A, B) pairs, so each child branch again contributes a
window of three contiguous wires starting at the same position. The reduced
density matrix at the top is therefore assembled from three-wire densities
alone, starting from the four-wire branch states at level 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional

import numpy as np

from .circuit import BranchingCircuit, CircuitSpec, merge_states
from .errors import InvalidInputError, NumericalError
from .tensor_core import (WireTensor, contract_labels, density_tensor, partial_trace,
                          tensor_matrix)

MAX_LEGS = 8


class ConeWindow(NamedTuple):
    level: int
    branch: str
    start: int
    width: int = 3


@dataclass
class ConePath:
    top: ConeWindow
    # level -> windows at that level, in branch-lexicographic order
    windows: Dict[int, List[ConeWindow]]
    # step level t -> gate refs (t, branch, layer, position) joining t to t + 1
    gates: Dict[int, List[tuple]]

    @property
    def base(self) -> List[ConeWindow]:
        return self.windows[min(self.windows)]


@dataclass
class ConeStats:
    cone_steps: int = 0
    base_densities: int = 0
    max_legs: int = 0

    @property
    def densities(self) -> int:
        return self.cone_steps + self.base_densities


@dataclass(frozen=True)
class ThreeWireDensity:
    window: ConeWindow
    matrix: np.ndarray = field(repr=False)

    def check(self, herm_tol=1e-12, trace_tol=1e-10, eig_tol=1e-10):
        m = self.matrix
        herm = np.max(np.abs(m - m.conj().T))
        if herm > herm_tol:
            raise NumericalError(f"density not Hermitian ({herm:.2e})")
        tr = np.trace(m).real
        if abs(tr - 1) > trace_tol:
            raise NumericalError(f"density trace {tr!r}")
        lo = np.linalg.eigvalsh((m + m.conj().T) / 2)[0]
        if lo < -eig_tol:
            raise NumericalError(f"density has negative eigenvalue {lo:.2e}")
        return self


def child_start(start: int, t: int) -> int:
    """Start of the child windows at level ``t`` below a window at ``t + 1``."""
    return ((start - 1) // 2) % (2 ** t)


def cone_geometry(spec: CircuitSpec, top_start: int) -> ConePath:
    if spec.dim != 1:
        raise InvalidInputError("cone_geometry is 1D only")
    T = spec.T
    if T < 2:
        raise InvalidInputError("three-wire cones need T >= 2")
    if not 0 <= top_start < spec.n_wires:
        raise InvalidInputError(f"top_start {top_start} outside 0..{spec.n_wires - 1}")
    top = ConeWindow(T, "", int(top_start), 3)
    windows = {T: [top]}
    gates = {}
    for t in range(T - 1, 1, -1):
        m = 2 ** t
        windows[t], gates[t] = [], []
        for w in windows[t + 1]:
            j0 = child_start(w.start, t)
            children = "AB" if spec.tree[t] == 2 else "A"
            windows[t] += [ConeWindow(t, w.branch + c, j0, 3) for c in children]
            gates[t] += [(t, w.branch, 1, (j0 + k) % m) for k in range(3)]
            gates[t] += [(t, w.branch, 2, (j0 + k) % m) for k in range(2)]
    return ConePath(top, windows, gates)


def _vacuum_density(window: ConeWindow, chi: int) -> ThreeWireDensity:
    m = np.zeros((chi ** 3, chi ** 3), dtype=complex)
    m[0, 0] = 1.0
    return ThreeWireDensity(window, m)


def base_density(circuit: BranchingCircuit, window: ConeWindow,
                 stats: Optional[ConeStats] = None) -> ThreeWireDensity:
    """``rho_2``: build the four-wire branch state and trace out one wire."""
    if window.level != 2:
        raise InvalidInputError("base_density needs a level-2 window")
    spec = circuit.spec
    chi = spec.chi
    p = window.branch
    zero = np.zeros(chi, dtype=complex)
    zero[0] = 1
    psi_a = merge_states(circuit, 0, p + "A", zero, None)
    psi_b = merge_states(circuit, 0, p + "B", zero, None) if spec.tree[1] == 2 else None
    psi = merge_states(circuit, 1, p, psi_a, psi_b)
    rho = density_tensor(np.outer(psi.reshape(-1), psi.reshape(-1).conj()), (chi,) * 4)
    keep = [(window.start + k) % 4 for k in range(3)]
    red = partial_trace(rho, keep)
    if stats is not None:
        stats.base_densities += 1
    return ThreeWireDensity(window, tensor_matrix(red)).check()


class ConeGates(NamedTuple):
    layer1: tuple  # gates on (a_j, b_j), j = j0, j0+1, j0+2
    layer2: tuple  # gates on (b_j0, a_j0+1) and (b_j0+1, a_j0+2)


def cone_gates(circuit: BranchingCircuit, out_window: ConeWindow) -> ConeGates:
    t = out_window.level - 1
    m = 2 ** t
    j0 = child_start(out_window.start, t)
    p = out_window.branch
    l1 = tuple(circuit.gate(t, p, 1, (j0 + k) % m) for k in range(3))
    l2 = tuple(circuit.gate(t, p, 2, (j0 + k) % m) for k in range(2))
    return ConeGates(l1, l2)


def _gate(u, chi, labels):
    return WireTensor.from_array(np.asarray(u).reshape(chi, chi, chi, chi), labels)


def cone_step(rho_a: ThreeWireDensity, rho_b: ThreeWireDensity, gates: ConeGates,
              out_window: ConeWindow, stats: Optional[ConeStats] = None) -> ThreeWireDensity:
    """Combine two child densities into the parent window density.

    Fixed contraction order: the first layer-1 gate is absorbed into rho_A
    (tracing its outermost output), the last one into rho_B, the two halves
    are joined, then the middle layer-1 gate and both layer-2 gates follow,
    the last of them tracing the wire that leaves the window. No
    intermediate tensor carries more than eight legs.
    """
    t = out_window.level - 1
    j0 = child_start(out_window.start, t)
    for rho, name in ((rho_a, "A"), (rho_b, "B")):
        w = rho.window
        if w.level != t or w.start != j0 or w.branch != out_window.branch + name:
            raise InvalidInputError(f"child window {w} does not feed {out_window}")
    chi = int(round(rho_a.matrix.shape[0] ** (1 / 3)))
    top_odd = out_window.start % 2 == 1
    rank = [0]

    def join(x, y):
        z = contract_labels(x, y)
        rank[0] = max(rank[0], z.rank)
        if z.rank > MAX_LEGS:
            raise NumericalError(f"intermediate tensor with {z.rank} legs")
        return z

    g1, g2, g3 = (np.asarray(g) for g in gates.layer1)
    h1, h2 = (np.asarray(g) for g in gates.layer2)
    ra = WireTensor.from_array(rho_a.matrix.reshape((chi,) * 6),
                               ["a1", "a2", "a3", "a1*", "a2*", "a3*"])
    rb = WireTensor.from_array(rho_b.matrix.reshape((chi,) * 6),
                               ["b1", "b2", "b3", "b1*", "b2*", "b3*"])
    # left pair (a1, b1): keep B1, trace A1
    x = join(ra, _gate(g1, chi, ["A1", "B1", "a1", "b1"]))
    x = join(x, _gate(g1.conj(), chi, ["A1", "B1*", "a1*", "b1*"]))
    # right pair (a3, b3): keep A3, trace B3
    y = join(rb, _gate(g3, chi, ["A3", "B3", "a3", "b3"]))
    y = join(y, _gate(g3.conj(), chi, ["A3*", "B3", "a3*", "b3*"]))
    z = join(x, y)
    z = join(z, _gate(g2, chi, ["A2", "B2", "a2", "b2"]))
    z = join(z, _gate(g2.conj(), chi, ["A2*", "B2*", "a2*", "b2*"]))
    # layer 2 on (B1, A2) and (B2, A3); outputs c1..c4, one of c1/c4 is traced
    z = join(z, _gate(h1, chi, ["c1", "c2", "B1", "A2"]))
    z = join(z, _gate(h1.conj(), chi, ["c1*" if top_odd else "c1", "c2*", "B1*", "A2*"]))
    z = join(z, _gate(h2, chi, ["c3", "c4", "B2", "A3"]))
    z = join(z, _gate(h2.conj(), chi, ["c3*", "c4" if top_odd else "c4*", "B2*", "A3*"]))
    out = ["c1", "c2", "c3"] if top_odd else ["c2", "c3", "c4"]
    z = z.permute([z.index(lab) for lab in out + [lab + "*" for lab in out]])
    if stats is not None:
        stats.cone_steps += 1
        stats.max_legs = max(stats.max_legs, rank[0])
    return ThreeWireDensity(out_window, tensor_matrix(z)).check()


def _general(circuit, window, stats, cache):
    key = (window.level, window.branch, window.start)
    if key in cache:
        return cache[key]
    if window.level == 2:
        rho = base_density(circuit, window, stats)
    else:
        t = window.level - 1
        j0 = child_start(window.start, t)
        ca = ConeWindow(t, window.branch + "A", j0, 3)
        cb = ConeWindow(t, window.branch + "B", j0, 3)
        ra = _general(circuit, ca, stats, cache)
        if circuit.spec.tree[t] == 2:
            rb = _general(circuit, cb, stats, cache)
        else:
            rb = _vacuum_density(cb, circuit.chi)
        rho = cone_step(ra, rb, cone_gates(circuit, window), window, stats)
    cache[key] = rho
    return rho


def _uniform(circuit, window, stats, cache):
    """One density per level: every branch in the cone shares gates and window."""
    T = window.level
    starts = {T: window.start}
    for t in range(T - 1, 1, -1):
        starts[t] = child_start(starts[t + 1], t)
    key = ("u", 2, starts[2])
    rho = cache.get(key)
    if rho is None:
        rho = cache[key] = base_density(circuit, ConeWindow(2, "", starts[2], 3), stats)
    for t in range(2, T):
        key = ("u", t + 1, starts[t + 1])
        if key in cache:
            rho = cache[key]
            continue
        out = ConeWindow(t + 1, "", starts[t + 1], 3)
        ra = ThreeWireDensity(ConeWindow(t, "A", starts[t], 3), rho.matrix)
        if circuit.spec.tree[t] == 2:
            rb = ThreeWireDensity(ConeWindow(t, "B", starts[t], 3), rho.matrix)
        else:
            rb = _vacuum_density(ConeWindow(t, "B", starts[t], 3), circuit.chi)
        rho = cache[key] = cone_step(ra, rb, cone_gates(circuit, out), out, stats)
    return ThreeWireDensity(window, rho.matrix)


def reduced_density(circuit: BranchingCircuit, top_start: int,
                    stats: Optional[ConeStats] = None,
                    cache: Optional[dict] = None) -> ThreeWireDensity:
    """Density matrix of output wires ``top_start, +1, +2`` (mod N), kron order.

    Uniform circuits take the shared-gate route (one density per level);
    others evaluate one density per branch window of the cone. ``cache`` may
    be shared between calls on the same circuit.
    """
    spec = circuit.spec
    if spec.dim != 1:
        raise InvalidInputError("reduced_density is 1D only")
    if spec.gate_mode == "random_gaussian":
        raise InvalidInputError("Gaussian circuits are evaluated by gaussian_sim")
    top = cone_geometry(spec, top_start).top
    cache = {} if cache is None else cache
    if spec.uniform:
        # uniform gates ignore the branch key, so an empty branch is fine
        return _uniform(circuit, top, stats, cache)
    return _general(circuit, top, stats, cache)


def _check_observable(op, chi):
    op = np.asarray(op, dtype=complex)
    if op.shape != (chi ** 3, chi ** 3):
        raise InvalidInputError(f"observable must be {chi ** 3}x{chi ** 3}, got {op.shape}")
    if np.max(np.abs(op - op.conj().T)) > 1e-12:
        raise InvalidInputError("observable is not Hermitian")
    return op


def _trace_product(rho, op):
    val = np.sum(rho.matrix * op.T)
    if abs(val.imag) > 1e-10:
        raise NumericalError(f"expectation has imaginary part {val.imag:.2e}")
    return float(val.real)


def expectation(circuit: BranchingCircuit, observable, top_start: int,
                stats: Optional[ConeStats] = None) -> float:
    """``tr(rho O)`` for an operator on wires ``top_start .. top_start + 2``."""
    op = _check_observable(observable, circuit.chi)
    return _trace_product(reduced_density(circuit, top_start, stats), op)


def energy(circuit: BranchingCircuit, hamiltonian, stats: Optional[ConeStats] = None) -> float:
    """Sum of local term expectations; term ``l`` acts on sites ``l, l+1, l+2``."""
    terms = getattr(hamiltonian, "terms", hamiltonian)
    cache = {}
    total = 0.0
    for l, h in terms:
        h = np.asarray(h)
        if h.shape != (circuit.chi ** 3,) * 2:
            raise InvalidInputError("terms must act on exactly three contiguous sites")
        if not np.any(h):
            continue
        op = _check_observable(h, circuit.chi)
        rho = reduced_density(circuit, int(l) % circuit.n_wires, stats, cache)
        total += _trace_product(rho, op)
    return total
