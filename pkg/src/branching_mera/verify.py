"""Quick oracle-equivalence and invariant checks (the ``verify`` subcommand)."""
from __future__ import annotations

import time
from typing import Callable, List, NamedTuple

import numpy as np

from .circuit import CircuitSpec, build_circuit, live_branches, step_layout
from .cone import ConeStats, reduced_density
from .gaussian import block_entropy, branch_states, mode_adjacency, run_branching_gaussian
from .oracle import (exact_block_entropy, exact_ground_energy, exact_reduced, full_state,
                     jw_fock_state, output_position)
from .scaling import fit_forms
from .variational import ising_ground_energy, ising_hamiltonian


class CheckResult(NamedTuple):
    name: str
    ok: bool
    detail: str
    seconds: float


def trace_distance(a, b) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def cone_vs_oracle(N: int, seed: int, uniform: bool = False, tree=None) -> float:
    """Largest trace distance between cone and dense densities over all windows."""
    T = int(np.log2(N))
    circuit = build_circuit(CircuitSpec(T=T, tree=tree, uniform=uniform, seed=seed))
    state = full_state(circuit)
    cache = {}
    worst = 0.0
    for s in range(N):
        rho = reduced_density(circuit, s, cache=cache).matrix
        ref = exact_reduced(state, [s, (s + 1) % N, (s + 2) % N])
        worst = max(worst, trace_distance(rho, ref))
    return worst


def circuit_adjacency(spec: CircuitSpec) -> list:
    """Gate placements from the circuit layouts, mapped to output wires."""
    out = []
    for t in range(spec.T):
        lay = step_layout(t)
        for parent in live_branches(spec, t + 1):
            for layer, pairs in ((1, lay.layer1), (2, lay.layer2)):
                for w1, w2 in pairs:
                    out.append((t, layer, output_position(spec.T, t + 1, parent, int(w1)),
                                output_position(spec.T, t + 1, parent, int(w2))))
    return sorted(out)


def _cone_equivalence():
    worst = max(cone_vs_oracle(N, seed) for N in (8, 16) for seed in range(3))
    return worst < 1e-10, f"max trace distance {worst:.2e}"


def _uniform_equivalence():
    worst = 0.0
    for T in (4, 5):
        c = build_circuit(CircuitSpec(T=T, uniform=True, seed=T))
        e = c.expanded()
        for s in range(c.n_wires):
            worst = max(worst, float(np.max(np.abs(
                reduced_density(c, s).matrix - reduced_density(e, s).matrix))))
    return worst < 1e-12, f"max difference {worst:.2e}"


def _cone_counts():
    bad = []
    for T in range(3, 7):
        c = build_circuit(CircuitSpec(T=T, gate_mode="identity"))
        st = ConeStats()
        reduced_density(c, 0, st)
        if st.densities != 2 ** (T - 1) - 1 or st.max_legs > 8:
            bad.append(T)
        cu = build_circuit(CircuitSpec(T=T, gate_mode="identity", uniform=True))
        su = ConeStats()
        reduced_density(cu, 0, su)
        if su.cone_steps != T - 2:
            bad.append(T)
    return not bad, "ok" if not bad else f"count mismatch at T={bad}"


def _census():
    c = build_circuit(CircuitSpec(T=4, gate_mode="identity"))
    return c.placement_count() == 56, f"{c.placement_count()} gates at N=16"


def _gaussian_physicality():
    worst = 0.0
    for _, states in branch_states(CircuitSpec(T=8, gate_mode="random_gaussian", seed=1)):
        for st in states.values():
            worst = max(worst, st.antisymmetry_error(), st.purity_error())
    return worst < 1e-9, f"max invariant violation {worst:.2e}"


def _jordan_wigner():
    worst = 0.0
    for T, tree in ((2, None), (3, None), (3, (2, 1, 2))):
        c = build_circuit(CircuitSpec(T=T, tree=tree, gate_mode="random_gaussian", seed=T))
        g = run_branching_gaussian(c)
        psi = jw_fock_state(c)
        N = c.n_wires
        for s in range(N):
            for L in range(1, N // 2 + 1):
                blk = [(s + i) % N for i in range(L)]
                worst = max(worst, abs(block_entropy(g, blk) - exact_block_entropy(psi, blk)))
    return worst < 1e-8, f"max entropy difference {worst:.2e}"


def _adjacency():
    bad = [T for T in range(1, 8) for tree in ((2,) * T, (1,) * T)
           if mode_adjacency(CircuitSpec(T=T, tree=tree)) != circuit_adjacency(CircuitSpec(T=T, tree=tree))]
    return not bad, "identical" if not bad else f"mismatch at T={bad}"


def _fits():
    L = 2.0 ** np.arange(1, 9)
    r = fit_forms(L, 1, 3 * np.log2(L) ** 2 + 1)
    ok = r.selected == "log2" and abs(r.fits["log2"].coefficients["a"] - 3) < 1e-10
    return ok, f"selected {r.selected}"


def _ising_ed():
    e_ed = exact_ground_energy(ising_hamiltonian(8, 1.0), 8)
    e_ff = ising_ground_energy(8, 1.0)
    return abs(e_ed - e_ff) < 1e-8, f"ED {e_ed:.10f} vs free fermions {e_ff:.10f}"


CHECKS: List[tuple] = [
    ("cone_vs_dense_oracle", _cone_equivalence),
    ("uniform_vs_general_cone", _uniform_equivalence),
    ("cone_structure_counts", _cone_counts),
    ("gate_census", _census),
    ("gaussian_physicality", _gaussian_physicality),
    ("jordan_wigner_crosscheck", _jordan_wigner),
    ("gaussian_wiring", _adjacency),
    ("fit_recovery", _fits),
    ("ising_ed_pin", _ising_ed),
]


def run_checks(checks=None) -> List[CheckResult]:
    results = []
    for name, fn in (CHECKS if checks is None else checks):
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crashing check is a failed check
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail, time.perf_counter() - t0))
    return results
