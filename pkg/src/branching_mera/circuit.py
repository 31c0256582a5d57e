"""Branching-MERA circuit description.

Wires are organised in branches. A branch at level ``t`` prepares a state of
``2**t`` wires (1D) or of a ``2**t x 2**t`` patch (2D). One step merges the
live children of a parent branch: their wires are interleaved (swaps are
pure relabelling), then two layers of gates act on the merged ring. A level
whose branch factor is below the maximum feeds fresh ``|0>`` wires in place
of the missing children, which turns the step into an isometry.

Branch addresses are strings over ``A``/``B`` (1D) or ``A``-``D`` (2D); the
first character selects the child at the topmost step.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Optional

import numpy as np

from .errors import InvalidInputError, NumericalError
from .tensor_core import haar_so, haar_unitary

GATE_MODES = ("identity", "random_haar", "random_gaussian", "explicit")
ALPHABET = {1: "AB", 2: "ABCD"}
# sublattice offsets of live children in a 2D merge, in branch-letter order
SUBLATTICE_ORDER = ((0, 0), (1, 1), (0, 1), (1, 0))
UNIFORM_KEY = "*"
SPEC_KEYS = ("dim", "T", "chi", "tree", "gate_mode", "uniform", "seed")


@dataclass(frozen=True)
class CircuitSpec:
    dim: int = 1
    T: int = 4
    chi: int = 2
    tree: Optional[tuple] = None
    gate_mode: str = "random_haar"
    uniform: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidInputError(f"dim must be 1 or 2, got {self.dim}")
        if int(self.T) != self.T or self.T < 1:
            raise InvalidInputError(f"T must be a positive integer, got {self.T}")
        if self.chi < 2:
            raise InvalidInputError(f"chi must be >= 2, got {self.chi}")
        if self.gate_mode not in GATE_MODES:
            raise InvalidInputError(f"unknown gate_mode {self.gate_mode!r}")
        nmax = len(ALPHABET[self.dim])
        tree = (nmax,) * self.T if self.tree is None else tuple(int(b) for b in self.tree)
        object.__setattr__(self, "tree", tree)
        if len(tree) != self.T:
            raise InvalidInputError(f"tree has {len(tree)} entries, expected T={self.T}")
        if any(b < 1 or b > nmax for b in tree):
            raise InvalidInputError(f"branch factors must lie in 1..{nmax} for dim={self.dim}")
        if self.dim == 2 and self.gate_mode == "random_haar":
            raise InvalidInputError("2D circuits exist only on the Gaussian path")
        if self.gate_mode == "random_gaussian" and self.chi != 2:
            raise InvalidInputError("random_gaussian needs chi=2 (one fermionic mode per wire)")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidInputError("seed must be an unsigned 64-bit integer")

    @property
    def n_wires(self) -> int:
        return 2 ** (self.dim * self.T)

    @property
    def side(self) -> int:
        return 2 ** self.T

    @property
    def max_branch(self) -> int:
        return len(ALPHABET[self.dim])

    @property
    def tree_id(self) -> str:
        return "-".join(str(b) for b in self.tree)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "T": self.T, "chi": self.chi, "tree": list(self.tree),
                "gate_mode": self.gate_mode, "uniform": bool(self.uniform),
                "seed": int(self.seed)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "CircuitSpec":
        unknown = set(d) - set(SPEC_KEYS)
        if unknown:
            raise InvalidInputError(f"unknown CircuitSpec keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "CircuitSpec":
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"malformed spec JSON: {exc}") from None
        if not isinstance(d, dict):
            raise InvalidInputError("spec JSON must be an object")
        return cls.from_dict(d)


class BranchAddress(NamedTuple):
    path: str
    level: int


@dataclass(frozen=True)
class StepLayout:
    """Wiring of one merge step (0-indexed positions in the merged ring)."""
    level: int
    merged_size: int
    interleave_map: np.ndarray  # input index -> merged position; A inputs first
    layer1: np.ndarray  # (m, 2) position pairs
    layer2: np.ndarray  # (m, 2) or (0, 2)


def step_layout(t: int, m: Optional[int] = None) -> StepLayout:
    """1D merge of two ``m``-wire branches into a ring of ``2m`` wires."""
    if t < 0:
        raise InvalidInputError("level must be >= 0")
    m = 2 ** t if m is None else int(m)
    i = np.arange(m)
    interleave = np.concatenate([2 * i, 2 * i + 1])
    layer1 = np.stack([2 * i, 2 * i + 1], axis=1)
    if m > 1:
        layer2 = np.stack([2 * i + 1, (2 * i + 2) % (2 * m)], axis=1)
    else:
        layer2 = np.zeros((0, 2), dtype=int)
    return StepLayout(t, 2 * m, interleave, layer1, layer2)


@dataclass(frozen=True)
class StepLayout2D:
    """2D merge: four ``s x s`` sublattices into a ``2s x 2s`` periodic patch.

    Site ``(x, y)`` of a patch with side ``S`` has index ``x * S + y``.
    """
    level: int
    side: int
    interleave_map: np.ndarray  # (4, s*s): child k's site -> merged index
    layer1: np.ndarray  # (s*s, 4) plaquettes
    layer2: np.ndarray  # (s*s, 4) or (0, 4)


def _plaquettes(S: int, off: int) -> np.ndarray:
    x, y = np.meshgrid(np.arange(0, S, 2), np.arange(0, S, 2), indexing="ij")
    x = (x.ravel() + off) % S
    y = (y.ravel() + off) % S
    corners = [(x, y), ((x + 1) % S, y), (x, (y + 1) % S), ((x + 1) % S, (y + 1) % S)]
    return np.stack([a * S + b for a, b in corners], axis=1)


def step_layout_2d(t: int) -> StepLayout2D:
    s = 2 ** t
    S = 2 * s
    x, y = np.meshgrid(np.arange(s), np.arange(s), indexing="ij")
    inter = np.stack([((2 * x + dx) * S + (2 * y + dy)).ravel()
                      for dx, dy in SUBLATTICE_ORDER])
    layer2 = _plaquettes(S, 1) if s > 1 else np.zeros((0, 4), dtype=int)
    return StepLayout2D(t, S, inter, _plaquettes(S, 0), layer2)


def live_branches(spec: CircuitSpec, level: int) -> list:
    """Addresses (lexicographic) of branches at ``level`` that carry gates.

    Level 0 branches are bare wires; they are listed for completeness.
    """
    if not 0 <= level <= spec.T:
        raise InvalidInputError(f"level {level} outside 0..{spec.T}")
    letters = ALPHABET[spec.dim]
    choices = [letters[:spec.tree[spec.T - 1 - k]] for k in range(spec.T - level)]
    return ["".join(p) for p in itertools.product(*choices)]


def is_live(spec: CircuitSpec, path: str) -> bool:
    letters = ALPHABET[spec.dim]
    return all(letters.index(c) < spec.tree[spec.T - 1 - k] for k, c in enumerate(path))


def _gate_size(spec: CircuitSpec) -> int:
    if spec.gate_mode == "random_gaussian" or spec.dim == 2:
        return 4 if spec.dim == 1 else 8
    return spec.chi ** 2


def _placements(spec: CircuitSpec, t: int) -> tuple:
    if spec.dim == 1:
        m = 2 ** t
        return (m, m if t >= 1 else 0)
    n = 4 ** t
    return (n, n if t >= 1 else 0)


@dataclass(frozen=True)
class BranchingCircuit:
    spec: CircuitSpec
    # (level, branch key, layer) -> stacked gates indexed by position
    gates: Dict[tuple, np.ndarray] = field(repr=False)
    pruned: tuple = ()

    @property
    def T(self) -> int:
        return self.spec.T

    @property
    def chi(self) -> int:
        return self.spec.chi

    @property
    def n_wires(self) -> int:
        return self.spec.n_wires

    def gate(self, level: int, branch: str, layer: int, position: int) -> np.ndarray:
        if self.spec.uniform:
            return self.gates[(level, UNIFORM_KEY, layer)][0]
        return self.gates[(level, branch, layer)][position]

    def layer_gates(self, level: int, branch: str, layer: int) -> np.ndarray:
        """All gates of one layer of one branch, broadcast in the uniform case."""
        count = _placements(self.spec, level)[layer - 1]
        if self.spec.uniform:
            g = self.gates[(level, UNIFORM_KEY, layer)]
            return np.broadcast_to(g[0], (count,) + g.shape[1:])
        return self.gates[(level, branch, layer)]

    def layout(self, level: int):
        return step_layout(level) if self.spec.dim == 1 else step_layout_2d(level)

    def live_branches(self, level: int) -> list:
        return live_branches(self.spec, level)

    def placement_count(self) -> int:
        """Number of generic gate placements demanded by the layouts."""
        return sum(len(live_branches(self.spec, t + 1)) * sum(_placements(self.spec, t))
                   for t in range(self.T))

    def stored_gate_count(self) -> int:
        return sum(g.shape[0] for g in self.gates.values())

    def expanded(self) -> "BranchingCircuit":
        """Copy with one gate per (branch, position), even when uniform."""
        if not self.spec.uniform:
            return self
        gates = {}
        for t in range(self.T):
            for p in live_branches(self.spec, t + 1):
                for layer in (1, 2):
                    if _placements(self.spec, t)[layer - 1]:
                        gates[(t, p, layer)] = np.array(self.layer_gates(t, p, layer))
        spec = CircuitSpec(**{**self.spec.to_dict(), "uniform": False})
        return BranchingCircuit(spec, gates, self.pruned)


def build_circuit(spec: CircuitSpec, gates: Optional[dict] = None) -> BranchingCircuit:
    """Populate the gate table of ``spec``.

    Random gates are drawn from ``default_rng(seed)`` in the order: level
    ascending, live parent branch lexicographic, layer, position.
    ``gates`` (explicit mode) maps ``(level, branch, layer)`` to a stack of
    matrices, or ``(level, branch, layer, position)`` to a single matrix; in
    the uniform case use branch ``"*"`` and position 0.
    """
    d = _gate_size(spec)
    rng = np.random.default_rng(spec.seed)
    table = {}
    for t in range(spec.T):
        parents = [UNIFORM_KEY] if spec.uniform else live_branches(spec, t + 1)
        for p in parents:
            for layer in (1, 2):
                count = _placements(spec, t)[layer - 1]
                if spec.uniform:
                    count = min(count, 1)
                if count == 0:
                    continue
                key = (t, p, layer)
                if spec.gate_mode == "identity":
                    table[key] = np.broadcast_to(np.eye(d), (count, d, d)).copy()
                    if spec.dim == 1 and d == spec.chi ** 2:
                        table[key] = table[key].astype(complex)
                elif spec.gate_mode == "random_haar":
                    table[key] = haar_unitary(d, rng, size=count)
                elif spec.gate_mode == "random_gaussian":
                    table[key] = haar_so(d, rng, size=count)
                else:
                    table[key] = _explicit_stack(gates, key, count, d)
    pruned = tuple(b < spec.max_branch for b in spec.tree)
    return BranchingCircuit(spec, table, pruned)


def _explicit_stack(gates, key, count, d):
    if gates is None:
        raise InvalidInputError("explicit gate_mode needs a gate table")
    if key in gates:
        stack = np.asarray(gates[key])
        if stack.shape != (count, d, d):
            raise InvalidInputError(f"gates{key} has shape {stack.shape}, expected {(count, d, d)}")
        return stack.copy()
    out = []
    for pos in range(count):
        k = key + (pos,)
        if k not in gates:
            raise InvalidInputError(f"missing explicit gate {k}")
        g = np.asarray(gates[k])
        if g.shape != (d, d):
            raise InvalidInputError(f"gate {k} has shape {g.shape}, expected {(d, d)}")
        out.append(g)
    return np.array(out)


def parameter_count(circuit: BranchingCircuit) -> int:
    """Real variational parameters: stored generic gates times chi**4."""
    return circuit.stored_gate_count() * circuit.chi ** 4


# -- state-level helpers (small dense tensors, axis k = wire k) --------------

def apply_two_wire(psi: np.ndarray, u: np.ndarray, w1: int, w2: int) -> np.ndarray:
    chi = psi.shape[w1]
    u4 = u.reshape(chi, chi, chi, chi)
    out = np.tensordot(u4, psi, axes=([2, 3], [w1, w2]))
    return np.moveaxis(out, (0, 1), (w1, w2))


def merge_states(circuit: BranchingCircuit, t: int, parent: str,
                 psi_a: np.ndarray, psi_b: Optional[np.ndarray]) -> np.ndarray:
    """Apply the step map of ``parent`` at level ``t`` to ``psi_a (x) psi_b``.

    ``psi_b=None`` means the second input is the fresh product state.
    """
    m = 2 ** t
    chi = circuit.chi
    if psi_b is None:
        psi_b = np.zeros((chi,) * m, dtype=complex)
        psi_b[(0,) * m] = 1.0
    lay = step_layout(t)
    psi = np.multiply.outer(psi_a, psi_b)
    # axis i of the outer product sits at merged position interleave_map[i]
    psi = np.transpose(psi, np.argsort(lay.interleave_map))
    for layer, pairs in ((1, lay.layer1), (2, lay.layer2)):
        for pos, (w1, w2) in enumerate(pairs):
            psi = apply_two_wire(psi, circuit.gate(t, parent, layer, pos), w1, w2)
    return psi


def little_endian(psi: np.ndarray) -> np.ndarray:
    return np.transpose(psi, tuple(range(psi.ndim))[::-1]).reshape(-1)


def isometry_view(circuit: BranchingCircuit, t: int, branch: Optional[str] = None,
                  tol: float = 1e-12) -> np.ndarray:
    """Explicit isometry ``W = V(. (x) |0...0>)`` of a pruned level.

    Maps little-endian vectors of ``2**t`` wires to ``2**(t+1)`` wires.
    ``branch`` is the parent branch address (default: the all-``A`` path).
    """
    spec = circuit.spec
    if spec.dim != 1:
        raise InvalidInputError("isometry_view is 1D only")
    if not 0 <= t < spec.T or not circuit.pruned[t]:
        raise InvalidInputError(f"level {t} is not a pruned level")
    if t > 3:
        raise InvalidInputError("isometry_view is limited to t <= 3")
    branch = "A" * (spec.T - t - 1) if branch is None else branch
    m = 2 ** t
    chi = spec.chi
    cols = []
    for k in range(chi ** m):
        e = np.zeros(chi ** m, dtype=complex)
        e[k] = 1.0
        psi_a = np.transpose(e.reshape((chi,) * m), tuple(range(m))[::-1])
        cols.append(little_endian(merge_states(circuit, t, branch, psi_a, None)))
    w = np.array(cols).T
    err = np.max(np.abs(w.conj().T @ w - np.eye(w.shape[1])))
    if err > tol:
        raise NumericalError(f"W^dag W deviates from identity by {err:.2e}")
    return w
