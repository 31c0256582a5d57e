"""Entropy-versus-block-size experiments and scaling-form fits.

Each seed builds one Gaussian circuit realization; block entropies are
averaged over seeds and over ``n_offsets`` uniformly spaced block origins.
Fits compare one-slope-plus-constant families by residual sum of squares.
"""
from __future__ import annotations

import io
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, Optional, Sequence

import numpy as np

from .circuit import CircuitSpec
from .errors import DegenerateInputError, InvalidInputError, ResourceLimitError
from .gaussian import block_entropy, run_branching_gaussian

MAX_COVARIANCE_SIDE = 16384
CSV_COLUMNS = ("tree_id", "dim", "T", "L", "S_mean_bits", "S_std_bits", "n_samples", "seed_base")

FORMS_1D = ("const", "log", "log2", "linear")
FORMS_2D = ("linear", "Llog", "quadratic")


def gate_ensemble(spec: CircuitSpec) -> str:
    return "haar_so(4)" if spec.dim == 1 else "haar_so(8)"


def default_L_list(spec: CircuitSpec) -> list:
    """Powers of two from 2 up to half the linear size."""
    half = (spec.n_wires if spec.dim == 1 else spec.side) // 2
    return [2 ** k for k in range(1, int(np.log2(half)) + 1)]


def block_sites(spec: CircuitSpec, L: int, offset: int) -> np.ndarray:
    """Wires of a block of size ``L`` at origin ``offset`` (periodic).

    1D: ``L`` contiguous sites; 2D: an ``L x L`` square at ``(offset, offset)``.
    """
    if spec.dim == 1:
        return (offset + np.arange(L)) % spec.n_wires
    S = spec.side
    xs = (offset + np.arange(L)) % S
    return (xs[:, None] * S + xs[None, :]).ravel()


def block_offsets(spec: CircuitSpec, n_offsets: int) -> list:
    extent = spec.n_wires if spec.dim == 1 else spec.side
    return [k * extent // n_offsets for k in range(n_offsets)]


def _check_L(spec: CircuitSpec, L_list) -> list:
    L_list = [int(L) for L in L_list]
    extent = spec.n_wires if spec.dim == 1 else spec.side
    if not L_list:
        raise InvalidInputError("empty L list")
    if any(b <= a for a, b in zip(L_list, L_list[1:])):
        raise InvalidInputError("L values must be strictly increasing")
    if L_list[0] < 1 or L_list[-1] > extent // 2:
        raise InvalidInputError(f"L must lie in 1..{extent // 2}")
    return L_list


def realization_entropies(spec: CircuitSpec, L_list: Sequence[int], n_offsets: int) -> np.ndarray:
    """Block entropies of one realization, shape ``(len(L_list), n_offsets)``."""
    state = run_branching_gaussian(spec)
    offsets = block_offsets(spec, n_offsets)
    return np.array([[block_entropy(state, block_sites(spec, L, o)) for o in offsets]
                     for L in L_list])


def _realization(args):
    return realization_entropies(*args)


@dataclass
class EntropyCurve:
    spec: CircuitSpec
    rows: list  # (L, mean, std, count)
    n_seeds: int
    n_offsets: int
    samples: Optional[np.ndarray] = field(default=None, repr=False)  # (seed, L, offset)

    def __post_init__(self):
        Ls = [r[0] for r in self.rows]
        if any(b <= a for a, b in zip(Ls, Ls[1:])):
            raise InvalidInputError("curve L values must be strictly increasing")
        if any(r[1] < -1e-9 for r in self.rows):
            raise InvalidInputError("negative mean entropy")

    @property
    def L(self) -> np.ndarray:
        return np.array([r[0] for r in self.rows], dtype=float)

    @property
    def mean(self) -> np.ndarray:
        return np.array([r[1] for r in self.rows])

    @property
    def std(self) -> np.ndarray:
        return np.array([r[2] for r in self.rows])

    def metadata(self) -> dict:
        return {"spec": self.spec.to_dict(), "gate_ensemble": gate_ensemble(self.spec),
                "n_seeds": self.n_seeds, "n_offsets": self.n_offsets, "entropy_units": "bits"}

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("# " + json.dumps(self.metadata(), sort_keys=True) + "\n")
        out.write(",".join(CSV_COLUMNS) + "\n")
        s = self.spec
        for L, mean, std, count in self.rows:
            out.write(f"{s.tree_id},{s.dim},{s.T},{L},{mean:.12g},{std:.12g},{count},{s.seed}\n")
        return out.getvalue()

    def to_json(self) -> str:
        rows = [{"L": L, "S_mean_bits": m, "S_std_bits": sd, "n_samples": c}
                for L, m, sd, c in self.rows]
        return json.dumps({**self.metadata(), "rows": rows}, indent=2, sort_keys=True)

    @classmethod
    def from_csv(cls, text: str) -> "EntropyCurve":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("# "):
            raise InvalidInputError("missing metadata line")
        meta = json.loads(lines[0][2:])
        if tuple(lines[1].split(",")) != CSV_COLUMNS:
            raise InvalidInputError("unexpected CSV header")
        rows = []
        for line in lines[2:]:
            if line.strip():
                f = line.split(",")
                rows.append((int(f[3]), float(f[4]), float(f[5]), int(f[6])))
        return cls(CircuitSpec.from_dict(meta["spec"]), rows, meta["n_seeds"], meta["n_offsets"])


def aggregate(L_list, samples: np.ndarray) -> list:
    """Rows ``(L, mean, std, count)`` from samples shaped ``(seed, L, offset)``."""
    rows = []
    for i, L in enumerate(L_list):
        x = samples[:, i, :].ravel()
        std = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
        rows.append((int(L), float(np.mean(x)), std, int(x.size)))
    return rows


def entropy_curve(spec: CircuitSpec, L_list: Optional[Sequence[int]] = None, n_seeds: int = 10,
                  n_offsets: int = 8, workers: int = 1) -> EntropyCurve:
    """Mean block entropy per ``L`` over seeds ``spec.seed + i`` and block offsets."""
    if 2 * spec.n_wires > MAX_COVARIANCE_SIDE:
        raise ResourceLimitError(f"covariance side {2 * spec.n_wires} exceeds {MAX_COVARIANCE_SIDE}")
    if spec.gate_mode not in ("random_gaussian", "identity"):
        raise InvalidInputError("entropy_curve needs gate_mode random_gaussian or identity")
    if n_seeds < 1 or n_offsets < 1:
        raise InvalidInputError("need at least one seed and one offset")
    L_list = _check_L(spec, default_L_list(spec) if L_list is None else L_list)
    jobs = [(replace(spec, seed=spec.seed + i), L_list, n_offsets) for i in range(n_seeds)]
    if workers > 1 and n_seeds > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_realization, jobs))
    else:
        results = [_realization(j) for j in jobs]
    samples = np.array(results)
    return EntropyCurve(spec, aggregate(L_list, samples), n_seeds, n_offsets, samples)


# -- fits ---------------------------------------------------------------------

def _feature(name: str, L: np.ndarray) -> Optional[np.ndarray]:
    x = np.log2(L)
    return {"const": None, "log": x, "log2": x ** 2, "linear": L,
            "Llog": L * x, "quadratic": L ** 2}[name]


@dataclass
class FormFit:
    name: str
    coefficients: Dict[str, float]
    rss: float
    residuals: list


@dataclass
class FitReport:
    dim: int
    fits: Dict[str, FormFit]
    selected: Optional[str]
    runner_up: Optional[str]
    margin: float
    degenerate: bool = False

    def ranking(self) -> list:
        return sorted(self.fits, key=lambda k: self.fits[k].rss)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "forms": {k: {"coefficients": f.coefficients, "rss": f.rss, "residuals": f.residuals}
                      for k, f in self.fits.items()},
            "selected": self.selected,
            "runner_up": self.runner_up,
            "margin": self.margin,
            "degenerate_selection": self.degenerate,
            "constants_included": True,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fit_forms(curve, dim: Optional[int] = None, S=None, tie_rtol: float = 1e-9) -> FitReport:
    """Least-squares fit of each candidate family; select the minimal RSS.

    ``curve`` is an :class:`EntropyCurve` or an array of ``L`` (then ``S``
    holds the entropies and ``dim`` is required).
    """
    if isinstance(curve, EntropyCurve):
        L, y = curve.L, curve.mean
        dim = curve.spec.dim if dim is None else dim
    else:
        L, y = np.asarray(curve, dtype=float), np.asarray(S, dtype=float)
    if dim not in (1, 2):
        raise InvalidInputError("dim must be 1 or 2")
    if L.shape != y.shape or L.ndim != 1:
        raise InvalidInputError("L and S must be 1D arrays of equal length")
    if len(np.unique(L)) < 4:
        raise InvalidInputError("need at least 4 distinct L values")
    if np.any(L <= 0):
        raise InvalidInputError("L must be positive")
    fits = {}
    for name in (FORMS_1D if dim == 1 else FORMS_2D):
        f = _feature(name, L)
        A = np.ones((len(L), 1)) if f is None else np.column_stack([f, np.ones_like(L)])
        if np.linalg.matrix_rank(A) < A.shape[1]:
            raise DegenerateInputError(f"rank-deficient design for form {name}")
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        res = y - A @ coef
        names = ("c",) if f is None else ("a", "c")
        fits[name] = FormFit(name, {k: float(v) for k, v in zip(names, coef)},
                             float(res @ res), [float(r) for r in res])
    order = sorted(fits, key=lambda k: fits[k].rss)
    best, second = fits[order[0]].rss, fits[order[1]].rss
    # exact fits leave RSS at rounding level, where relative gaps are noise
    floor = 1e-20 * max(float(y @ y), 1.0)
    degenerate = second - best <= tie_rtol * second or second <= floor
    margin = second / max(best, 1e-300)
    return FitReport(dim, fits, None if degenerate else order[0], order[1], float(margin),
                     degenerate)
