"""Dense multi-linear algebra on wire-indexed complex tensors.

A :class:`WireTensor` is an ndarray whose axes ("legs") carry a dimension,
a ket/bra tag and a free-form label. Contraction is strictly pairwise; larger
networks are contracted by explicit sequences chosen by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateInputError, InvalidInputError

KET = "ket"
BRA = "bra"


@dataclass(frozen=True)
class Leg:
    dim: int
    tag: str = KET
    label: str = ""


@dataclass(frozen=True)
class WireTensor:
    data: np.ndarray
    legs: tuple
    # permutation that produced this tensor from its parent, if any
    perm: Optional[tuple] = field(default=None, compare=False)

    def __post_init__(self):
        if self.data.ndim != len(self.legs):
            raise InvalidInputError(
                f"{self.data.ndim} data axes but {len(self.legs)} legs")
        for ax, leg in zip(self.data.shape, self.legs):
            if ax != leg.dim:
                raise InvalidInputError(f"axis of size {ax} tagged with dim {leg.dim}")

    @property
    def rank(self) -> int:
        return len(self.legs)

    @property
    def labels(self) -> tuple:
        return tuple(leg.label for leg in self.legs)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def permute(self, order: Sequence[int]) -> "WireTensor":
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(self.rank)):
            raise InvalidInputError(f"{order} is not a permutation of {self.rank} legs")
        return WireTensor(np.transpose(self.data, order),
                          tuple(self.legs[i] for i in order), perm=order)

    def relabel(self, labels: Sequence[str]) -> "WireTensor":
        legs = tuple(Leg(leg.dim, leg.tag, lab) for leg, lab in zip(self.legs, labels))
        return WireTensor(self.data, legs)

    @classmethod
    def from_array(cls, data, labels, tags=None):
        data = np.asarray(data, dtype=complex)
        if tags is None:
            tags = [BRA if lab.endswith("*") else KET for lab in labels]
        legs = tuple(Leg(d, t, lab) for d, t, lab in zip(data.shape, tags, labels))
        return cls(data, legs)


def contract(a: WireTensor, b: WireTensor, pairs) -> WireTensor:
    """Sum over paired legs of ``a`` and ``b``.

    ``pairs`` is a list of ``(leg of a, leg of b)`` index pairs. The result
    carries the unpaired legs of ``a`` followed by those of ``b``.
    """
    pairs = list(pairs)
    ia = [int(p[0]) for p in pairs]
    ib = [int(p[1]) for p in pairs]
    if len(set(ia)) != len(ia) or len(set(ib)) != len(ib):
        raise InvalidInputError("a leg appears in more than one pair")
    for i, j in zip(ia, ib):
        if not (0 <= i < a.rank and 0 <= j < b.rank):
            raise InvalidInputError(f"leg pair ({i}, {j}) out of range")
        if a.legs[i].dim != b.legs[j].dim:
            raise InvalidInputError(
                f"dimension mismatch on pair ({i}, {j}): {a.legs[i].dim} vs {b.legs[j].dim}")
    data = np.tensordot(a.data, b.data, axes=(ia, ib))
    legs = tuple(l for k, l in enumerate(a.legs) if k not in ia) + \
        tuple(l for k, l in enumerate(b.legs) if k not in ib)
    return WireTensor(data, legs)


def contract_labels(a: WireTensor, b: WireTensor) -> WireTensor:
    """Contract every label that occurs on both tensors."""
    lb = b.labels
    pairs = [(i, lb.index(lab)) for i, lab in enumerate(a.labels) if lab in lb]
    return contract(a, b, pairs)


def density_tensor(matrix, dims) -> WireTensor:
    """View a square matrix on ``len(dims)`` wires (kron order) as ket+bra legs."""
    matrix = np.asarray(matrix, dtype=complex)
    n = len(dims)
    labels = [f"k{i}" for i in range(n)] + [f"b{i}*" for i in range(n)]
    return WireTensor.from_array(matrix.reshape(tuple(dims) * 2), labels)


def tensor_matrix(t: WireTensor) -> np.ndarray:
    """Inverse of :func:`density_tensor`: fold ket legs into rows, bra legs into columns."""
    n = t.rank // 2
    rows = int(np.prod([leg.dim for leg in t.legs[:n]]))
    return t.data.reshape(rows, -1)


def partial_trace(rho: WireTensor, keep: Sequence[int]) -> WireTensor:
    """Reduce a density tensor (n ket legs then n matching bra legs) to ``keep``.

    ``keep`` lists wire indices in the order they should appear in the result.
    """
    if rho.rank % 2:
        raise InvalidInputError("density tensor needs an even number of legs")
    n = rho.rank // 2
    for i in range(n):
        if rho.legs[i].dim != rho.legs[n + i].dim:
            raise InvalidInputError(f"bra/ket dimension mismatch on wire {i}")
    keep = [int(k) for k in keep]
    if len(set(keep)) != len(keep) or any(k < 0 or k >= n for k in keep):
        raise InvalidInputError(f"keep={keep} is not a subset of wires 0..{n - 1}")
    traced = [i for i in range(n) if i not in keep]
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    ket = letters[:n]
    bra = letters[n:]
    for i in traced:
        bra[i] = ket[i]
    out = [ket[k] for k in keep] + [bra[k] for k in keep]
    data = np.einsum("".join(ket + bra) + "->" + "".join(out), rho.data)
    legs = tuple(rho.legs[k] for k in keep) + tuple(rho.legs[n + k] for k in keep)
    return WireTensor(data, legs)


def haar_unitary(dim: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar-random unitary (or a stack of ``size`` of them).

    QR of a complex Ginibre matrix with the phases of R's diagonal absorbed
    into Q, which makes the distribution exactly Haar.
    """
    if dim < 1:
        raise InvalidInputError("dim must be >= 1")
    shape = (dim, dim) if size is None else (size, dim, dim)
    z = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    ph = d / np.abs(d)
    return q * ph[..., None, :]


def polar_unitary(m, tol: float = 1e-12) -> np.ndarray:
    """Unitary factor of the polar decomposition of a square matrix.

    This is the unitary closest to ``m``: it maximizes ``Re tr(U^dag m)``.
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidInputError("polar_unitary needs a square matrix")
    w, s, vh = np.linalg.svd(m)
    if s[-1] <= tol:
        raise DegenerateInputError(f"matrix is near-singular (sigma_min={s[-1]:.3e})")
    return w @ vh


def is_unitary(u, tol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return bool(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) < tol)


def unitary_generators(dim: int) -> np.ndarray:
    """Orthonormal basis of anti-Hermitian ``dim x dim`` matrices (``dim**2`` of them).

    Orthonormal with respect to ``Re tr(A^dag B)``.
    """
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1j
        basis.append(e)
    s = 1 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j], e[j, i] = s, -s
            basis.append(e)
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j], e[j, i] = 1j * s, 1j * s
            basis.append(e)
    return np.array(basis)


def haar_so(dim: int, rng: np.random.Generator, size: Optional[int] = None) -> np.ndarray:
    """Haar-random special orthogonal matrix (or a stack of ``size``).

    Sign-fixed QR of a real Gaussian matrix gives Haar on O(dim); flipping
    the first column where the determinant is negative maps it onto SO(dim).
    """
    if dim < 2 or dim % 2:
        raise InvalidInputError("haar_so needs an even dim >= 2")
    shape = (dim, dim) if size is None else (size, dim, dim)
    q, r = np.linalg.qr(rng.standard_normal(shape))
    q = q * np.sign(np.diagonal(r, axis1=-2, axis2=-1))[..., None, :]
    neg = np.linalg.det(q) < 0
    if size is None:
        if neg:
            q[:, 0] *= -1
    else:
        q[neg, :, 0] *= -1
    return q
