"""Finitely atomic operator-valued measures ``Gamma d gamma``.

A measure is a list of atoms ``(point, weight, block)`` with ``weight > 0``
and ``block`` a square complex matrix.  Two measures are equivalent when, atom
by atom, ``(w', B') = (f w, B / f)`` for a positive scalar ``f``; the pairing
``sum w Tr(sigma(z) B)`` and the norm ``sum w Tr|B|`` are class invariants.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, GridMismatchError

#: eigenvalue floor for positivity
POSITIVITY_TOL = 1e-10
#: relative tolerance of the equivalence test
EQUIVALENCE_TOL = 1e-10


def euclidean_distance(p, q) -> float:
    return float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)))


@dataclass(frozen=True)
class PointSpace:
    """A named metric space for atom locations."""

    name: str = "R^n"
    metric: Callable = euclidean_distance
    tolerance: float = 1e-12

    def same_point(self, p, q) -> bool:
        return self.metric(p, q) <= self.tolerance


@dataclass(frozen=True, eq=False)
class Atom:
    point: tuple
    weight: float
    block: np.ndarray = field(repr=False)
    #: set by :func:`normalize` when no trace-one representative exists
    non_normalizable: bool = False

    def __post_init__(self):
        w = float(self.weight)
        if not (np.isfinite(w) and w > 0):
            raise ValueError(f"atom weight must be positive, got {self.weight!r}")
        block = np.array(self.block, dtype=complex)
        if block.ndim != 2 or block.shape[0] != block.shape[1]:
            raise ValueError(f"atom block must be a square matrix, got shape {block.shape}")
        if not np.all(np.isfinite(block)):
            raise ValueError("atom block has non-finite entries")
        block.setflags(write=False)
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "block", block)
        object.__setattr__(self, "point", tuple(np.atleast_1d(np.asarray(self.point, dtype=float)).tolist()))

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.block))


@dataclass(frozen=True, eq=False)
class OperatorValuedMeasure:
    atoms: tuple = ()
    space: PointSpace = PointSpace()

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        for a in self.atoms:
            if not isinstance(a, Atom):
                raise TypeError("atoms must be Atom instances")

    @classmethod
    def from_triples(cls, triples, space: PointSpace | None = None) -> "OperatorValuedMeasure":
        return cls(tuple(Atom(p, w, b) for p, w, b in triples), space or PointSpace())

    def __len__(self) -> int:
        return len(self.atoms)

    @property
    def normalized(self) -> bool:
        return all(abs(a.trace - 1) <= EQUIVALENCE_TOL for a in self.atoms)

    def total_weight(self) -> float:
        return float(sum(a.weight for a in self.atoms))


def trace_norm(block: np.ndarray) -> float:
    """``Tr |B|``, the sum of singular values."""
    if block.size == 0:
        return 0.0
    return float(np.sum(np.linalg.svd(block, compute_uv=False)))


def mov_norm(m: OperatorValuedMeasure) -> float:
    """``sum_k w_k Tr|Gamma_k|``."""
    return float(sum(a.weight * trace_norm(a.block) for a in m.atoms))


def _trace_is_normalizable(tr: complex) -> bool:
    scale = max(abs(tr), 1e-300)
    return tr.real > 0 and abs(tr.imag) <= EQUIVALENCE_TOL * scale and abs(tr) > 1e-14


def normalize(m: OperatorValuedMeasure) -> OperatorValuedMeasure:
    """Equivalent representative with ``Tr Gamma_k = 1``.

    Weights must stay positive, so only atoms with a positive real trace
    can be rescaled.  Atoms whose trace is zero, negative or complex are
    kept as they are and flagged ``non_normalizable``.
    """
    out = []
    for a in m.atoms:
        tr = a.trace
        if abs(tr - 1) <= EQUIVALENCE_TOL:
            out.append(a)
        elif _trace_is_normalizable(tr):
            f = tr.real
            out.append(Atom(a.point, a.weight * f, a.block / f))
        else:
            out.append(replace(a, non_normalizable=True))
    return OperatorValuedMeasure(tuple(out), m.space)


def non_normalizable_atoms(m: OperatorValuedMeasure) -> list[int]:
    return [i for i, a in enumerate(m.atoms) if a.non_normalizable]


def pair(sigma, m: OperatorValuedMeasure) -> complex:
    """``sum_k w_k Tr(sigma(z_k) Gamma_k)``.

    ``sigma`` is either a callable ``point -> matrix`` or a sequence of
    matrices, one per atom.
    """
    if callable(sigma):
        mats = [sigma(a.point) for a in m.atoms]
    else:
        mats = list(sigma)
        if len(mats) != len(m.atoms):
            raise GridMismatchError(f"{len(mats)} symbol values for {len(m.atoms)} atoms")
    total = 0j
    for k, (s, a) in enumerate(zip(mats, m.atoms)):
        s = np.asarray(s, dtype=complex)
        if s.shape != a.block.shape:
            raise GridMismatchError(f"symbol of shape {s.shape} at atom {k} with block {a.block.shape}")
        total += a.weight * np.sum(s.T * a.block)
    return complex(total)


def is_positive(m: OperatorValuedMeasure, tol: float = POSITIVITY_TOL) -> bool:
    """Every block Hermitian with eigenvalues ``>= -tol``."""
    for a in m.atoms:
        B = a.block
        scale = max(1.0, float(np.abs(B).max(initial=0.0)))
        if np.abs(B - B.conj().T).max(initial=0.0) > tol * scale:
            return False
        if B.size and np.linalg.eigvalsh((B + B.conj().T) / 2).min() < -tol:
            return False
    return True


def _match(m1: OperatorValuedMeasure, m2: OperatorValuedMeasure) -> list[int]:
    if len(m1) != len(m2):
        raise DegenerateInputError(f"atom counts differ: {len(m1)} vs {len(m2)}")
    order, used = [], set()
    for a in m1.atoms:
        hit = next((j for j, b in enumerate(m2.atoms) if j not in used and m1.space.same_point(a.point, b.point)), None)
        if hit is None:
            raise DegenerateInputError(f"no atom of the second measure sits at {a.point}")
        used.add(hit)
        order.append(hit)
    return order


def equivalent(m1: OperatorValuedMeasure, m2: OperatorValuedMeasure, tol: float = EQUIVALENCE_TOL) -> bool:
    """Same class: per atom, ``w2 = f w1`` and ``Gamma2 = Gamma1 / f``."""
    for a, j in zip(m1.atoms, _match(m1, m2)):
        b = m2.atoms[j]
        if a.block.shape != b.block.shape:
            return False
        # w Gamma is the class invariant; f = w2 / w1 is then forced
        wa, wb = a.weight * a.block, b.weight * b.block
        if np.abs(wb - wa).max(initial=0.0) > tol * max(np.abs(wa).max(initial=0.0), 1e-300):
            return False
    return True


def rescale(m: OperatorValuedMeasure, factors: Sequence[float]) -> OperatorValuedMeasure:
    """Representative ``(f w, Gamma / f)`` atom by atom."""
    if len(factors) != len(m):
        raise GridMismatchError("one factor per atom is required")
    atoms = []
    for a, f in zip(m.atoms, factors):
        if not f > 0:
            raise ValueError("rescaling factors must be positive")
        atoms.append(Atom(a.point, a.weight * f, a.block / f, a.non_normalizable))
    return OperatorValuedMeasure(tuple(atoms), m.space)


def scalar_measure(points, weights, space: PointSpace | None = None) -> OperatorValuedMeasure:
    """One-dimensional fibres with ``Gamma = 1``: an ordinary atomic measure."""
    return OperatorValuedMeasure.from_triples([(p, w, [[1.0]]) for p, w in zip(points, weights)], space)


# -- serialization ----------------------------------------------------------------


def matrix_to_pairs(mat: np.ndarray) -> list:
    """Row-major nested list of ``[re, im]`` pairs."""
    mat = np.asarray(mat, dtype=complex)
    return [[[float(v.real), float(v.imag)] for v in row] for row in mat]


def pairs_to_matrix(data) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.size == 0:
        return np.zeros((0, 0), dtype=complex)
    return arr[..., 0] + 1j * arr[..., 1]


def to_dict(m: OperatorValuedMeasure) -> dict:
    return {
        "space": m.space.name,
        "atoms": [
            {"point": list(a.point), "weight": a.weight, "block": matrix_to_pairs(a.block),
             "non_normalizable": a.non_normalizable}
            for a in m.atoms
        ],
    }


def from_dict(data: dict) -> OperatorValuedMeasure:
    atoms = tuple(Atom(d["point"], d["weight"], pairs_to_matrix(d["block"]), bool(d.get("non_normalizable", False)))
                  for d in data["atoms"])
    return OperatorValuedMeasure(atoms, PointSpace(data.get("space", "R^n")))
