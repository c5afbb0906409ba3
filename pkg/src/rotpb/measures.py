"""Finite atomic measures and the orderings used to compare them.

Measures are immutable: positions and masses are stored as read-only numpy
arrays and every operation returns a new object.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidMeasureError

POSITION_TOL = 1e-9
MASS_TOL = 1e-9


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    """A finite sum of weighted Dirac masses ``sum_i masses[i] * delta(positions[i])``.

    Parameters
    ----------
    positions : array-like, shape (n_atoms, m)
        Atom locations, ``m`` in {2, 3}.
    masses : array-like, shape (n_atoms,)
        Nonnegative atom masses.

    The constructor validates shapes and signs but does not merge atoms; use
    :func:`normalize` (or :meth:`from_atoms`) for the canonical form.
    """

    positions: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        mass = np.asarray(self.masses, dtype=float).reshape(-1)
        if pos.size == 0:
            dim = pos.shape[1] if pos.ndim == 2 else 2
            pos = pos.reshape(0, dim)
        if pos.ndim != 2:
            raise InvalidMeasureError(f"positions must be 2-d, got shape {pos.shape}")
        if pos.shape[0] != mass.shape[0]:
            raise InvalidMeasureError(
                f"{pos.shape[0]} positions but {mass.shape[0]} masses"
            )
        if pos.shape[1] not in (2, 3):
            raise InvalidMeasureError(f"dimension must be 2 or 3, got {pos.shape[1]}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(mass))):
            raise InvalidMeasureError("non-finite coordinate or mass")
        if np.any(mass < 0):
            raise InvalidMeasureError("atom masses must be nonnegative")
        object.__setattr__(self, "positions", _readonly(pos))
        object.__setattr__(self, "masses", _readonly(mass))

    @classmethod
    def from_atoms(cls, atoms, dim=None):
        """Build a normalized measure from ``[(position, mass), ...]`` pairs."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty(2 if dim is None else dim)
        pos = [tuple(p) for p, _ in atoms]
        mass = [m for _, m in atoms]
        return normalize(cls(pos, mass))

    @classmethod
    def empty(cls, dim=2):
        return cls(np.zeros((0, dim)), np.zeros(0))

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def total_mass(self) -> float:
        return float(self.masses.sum())

    def __len__(self):
        return self.masses.shape[0]

    def __iter__(self):
        for p, m in zip(self.positions, self.masses):
            yield tuple(float(x) for x in p), float(m)

    def __repr__(self):
        body = ", ".join(f"{p}: {m:g}" for p, m in self)
        return f"AtomicMeasure({{{body}}})"

    def index_of(self, point, tol=POSITION_TOL):
        """Index of the atom at ``point`` (per-coordinate tolerance), or None."""
        if len(self) == 0:
            return None
        hit = np.all(np.abs(self.positions - np.asarray(point, float)) <= tol, axis=1)
        idx = np.flatnonzero(hit)
        return int(idx[0]) if idx.size else None

    def mass_at(self, point, tol=POSITION_TOL) -> float:
        i = self.index_of(point, tol)
        return 0.0 if i is None else float(self.masses[i])

    def with_masses(self, masses) -> "AtomicMeasure":
        """Same positions, new masses (atoms of zero mass are kept)."""
        return AtomicMeasure(self.positions, masses)

    def restrict(self, indices) -> "AtomicMeasure":
        indices = list(indices)
        return AtomicMeasure(self.positions[indices].reshape(len(indices), self.dim),
                             self.masses[indices])

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return normalize(AtomicMeasure(np.vstack([self.positions, other.positions]),
                                       np.concatenate([self.masses, other.masses])))

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        """Difference of measures with ``other <= self``; tiny negatives are clipped."""
        if not leq(normalize(other), normalize(self)):
            raise InvalidMeasureError("subtrahend is not below the measure")
        a = normalize(self)
        masses = a.masses.copy()
        for p, m in other:
            i = a.index_of(p)
            if i is not None:
                masses[i] -= m
        return normalize(AtomicMeasure(a.positions, np.clip(masses, 0.0, None)))

    def scale(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(self.positions, self.masses * factor)


def normalize(measure: AtomicMeasure, tol: float = POSITION_TOL) -> AtomicMeasure:
    """Merge atoms sharing a position and drop atoms of zero mass.

    Atoms are merged into the first occurrence, so the result keeps the
    input order of first appearances. Total mass is preserved up to
    summation rounding.
    """
    pos, mass = measure.positions, measure.masses
    keep_pos, keep_mass = [], []
    for p, m in zip(pos, mass):
        for k, q in enumerate(keep_pos):
            if np.all(np.abs(q - p) <= tol):
                keep_mass[k] += m
                break
        else:
            keep_pos.append(p)
            keep_mass.append(float(m))
    out_pos = [p for p, m in zip(keep_pos, keep_mass) if m > 0.0]
    out_mass = [m for m in keep_mass if m > 0.0]
    if not out_pos:
        return AtomicMeasure.empty(measure.dim)
    return AtomicMeasure(np.array(out_pos), np.array(out_mass))


def leq(a: AtomicMeasure, b: AtomicMeasure, tol: float = MASS_TOL) -> bool:
    """``a <= b``: every atom of ``a`` sits on an atom of ``b`` with no more mass."""
    for p, m in a:
        if m <= tol:
            continue
        if m > b.mass_at(p) + tol:
            return False
    return True


@dataclass(frozen=True, eq=False)
class SignedAtomicMeasure:
    """Jordan pair ``positive_part - negative_part`` with disjoint supports."""

    positive_part: AtomicMeasure
    negative_part: AtomicMeasure

    def __post_init__(self):
        pos = normalize(self.positive_part)
        neg = normalize(self.negative_part)
        for p, _ in pos:
            if neg.index_of(p) is not None:
                raise InvalidMeasureError(f"positive and negative parts share atom {p}")
        object.__setattr__(self, "positive_part", pos)
        object.__setattr__(self, "negative_part", neg)

    @classmethod
    def difference(cls, plus: AtomicMeasure, minus: AtomicMeasure) -> "SignedAtomicMeasure":
        """Jordan decomposition of ``plus - minus`` (common atoms cancel)."""
        plus, minus = normalize(plus), normalize(minus)
        pp, pm = [], []
        minus_left = {i: float(m) for i, m in enumerate(minus.masses)}
        for p, m in plus:
            j = minus.index_of(p)
            if j is None:
                pp.append((p, m))
                continue
            net = m - minus_left[j]
            minus_left[j] = 0.0
            if net > 0:
                pp.append((p, net))
            elif net < 0:
                pm.append((p, -net))
        for j, m in minus_left.items():
            if m > 0:
                pm.append((tuple(minus.positions[j]), m))
        dim = plus.dim if len(plus) else minus.dim
        return cls(AtomicMeasure.from_atoms(pp, dim), AtomicMeasure.from_atoms(pm, dim))

    @classmethod
    def zero(cls, dim=2):
        return cls(AtomicMeasure.empty(dim), AtomicMeasure.empty(dim))

    def is_zero(self, tol=MASS_TOL) -> bool:
        return total_variation(self) <= tol


def preceq(a: SignedAtomicMeasure, b: SignedAtomicMeasure, tol: float = MASS_TOL) -> bool:
    """Componentwise order on Jordan parts: ``a+ <= b+`` and ``a- <= b-``."""
    return (leq(a.positive_part, b.positive_part, tol)
            and leq(a.negative_part, b.negative_part, tol))


def total_variation(a: SignedAtomicMeasure) -> float:
    return a.positive_part.total_mass + a.negative_part.total_mass


def supports_overlap(a: AtomicMeasure, b: AtomicMeasure, tol=POSITION_TOL) -> bool:
    return any(b.index_of(p, tol) is not None for p, _ in a)


def diameter(*measures: AtomicMeasure) -> float:
    """Diameter of the bounding box of the union of supports."""
    pts = [m.positions for m in measures if len(m)]
    if not pts:
        return 0.0
    pts = np.vstack(pts)
    return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
