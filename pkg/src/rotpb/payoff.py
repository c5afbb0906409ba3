"""Boundary payoff functions ``h`` on the support of ``nu - mu``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import PayoffDomainError
from .measures import POSITION_TOL, AtomicMeasure


@dataclass(frozen=True)
class ConstantC:
    """Payoff ``2c`` at every sink and ``0`` at every source.

    With this payoff the energy of a balanced path reduces to
    ``M_alpha(T) - c * M(boundary T)``.
    """

    c: float

    def source_value(self, point) -> float:
        return 0.0

    def sink_value(self, point) -> float:
        return 2.0 * self.c

    def source_values(self, mu: AtomicMeasure) -> np.ndarray:
        return np.zeros(len(mu))

    def sink_values(self, nu: AtomicMeasure) -> np.ndarray:
        return np.full(len(nu), 2.0 * self.c)


@dataclass(frozen=True, eq=False)
class PerAtom:
    """Explicit payoff value at each source atom and each sink atom."""

    source_positions: np.ndarray
    source_vals: np.ndarray
    sink_positions: np.ndarray
    sink_vals: np.ndarray

    def __post_init__(self):
        for name in ("source_positions", "sink_positions"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.size == 0:
                a = a.reshape(0, 2)
            object.__setattr__(self, name, a)
        for name in ("source_vals", "sink_vals"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float).reshape(-1))
        if len(self.source_vals) != len(self.source_positions):
            raise PayoffDomainError("one payoff value per source atom is required")
        if len(self.sink_vals) != len(self.sink_positions):
            raise PayoffDomainError("one payoff value per sink atom is required")

    @classmethod
    def from_measures(cls, mu: AtomicMeasure, source_values, nu: AtomicMeasure, sink_values):
        source_values = np.asarray(source_values, float).reshape(-1)
        sink_values = np.asarray(sink_values, float).reshape(-1)
        if len(source_values) != len(mu) or len(sink_values) != len(nu):
            raise PayoffDomainError(
                f"payoff needs {len(mu)} source and {len(nu)} sink values, got "
                f"{len(source_values)} and {len(sink_values)}"
            )
        return cls(mu.positions, source_values, nu.positions, sink_values)

    @staticmethod
    def _lookup(positions, values, point, side):
        if len(positions):
            hit = np.all(np.abs(positions - np.asarray(point, float)) <= POSITION_TOL, axis=1)
            idx = np.flatnonzero(hit)
            if idx.size:
                return float(values[idx[0]])
        raise PayoffDomainError(f"no payoff value for {side} atom at {tuple(point)}")

    def source_value(self, point) -> float:
        return self._lookup(self.source_positions, self.source_vals, point, "source")

    def sink_value(self, point) -> float:
        return self._lookup(self.sink_positions, self.sink_vals, point, "sink")

    def source_values(self, mu: AtomicMeasure) -> np.ndarray:
        return np.array([self.source_value(p) for p, _ in mu])

    def sink_values(self, nu: AtomicMeasure) -> np.ndarray:
        return np.array([self.sink_value(p) for p, _ in nu])


def check_payoff_covers(h, mu: AtomicMeasure, nu: AtomicMeasure):
    """Raise :class:`PayoffDomainError` unless ``h`` is defined on every atom."""
    h.source_values(mu)
    h.sink_values(nu)
