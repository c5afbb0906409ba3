"""Discrete transport paths: embedded directed graphs carrying positive flow.

A :class:`TransportPath` plays the role of a rectifiable 1-current supported on
finitely many straight segments. Flow is conserved at branch vertices; the
boundary is the divergence at boundary vertices (positive at sinks).
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .exceptions import InvalidParameterError, InvalidPathError, NotAcyclicError
from .measures import POSITION_TOL, AtomicMeasure, SignedAtomicMeasure, total_variation

CONSERVATION_TOL = 1e-9
FLOW_TOL = 1e-12


def _check_alpha(alpha):
    if not (0.0 <= alpha < 1.0):
        raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha}")


class TransportPath:
    """Embedded weighted digraph with straight edges.

    Parameters
    ----------
    positions : array-like, shape (n_vertices, m)
    is_boundary : array-like of bool, shape (n_vertices,)
        True for vertices that may carry boundary mass (atoms), False for
        branch vertices where flow must be conserved.
    edges : iterable of (tail, head, flow)
        Negative flows are reversed; parallel and anti-parallel edges between
        the same pair of vertices are summed; edges whose flow vanishes are
        dropped.
    validate : bool
        Check self-loops and flow conservation, raising
        :class:`InvalidPathError` on failure.
    """

    def __init__(self, positions, is_boundary, edges=(), validate=True):
        pos = np.asarray(positions, dtype=float)
        if pos.size == 0:
            pos = pos.reshape(0, pos.shape[1] if pos.ndim == 2 else 2)
        self.positions = pos
        self.positions.setflags(write=False)
        self.is_boundary = np.asarray(is_boundary, dtype=bool).reshape(-1)
        self.is_boundary.setflags(write=False)
        if self.is_boundary.shape[0] != pos.shape[0]:
            raise InvalidPathError("is_boundary must have one entry per vertex")

        net = {}
        order = []
        for tail, head, flow in edges:
            tail, head, flow = int(tail), int(head), float(flow)
            if not (0 <= tail < len(pos) and 0 <= head < len(pos)):
                raise InvalidPathError(f"edge ({tail}, {head}) references a missing vertex")
            if tail == head:
                if validate:
                    raise InvalidPathError(f"self-loop at vertex {tail}")
                continue
            key = (min(tail, head), max(tail, head))
            if key not in net:
                net[key] = 0.0
                order.append(key)
            net[key] += flow if tail == key[0] else -flow
        tails, heads, flows = [], [], []
        for key in order:
            f = net[key]
            if abs(f) <= FLOW_TOL:
                continue
            u, v = key if f > 0 else key[::-1]
            tails.append(u)
            heads.append(v)
            flows.append(abs(f))
        self.tails = np.array(tails, dtype=int)
        self.heads = np.array(heads, dtype=int)
        self.flows = np.array(flows, dtype=float)
        for a in (self.tails, self.heads, self.flows):
            a.setflags(write=False)
        if validate:
            self.validate()

    @classmethod
    def empty(cls, dim=2):
        return cls(np.zeros((0, dim)), np.zeros(0, bool))

    @classmethod
    def single_edge(cls, start, end, flow=1.0):
        return cls([start, end], [True, True], [(0, 1, flow)])

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return self.flows.shape[0]

    @property
    def edges(self):
        return [(int(u), int(v), float(f)) for u, v, f in zip(self.tails, self.heads, self.flows)]

    def lengths(self) -> np.ndarray:
        if self.n_edges == 0:
            return np.zeros(0)
        return np.linalg.norm(self.positions[self.heads] - self.positions[self.tails], axis=1)

    def divergence(self) -> np.ndarray:
        """Inflow minus outflow at every vertex."""
        div = np.zeros(self.n_vertices)
        np.add.at(div, self.heads, self.flows)
        np.add.at(div, self.tails, -self.flows)
        return div

    def validate(self):
        if self.n_edges:
            d = self.positions[self.heads] - self.positions[self.tails]
            coincide = np.all(np.abs(d) <= POSITION_TOL, axis=1)
            if np.any(coincide):
                e = int(np.flatnonzero(coincide)[0])
                raise InvalidPathError(f"edge {e} joins two vertices at the same position")
        div = self.divergence()
        bad = np.flatnonzero(~self.is_boundary & (np.abs(div) > CONSERVATION_TOL))
        if bad.size:
            v = int(bad[0])
            raise InvalidPathError(
                f"flow conservation violated at branch vertex {v} (divergence {div[v]:.3g})"
            )
        return self

    def is_empty(self) -> bool:
        return self.n_edges == 0

    def digraph(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(self.n_vertices))
        for e, (u, v, f) in enumerate(self.edges):
            g.add_edge(u, v, flow=f, id=e)
        return g

    def subpath(self, edge_ids) -> "TransportPath":
        """Path made of the given edges, with vertices renumbered in original order."""
        edge_ids = sorted(edge_ids)
        verts = sorted({int(self.tails[e]) for e in edge_ids} | {int(self.heads[e]) for e in edge_ids})
        remap = {v: i for i, v in enumerate(verts)}
        return TransportPath(
            self.positions[verts].reshape(len(verts), self.dim),
            self.is_boundary[verts],
            [(remap[int(self.tails[e])], remap[int(self.heads[e])], float(self.flows[e]))
             for e in edge_ids],
        )

    def overlay(self, other: "TransportPath") -> "TransportPath":
        """Sum of two paths; vertices at the same position are identified."""
        pos = [tuple(p) for p in self.positions]
        bnd = list(self.is_boundary)
        remap = {}
        for j, p in enumerate(other.positions):
            for i, q in enumerate(pos):
                if np.all(np.abs(np.asarray(q) - p) <= POSITION_TOL):
                    remap[j] = i
                    bnd[i] = bnd[i] or bool(other.is_boundary[j])
                    break
            else:
                remap[j] = len(pos)
                pos.append(tuple(p))
                bnd.append(bool(other.is_boundary[j]))
        edges = self.edges + [(remap[u], remap[v], f) for u, v, f in other.edges]
        if not pos:
            return TransportPath.empty(self.dim)
        return TransportPath(np.array(pos), bnd, edges)

    def __repr__(self):
        return f"TransportPath(n_vertices={self.n_vertices}, n_edges={self.n_edges})"


def boundary(T: TransportPath) -> SignedAtomicMeasure:
    """Boundary measure: divergence at boundary vertices, sinks positive."""
    T.validate()
    div = T.divergence()
    plus = [(tuple(T.positions[v]), div[v]) for v in range(T.n_vertices)
            if T.is_boundary[v] and div[v] > FLOW_TOL]
    minus = [(tuple(T.positions[v]), -div[v]) for v in range(T.n_vertices)
             if T.is_boundary[v] and div[v] < -FLOW_TOL]
    return SignedAtomicMeasure(AtomicMeasure.from_atoms(plus, T.dim),
                               AtomicMeasure.from_atoms(minus, T.dim))


def m_alpha(T: TransportPath, alpha: float) -> float:
    """Gilbert cost ``sum_e flow_e**alpha * length_e``."""
    _check_alpha(alpha)
    if T.n_edges == 0:
        return 0.0
    return float(np.sum(T.flows ** alpha * T.lengths()))


def mass(T: TransportPath) -> float:
    """Flow-weighted length ``sum_e flow_e * length_e``."""
    if T.n_edges == 0:
        return 0.0
    return float(np.sum(T.flows * T.lengths()))


def energy(T: TransportPath, h, alpha: float) -> float:
    """``M_alpha(T) - integral of h against boundary(T)``.

    Sink-side boundary mass is valued with ``h.sink_value`` and source-side
    mass with ``h.source_value``.
    """
    bd = boundary(T)
    gain = sum(h.sink_value(p) * m for p, m in bd.positive_part)
    cost = sum(h.source_value(p) * m for p, m in bd.negative_part)
    return m_alpha(T, alpha) - gain + cost


def energy_const(T: TransportPath, c: float, alpha: float) -> float:
    """``M_alpha(T) - c * M(boundary T)``."""
    return m_alpha(T, alpha) - c * total_variation(boundary(T))


def connected_components(T: TransportPath) -> list:
    """Weakly connected components of the edge set, ordered by smallest vertex."""
    if T.n_edges == 0:
        return []
    g = T.digraph()
    comps = []
    for verts in nx.weakly_connected_components(g):
        if len(verts) < 2:
            continue
        edge_ids = [d["id"] for _, _, d in g.subgraph(verts).edges(data=True)]
        comps.append((min(verts), edge_ids))
    comps.sort()
    return [T.subpath(ids) for _, ids in comps]


def component_edge_sets(T: TransportPath) -> list:
    """Edge-id lists of the weakly connected components, same order as above."""
    if T.n_edges == 0:
        return []
    g = T.digraph()
    comps = []
    for verts in nx.weakly_connected_components(g):
        if len(verts) < 2:
            continue
        comps.append((min(verts), sorted(d["id"] for _, _, d in g.subgraph(verts).edges(data=True)),
                      sorted(verts)))
    comps.sort()
    return [(ids, verts) for _, ids, verts in comps]


def is_acyclic(T: TransportPath) -> bool:
    if T.n_edges == 0:
        return True
    return nx.is_directed_acyclic_graph(T.digraph())


@dataclass(frozen=True)
class PathDecomposition:
    """Weighted simple source-to-sink vertex sequences."""

    paths: tuple
    weights: tuple

    def __len__(self):
        return len(self.paths)

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))

    def edge_flows(self, T: TransportPath) -> np.ndarray:
        """Flow on each edge of ``T`` recovered by summing path weights."""
        index = {(int(u), int(v)): e for e, (u, v) in enumerate(zip(T.tails, T.heads))}
        out = np.zeros(T.n_edges)
        for seq, w in zip(self.paths, self.weights):
            for u, v in zip(seq[:-1], seq[1:]):
                out[index[(u, v)]] += w
        return out

    def weighted_length(self, T: TransportPath) -> float:
        total = 0.0
        for seq, w in zip(self.paths, self.weights):
            pts = T.positions[list(seq)]
            total += w * float(np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        return total


def good_decomposition(T: TransportPath) -> PathDecomposition:
    """Peel weighted source-to-sink paths off an acyclic path.

    Each step starts at the lowest-numbered vertex with remaining supply,
    follows the lowest-numbered outgoing edge with remaining flow, and stops
    at the first vertex with remaining demand (or with no way forward). The
    bottleneck of edge flows, supply and demand is then subtracted.
    """
    if not is_acyclic(T):
        raise NotAcyclicError("good decomposition requires an acyclic path")
    residual = T.flows.astype(float).copy()
    div = T.divergence()
    supply = np.where(T.is_boundary, np.clip(-div, 0, None), 0.0)
    demand = np.where(T.is_boundary, np.clip(div, 0, None), 0.0)
    out_edges = [[] for _ in range(T.n_vertices)]
    for e in range(T.n_edges):
        out_edges[int(T.tails[e])].append(e)
    scale = max(float(T.flows.max()) if T.n_edges else 1.0, 1.0)
    tol = 1e-12 * scale

    paths, weights = [], []
    while True:
        starts = np.flatnonzero(supply > tol)
        start = next((int(s) for s in starts
                      if any(residual[e] > tol for e in out_edges[int(s)])), None)
        if start is None:
            break
        seq, used = [start], []
        v = start
        while True:
            if v != start and demand[v] > tol:
                break
            nxt = next((e for e in out_edges[v] if residual[e] > tol), None)
            if nxt is None:
                break
            used.append(nxt)
            v = int(T.heads[nxt])
            seq.append(v)
        w = min([supply[start], demand[v]] + [residual[e] for e in used])
        if w <= tol:
            # Rounding leftovers: absorb and stop tracing this start.
            supply[start] = 0.0
            continue
        for e in used:
            residual[e] -= w
        supply[start] -= w
        demand[v] -= w
        paths.append(tuple(seq))
        weights.append(float(w))
    return PathDecomposition(tuple(paths), tuple(weights))


def mass_bound_holds(T: TransportPath, alpha: float, tol: float = 1e-9) -> bool:
    """``M(T) <= (M(boundary T) / 2)**(1 - alpha) * M_alpha(T)`` up to ``tol``."""
    half = total_variation(boundary(T)) / 2.0
    return mass(T) <= half ** (1.0 - alpha) * m_alpha(T, alpha) + tol


__all__ = [
    "TransportPath",
    "PathDecomposition",
    "boundary",
    "m_alpha",
    "mass",
    "energy",
    "energy_const",
    "connected_components",
    "component_edge_sets",
    "good_decomposition",
    "is_acyclic",
    "mass_bound_holds",
]
