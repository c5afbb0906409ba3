"""Combinatorial skeletons for candidate transport paths.

Terminals are numbered ``0 .. n_sources-1`` (sources) followed by
``n_sources .. n_terminals-1`` (sinks); branch (Steiner) vertices follow the
terminals. A :class:`Topology` is a tree or forest on these vertices in which
every branch vertex has degree exactly 3.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .exceptions import InvalidParameterError, OracleTooLargeError

DEFAULT_ORACLE_LIMIT = 6


@dataclass(frozen=True)
class Topology:
    n_sources: int
    n_sinks: int
    n_steiner: int
    edges: tuple = field(compare=False)

    @property
    def n_terminals(self) -> int:
        return self.n_sources + self.n_sinks

    @property
    def n_vertices(self) -> int:
        return self.n_terminals + self.n_steiner

    @cached_property
    def adjacency(self):
        adj = defaultdict(list)
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    @cached_property
    def side_masks(self) -> np.ndarray:
        """``mask[e, t]`` is True when terminal ``t`` lies on the tail side of edge ``e``.

        The tail side of ``(u, v)`` is the part reachable from ``u`` once the
        edge is removed.
        """
        n_t = self.n_terminals
        masks = np.zeros((len(self.edges), n_t), dtype=bool)
        adj = self.adjacency
        for e, (u, v) in enumerate(self.edges):
            seen = {u, v}
            stack = [u]
            while stack:
                x = stack.pop()
                if x < n_t:
                    masks[e, x] = True
                for y in adj[x]:
                    if y not in seen:
                        seen.add(y)
                        stack.append(y)
            if v < n_t:
                masks[e, v] = False
        return masks

    def edge_flows(self, supply) -> np.ndarray:
        """Signed flow from tail to head induced by terminal supplies.

        ``supply`` holds +mass at sources and -mass at sinks (array broadcast
        over a leading batch axis is allowed).
        """
        return np.asarray(supply, float) @ self.side_masks.T.astype(float)

    @cached_property
    def encoding(self) -> str:
        """Canonical string, invariant under relabeling of branch vertices."""
        adj = self.adjacency
        n_t = self.n_terminals

        def canon(v, parent):
            kids = sorted(canon(w, v) for w in adj[v] if w != parent)
            label = f"t{v}" if v < n_t else "s"
            return label + ("(" + ",".join(kids) + ")" if kids else "")

        seen, parts = set(), []
        for root in range(n_t):
            if root in seen:
                continue
            stack = [root]
            while stack:
                x = stack.pop()
                if x in seen:
                    continue
                seen.add(x)
                stack.extend(adj[x])
            if adj[root]:
                parts.append(canon(root, None))
        return ";".join(sorted(parts))

    def is_tree(self) -> bool:
        return len(self.edges) == self.n_vertices - 1 and self.is_connected()

    def is_connected(self) -> bool:
        if self.n_vertices == 0:
            return True
        adj, seen, stack = self.adjacency, {0}, [0]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return len(seen) == self.n_vertices


def _double_factorial(n):
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def count_full_topologies(n_terminals: int) -> int:
    """Number of full Steiner topologies on labeled terminals, (2n-5)!!."""
    if n_terminals < 2:
        return 0
    if n_terminals == 2:
        return 1
    return _double_factorial(2 * n_terminals - 5)


def full_topologies(n_sources: int, n_sinks: int):
    """All full Steiner topologies: terminals are leaves, n-2 branch vertices.

    Built by inserting terminals one at a time onto every edge of the trees
    generated so far; each topology is produced exactly once.
    """
    n = n_sources + n_sinks
    if n < 2:
        return []
    if n == 2:
        return [Topology(n_sources, n_sinks, 0, ((0, 1),))]
    trees = [((0, n), (1, n), (2, n))]
    for t in range(3, n):
        s = n + t - 2
        grown = []
        for edges in trees:
            for i, (u, v) in enumerate(edges):
                new = edges[:i] + ((u, s), (s, v), (t, s)) + edges[i + 1:]
                grown.append(new)
        trees = grown
    return [Topology(n_sources, n_sinks, n - 2, tuple(sorted(e))) for e in trees]


def _prufer_decode(seq, n_vertices):
    degree = [1] * n_vertices
    for x in seq:
        degree[x] += 1
    edges = []
    for x in seq:
        leaf = next(i for i in range(n_vertices) if degree[i] == 1)
        edges.append((min(leaf, x), max(leaf, x)))
        degree[leaf] -= 1
        degree[x] -= 1
    u, v = [i for i in range(n_vertices) if degree[i] == 1]
    edges.append((u, v))
    return tuple(sorted(edges))


def _trees_with_branch_count(n_sources, n_sinks, k, allow_same_side_edges):
    n = n_sources + n_sinks
    N = n + k
    if N < 2:
        return
    if N == 2:
        if k == 0:
            yield Topology(n_sources, n_sinks, 0, ((0, 1),))
        return
    length = N - 2
    steiner = list(range(n, N))
    terminals = list(range(n))
    # Branch vertices appear exactly twice in the Pruefer code (degree 3).
    n_free = length - 2 * k
    if n_free < 0:
        return
    seen = set()
    for steiner_slots in itertools.combinations(range(length), 2 * k):
        free_slots = [i for i in range(length) if i not in steiner_slots]
        # Fix the first occurrence ordering to cut relabeling duplicates.
        for arrangement in _pair_arrangements(steiner, len(steiner_slots)):
            for fill in itertools.product(terminals, repeat=n_free):
                seq = [0] * length
                for slot, s in zip(steiner_slots, arrangement):
                    seq[slot] = s
                for slot, t in zip(free_slots, fill):
                    seq[slot] = t
                edges = _prufer_decode(seq, N)
                if not allow_same_side_edges and _has_same_side_edge(edges, n_sources, n):
                    continue
                topo = Topology(n_sources, n_sinks, k, edges)
                key = topo.encoding
                if key in seen:
                    continue
                seen.add(key)
                yield topo


def _pair_arrangements(symbols, n_slots):
    """Sequences using each symbol exactly twice, first occurrences in order."""
    if not symbols:
        yield ()
        return

    def rec(prefix, next_new, counts):
        if len(prefix) == n_slots:
            yield tuple(prefix)
            return
        for s in symbols[:next_new]:
            if counts[s] == 1:
                counts[s] += 1
                yield from rec(prefix + [s], next_new, counts)
                counts[s] -= 1
        if next_new < len(symbols):
            s = symbols[next_new]
            counts[s] = 1
            yield from rec(prefix + [s], next_new + 1, counts)
            counts[s] = 0

    yield from rec([], 0, {s: 0 for s in symbols})


def _has_same_side_edge(edges, n_sources, n_terminals):
    for u, v in edges:
        if u < n_terminals and v < n_terminals and (u < n_sources) == (v < n_sources):
            return True
    return False


def balanced_partitions(supply, tol=1e-9):
    """Partitions of terminal indices into >= 2 groups with zero net supply.

    Every group must contain at least one source and one sink.
    """
    supply = np.asarray(supply, float)
    idx = list(range(len(supply)))

    def rec(rest):
        if not rest:
            yield []
            return
        first, others = rest[0], rest[1:]
        for r in range(len(others) + 1):
            for combo in itertools.combinations(others, r):
                group = (first,) + combo
                vals = supply[list(group)]
                if abs(vals.sum()) > tol or not (np.any(vals > 0) and np.any(vals < 0)):
                    continue
                remaining = [i for i in others if i not in combo]
                for tail in rec(remaining):
                    yield [group] + tail

    for parts in rec(idx):
        if len(parts) >= 2:
            yield parts


def _relabel_group(topo: Topology, group, offset_steiner, n_sources, n_terminals):
    """Embed a topology built on ``group`` into the full terminal numbering."""
    local_sources = [g for g in group if g < n_sources]
    local_sinks = [g for g in group if g >= n_sources]
    order = local_sources + local_sinks
    mapping = {i: v for i, v in enumerate(order)}
    for j in range(topo.n_steiner):
        mapping[topo.n_terminals + j] = n_terminals + offset_steiner + j
    return tuple(sorted((min(mapping[u], mapping[v]), max(mapping[u], mapping[v]))
                        for u, v in topo.edges))


def enumerate_topologies(n_sources: int, n_sinks: int, max_branch: int | None = None,
                         supply=None, oracle_limit: int = DEFAULT_ORACLE_LIMIT,
                         allow_same_side_edges: bool = False):
    """Yield every tree topology with at most ``max_branch`` branch vertices.

    Branch vertices have degree 3; terminals may have any degree. Unless
    ``allow_same_side_edges`` is set, trees with a direct edge between two
    sources or two sinks are skipped: such a tree is the limit of a tree with
    a branch vertex placed on the shared atom, which the relaxation reaches
    on its own.

    When ``supply`` (+mass at sources, -mass at sinks) is given, forests
    obtained by splitting the terminals into balanced groups are yielded too.
    """
    n = n_sources + n_sinks
    if n > oracle_limit:
        raise OracleTooLargeError(
            f"{n} atoms exceed the exact-enumeration limit of {oracle_limit}"
        )
    if max_branch is None:
        max_branch = max(n - 2, 0)
    if max_branch < 0 or max_branch > max(n - 2, 0):
        raise InvalidParameterError(f"max_branch must lie in [0, {max(n - 2, 0)}]")
    if n_sources < 1 or n_sinks < 1:
        return
    for k in range(max_branch + 1):
        yield from _trees_with_branch_count(n_sources, n_sinks, k, allow_same_side_edges)
    if supply is None:
        return
    for parts in balanced_partitions(supply):
        per_group = []
        for group in parts:
            gs = sum(1 for g in group if g < n_sources)
            per_group.append(list(enumerate_topologies(
                gs, len(group) - gs, None, None, oracle_limit, allow_same_side_edges)))
        for combo in itertools.product(*per_group):
            k_total = sum(t.n_steiner for t in combo)
            if k_total > max_branch:
                continue
            edges, offset = [], 0
            for group, t in zip(parts, combo):
                edges.extend(_relabel_group(t, group, offset, n_sources, n))
                offset += t.n_steiner
            yield Topology(n_sources, n_sinks, k_total, tuple(sorted(edges)))
