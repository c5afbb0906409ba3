"""Branched transport distance between balanced atomic measures.

Exact mode relaxes every full Steiner topology on the atoms and keeps the
cheapest; a full topology whose branch vertices slide onto terminals or onto
each other reproduces every degenerate tree, and edges carrying zero flow
turn it into a forest, so the minimum over full topologies is the minimum
over all finite trees and forests. Heuristic mode (beyond the oracle limit)
runs multistart leaf-reinsertion local search and is not certified.
"""

from __future__ import annotations

import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .exceptions import BalanceError, BoundInapplicableError, InvalidParameterError, OracleTooLargeError
from .measures import MASS_TOL, AtomicMeasure, normalize
from .relax import RelaxationConfig, edge_weights, relax_batch, tree_cost
from .topology import Topology, balanced_partitions, full_topologies
from .transport import FLOW_TOL, TransportPath, m_alpha
from .parallel import worker_count

TIE_TOL = 1e-12


class OracleResult(NamedTuple):
    value: float
    path: TransportPath
    certified: bool
    encoding: str = ""


class Candidate(NamedTuple):
    """One inner problem: terminals with signed supplies (+source, -sink)."""

    terminals: np.ndarray
    supply: np.ndarray


@lru_cache(maxsize=None)
def _full_topologies_for(n_terminals):
    # Edge structure does not depend on which terminals are sources.
    topos = full_topologies(1, n_terminals - 1)
    edges = np.array([t.edges for t in topos], dtype=int)
    masks = np.array([t.side_masks for t in topos], dtype=float)
    return topos, edges, masks


def _union_find(n):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    return parent, find


def build_path(terminals, supply, topo: Topology, steiner, alpha, cfg=RelaxationConfig(),
               diam=None) -> TransportPath:
    """Turn relaxed branch positions into a pruned :class:`TransportPath`.

    Branch vertices are first snapped onto adjacent vertices whenever that
    does not raise the cost; then edges shorter than ``collapse_tol * diam``
    are contracted, degree-2 branch vertices are spliced out and zero-flow
    edges dropped. Terminal supplies are untouched, so the boundary is exact.
    """
    terminals = np.asarray(terminals, float)
    supply = np.asarray(supply, float)
    n_t, m = terminals.shape
    pos = np.vstack([terminals, np.asarray(steiner, float).reshape(-1, m)])
    flows = topo.edge_flows(supply)
    live = np.abs(flows) > FLOW_TOL
    edges = np.array(topo.edges, int).reshape(-1, 2)[live]
    flows = flows[live]
    w = edge_weights(flows, alpha)
    if diam is None:
        diam = float(np.linalg.norm(np.ptp(terminals, axis=0))) or 1.0

    # Snap branch vertices onto neighbours while it does not increase cost.
    n_v = pos.shape[0]
    neighbours = defaultdict(set)
    for u, v in edges:
        neighbours[u].add(v)
        neighbours[v].add(u)
    cost = float(tree_cost(pos, edges, w)) if len(edges) else 0.0
    changed = True
    passes = 0
    while changed and passes < 2 * n_v:
        changed = False
        passes += 1
        for s in range(n_t, n_v):
            for u in sorted(neighbours[s]):
                if np.array_equal(pos[s], pos[u]):
                    continue
                trial = pos.copy()
                trial[s] = pos[u]
                c = float(tree_cost(trial, edges, w))
                if c <= cost + 1e-15 * max(cost, 1.0):
                    pos, cost, changed = trial, c, True

    # Contract short edges; never merge two terminals.
    parent, find = _union_find(n_v)
    thresh = cfg.collapse_tol * diam
    has_terminal = [v < n_t for v in range(n_v)]
    for u, v in edges:
        if np.linalg.norm(pos[u] - pos[v]) < thresh:
            ru, rv = find(u), find(v)
            if ru == rv or (has_terminal[ru] and has_terminal[rv]):
                continue
            if has_terminal[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            has_terminal[ru] = has_terminal[ru] or has_terminal[rv]
    groups = defaultdict(list)
    for v in range(n_v):
        groups[find(v)].append(v)
    rep_pos = {}
    for r, members in groups.items():
        terms = [v for v in members if v < n_t]
        rep_pos[r] = terminals[terms[0]] if terms else pos[members].mean(axis=0)

    # Directed edge list on representatives, parallel edges summed.
    net = defaultdict(float)
    for (u, v), f in zip(edges, flows):
        ru, rv = find(u), find(v)
        if ru == rv:
            continue
        if ru < rv:
            net[(ru, rv)] += f
        else:
            net[(rv, ru)] -= f
    directed = []
    for (u, v), f in net.items():
        if abs(f) > FLOW_TOL:
            directed.append((u, v, f) if f > 0 else (v, u, -f))

    # Splice out degree-2 branch vertices (conservation makes the flows equal).
    while True:
        degree = defaultdict(list)
        for i, (u, v, f) in enumerate(directed):
            degree[u].append(i)
            degree[v].append(i)
        target = next((b for b, es in degree.items()
                       if b >= n_t and len(es) == 2), None)
        if target is None:
            break
        i, j = degree[target]
        (a1, b1, f1), (a2, b2, f2) = directed[i], directed[j]
        if b1 == target and a2 == target:
            new = (a1, b2, f1)
        elif b2 == target and a1 == target:
            new = (a2, b1, f2)
        else:
            break
        directed = [e for k, e in enumerate(directed) if k not in (i, j)]
        if new[0] != new[1]:
            directed.append(new)

    used = sorted({u for u, _, _ in directed} | {v for _, v, _ in directed})
    if not used:
        return TransportPath.empty(m)
    index = {v: i for i, v in enumerate(used)}
    return TransportPath(
        np.array([rep_pos[v] for v in used]),
        [v < n_t for v in used],
        [(index[u], index[v], f) for u, v, f in directed],
    )


def _pick(values, encodings):
    """Index of the smallest value; near-ties go to the smallest encoding."""
    best = float(np.min(values))
    tol = TIE_TOL * max(1.0, abs(best))
    tied = [i for i, v in enumerate(values) if v <= best + tol]
    return min(tied, key=lambda i: encodings[i])


def best_trees(candidates, alpha, cfg=RelaxationConfig(), diam=None):
    """Exact connected-or-zero-flow-forest optimum for each candidate.

    All (candidate, full topology) pairs with the same terminal count are
    relaxed as a single batch.

    Returns
    -------
    list of OracleResult, aligned with ``candidates``.
    """
    out = [None] * len(candidates)
    by_size = defaultdict(list)
    for i, cand in enumerate(candidates):
        n = len(cand.supply)
        if n > cfg.oracle_limit:
            raise OracleTooLargeError(
                f"{n} atoms exceed the exact-enumeration limit of {cfg.oracle_limit}"
            )
        by_size[n].append(i)
    for n, idxs in sorted(by_size.items()):
        if n < 2:
            for i in idxs:
                out[i] = OracleResult(0.0, TransportPath.empty(candidates[i].terminals.shape[1]), True)
            continue
        topos, edges, masks = _full_topologies_for(n)
        n_topo = len(topos)
        terms = np.stack([candidates[i].terminals for i in idxs])
        sup = np.stack([candidates[i].supply for i in idxs])
        flows = np.einsum("ct,ket->cke", sup, masks)
        w = edge_weights(flows, alpha).reshape(len(idxs) * n_topo, -1)
        batch_edges = np.broadcast_to(edges[None], (len(idxs),) + edges.shape).reshape(-1, edges.shape[1], 2)
        batch_terms = np.repeat(terms, n_topo, axis=0)
        groups = np.repeat(np.arange(len(idxs)), n_topo)
        steiner, cost, _ = _relax_parallel(batch_edges, w, batch_terms, n - 2, cfg, groups)
        cost = cost.reshape(len(idxs), n_topo)
        steiner = steiner.reshape(len(idxs), n_topo, n - 2, terms.shape[2])
        encodings = [t.encoding for t in topos]
        for row, i in enumerate(idxs):
            j = _pick(cost[row], encodings)
            path = build_path(terms[row], sup[row], topos[j], steiner[row, j], alpha, cfg, diam)
            out[i] = OracleResult(m_alpha(path, alpha), path, True, encodings[j])
    return out


def _relax_parallel(edges, weights, terminals, n_steiner, cfg, groups=None):
    """Split a batch over worker threads; results are reassembled in order."""
    jobs = worker_count(cfg.n_jobs)
    B = len(weights)
    if jobs <= 1 or B < 2 * jobs:
        return relax_batch(edges, weights, terminals, n_steiner, cfg, groups=groups)
    chunks = np.array_split(np.arange(B), jobs)
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(
            lambda ix: relax_batch(edges[ix], weights[ix], terminals[ix], n_steiner, cfg,
                                   groups=None if groups is None else groups[ix]), chunks))
    return tuple(np.concatenate([p[k] for p in parts]) for k in range(3))


def _as_candidate(mu_t: AtomicMeasure, nu_t: AtomicMeasure) -> Candidate:
    return Candidate(np.vstack([mu_t.positions, nu_t.positions]),
                     np.concatenate([mu_t.masses, -nu_t.masses]))


def _check_balanced(mu_t, nu_t):
    if abs(mu_t.total_mass - nu_t.total_mass) > MASS_TOL:
        raise BalanceError(
            f"measures must have equal mass, got {mu_t.total_mass} and {nu_t.total_mass}"
        )


def solve_rot(mu_t: AtomicMeasure, nu_t: AtomicMeasure, alpha: float,
              cfg: RelaxationConfig = RelaxationConfig(), mode: str = "exact",
              diam=None) -> OracleResult:
    """Optimal transport path between balanced atomic measures.

    ``mode="exact"`` enumerates topologies and refuses instances above
    ``cfg.oracle_limit`` atoms; ``mode="heuristic"`` falls back to local
    search above the limit and reports ``certified=False`` there.
    """
    if not (0.0 <= alpha < 1.0):
        raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha}")
    if mode not in ("exact", "heuristic"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    mu_t, nu_t = normalize(mu_t), normalize(nu_t)
    _check_balanced(mu_t, nu_t)
    dim = mu_t.dim if len(mu_t) else nu_t.dim
    if len(mu_t) == 0 or len(nu_t) == 0:
        return OracleResult(0.0, TransportPath.empty(dim), True)
    n = len(mu_t) + len(nu_t)
    cand = _as_candidate(mu_t, nu_t)
    if n > cfg.oracle_limit:
        if mode == "exact":
            raise OracleTooLargeError(
                f"{n} atoms exceed the exact-enumeration limit of {cfg.oracle_limit}"
            )
        return heuristic_tree(cand, alpha, cfg, diam)

    best = best_trees([cand], alpha, cfg, diam)[0]
    # Explicit forests over balanced groups.
    for parts in balanced_partitions(cand.supply):
        subs = [Candidate(cand.terminals[list(g)], cand.supply[list(g)]) for g in parts]
        results = best_trees(subs, alpha, cfg, diam)
        value = sum(r.value for r in results)
        if value < best.value - TIE_TOL * max(1.0, best.value):
            path = results[0].path
            for r in results[1:]:
                path = path.overlay(r.path)
            best = OracleResult(m_alpha(path, alpha), path, True,
                                "+".join(r.encoding for r in results))
    return best


def d_alpha(mu_t: AtomicMeasure, nu_t: AtomicMeasure, alpha: float,
            cfg: RelaxationConfig = RelaxationConfig(), mode: str = "exact"):
    """``(value, path)``: minimal Gilbert cost over paths from ``mu_t`` to ``nu_t``."""
    res = solve_rot(mu_t, nu_t, alpha, cfg, mode)
    return res.value, res.path


# --- heuristic search -------------------------------------------------------

def _insert(edges, edge_index, terminal, steiner):
    u, v = edges[edge_index]
    new = edges[:edge_index] + edges[edge_index + 1:]
    return new + [(u, steiner), (steiner, v), (terminal, steiner)]


def _remove_leaf(edges, terminal):
    (e_t,) = [e for e in edges if terminal in e]
    s = e_t[0] if e_t[1] == terminal else e_t[1]
    others = [e for e in edges if s in e and e != e_t]
    a, b = [x if y == s else y for x, y in others]
    rest = [e for e in edges if s not in e]
    return rest + [(a, b)], s


def _relax_edge_sets(edge_sets, cand, alpha, cfg):
    n = len(cand.supply)
    topos = [Topology(1, n - 1, n - 2, tuple(sorted((min(u, v), max(u, v)) for u, v in es)))
             for es in edge_sets]
    edges = np.array([t.edges for t in topos], int)
    flows = np.stack([t.edge_flows(cand.supply) for t in topos])
    w = edge_weights(flows, alpha)
    steiner, cost, _ = relax_batch(edges, w, cand.terminals, n - 2, cfg,
                                   groups=np.zeros(len(topos), int))
    return topos, steiner, cost


def heuristic_tree(cand: Candidate, alpha, cfg=RelaxationConfig(), diam=None) -> OracleResult:
    """Multistart greedy insertion followed by leaf-reinsertion local search."""
    n = len(cand.supply)
    if n == 2:
        return best_trees([cand], alpha, RelaxationConfig(oracle_limit=max(cfg.oracle_limit, 2)))[0]
    rng = np.random.default_rng(cfg.seed)
    best = None
    for _ in range(cfg.multistarts):
        order = [int(x) for x in rng.permutation(n)]
        # Greedy construction: each terminal goes onto the cheapest edge.
        edges = [(order[0], n), (order[1], n), (order[2], n)]
        for step, t in enumerate(order[3:], start=1):
            s = n + step
            trials = [_insert(edges, i, t, s) for i in range(len(edges))]
            _, _, cost = _relax_partial(trials, cand, alpha, cfg, order[: 3 + step])
            edges = trials[int(np.argmin(cost))]
        edges = _canon_steiner(edges, n)
        # Local search: remove a terminal and reinsert it on the best edge.
        improved = True
        topos, steiner, cost = _relax_edge_sets([edges], cand, alpha, cfg)
        current = float(cost[0])
        while improved:
            improved = False
            for t in range(n):
                reduced, s = _remove_leaf(list(edges), t)
                trials = [_canon_steiner(_insert(reduced, i, t, s), n) for i in range(len(reduced))]
                topos, steiner, cost = _relax_edge_sets(trials, cand, alpha, cfg)
                j = int(np.argmin(cost))
                if cost[j] < current - 1e-12 * max(1.0, current):
                    edges, current, improved = trials[j], float(cost[j]), True
        topos, steiner, cost = _relax_edge_sets([edges], cand, alpha, cfg)
        path = build_path(cand.terminals, cand.supply, topos[0], steiner[0], alpha, cfg, diam)
        res = OracleResult(m_alpha(path, alpha), path, False, topos[0].encoding)
        if best is None or res.value < best.value - TIE_TOL:
            best = res
    return best


def _relax_partial(edge_sets, cand, alpha, cfg, placed):
    """Relax trees spanning only the ``placed`` terminals.

    Flows are taken from the supplies of placed terminals rebalanced by
    spreading the missing mass evenly over placed terminals of the lighter
    side; this is only used to rank insertion points.
    """
    placed = sorted(placed)
    sup = np.zeros_like(cand.supply)
    sup[placed] = cand.supply[placed]
    excess = sup.sum()
    if abs(excess) > FLOW_TOL:
        side = [i for i in placed if np.sign(sup[i]) == -np.sign(excess)]
        if not side:
            side = placed
        sup[side] -= excess / len(side)
    n_all = len(cand.supply)
    relabel = {v: i for i, v in enumerate(placed)}
    k = len(placed) - 2
    n_p = len(placed)
    local = []
    for es in edge_sets:
        steiner_ids = sorted({x for e in es for x in e if x >= n_all})
        ids = dict(relabel)
        ids.update({s: n_p + i for i, s in enumerate(steiner_ids)})
        local.append(tuple(sorted((min(ids[u], ids[v]), max(ids[u], ids[v])) for u, v in es)))
    topos = [Topology(1, n_p - 1, k, es) for es in local]
    edges = np.array([t.edges for t in topos], int)
    flows = np.stack([t.edge_flows(sup[placed]) for t in topos])
    w = edge_weights(flows, alpha)
    return relax_batch(edges, w, cand.terminals[placed], k, cfg, groups=np.zeros(len(topos), int))


def _canon_steiner(edges, n):
    """Renumber branch vertices to ``n .. n + k - 1`` in order of appearance."""
    mapping = {}
    for e in edges:
        for x in e:
            if x >= n and x not in mapping:
                mapping[x] = n + len(mapping)
    return [tuple(mapping.get(x, x) for x in e) for e in edges]


# --- constants --------------------------------------------------------------

def c_constant(m: int, alpha: float) -> float:
    """Dimensional constant ``sqrt(m) / (2 (2**(1 - m (1 - alpha)) - 1))``."""
    if not (1.0 - 1.0 / m < alpha < 1.0):
        raise BoundInapplicableError(
            f"the upper bound needs 1 - 1/m < alpha < 1; got alpha={alpha}, m={m}"
        )
    return math.sqrt(m) / (2.0 * (2.0 ** (1.0 - m * (1.0 - alpha)) - 1.0))


def c_upper_bound(total_mass: float, diam: float, alpha: float, m: int) -> float:
    """Upper bound ``C_{m,alpha} * diam * total_mass**alpha`` on the distance."""
    return c_constant(m, alpha) * diam * total_mass ** alpha
