"""Branch-point relaxation for fixed topologies.

For a fixed tree and fixed edge flows, ``sum_e w_e |p_u - p_v|`` with
``w_e = flow_e**alpha`` is convex in the branch-vertex positions. It is
minimized by iteratively reweighted least squares: each sweep solves the
weighted Laplacian system in which every branch vertex sits at the
``w_e / |p_u - p_v|``-weighted average of its neighbours, i.e. all branch
vertices move to their reweighted geometric medians at once. Many
topologies are relaxed together as one numpy batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, InvalidParameterError
from .topology import Topology
from .transport import FLOW_TOL, TransportPath


@dataclass(frozen=True)
class RelaxationConfig:
    """Numerical settings for relaxation and the search built on it."""

    tol: float = 1e-9
    max_iter: int = 10000
    eps: float = 1e-12
    multistarts: int = 8
    seed: int = 0
    oracle_limit: int = 6
    collapse_tol: float = 1e-7
    n_jobs: int | None = None

    def __post_init__(self):
        for name in ("tol", "max_iter", "eps", "multistarts", "oracle_limit", "collapse_tol"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive")


def edge_weights(flows, alpha):
    """``|flow|**alpha`` with zero weight on edges that carry no flow."""
    flows = np.abs(np.asarray(flows, float))
    return np.where(flows > FLOW_TOL, np.power(np.maximum(flows, FLOW_TOL), alpha), 0.0)


def tree_cost(positions, edges, weights):
    """``sum_e w_e * |p_u - p_v|`` for one configuration or a batch.

    ``positions`` has shape (..., n_vertices, m); ``edges`` (n_edges, 2) or
    (..., n_edges, 2); ``weights`` (..., n_edges).
    """
    positions = np.asarray(positions, float)
    edges = np.asarray(edges, int)
    if edges.ndim == 2:
        d = positions[..., edges[:, 0], :] - positions[..., edges[:, 1], :]
    else:
        pu = np.take_along_axis(positions, edges[..., 0, None], axis=-2)
        pv = np.take_along_axis(positions, edges[..., 1, None], axis=-2)
        d = pu - pv
    return np.sum(np.asarray(weights) * np.linalg.norm(d, axis=-1), axis=-1)


SNAP_EVERY = 10
# Stop once the cost has not dropped by this relative amount over STALL_WINDOW sweeps.
STALL_RTOL = 1e-14
STALL_WINDOW = 10
# Stop once the certified duality gap is this small.
GAP_RTOL = 1e-13
# Prune a tree once its lower bound clears its group's best cost by this margin.
PRUNE_RTOL = 1e-10


def _dual_bound(weights, new_length, old_dist):
    """Lower bound on the relaxed cost from one reweighted sweep.

    The sweep's edge forces ``w_e * D_e(x') / dist_e(x)`` balance at every
    branch vertex, so after scaling them into ``|u_e| <= w_e`` they are dual
    feasible and ``sum_e u_e . D_e`` bounds the optimum from below.
    """
    ratio = np.where(weights > 0, new_length / old_dist, 0.0)
    top = np.maximum(np.max(ratio, axis=1), 1.0)
    return np.sum(weights * new_length ** 2 / old_dist, axis=1) / top


def _snap(edges, weights, terminals, x):
    """Move branch vertices onto a neighbour when that is their exact optimum.

    With the other vertices held fixed, vertex ``s`` is optimal at the
    position of neighbour ``t`` iff the pull of its remaining edges,
    evaluated at ``t``, does not exceed the weight of the edges already
    sitting at ``t``. This block-coordinate step removes the slow tail of
    the reweighting iteration near coincident vertices.
    """
    B, ne = weights.shape
    n_t = terminals.shape[1]
    x = x.copy()
    rows = np.arange(B)
    for e in range(ne):
        for side in (0, 1):
            s = edges[:, e, side]
            t = edges[:, e, 1 - side]
            ok = s >= n_t
            if not np.any(ok):
                continue
            y = np.concatenate([terminals, x], axis=1)
            target = y[rows, t]
            incident = (edges[:, :, 0] == s[:, None]) | (edges[:, :, 1] == s[:, None])
            other = np.where(incident, edges[:, :, 0] + edges[:, :, 1] - s[:, None], 0)
            vec = y[rows[:, None], other] - target[:, None, :]
            length = np.linalg.norm(vec, axis=-1)
            at_target = incident & (length <= 1e-14)
            pulling = incident & ~at_target
            unit = np.where(pulling[..., None], vec / np.maximum(length, 1e-300)[..., None], 0.0)
            budget = np.sum(np.where(at_target, weights, 0.0), axis=1)
            has_weight = weights[rows, e] > 0
            # Snapping along edge e puts that edge at the target as well.
            budget = budget + np.where(at_target[rows, e], 0.0, weights[rows, e])
            pull_e = np.where(pulling[rows, e][:, None],
                              weights[rows, e][:, None] * unit[rows, e], 0.0)
            force = np.linalg.norm(np.sum(weights[..., None] * unit, axis=1) - pull_e, axis=-1)
            snap = ok & has_weight & (force <= budget * (1.0 - 1e-12))
            if np.any(snap):
                idx = rows[snap]
                x[idx, s[snap] - n_t] = target[snap]
    return x


def relax_batch(edges, weights, terminals, n_steiner, cfg=RelaxationConfig(), x0=None,
                groups=None):
    """Relax a batch of trees sharing vertex and edge counts.

    Parameters
    ----------
    edges : int array, shape (B, n_edges, 2)
    weights : array, shape (B, n_edges)
    terminals : array, shape (B, n_terminals, m) or (n_terminals, m)
    n_steiner : int
    x0 : array, shape (B, n_steiner, m), optional
        Starting branch positions; by default the minimizer of the weighted
        quadratic energy is used.
    groups : int array, shape (B,), optional
        Trees sharing a group label compete for the same minimum. A tree is
        dropped early, and flagged converged, once its certified lower bound
        exceeds the best cost found in its group.

    Returns
    -------
    steiner : array, shape (B, n_steiner, m)
    cost : array, shape (B,)
    converged : bool array, shape (B,)
    """
    edges = np.asarray(edges, int)
    weights = np.asarray(weights, float)
    B, ne = weights.shape
    terminals = np.asarray(terminals, float)
    if terminals.ndim == 2:
        terminals = np.broadcast_to(terminals, (B,) + terminals.shape)
    n_t, m = terminals.shape[1], terminals.shape[2]
    k = n_steiner
    if k == 0 or B == 0:
        cost = tree_cost(terminals, edges, weights) if B else np.zeros(0)
        return np.zeros((B, k, m)), cost, np.ones(B, bool)

    N = n_t + k
    inc = np.zeros((B, ne, N))
    rows = np.arange(B)[:, None]
    cols = np.arange(ne)[None, :]
    inc[rows, cols, edges[..., 0]] += 1.0
    inc[rows, cols, edges[..., 1]] -= 1.0
    # Per-tree constants, so a tree relaxes the same whatever it is batched with.
    scale = np.maximum(np.ptp(terminals, axis=1).max(axis=1), 1.0)
    # Proximal term keeps branch vertices with only zero-weight edges in place.
    prox = 1e-13 * np.maximum(weights.max(axis=1), 1.0)
    eye = np.eye(k)

    centroid = np.broadcast_to(terminals.mean(axis=1, keepdims=True), (B, k, m))
    if x0 is None:
        lap = np.einsum("ben,be,bek->bnk", inc, weights / scale[:, None], inc)
        lss = lap[:, n_t:, n_t:] + prox[:, None, None] * eye
        rhs = -lap[:, n_t:, :n_t] @ terminals + prox[:, None, None] * centroid
        x = np.linalg.solve(lss, rhs)
    else:
        x = np.array(x0, float)

    converged = np.zeros(B, bool)
    active = np.arange(B)
    history = np.full((STALL_WINDOW, B), np.inf)
    if groups is not None:
        groups = np.asarray(groups, int)
        best = np.full(int(groups.max()) + 1, np.inf)
    for it in range(cfg.max_iter):
        if it % SNAP_EVERY == SNAP_EVERY - 1:
            x[active] = _snap(edges[active], weights[active], terminals[active], x[active])
        a_inc = inc[active]
        a_w = weights[active]
        y = np.concatenate([terminals[active], x[active]], axis=1)
        d = np.einsum("ben,bnm->bem", a_inc, y)
        dist = np.sqrt(np.sum(d * d, axis=-1) + cfg.eps ** 2)
        omega = a_w / dist
        lap = np.einsum("ben,be,bek->bnk", a_inc, omega, a_inc)
        a_prox = prox[active, None, None]
        lss = lap[:, n_t:, n_t:] + a_prox * eye
        rhs = -lap[:, n_t:, :n_t] @ terminals[active] + a_prox * x[active]
        x_new = np.linalg.solve(lss, rhs)
        step = np.max(np.abs(x_new - x[active]), axis=(1, 2))
        x[active] = x_new

        y = np.concatenate([terminals[active], x_new], axis=1)
        length = np.linalg.norm(np.einsum("ben,bnm->bem", a_inc, y), axis=-1)
        upper = np.sum(a_w * length, axis=1)
        lower = _dual_bound(a_w, length, dist)
        slot = it % STALL_WINDOW
        scale_u = np.maximum(upper, 1.0)
        stalled = history[slot, active] - upper <= STALL_RTOL * scale_u
        history[slot, active] = upper
        done = (step <= cfg.tol) | stalled | (upper - lower <= GAP_RTOL * scale_u)
        converged[active[done]] = True
        if groups is not None:
            np.minimum.at(best, groups[active], upper)
            margin = PRUNE_RTOL * np.maximum(np.abs(best[groups[active]]), 1.0)
            pruned = lower > best[groups[active]] + margin
            converged[active[pruned]] = True
            done |= pruned
        active = active[~done]
        if active.size == 0:
            break
    full = np.concatenate([terminals, x], axis=1)
    cost = tree_cost(full, edges, weights)
    return x, cost, converged


def relax_positions(topo: Topology, sources, sinks, alpha, cfg=RelaxationConfig()):
    """Relax one topology and return the pruned transport path.

    Raises :class:`ConvergenceError` (carrying the best path on ``best``)
    when the iteration budget runs out.
    """
    from .oracle import build_path

    terminals = np.vstack([sources.positions, sinks.positions])
    supply = np.concatenate([sources.masses, -sinks.masses])
    flows = topo.edge_flows(supply)
    w = edge_weights(flows, alpha)
    edges = np.array(topo.edges, int)
    x, _, conv = relax_batch(edges[None], w[None], terminals, topo.n_steiner, cfg)
    path = build_path(terminals, supply, topo, x[0], alpha, cfg)
    if not conv[0]:
        raise ConvergenceError(
            f"relaxation did not converge in {cfg.max_iter} iterations", best=path
        )
    return path
