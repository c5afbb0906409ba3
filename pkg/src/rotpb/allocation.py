"""Partial transport with a boundary payoff.

The outer problem chooses how much of each source and sink atom to use and
pays ``d_alpha`` between the used parts:

    E(mu_t, nu_t) = d_alpha(mu_t, nu_t) - <h, nu_t> + <h, mu_t>

over ``mu_t <= mu``, ``nu_t <= nu`` with equal mass. An optimum splits
into connected components, each using every atom it touches in full except
for at most one atom on the heavier side. The exact search enumerates
exactly that family: every group of atoms, every choice of slack atom,
and every collection of disjoint groups.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import (
    InvalidParameterError,
    OracleTooLargeError,
    StructureViolationError,
    UnsupportedInputError,
)
from .measures import MASS_TOL, POSITION_TOL, AtomicMeasure, diameter, normalize, supports_overlap
from .oracle import Candidate, best_trees, solve_rot
from .payoff import check_payoff_covers
from .relax import RelaxationConfig
from .transport import TransportPath, component_edge_sets, energy

ENERGY_TOL = 1e-9
SLACK_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Allocation:
    """Used mass per source atom and per sink atom."""

    source_used: np.ndarray
    sink_used: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "source_used", np.asarray(self.source_used, float).reshape(-1))
        object.__setattr__(self, "sink_used", np.asarray(self.sink_used, float).reshape(-1))
        if abs(self.source_used.sum() - self.sink_used.sum()) > MASS_TOL:
            raise InvalidParameterError("used source and sink mass differ")

    @property
    def transported_mass(self) -> float:
        return float(self.source_used.sum())

    @property
    def usage_vector(self) -> tuple:
        """0/1 per atom (sources first), 1 when any of the atom is used."""
        return tuple(int(u > MASS_TOL) for u in np.concatenate([self.source_used, self.sink_used]))

    def used_measures(self, mu: AtomicMeasure, nu: AtomicMeasure):
        """``(mu_star, nu_star)`` on the atoms of ``mu`` and ``nu``."""
        return (normalize(mu.with_masses(self.source_used)),
                normalize(nu.with_masses(self.sink_used)))

    def residual_measures(self, mu: AtomicMeasure, nu: AtomicMeasure):
        """``(mu - mu_star, nu - nu_star)``."""
        return (normalize(mu.with_masses(np.clip(mu.masses - self.source_used, 0.0, None))),
                normalize(nu.with_masses(np.clip(nu.masses - self.sink_used, 0.0, None))))

    @classmethod
    def zero(cls, n_sources, n_sinks):
        return cls(np.zeros(n_sources), np.zeros(n_sinks))


@dataclass(frozen=True)
class ComponentSummary:
    """One connected component of an optimal path.

    ``sources`` and ``sinks`` list the atom ids located on the component,
    ``mu_mass``/``nu_mass`` their original total masses. ``slack_atom`` is
    ``("source", i)``, ``("sink", j)`` or None; ``slack_amount`` is the
    unused mass on the component.
    """

    sources: tuple
    sinks: tuple
    mu_mass: float
    nu_mass: float
    slack_atom: tuple | None
    slack_amount: float
    balance: str


@dataclass(frozen=True, eq=False)
class SolveReport:
    path: TransportPath
    allocation: Allocation
    energy: float
    components: tuple
    certified: bool
    alpha: float
    mu: AtomicMeasure = field(repr=False)
    nu: AtomicMeasure = field(repr=False)

    @property
    def is_zero(self) -> bool:
        return self.path.n_edges == 0


# --- helpers ----------------------------------------------------------------

def _prepare(mu, nu, h, alpha):
    if not (0.0 <= alpha < 1.0):
        raise InvalidParameterError(f"alpha must lie in [0, 1), got {alpha}")
    mu, nu = normalize(mu), normalize(nu)
    if supports_overlap(mu, nu):
        raise UnsupportedInputError("source and sink supports must be disjoint")
    check_payoff_covers(h, mu, nu)
    return mu, nu


def _zero_report(mu, nu, alpha, certified=True):
    dim = mu.dim if len(mu) else nu.dim
    return SolveReport(TransportPath.empty(dim), Allocation.zero(len(mu), len(nu)), 0.0, (),
                       certified, alpha, mu, nu)


def _atoms_on(verts_pos, seg_a, seg_b, measure, scale):
    """Atom ids of ``measure`` on a vertex or an edge of a component."""
    hits = []
    tol = POSITION_TOL * max(scale, 1.0)
    for i, p in enumerate(measure.positions):
        if len(verts_pos) and np.min(np.max(np.abs(verts_pos - p), axis=1)) <= POSITION_TOL:
            hits.append(i)
            continue
        d = seg_b - seg_a
        t = np.clip(np.einsum("ij,ij->i", p - seg_a, d) / np.maximum(np.einsum("ij,ij->i", d, d), 1e-300), 0.0, 1.0)
        gap = np.linalg.norm(seg_a + t[:, None] * d - p, axis=1)
        if np.any(gap <= tol):
            hits.append(i)
    return tuple(hits)


def _components(path, mu, nu, alloc):
    scale = diameter(mu, nu)
    out = []
    for edge_ids, verts in component_edge_sets(path):
        vpos = path.positions[verts]
        a = path.positions[path.tails[edge_ids]]
        b = path.positions[path.heads[edge_ids]]
        src = _atoms_on(vpos, a, b, mu, scale)
        snk = _atoms_on(vpos, a, b, nu, scale)
        mu_k = float(mu.masses[list(src)].sum()) if src else 0.0
        nu_k = float(nu.masses[list(snk)].sum()) if snk else 0.0
        under = [("source", i) for i in src if alloc.source_used[i] < mu.masses[i] - MASS_TOL]
        under += [("sink", j) for j in snk if alloc.sink_used[j] < nu.masses[j] - MASS_TOL]
        unused = (sum(mu.masses[i] - alloc.source_used[i] for i in src)
                  + sum(nu.masses[j] - alloc.sink_used[j] for j in snk))
        if abs(mu_k - nu_k) <= MASS_TOL:
            balance = "balanced"
        elif mu_k > nu_k:
            balance = "over-supply"
        else:
            balance = "over-demand"
        out.append((ComponentSummary(src, snk, mu_k, nu_k, under[0] if len(under) == 1 else None,
                                     float(unused), balance), under))
    return out


def _summaries(path, mu, nu, alloc):
    return tuple(c for c, _ in _components(path, mu, nu, alloc))


def _build_report(paths, alloc, mu, nu, h, alpha, certified):
    dim = mu.dim if len(mu) else nu.dim
    path = TransportPath.empty(dim)
    for p in paths:
        path = p if path.n_edges == 0 else path.overlay(p)
    e = energy(path, h, alpha) if path.n_edges else 0.0
    return SolveReport(path, alloc, float(e), _summaries(path, mu, nu, alloc), certified,
                       alpha, mu, nu)


@dataclass
class _Group:
    mask: int
    source_used: dict
    sink_used: dict
    gain: float
    mass: float
    candidate: Candidate
    value: float = np.inf
    path: TransportPath | None = None

    @property
    def energy(self) -> float:
        return self.value - self.gain


def _group_candidates(mu, nu, hs, hk, alpha):
    """Every atom group with its slack choices, skipping provably useless ones."""
    ns, nk = len(mu), len(nu)
    out = []
    for rs in range(1, ns + 1):
        for S in itertools.combinations(range(ns), rs):
            A = float(mu.masses[list(S)].sum())
            for rk in range(1, nk + 1):
                for K in itertools.combinations(range(nk), rk):
                    B = float(nu.masses[list(K)].sum())
                    variants = []
                    if abs(A - B) <= MASS_TOL:
                        variants.append(({i: mu.masses[i] for i in S}, {j: nu.masses[j] for j in K}))
                    elif A > B:
                        for p in S:
                            left = mu.masses[p] - (A - B)
                            if left > MASS_TOL:
                                su = {i: mu.masses[i] for i in S}
                                su[p] = left
                                variants.append((su, {j: nu.masses[j] for j in K}))
                    else:
                        for q in K:
                            left = nu.masses[q] - (B - A)
                            if left > MASS_TOL:
                                ku = {j: nu.masses[j] for j in K}
                                ku[q] = left
                                variants.append(({i: mu.masses[i] for i in S}, ku))
                    if not variants:
                        continue
                    dmin = min(float(np.linalg.norm(mu.positions[i] - nu.positions[j]))
                               for i in S for j in K)
                    mask = sum(1 << i for i in S) | sum(1 << (ns + j) for j in K)
                    for su, ku in variants:
                        gain = (sum(hk[j] * m for j, m in ku.items())
                                - sum(hs[i] * m for i, m in su.items()))
                        m = sum(su.values())
                        # M_alpha >= m**alpha * (shortest source-sink distance).
                        if m ** alpha * dmin >= gain + ENERGY_TOL:
                            continue
                        terms = np.vstack([mu.positions[list(su)], nu.positions[list(ku)]])
                        supply = np.concatenate([list(su.values()), [-x for x in ku.values()]])
                        out.append(_Group(mask, su, ku, gain, m, Candidate(terms, supply)))
    return out



def _best_family(groups, n_atoms):
    """Disjoint groups minimizing energy, then transported mass, then usage vector."""
    by_mask = {}
    for g in groups:
        if g.energy > ENERGY_TOL:
            continue
        cur = by_mask.get(g.mask)
        if cur is None or g.energy < cur.energy - 1e-15:
            by_mask[g.mask] = g
    masks = sorted(by_mask)
    families = []

    def rec(start, used, chosen, e, m):
        families.append((e, m, used, tuple(chosen)))
        for j in range(start, len(masks)):
            mk = masks[j]
            if mk & used:
                continue
            g = by_mask[mk]
            chosen.append(mk)
            rec(j + 1, used | mk, chosen, e + g.energy, m + g.mass)
            chosen.pop()

    rec(0, 0, [], 0.0, 0.0)
    e_best = min(f[0] for f in families)
    tied = [f for f in families if f[0] <= e_best + ENERGY_TOL]
    m_best = min(f[1] for f in tied)
    tied = [f for f in tied if f[1] <= m_best + MASS_TOL]

    def usage(f):
        return tuple((f[2] >> i) & 1 for i in range(n_atoms))

    chosen = min(tied, key=usage)
    return [by_mask[mk] for mk in chosen[3]]


def _allocation_from(groups, ns, nk):
    su, ku = np.zeros(ns), np.zeros(nk)
    for g in groups:
        for i, m in g.source_used.items():
            su[i] += m
        for j, m in g.sink_used.items():
            ku[j] += m
    return Allocation(su, ku)


# --- public operations -------------------------------------------------------

def solve_zero_shortcut(mu: AtomicMeasure, nu: AtomicMeasure, h, alpha: float = 0.5):
    """Zero report when no move can pay off, otherwise None.

    If the smallest payoff on the sources is at least the largest payoff on
    the sinks, every nonzero path has positive energy, so ``T = 0`` is the
    unique optimum.
    """
    mu, nu = normalize(mu), normalize(nu)
    if len(mu) == 0 or len(nu) == 0:
        return _zero_report(mu, nu, alpha)
    if float(np.min(h.source_values(mu))) >= float(np.max(h.sink_values(nu))):
        return _zero_report(mu, nu, alpha)
    return None


def solve(mu: AtomicMeasure, nu: AtomicMeasure, h, alpha: float,
          cfg: RelaxationConfig = RelaxationConfig(), mode: str = "exact") -> SolveReport:
    """Optimal partial transport path for payoff ``h``.

    Parameters
    ----------
    mu, nu : AtomicMeasure
        Available supply and demand; supports must be disjoint.
    h : ConstantC or PerAtom
        Boundary payoff.
    alpha : float
        Cost exponent in [0, 1).
    cfg : RelaxationConfig
    mode : {"exact", "heuristic"}
        Exact search up to ``cfg.oracle_limit`` atoms; beyond that,
        "heuristic" runs a greedy atom-dropping search and the report is
        marked uncertified while "exact" raises.

    Returns
    -------
    SolveReport
    """
    if mode not in ("exact", "heuristic"):
        raise InvalidParameterError(f"unknown mode {mode!r}")
    mu, nu = _prepare(mu, nu, h, alpha)
    ns, nk = len(mu), len(nu)
    if ns == 0 or nk == 0:
        return _zero_report(mu, nu, alpha)
    if ns + nk > cfg.oracle_limit:
        if mode == "exact":
            raise OracleTooLargeError(
                f"{ns + nk} atoms exceed the exact-search limit of {cfg.oracle_limit}; "
                "use heuristic mode"
            )
        return _heuristic_solve(mu, nu, h, alpha, cfg)

    hs, hk = h.source_values(mu), h.sink_values(nu)
    groups = _group_candidates(mu, nu, hs, hk, alpha)
    diam = diameter(mu, nu)
    results = best_trees([g.candidate for g in groups], alpha, cfg, diam)
    for g, r in zip(groups, results):
        g.value, g.path = r.value, r.path
    chosen = _best_family(groups, ns + nk)
    alloc = _allocation_from(chosen, ns, nk)
    return _build_report([g.path for g in chosen], alloc, mu, nu, h, alpha, True)


def _heuristic_solve(mu, nu, h, alpha, cfg):
    """Greedy atom dropping from the all-atoms group; not certified."""
    ns, nk = len(mu), len(nu)
    hs, hk = h.source_values(mu), h.sink_values(nu)
    diam = diameter(mu, nu)

    def evaluate(S, K):
        A, B = float(mu.masses[S].sum()), float(nu.masses[K].sum())
        best = None
        if abs(A - B) <= MASS_TOL:
            options = [(None, None)]
        elif A > B:
            options = [("s", p) for p in S if mu.masses[p] - (A - B) > MASS_TOL]
        else:
            options = [("k", q) for q in K if nu.masses[q] - (B - A) > MASS_TOL]
        for side, idx in options:
            su = {i: float(mu.masses[i]) for i in S}
            ku = {j: float(nu.masses[j]) for j in K}
            if side == "s":
                su[idx] -= A - B
            elif side == "k":
                ku[idx] -= B - A
            res = solve_rot(AtomicMeasure(mu.positions[list(su)], list(su.values())),
                            AtomicMeasure(nu.positions[list(ku)], list(ku.values())),
                            alpha, cfg, mode="heuristic", diam=diam)
            gain = sum(hk[j] * m for j, m in ku.items()) - sum(hs[i] * m for i, m in su.items())
            e = res.value - gain
            if best is None or e < best[0] - ENERGY_TOL:
                best = (e, su, ku, res.path)
        return best

    S, K = list(range(ns)), list(range(nk))
    current = evaluate(S, K)
    while True:
        trials = []
        for i in S:
            if len(S) > 1:
                trials.append(([x for x in S if x != i], K))
        for j in K:
            if len(K) > 1:
                trials.append((S, [x for x in K if x != j]))
        scored = [(evaluate(s, k), s, k) for s, k in trials]
        scored = [t for t in scored if t[0] is not None]
        if not scored:
            break
        cand, s, k = min(scored, key=lambda t: t[0][0])
        if current is not None and cand[0] >= current[0] - ENERGY_TOL:
            break
        current, S, K = cand, s, k
    if current is None or current[0] > -ENERGY_TOL:
        return _zero_report(mu, nu, alpha, certified=False)
    _, su, ku, path = current
    alloc = Allocation([su.get(i, 0.0) for i in range(ns)], [ku.get(j, 0.0) for j in range(nk)])
    return _build_report([path], alloc, mu, nu, h, alpha, False)


def extract_structure(report: SolveReport, mu: AtomicMeasure = None, nu: AtomicMeasure = None):
    """Per-component slack structure, verified.

    For each connected component ``K`` with original masses ``mu(K)`` and
    ``nu(K)`` of the atoms located on it, at most one atom may be partly
    used, it must sit on the heavier side, and the unused amount must be
    ``|mu(K) - nu(K)|``.

    Returns
    -------
    tuple of ComponentSummary

    Raises
    ------
    StructureViolationError
        When a component breaks the structure.
    """
    if not (0.0 < report.alpha < 1.0):
        raise InvalidParameterError("structure checks need 0 < alpha < 1")
    mu = report.mu if mu is None else normalize(mu)
    nu = report.nu if nu is None else normalize(nu)
    out = []
    for k, (summary, under) in enumerate(_components(report.path, mu, nu, report.allocation)):
        if len(under) > 1:
            raise StructureViolationError(
                f"component {k} has {len(under)} partly used atoms {under}")
        src_slack = sum(mu.masses[i] - report.allocation.source_used[i] for i in summary.sources)
        snk_slack = sum(nu.masses[j] - report.allocation.sink_used[j] for j in summary.sinks)
        want_src = max(summary.mu_mass - summary.nu_mass, 0.0)
        want_snk = max(summary.nu_mass - summary.mu_mass, 0.0)
        if abs(src_slack - want_src) > SLACK_TOL or abs(snk_slack - want_snk) > SLACK_TOL:
            raise StructureViolationError(
                f"component {k}: unused source/sink mass {src_slack:.9g}/{snk_slack:.9g}, "
                f"expected {want_src:.9g}/{want_snk:.9g}")
        out.append(summary)
    return tuple(out)


def perturbation_certificate(report: SolveReport, mu: AtomicMeasure = None,
                             nu: AtomicMeasure = None) -> bool:
    """True iff no component could be improved by rescaling its allocation.

    Checks that each component contains at most one under-used atom and
    that every nonzero component uses at least one of its atoms in full.
    """
    mu = report.mu if mu is None else normalize(mu)
    nu = report.nu if nu is None else normalize(nu)
    alloc = report.allocation
    for summary, under in _components(report.path, mu, nu, alloc):
        if len(under) > 1:
            return False
        touched = [("source", i) for i in summary.sources if alloc.source_used[i] > MASS_TOL]
        touched += [("sink", j) for j in summary.sinks if alloc.sink_used[j] > MASS_TOL]
        if touched and all(t in under for t in touched):
            return False
    return True


def energy_value(mu: AtomicMeasure, nu: AtomicMeasure, h, alpha: float,
                 cfg: RelaxationConfig = RelaxationConfig(), mode: str = "exact") -> float:
    """Optimal energy, ``solve(...).energy``."""
    return solve(mu, nu, h, alpha, cfg, mode).energy
