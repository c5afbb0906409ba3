"""Payoff sweeps: solve the constant-payoff problem along a grid of ``c``.

As ``c`` grows, the optimal energy falls while the transport cost and the
moved mass grow; once the payoff outweighs every saving from leaving mass
behind, the optimum is a full optimal transport path. These checks and the
large-``c`` limit live here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .allocation import SolveReport, solve
from .exceptions import BalanceError, GridTooShortError, InvalidParameterError
from .measures import MASS_TOL, AtomicMeasure, normalize, total_variation
from .oracle import c_constant, solve_rot
from .payoff import ConstantC
from .relax import RelaxationConfig
from .transport import TransportPath, boundary, m_alpha

SLACK = 1e-6


@dataclass(frozen=True, eq=False)
class SweepRecord:
    c: float
    energy: float
    m_alpha: float
    boundary_mass: float
    unmoved_mass: float
    path: TransportPath
    report: SolveReport = field(repr=False)


@dataclass(frozen=True, eq=False)
class SweepReport:
    """Records in ascending ``c`` plus the comparison with the full problem.

    ``gap`` is ``|M_alpha(T_c) - d_alpha(mu, nu)|`` at the largest ``c``
    when that record moves all mass, else None. ``jumps`` lists the grid
    intervals across which the moved mass changes. ``s_restricted`` is the
    smallest nonzero unmoved mass over slack-structured allocations; it is
    informational.
    """

    alpha: float
    records: tuple
    d_alpha_oracle: float | None
    gap: float | None
    jumps: tuple
    s_restricted: float | None
    certified: bool


def geometric_grid(count: int = 12, start: float = 0.05, ratio: float = 2.0):
    """``start * ratio**k`` for ``k = 0 .. count - 1``."""
    if count < 1:
        raise InvalidParameterError("grid needs at least one point")
    return [start * ratio ** k for k in range(count)]


def linear_grid(start: float, stop: float, count: int):
    if count < 1:
        raise InvalidParameterError("grid needs at least one point")
    if count == 1:
        return [float(start)]
    return [float(x) for x in np.linspace(start, stop, count)]


def s_restricted(mu: AtomicMeasure, nu: AtomicMeasure, max_atoms: int = 8):
    """Smallest positive unmoved mass ``||mu - mu_t|| + ||nu - nu_t||``.

    Taken over allocations made of disjoint atom groups, each used in full
    except for one balancing atom on its heavier side. Returns None above
    ``max_atoms`` atoms.
    """
    mu, nu = normalize(mu), normalize(nu)
    ns, nk = len(mu), len(nu)
    if ns + nk > max_atoms:
        return None
    total = mu.total_mass + nu.total_mass
    groups = {}
    for rs in range(1, ns + 1):
        for S in itertools.combinations(range(ns), rs):
            for rk in range(1, nk + 1):
                for K in itertools.combinations(range(nk), rk):
                    mask = sum(1 << i for i in S) | sum(1 << (ns + j) for j in K)
                    A, B = mu.masses[list(S)].sum(), nu.masses[list(K)].sum()
                    heavy = mu.masses[list(S)] if A > B else nu.masses[list(K)]
                    if abs(A - B) > MASS_TOL and not np.any(heavy > abs(A - B) + MASS_TOL):
                        continue
                    groups[mask] = float(min(A, B))
    masks = sorted(groups)
    moved = set()

    def rec(start, used, m):
        moved.add(round(m, 12))
        for j in range(start, len(masks)):
            if masks[j] & used == 0:
                rec(j + 1, used | masks[j], m + groups[masks[j]])

    rec(0, 0, 0.0)
    unmoved = sorted(total - 2.0 * m for m in moved)
    positive = [u for u in unmoved if u > 2 * MASS_TOL]
    return min(positive) if positive else None


def run_sweep(mu: AtomicMeasure, nu: AtomicMeasure, alpha: float, c_grid=None,
              cfg: RelaxationConfig = RelaxationConfig(), mode: str = "exact",
              compare: bool = True) -> SweepReport:
    """Solve the constant-payoff problem at every grid value of ``c``.

    Parameters
    ----------
    mu, nu : AtomicMeasure
        Measures of equal mass with disjoint supports.
    alpha : float
    c_grid : sequence of float, optional
        Payoff values, sorted before solving; defaults to
        :func:`geometric_grid`.
    compare : bool
        Also compute ``d_alpha(mu, nu)`` for the final gap.
    """
    mu, nu = normalize(mu), normalize(nu)
    if abs(mu.total_mass - nu.total_mass) > MASS_TOL:
        raise BalanceError("sweeps need measures of equal mass")
    grid = sorted(float(c) for c in (geometric_grid() if c_grid is None else c_grid))
    if not grid:
        raise InvalidParameterError("empty c grid")
    records = []
    for c in grid:
        rep = solve(mu, nu, ConstantC(c), alpha, cfg, mode)
        bm = total_variation(boundary(rep.path)) if rep.path.n_edges else 0.0
        records.append(SweepRecord(c, rep.energy, m_alpha(rep.path, alpha), bm,
                                   float(mu.total_mass - rep.allocation.transported_mass),
                                   rep.path, rep))
    d_val = gap = None
    if compare:
        d_val = solve_rot(mu, nu, alpha, cfg, mode).value
        last = records[-1]
        if last.unmoved_mass <= MASS_TOL:
            gap = abs(last.m_alpha - d_val)
    jumps = tuple((a.c, b.c) for a, b in zip(records, records[1:])
                  if abs(b.boundary_mass - a.boundary_mass) > SLACK)
    return SweepReport(alpha, tuple(records), d_val, gap, jumps, s_restricted(mu, nu),
                       all(r.report.certified for r in records))


def check_monotonicity(report: SweepReport, slack: float = SLACK):
    """Violations of: energy nonincreasing, cost and moved mass nondecreasing in ``c``.

    Returns
    -------
    list of str
        Empty when consecutive records are monotone within ``slack``.
    """
    out = []
    recs = report.records
    for i, (a, b) in enumerate(zip(recs, recs[1:])):
        if b.c < a.c:
            out.append(f"records {i},{i + 1}: c not ascending ({a.c} > {b.c})")
        if b.energy > a.energy + slack:
            out.append(f"records {i},{i + 1}: energy increased {a.energy:.12g} -> {b.energy:.12g}")
        if b.m_alpha < a.m_alpha - slack:
            out.append(f"records {i},{i + 1}: m_alpha decreased {a.m_alpha:.12g} -> {b.m_alpha:.12g}")
        if b.boundary_mass < a.boundary_mass - slack:
            out.append(f"records {i},{i + 1}: boundary mass decreased "
                       f"{a.boundary_mass:.12g} -> {b.boundary_mass:.12g}")
    return out


def unmoved_bound(c: float, alpha: float, m: int, diam: float) -> float:
    """``(C_{m,alpha} * diam / (2c)) ** (1 / (1 - alpha))``."""
    return (c_constant(m, alpha) * diam / (2.0 * c)) ** (1.0 / (1.0 - alpha))


def check_unmoved_bound(report: SweepReport, alpha: float, m: int, diam: float,
                        slack: float = 1e-9):
    """Records with ``c > 0`` whose unmoved mass exceeds the closed-form bound.

    Raises :class:`BoundInapplicableError` unless ``1 - 1/m < alpha < 1``.
    """
    c_constant(m, alpha)
    out = []
    for i, r in enumerate(report.records):
        if r.c <= 0:
            continue
        bound = unmoved_bound(r.c, alpha, m, diam)
        if r.unmoved_mass > bound + slack:
            out.append(f"record {i} (c={r.c}): unmoved {r.unmoved_mass:.12g} > bound {bound:.12g}")
    return out


def check_prop_upper_bound(report: SweepReport, d_alpha_value: float, slack: float = SLACK) -> bool:
    """True iff every record costs at most ``d_alpha(mu, nu)`` (within ``slack``)."""
    return all(r.m_alpha <= d_alpha_value + slack for r in report.records)


def limit_path(report: SweepReport) -> TransportPath:
    """Path at the largest ``c``, provided it moves all of the mass.

    Raises
    ------
    GridTooShortError
        When the largest grid value still leaves mass behind.
    """
    last = report.records[-1]
    if last.unmoved_mass > MASS_TOL:
        raise GridTooShortError(
            f"mass {last.unmoved_mass:.6g} still unmoved at c={last.c}; extend the grid to larger c"
        )
    return last.path

