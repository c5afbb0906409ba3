"""Branched optimal transport with a boundary payoff, on finite atomic measures.

The core objects are :class:`AtomicMeasure` and :class:`TransportPath`;
:func:`d_alpha` computes the branched transport distance, :func:`solve`
the optimal partial transport for a payoff, and :func:`run_sweep` follows
the optimum along increasing constant payoffs.
"""

from ._version import __version__
from .allocation import (
    Allocation,
    ComponentSummary,
    SolveReport,
    energy_value,
    extract_structure,
    perturbation_certificate,
    solve,
    solve_zero_shortcut,
)
from .exceptions import *  # noqa: F401,F403
from .measures import (
    AtomicMeasure,
    SignedAtomicMeasure,
    diameter,
    leq,
    normalize,
    preceq,
    total_variation,
)
from .oracle import OracleResult, c_constant, c_upper_bound, d_alpha, solve_rot
from .payoff import ConstantC, PerAtom
from .relax import RelaxationConfig, relax_positions
from .sweep import (
    SweepRecord,
    SweepReport,
    check_monotonicity,
    check_prop_upper_bound,
    check_unmoved_bound,
    geometric_grid,
    limit_path,
    run_sweep,
    unmoved_bound,
)
from .topology import Topology, enumerate_topologies
from .transport import (
    PathDecomposition,
    TransportPath,
    boundary,
    connected_components,
    energy,
    energy_const,
    good_decomposition,
    is_acyclic,
    m_alpha,
    mass,
    mass_bound_holds,
)
