"""Instance generators and independent oracles shared by the tests."""

import numpy as np

from rotpb import AtomicMeasure, m_alpha, relax_positions
from rotpb.exceptions import ConvergenceError
from rotpb.topology import enumerate_topologies


def random_measure(rng, n, dim=2, total=None, box=1.0):
    pos = rng.uniform(0.0, box, size=(n, dim))
    masses = rng.uniform(0.2, 1.0, size=n)
    if total is not None:
        masses *= total / masses.sum()
    return AtomicMeasure(pos, masses)


def random_balanced(rng, n_sources, n_sinks, dim=2):
    mu = random_measure(rng, n_sources, dim)
    nu = random_measure(rng, n_sinks, dim, total=mu.total_mass)
    return mu, nu


def random_unbalanced(rng, n_sources, n_sinks, dim=2):
    return random_measure(rng, n_sources, dim), random_measure(rng, n_sinks, dim)


def enumeration_oracle(mu, nu, alpha):
    """Minimum over every tree and balanced forest, same-side edges included.

    Relaxes each topology separately, so it shares no search or pruning
    logic with the solver.
    """
    supply = np.concatenate([mu.masses, -nu.masses])
    best = np.inf
    for topo in enumerate_topologies(len(mu), len(nu), supply=supply,
                                     allow_same_side_edges=True):
        try:
            path = relax_positions(topo, mu, nu, alpha)
        except ConvergenceError as err:
            path = err.best
        best = min(best, m_alpha(path, alpha))
    return best
