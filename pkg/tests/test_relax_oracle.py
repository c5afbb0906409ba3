import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from helpers import enumeration_oracle, random_balanced
from rotpb import (
    AtomicMeasure,
    RelaxationConfig,
    boundary,
    c_constant,
    c_upper_bound,
    d_alpha,
    diameter,
    m_alpha,
    solve_rot,
    total_variation,
)
from rotpb.exceptions import BalanceError, BoundInapplicableError, InvalidParameterError, OracleTooLargeError
from rotpb.oracle import Candidate, best_trees
from rotpb.relax import edge_weights, tree_cost

PAIR = AtomicMeasure([[-1, 0], [1, 0]], [1.0, 1.0])


def y_cost(y, sink_y, arm_mass, alpha):
    """Cost of a symmetric Y with branch point (0, y) feeding a sink at (0, sink_y)."""
    trunk = (2 * arm_mass) ** alpha * abs(sink_y - y)
    return 2 * arm_mass ** alpha * math.hypot(1.0, y) + trunk


def test_y_against_golden_section():
    res = minimize_scalar(y_cost, bounds=(0, 10), args=(10.0, 1.0, 0.5), method="bounded",
                          options={"xatol": 1e-10})
    value, path = d_alpha(PAIR, AtomicMeasure([[0, 10]], [2.0]), 0.5)
    assert value == pytest.approx(res.fun, abs=1e-7)
    assert value == pytest.approx(15.556349, abs=1e-6)
    # The Y beats two direct edges.
    assert value < 2 * math.sqrt(101) - 1
    branch = [p for p, b in zip(path.positions, path.is_boundary) if not b]
    assert len(branch) == 1
    assert branch[0] == pytest.approx([0.0, res.x], abs=1e-5)


def test_y_collapses_onto_near_sink():
    # Half masses, sink at (0, 1): the branch point slides onto the sink.
    mu = AtomicMeasure([[-1, 0], [1, 0]], [0.5, 0.5])
    res = minimize_scalar(y_cost, bounds=(0, 1), args=(1.0, 0.5, 0.5), method="bounded",
                          options={"xatol": 1e-10})
    value, path = d_alpha(mu, AtomicMeasure([[0, 1]], [1.0]), 0.5)
    assert value == pytest.approx(res.fun, abs=1e-7)
    assert value == pytest.approx(2.0, abs=1e-9)
    assert path.n_edges == 2


def test_steiner_length_at_alpha_zero():
    s = AtomicMeasure([[0, 0], [1, 0]], [0.5, 0.5])
    t = AtomicMeasure([[0.5, math.sqrt(3) / 2]], [1.0])
    value, _ = d_alpha(s, t, 0.0)
    assert value == pytest.approx(math.sqrt(3), abs=1e-7)


def test_single_edge_and_trivial():
    a, b = AtomicMeasure([[0, 0]], [2.0]), AtomicMeasure([[3, 4]], [2.0])
    value, path = d_alpha(a, b, 0.5)
    assert value == pytest.approx(5 * math.sqrt(2))
    assert path.n_edges == 1
    empty = AtomicMeasure.empty(2)
    assert d_alpha(empty, empty, 0.5)[0] == 0.0


def test_invalid_inputs():
    with pytest.raises(BalanceError):
        d_alpha(AtomicMeasure([[0, 0]], [1.0]), AtomicMeasure([[1, 0]], [2.0]), 0.5)
    with pytest.raises(InvalidParameterError):
        d_alpha(PAIR, AtomicMeasure([[0, 1]], [2.0]), 1.0)
    big = AtomicMeasure(np.arange(8.0).reshape(4, 2), np.ones(4))
    far = AtomicMeasure(np.arange(8.0).reshape(4, 2) + 20, np.ones(4))
    with pytest.raises(OracleTooLargeError):
        solve_rot(big, far, 0.5)
    res = solve_rot(big, far, 0.5, mode="heuristic")
    assert not res.certified
    assert total_variation(boundary(res.path)) == pytest.approx(8.0)


@pytest.mark.parametrize("seed", range(6))
def test_oracle_matches_all_topology_enumeration(seed):
    rng = np.random.default_rng(seed)
    ns, nk = [(2, 2), (3, 1), (1, 3), (2, 3), (3, 2), (2, 2)][seed]
    alpha = float(rng.uniform(0.1, 0.9))
    mu, nu = random_balanced(rng, ns, nk)
    value, path = d_alpha(mu, nu, alpha)
    assert value == pytest.approx(enumeration_oracle(mu, nu, alpha), abs=1e-7)
    assert value == pytest.approx(m_alpha(path, alpha), abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_branch_points_are_locally_optimal(seed):
    rng = np.random.default_rng(100 + seed)
    mu, nu = random_balanced(rng, 2, 2)
    alpha = 0.6
    value, path = d_alpha(mu, nu, alpha)
    edges = np.stack([path.tails, path.heads], axis=1)
    w = edge_weights(path.flows, alpha)
    free = np.flatnonzero(~path.is_boundary)
    for v in free:
        for d in np.vstack([np.eye(2), -np.eye(2)]) * 1e-5:
            pos = path.positions.copy()
            pos[v] += d
            assert tree_cost(pos, edges, w) >= value - 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_value_below_closed_form_upper_bound(seed):
    rng = np.random.default_rng(200 + seed)
    mu, nu = random_balanced(rng, 2, 2)
    alpha = 0.75
    value, _ = d_alpha(mu, nu, alpha)
    assert value <= c_upper_bound(mu.total_mass, diameter(mu, nu), alpha, 2) + 1e-9


def test_c_constant_values():
    assert c_constant(2, 0.75) == pytest.approx(1.707107, abs=1e-6)
    # sqrt(2) / (2 (2**0.5 - 1)) = 1 + sqrt(2)/2
    assert c_constant(2, 0.75) == pytest.approx(1 + math.sqrt(2) / 2, abs=1e-15)
    assert c_constant(3, 0.8) == pytest.approx(2.710497532563467, rel=1e-14)
    with pytest.raises(BoundInapplicableError):
        c_constant(2, 0.5)
    with pytest.raises(BoundInapplicableError):
        c_constant(2, 1.0)


@pytest.mark.parametrize("seed", range(3))
def test_parallel_matches_serial(seed):
    rng = np.random.default_rng(7 + seed)
    mu, nu = random_balanced(rng, 3, 2)
    v1, p1 = d_alpha(mu, nu, 0.5, RelaxationConfig(n_jobs=1))
    for jobs in (3, 4):
        vj, pj = d_alpha(mu, nu, 0.5, RelaxationConfig(n_jobs=jobs))
        assert v1 == vj
        assert np.array_equal(p1.positions, pj.positions)


def test_result_independent_of_batch_companions():
    rng = np.random.default_rng(11)
    a = Candidate(rng.uniform(size=(4, 2)), np.array([1.0, 1.0, -0.5, -1.5]))
    b = Candidate(rng.uniform(size=(4, 2)) * 30, np.array([2.0, 1.0, -2.5, -0.5]))
    alone = best_trees([a], 0.5)[0]
    together = best_trees([b, a], 0.5)[1]
    assert alone.value == together.value
    assert alone.encoding == together.encoding


points = st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1)), min_size=3, max_size=3, unique=True)


@settings(max_examples=15)
@given(points, st.floats(0.1, 0.9))
def test_metric_properties(pts, alpha):
    a, b, c = (AtomicMeasure([p], [1.0]) for p in pts)
    if min(np.linalg.norm(np.subtract(p, q)) for p, q in ((pts[0], pts[1]), (pts[1], pts[2]),
                                                           (pts[0], pts[2]))) < 1e-6:
        return
    ab, ba = d_alpha(a, b, alpha)[0], d_alpha(b, a, alpha)[0]
    bc, ac = d_alpha(b, c, alpha)[0], d_alpha(a, c, alpha)[0]
    assert ab == pytest.approx(ba, abs=1e-12)
    assert ab > 0
    assert ac <= ab + bc + 1e-9
