import itertools
import math

import networkx as nx
import numpy as np
import pytest

from rotpb.exceptions import InvalidParameterError, OracleTooLargeError
from rotpb.topology import (
    balanced_partitions,
    count_full_topologies,
    enumerate_topologies,
    full_topologies,
)


def brute_force_tree_count(n_sources, n_sinks, max_branch, allow_same_side):
    """Count trees via Pruefer sequences over labeled branch vertices.

    A branch vertex of degree 3 appears exactly twice in the sequence. With
    labeled terminals and no branch leaves the trees have no nontrivial
    automorphisms, so dividing by ``k!`` removes the branch labels.
    """
    n = n_sources + n_sinks
    total = 0
    for k in range(max_branch + 1):
        nv = n + k
        if nv == 2:
            trees = [nx.Graph([(0, 1)])]
        else:
            trees = (nx.from_prufer_sequence(list(seq))
                     for seq in itertools.product(range(nv), repeat=nv - 2)
                     if all(seq.count(s) == 2 for s in range(n, nv)))
        count = 0
        for tree in trees:
            if not allow_same_side and any(
                    u < n and v < n and (u < n_sources) == (v < n_sources) for u, v in tree.edges):
                continue
            count += 1
        total += count // math.factorial(k)
    return total


@pytest.mark.parametrize("n_sources,n_sinks", [(1, 1), (2, 1), (1, 2), (2, 2), (3, 1), (3, 2)])
@pytest.mark.parametrize("allow", [False, True])
def test_tree_counts_match_pruefer_enumeration(n_sources, n_sinks, allow):
    topos = list(enumerate_topologies(n_sources, n_sinks, allow_same_side_edges=allow))
    kmax = n_sources + n_sinks - 2
    assert len(topos) == brute_force_tree_count(n_sources, n_sinks, kmax, allow)
    assert len({t.encoding for t in topos}) == len(topos)
    assert all(t.is_tree() for t in topos)


def test_frozen_counts():
    assert len(list(enumerate_topologies(2, 2))) == 15
    assert len(list(enumerate_topologies(2, 2, allow_same_side_edges=True))) == 31
    assert len(list(enumerate_topologies(2, 2, max_branch=1))) == 12
    assert len(list(enumerate_topologies(3, 2))) == 129


def test_one_source_one_sink():
    (t,) = enumerate_topologies(1, 1)
    assert t.edges == ((0, 1),) and t.n_steiner == 0


def test_two_sources_one_sink_v_and_y():
    topos = list(enumerate_topologies(2, 1, max_branch=1, supply=[1, 1, -2]))
    assert len(topos) == 2
    assert {t.n_steiner for t in topos} == {0, 1}
    v = next(t for t in topos if t.n_steiner == 0)
    assert set(v.edges) == {(0, 2), (1, 2)}


def test_three_leaves_unique_full_topology():
    full = [t for t in enumerate_topologies(2, 1, max_branch=1) if t.n_steiner == 1]
    assert len(full) == 1
    assert set(full[0].edges) == {(0, 3), (1, 3), (2, 3)}


@pytest.mark.parametrize("n", range(2, 7))
def test_full_topology_count(n):
    topos = full_topologies(n - 1, 1)
    assert len(topos) == count_full_topologies(n)
    assert len({t.encoding for t in topos}) == len(topos)
    for t in topos:
        deg = np.bincount(np.asarray(t.edges).ravel(), minlength=t.n_vertices)
        assert np.all(deg[:n] == 1) and np.all(deg[n:] == 3)


def test_full_topology_count_values():
    assert [count_full_topologies(n) for n in range(2, 8)] == [1, 1, 3, 15, 105, 945]


def test_forests_from_balanced_partitions():
    parts = list(balanced_partitions([1, 1, -1, -1]))
    assert sorted(parts) == [[(0, 2), (1, 3)], [(0, 3), (1, 2)]]
    topos = list(enumerate_topologies(2, 2, supply=[1, 1, -1, -1]))
    forests = [t for t in topos if not t.is_connected()]
    assert len(forests) == 2
    assert len(topos) == 17


def test_edge_flows_y():
    (y,) = [t for t in enumerate_topologies(2, 1) if t.n_steiner == 1]
    flows = y.edge_flows([1.0, 1.0, -2.0])
    assert sorted(np.abs(flows)) == [1.0, 1.0, 2.0]


def test_limits():
    with pytest.raises(OracleTooLargeError):
        list(enumerate_topologies(4, 3))
    with pytest.raises(InvalidParameterError):
        list(enumerate_topologies(2, 2, max_branch=5))
    assert list(enumerate_topologies(0, 2)) == []
