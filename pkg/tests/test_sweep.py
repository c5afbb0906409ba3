import dataclasses

import numpy as np
import pytest

from helpers import random_balanced
from rotpb import (
    AtomicMeasure,
    check_monotonicity,
    check_prop_upper_bound,
    check_unmoved_bound,
    geometric_grid,
    limit_path,
    m_alpha,
    run_sweep,
    unmoved_bound,
)
from rotpb.exceptions import BalanceError, BoundInapplicableError, GridTooShortError
from rotpb.sweep import linear_grid, s_restricted

A = AtomicMeasure([[0, 0]], [1.0])
B = AtomicMeasure([[1, 0]], [1.0])
GRID = [0.1 * k for k in range(1, 10)]


@pytest.fixture(scope="module")
def two_atom_sweep():
    return run_sweep(A, B, 0.5, GRID)


def test_two_atom_boundary_steps_at_half(two_atom_sweep):
    for r in two_atom_sweep.records:
        assert r.boundary_mass == pytest.approx(0.0 if r.c <= 0.5 + 1e-12 else 2.0)
    assert two_atom_sweep.jumps == ((pytest.approx(0.5), pytest.approx(0.6)),)
    assert two_atom_sweep.d_alpha_oracle == pytest.approx(1.0)
    assert two_atom_sweep.gap == pytest.approx(0.0, abs=1e-12)
    assert two_atom_sweep.s_restricted == pytest.approx(2.0)
    # The jump sits at d / s.
    assert 1.0 / two_atom_sweep.s_restricted == pytest.approx(0.5)


def test_two_atom_checks(two_atom_sweep):
    assert check_monotonicity(two_atom_sweep) == []
    assert check_prop_upper_bound(two_atom_sweep, 1.0)
    assert all(r.m_alpha <= 1.0 + 1e-12 for r in two_atom_sweep.records)


def test_shuffled_records_fail_monotonicity(two_atom_sweep):
    shuffled = dataclasses.replace(two_atom_sweep, records=two_atom_sweep.records[::-1])
    assert check_monotonicity(shuffled)


def test_nonpositive_c_gives_zero_records():
    rep = run_sweep(A, B, 0.5, [-1.0, 0.0, 2.0])
    assert rep.records[0].path.n_edges == 0 and rep.records[1].path.n_edges == 0
    assert rep.records[2].unmoved_mass == pytest.approx(0.0)


def test_single_record():
    rep = run_sweep(A, B, 0.5, [1.0])
    assert len(rep.records) == 1
    assert check_monotonicity(rep) == []


def test_records_sorted():
    rep = run_sweep(A, B, 0.5, [0.9, 0.1, 0.5])
    assert [r.c for r in rep.records] == [0.1, 0.5, 0.9]


def test_unmoved_bound_values():
    diam = np.sqrt(2.0)
    assert unmoved_bound(2.0, 0.75, 2, diam) == pytest.approx(0.1326975107362388, rel=1e-12)
    assert unmoved_bound(0.4, 0.75, 2, diam) == pytest.approx(82.93594421014923, rel=1e-12)
    rep = run_sweep(A, B, 0.75, [0.4, 2.0])
    assert rep.records[0].unmoved_mass == pytest.approx(1.0)
    assert rep.records[1].unmoved_mass == pytest.approx(0.0)
    assert check_unmoved_bound(rep, 0.75, 2, diam) == []


def test_unmoved_bound_inapplicable(two_atom_sweep):
    with pytest.raises(BoundInapplicableError):
        check_unmoved_bound(two_atom_sweep, 0.5, 2, 1.0)


def test_unmoved_bound_flags_violation(two_atom_sweep):
    # A tiny diameter makes the bound smaller than the unmoved mass.
    assert check_unmoved_bound(two_atom_sweep, 0.75, 2, 1e-3)


def test_limit_path():
    rep = run_sweep(A, B, 0.5, [0.4, 3.0])
    assert m_alpha(limit_path(rep), 0.5) == pytest.approx(1.0)
    with pytest.raises(GridTooShortError):
        limit_path(run_sweep(A, B, 0.5, [0.4]))


def test_unbalanced_rejected():
    with pytest.raises(BalanceError):
        run_sweep(A, AtomicMeasure([[1, 0]], [2.0]), 0.5, [1.0])


def test_grids():
    assert geometric_grid(3, 0.5, 2.0) == [0.5, 1.0, 2.0]
    assert len(geometric_grid()) == 12
    assert linear_grid(1, 1, 1) == [1.0]
    assert linear_grid(0, 1, 3) == [0.0, 0.5, 1.0]


def test_s_restricted_examples():
    mu = AtomicMeasure([[0, 0], [0, 1]], [1.0, 2.0])
    nu = AtomicMeasure([[1, 0]], [3.0])
    # Groups: {0, sink} leaves 2 + 2 unmoved, {1, sink} leaves 1 + 1.
    assert s_restricted(mu, nu) == pytest.approx(2.0)


@pytest.mark.parametrize("seed", range(3))
def test_random_sweep_properties(seed):
    rng = np.random.default_rng(60 + seed)
    mu, nu = random_balanced(rng, 2, 2)
    rep = run_sweep(mu, nu, 0.6, geometric_grid(8, 0.1, 2.0))
    assert check_monotonicity(rep) == []
    assert check_prop_upper_bound(rep, rep.d_alpha_oracle)
    assert rep.gap is not None and rep.gap <= 1e-6
