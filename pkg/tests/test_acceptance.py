"""Acceptance criteria, one test per criterion.

Each test appends a PASS/FAIL line to the terminal summary and prints it,
then asserts. Instances come from fixed seeds so the runs are reproducible.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from helpers import enumeration_oracle, random_balanced, random_measure
from rotpb import (
    AtomicMeasure,
    ConstantC,
    PerAtom,
    TransportPath,
    boundary,
    c_constant,
    check_monotonicity,
    check_prop_upper_bound,
    check_unmoved_bound,
    d_alpha,
    diameter,
    energy_value,
    extract_structure,
    geometric_grid,
    good_decomposition,
    limit_path,
    m_alpha,
    mass,
    mass_bound_holds,
    perturbation_certificate,
    run_sweep,
    solve,
    solve_zero_shortcut,
    total_variation,
)
from rotpb.exceptions import StructureViolationError

pytestmark = pytest.mark.acceptance


def record(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def random_payoff(rng, mu, nu):
    if rng.random() < 0.5:
        return ConstantC(float(rng.uniform(0.0, 3.0)))
    return PerAtom.from_measures(mu, rng.uniform(-1.0, 1.0, len(mu)),
                                 nu, rng.uniform(0.0, 4.0, len(nu)))


def random_instance(rng, max_atoms):
    n = int(rng.integers(2, max_atoms + 1))
    ns = int(rng.integers(1, n))
    dim = 3 if rng.random() < 0.2 else 2
    return random_measure(rng, ns, dim), random_measure(rng, n - ns, dim)


def test_two_atom_threshold():
    mu = AtomicMeasure([[0, 0]], [1.0])
    nu = AtomicMeasure([[1, 0]], [1.0])
    below = [0.0, 0.1, 0.25, 0.4, 0.49, 0.499999]
    above = [0.500001, 0.51, 0.6, 0.75, 1.0, 2.0, 10.0]
    bad = []
    t0 = time.perf_counter()
    for alpha in (0.3, 0.5, 0.75):
        for c in below:
            rep = solve(mu, nu, ConstantC(c), alpha)
            if not (rep.certified and rep.is_zero and abs(rep.energy) <= 1e-9):
                bad.append((alpha, c, rep.energy))
        for c in above:
            rep = solve(mu, nu, ConstantC(c), alpha)
            full = rep.path.n_edges == 1 and abs(rep.allocation.transported_mass - 1.0) <= 1e-9
            if not (rep.certified and full and abs(rep.energy - (1 - 2 * c)) <= 1e-9):
                bad.append((alpha, c, rep.energy))
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 1.0
    record(1, ok, f"two-atom threshold, {len(bad)} wrong of 39 solves, {elapsed:.3f} s (< 1 s)")
    assert ok, bad


def test_structure_suite():
    rng = np.random.default_rng(20240601)
    failures, certified = [], 0
    t0 = time.perf_counter()
    for k in range(200):
        mu, nu = random_instance(rng, 6)
        alpha = float(rng.uniform(0.05, 0.95))
        h = random_payoff(rng, mu, nu)
        rep = solve(mu, nu, h, alpha)
        if not rep.certified:
            continue
        certified += 1
        try:
            extract_structure(rep)
        except StructureViolationError as exc:
            failures.append((k, str(exc)))
        if not perturbation_certificate(rep):
            failures.append((k, "perturbation certificate"))
    elapsed = time.perf_counter() - t0
    ok = not failures and certified == 200 and elapsed < 600
    record(2, ok, f"slack-atom structure suite, {certified}/200 certified, "
                  f"{len(failures)} failures, {elapsed:.1f} s (< 600 s)")
    assert ok, failures


def shift(m, dx):
    return AtomicMeasure(m.positions + dx, m.masses)


def test_energy_functional_properties():
    rng = np.random.default_rng(777)
    bad = []
    for k in range(50):
        alpha = float(rng.uniform(0.1, 0.9))
        c = float(rng.uniform(0.2, 2.5))
        h = ConstantC(c)
        # Monotonicity: an instance and a sub-instance obtained by dropping atoms.
        mu, nu = random_measure(rng, 3), random_measure(rng, 3)
        e_full = energy_value(mu, nu, h, alpha)
        sub_mu = mu.restrict(sorted(rng.choice(3, size=int(rng.integers(1, 4)), replace=False)))
        sub_nu = nu.restrict(sorted(rng.choice(3, size=int(rng.integers(1, 4)), replace=False)))
        e_sub = energy_value(sub_mu, sub_nu, h, alpha)
        if not (0.0 >= e_sub - 1e-6 and e_sub >= e_full - 1e-6):
            bad.append((k, "monotonicity", e_sub, e_full))
        # Subadditivity: two instances placed side by side.
        m1, n1 = random_measure(rng, int(rng.integers(1, 3))), random_measure(rng, 1)
        m2, n2 = random_measure(rng, 1), random_measure(rng, int(rng.integers(1, 3)))
        dx = float(rng.uniform(0.0, 3.0))
        m2, n2 = shift(m2, dx), shift(n2, dx)
        e1, e2 = energy_value(m1, n1, h, alpha), energy_value(m2, n2, h, alpha)
        e12 = energy_value(m1 + m2, n1 + n2, h, alpha)
        if e12 > e1 + e2 + 1e-6:
            bad.append((k, "subadditivity", e12, e1 + e2))
        # Residual zero.
        rep = solve(mu, nu, h, alpha)
        rmu, rnu = rep.allocation.residual_measures(mu, nu)
        e_res = energy_value(rmu, rnu, h, alpha)
        if abs(e_res) > 1e-6:
            bad.append((k, "residual", e_res))
    ok = not bad
    record(3, ok, f"energy monotonicity, subadditivity, residual zero on 50 pairs, "
                  f"{len(bad)} violations (tol 1e-6)")
    assert ok, bad


def random_balanced_instance(rng, max_atoms):
    n = int(rng.integers(2, max_atoms + 1))
    ns = int(rng.integers(1, n))
    return random_balanced(rng, ns, n - ns)


def test_sweep_monotonicity():
    rng = np.random.default_rng(4242)
    bad = []
    grid = geometric_grid(12)
    for k in range(20):
        mu, nu = random_balanced_instance(rng, 5)
        alpha = float(rng.uniform(0.1, 0.9))
        rep = run_sweep(mu, nu, alpha, grid)
        viol = check_monotonicity(rep, 1e-6)
        if viol:
            bad.append((k, viol))
        if not check_prop_upper_bound(rep, rep.d_alpha_oracle, 1e-6):
            bad.append((k, "cost above d_alpha"))
    ok = not bad
    record(4, ok, f"sweep monotonicity and cost <= d_alpha on 20 sweeps x 12 c, "
                  f"{len(bad)} violations (slack 1e-6)")
    assert ok, bad


def test_unmoved_mass_bound():
    rng = np.random.default_rng(99)
    anchor = abs(c_constant(2, 0.75) - 1.707107) <= 1e-6
    bad, n_records = [], 0
    for alpha in (0.6, 0.75, 0.9):
        for k in range(6):
            mu, nu = random_balanced_instance(rng, 4)
            rep = run_sweep(mu, nu, alpha, geometric_grid(12), compare=False)
            n_records += len(rep.records)
            viol = check_unmoved_bound(rep, alpha, 2, diameter(mu, nu), 1e-9)
            if viol:
                bad.append((alpha, k, viol))
    ok = anchor and not bad
    record(5, ok, f"unmoved-mass bound on {n_records} records (m=2), {len(bad)} violating "
                  f"sweeps; C_2,0.75 = {c_constant(2, 0.75):.7f}")
    assert ok, bad


def test_approximation_by_large_c():
    rng = np.random.default_rng(31337)
    gaps = []
    for k in range(10):
        mu, nu = random_balanced_instance(rng, 5)
        alpha = float(rng.uniform(0.1, 0.9))
        rep = run_sweep(mu, nu, alpha, geometric_grid(12), compare=False)
        value = m_alpha(limit_path(rep), alpha)
        gaps.append(abs(value - enumeration_oracle(mu, nu, alpha)))
    ok = max(gaps) <= 1e-6
    record(6, ok, f"large-c limit vs topology enumeration on 10 instances, "
                  f"max gap {max(gaps):.2e} (tol 1e-6)")
    assert ok, gaps


def test_mass_bound_and_decomposition():
    rng = np.random.default_rng(2718)
    bad, n_paths, worst = [], 0, 0.0
    y = TransportPath([[-1, 0], [1, 0], [0, 0.5], [0, 1]], [True, True, False, True],
                      [(0, 2, 1.0), (1, 2, 1.0), (2, 3, 2.0)])
    paths = [(y, 0.5)]
    for _ in range(60):
        mu, nu = random_instance(rng, 6)
        alpha = float(rng.uniform(0.05, 0.95))
        rep = solve(mu, nu, random_payoff(rng, mu, nu), alpha)
        if rep.certified and not rep.is_zero:
            paths.append((rep.path, alpha))
    for j, (T, alpha) in enumerate(paths):
        n_paths += 1
        if not mass_bound_holds(T, alpha, 1e-9):
            bad.append((j, "mass bound"))
        dec = good_decomposition(T)
        # Weights are float differences of flows, so "exact" means to round-off.
        err = float(np.max(np.abs(dec.edge_flows(T) - T.flows)))
        worst = max(worst, err)
        if err > 1e-12 * max(1.0, float(T.flows.max())):
            bad.append((j, "flow round trip", err))
        half = total_variation(boundary(T)) / 2
        if abs(dec.total_weight - half) > 1e-9 * max(1.0, half):
            bad.append((j, "weights"))
        if abs(dec.weighted_length(T) - mass(T)) > 1e-9 * max(1.0, mass(T)):
            bad.append((j, "weighted length"))
    anchors = abs(mass(y) - 3.236068) <= 1e-6 and abs(m_alpha(y, 0.5) - 2.943175) <= 1e-6
    ok = anchors and not bad
    record(7, ok, f"mass bound and good decomposition on {n_paths} paths, {len(bad)} failures, "
                  f"max flow round-trip error {worst:.1e}; "
                  f"Y anchors M={mass(y):.6f}, M_0.5={m_alpha(y, 0.5):.6f}")
    assert ok, bad


def test_zero_solution_shortcut():
    rng = np.random.default_rng(8080)
    bad = []
    for k in range(50):
        mu, nu = random_instance(rng, 6)
        if rng.random() < 0.3:
            h = ConstantC(float(rng.uniform(-2.0, 0.0)))
        else:
            top = float(rng.uniform(-1.0, 1.0))
            h = PerAtom.from_measures(mu, top + rng.uniform(0.0, 1.0, len(mu)),
                                      nu, top - rng.uniform(0.0, 1.0, len(nu)))
        short = solve_zero_shortcut(mu, nu, h)
        full = solve(mu, nu, h, float(rng.uniform(0.05, 0.95)))
        if short is None or not short.is_zero or not full.is_zero or full.energy != 0.0:
            bad.append(k)
    ok = not bad
    record(8, ok, f"zero-solution shortcut agrees with full search on 50 instances, "
                  f"{len(bad)} disagreements")
    assert ok, bad
