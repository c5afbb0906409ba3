"""Command-line interface.

Exit codes: 0 success, 1 certificate failure, 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import sys
import time

import numpy as np

from .allocation import extract_structure, perturbation_certificate, solve
from .exceptions import (
    BalanceError,
    BoundInapplicableError,
    ConvergenceError,
    InvalidMeasureError,
    InvalidParameterError,
    InvalidPathError,
    OracleTooLargeError,
    PayoffDomainError,
    RotpbError,
    StructureViolationError,
    UnsupportedInputError,
)
from .io import (
    InputError,
    dumps,
    load_report,
    path_to_dict,
    problem_from_dict,
    read_json,
    report_file,
    solve_report_from_dict,
    solve_report_to_dict,
    sweep_report_from_dict,
    sweep_report_to_dict,
)
from .measures import SignedAtomicMeasure, normalize, preceq
from .oracle import solve_rot
from .payoff import ConstantC
from .svg import render_svg
from .sweep import (
    check_monotonicity,
    check_prop_upper_bound,
    check_unmoved_bound,
    geometric_grid,
    linear_grid,
    run_sweep,
)
from .transport import boundary, energy, mass_bound_holds

EXIT_OK, EXIT_CERT, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2, 3
INPUT_ERRORS = (InputError, BalanceError, InvalidMeasureError, InvalidParameterError,
                PayoffDomainError, UnsupportedInputError)
SOLVER_ERRORS = (OracleTooLargeError, ConvergenceError)


def _effective_problem(path, overrides):
    raw = read_json(path, "problem")
    if not isinstance(raw, dict):
        raise InputError("problem: top level must be an object")
    digest_problem = problem_from_dict(raw)
    eff = copy.deepcopy(raw)
    if overrides.get("alpha") is not None:
        eff["alpha"] = overrides["alpha"]
    solver = eff.setdefault("solver", {})
    if overrides.get("mode") is not None:
        solver["mode"] = overrides["mode"]
    if overrides.get("seed") is not None:
        solver["seed"] = overrides["seed"]
    return digest_problem, problem_from_dict(eff)


def _overrides(args):
    return {k: getattr(args, k, None) for k in ("alpha", "mode", "seed")
            if getattr(args, k, None) is not None}


def _emit(args, obj):
    text = dumps(obj)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _with_overrides(doc, overrides):
    doc["provenance"]["overrides"] = overrides
    return doc


def parse_grid(spec: str):
    """``"geometric"``, ``"geometric:N"`` or ``"start:stop:count"``."""
    parts = spec.split(":")
    try:
        if parts[0] == "geometric":
            if len(parts) == 1:
                return geometric_grid()
            if len(parts) == 2:
                return geometric_grid(int(parts[1]))
        elif len(parts) == 3:
            return linear_grid(float(parts[0]), float(parts[1]), int(parts[2]))
    except ValueError:
        pass
    raise InputError(f"--c-grid: expected 'start:stop:count' or 'geometric', got {spec!r}")


def cmd_solve(args) -> int:
    orig, prob = _effective_problem(args.problem, _overrides(args))
    t0 = time.perf_counter()
    rep = solve(prob.mu, prob.nu, prob.payoff, prob.alpha, prob.cfg, prob.mode)
    doc = report_file("solve", solve_report_to_dict(rep), orig, time.perf_counter() - t0)
    _emit(args, _with_overrides(doc, _overrides(args)))
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(render_svg(rep, prob.domain, f"energy {rep.energy:.6g}"))
    print(f"energy {rep.energy:.12g}  components {len(rep.components)}  "
          f"certified {str(rep.certified).lower()}", file=sys.stderr)
    return EXIT_OK


def cmd_sweep(args) -> int:
    orig, prob = _effective_problem(args.problem, _overrides(args))
    grid = parse_grid(args.c_grid)
    t0 = time.perf_counter()
    rep = run_sweep(prob.mu, prob.nu, prob.alpha, grid, prob.cfg, prob.mode)
    doc = report_file("sweep", sweep_report_to_dict(rep), orig, time.perf_counter() - t0)
    _emit(args, _with_overrides(doc, _overrides(args)))
    viol = check_monotonicity(rep)
    print(f"records {len(rep.records)}  monotonicity violations {len(viol)}", file=sys.stderr)
    for v in viol:
        print(f"  {v}", file=sys.stderr)
    try:
        ub = check_unmoved_bound(rep, prob.alpha, prob.dim, prob.diam)
        print(f"unmoved-mass bound violations {len(ub)}", file=sys.stderr)
    except BoundInapplicableError as exc:
        print(f"unmoved-mass bound not applicable: {exc}", file=sys.stderr)
    if rep.d_alpha_oracle is not None:
        ok = check_prop_upper_bound(rep, rep.d_alpha_oracle)
        print(f"d_alpha {rep.d_alpha_oracle:.12g}  cost bounded by d_alpha {str(ok).lower()}  "
              f"gap {rep.gap}", file=sys.stderr)
    if rep.jumps:
        print("moved mass jumps in " + ", ".join(f"({a:g}, {b:g})" for a, b in rep.jumps),
              file=sys.stderr)
    if args.svg and rep.records:
        with open(args.svg, "w", encoding="utf-8") as fh:
            last = rep.records[-1]
            fh.write(render_svg(last.report, prob.domain, f"c = {last.c:g}"))
    return EXIT_OK


def cmd_oracle(args) -> int:
    orig, prob = _effective_problem(args.problem, _overrides(args))
    t0 = time.perf_counter()
    res = solve_rot(prob.mu, prob.nu, prob.alpha, prob.cfg, prob.mode)
    body = {"value": res.value, "path": path_to_dict(res.path), "certified": res.certified,
            "topology": res.encoding, "alpha": prob.alpha}
    doc = report_file("oracle", body, orig, time.perf_counter() - t0)
    _emit(args, _with_overrides(doc, _overrides(args)))
    print(f"d_alpha {res.value:.12g}  certified {str(res.certified).lower()}", file=sys.stderr)
    return EXIT_OK


def check_solve_dict(body, prob, dim, payoff=None):
    """Names of failed certificates for one serialized solve report."""
    payoff = prob.payoff if payoff is None else payoff
    failures = []
    rep = solve_report_from_dict(body, dim, validate=False)
    try:
        rep.path.validate()
    except InvalidPathError as exc:
        return [f"flow conservation: {exc}"]
    rep = solve_report_from_dict(body, dim, validate=True)
    for name, got, want in (("source", rep.mu, prob.mu), ("sink", rep.nu, prob.nu)):
        want = normalize(want)
        if (got.positions.shape != want.positions.shape
                or not np.allclose(got.positions, want.positions, rtol=0, atol=1e-12)
                or not np.allclose(got.masses, want.masses, rtol=0, atol=1e-12)):
            failures.append(f"allocation: {name} atoms in the report differ from the problem")
    bd = boundary(rep.path)
    mu_s, nu_s = rep.allocation.used_measures(rep.mu, rep.nu)
    if not preceq(bd, SignedAtomicMeasure.difference(prob.nu, prob.mu)):
        failures.append("boundary order: boundary of the path is not below nu - mu")
    if not (preceq(bd, SignedAtomicMeasure.difference(nu_s, mu_s))
            and preceq(SignedAtomicMeasure.difference(nu_s, mu_s), bd)):
        failures.append("allocation: boundary of the path differs from the stored allocation")
    e = energy(rep.path, payoff, rep.alpha) if rep.path.n_edges else 0.0
    if abs(e - rep.energy) > 1e-9 * max(1.0, abs(e)):
        failures.append(f"energy consistency: stored {rep.energy!r}, recomputed {e!r}")
    if rep.energy > 1e-9:
        failures.append("zero-path comparison: energy is positive, the empty path is better")
    if not mass_bound_holds(rep.path, rep.alpha):
        failures.append("mass bound: M(T) exceeds (M(boundary)/2)**(1-alpha) * M_alpha(T)")
    if rep.certified and 0.0 < rep.alpha < 1.0:
        try:
            extract_structure(rep)
        except StructureViolationError as exc:
            failures.append(f"atomic slack structure: {exc}")
        if not perturbation_certificate(rep):
            failures.append("perturbation certificate: a component has two under-used atoms "
                            "or no fully used atom")
    return failures


def cmd_check(args) -> int:
    doc = load_report(args.report)
    overrides = doc["provenance"].get("overrides", {})
    orig, prob = _effective_problem(args.problem, overrides)
    if orig.digest != doc["provenance"].get("input_digest"):
        print("input digest mismatch: report was not produced from this problem", file=sys.stderr)
        return EXIT_INPUT
    dim = int(doc.get("dimension", prob.dim))
    failures = []
    try:
        if doc["kind"] == "solve":
            failures = check_solve_dict(doc["report"], prob, dim)
        elif doc["kind"] == "sweep":
            for i, rec in enumerate(doc["report"]["records"]):
                failures += [f"record {i}: {f}" for f in check_solve_dict(rec["solve"], prob, dim,
                                                                           ConstantC(float(rec["c"])))]
            if not failures:
                rep = sweep_report_from_dict(doc["report"], dim)
                failures += [f"monotonicity in c: {v}" for v in check_monotonicity(rep)]
                if rep.d_alpha_oracle is not None and not check_prop_upper_bound(rep, rep.d_alpha_oracle):
                    failures.append("cost bounded by d_alpha: a record costs more than d_alpha(mu, nu)")
                try:
                    failures += [f"unmoved-mass bound: {v}"
                                 for v in check_unmoved_bound(rep, rep.alpha, dim, prob.diam)]
                except BoundInapplicableError:
                    pass
        else:
            print("oracle reports carry no certificates to check", file=sys.stderr)
    except (KeyError, TypeError) as exc:
        raise InputError(f"report {args.report}: malformed report ({exc})")
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    if failures:
        return EXIT_CERT
    print("all certificates pass", file=sys.stderr)
    return EXIT_OK


def cmd_render(args) -> int:
    doc = load_report(args.report)
    dim = int(doc.get("dimension", 2))
    if doc["kind"] == "solve":
        rep = solve_report_from_dict(doc["report"], dim)
        title = f"energy {rep.energy:.6g}"
    elif doc["kind"] == "sweep":
        last = doc["report"]["records"][-1]
        rep = solve_report_from_dict(last["solve"], dim)
        title = f"c = {last['c']:g}"
    else:
        raise InputError("render needs a solve or sweep report")
    text = render_svg(rep, None, title)
    if args.svg:
        with open(args.svg, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rotpb", description="Branched transport with boundary payoff: solve, sweep, check.")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("problem", help="problem JSON file")
        p.add_argument("--alpha", type=float, help="override the cost exponent")
        p.add_argument("--mode", choices=["exact", "heuristic"], help="override the solver mode")
        p.add_argument("--seed", type=int, help="override the heuristic seed")
        p.add_argument("--out", help="report file (default: stdout)")

    p = sub.add_parser("solve", help="solve one problem")
    solver_flags(p)
    p.add_argument("--svg", help="also draw the optimal path")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve along a grid of constant payoffs c")
    solver_flags(p)
    p.add_argument("--c-grid", default="geometric",
                   help="'start:stop:count', 'geometric' (0.05 * 2**k, 12 points) or 'geometric:N'")
    p.add_argument("--svg", help="draw the path at the largest c")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("oracle", help="branched transport distance between sources and sinks")
    solver_flags(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("check", help="re-verify a report against its problem")
    p.add_argument("report")
    p.add_argument("problem")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("render", help="draw a report as SVG")
    p.add_argument("report")
    p.add_argument("--svg", help="output file (default: stdout)")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except INPUT_ERRORS as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except RotpbError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
