"""JSON problem and report files.

Both file kinds carry ``"format_version": 1`` and are written canonically:
sorted keys, two-space indent, floats in shortest round-trip form. Writing
a loaded file reproduces its bytes exactly, so digests are stable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import jsonschema
import numpy as np

from ._version import __version__
from .allocation import Allocation, SolveReport, _summaries
from .exceptions import RotpbError
from .measures import POSITION_TOL, AtomicMeasure, diameter
from .payoff import ConstantC, PerAtom
from .relax import RelaxationConfig
from .sweep import SweepRecord, SweepReport
from .transport import TransportPath

FORMAT_VERSION = 1


class InputError(RotpbError, ValueError):
    """Unreadable or schema-invalid input file."""


_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 3}
_ATOM = {
    "type": "object",
    "required": ["position", "mass"],
    "properties": {"position": _VEC, "mass": {"type": "number", "minimum": 0}},
    "additionalProperties": False,
}
PROBLEM_SCHEMA = {
    "type": "object",
    "required": ["format_version", "dimension", "alpha", "sources", "sinks", "payoff"],
    "properties": {
        "format_version": {"const": FORMAT_VERSION},
        "dimension": {"enum": [2, 3]},
        "alpha": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "domain": {
            "type": "object",
            "required": ["min", "max"],
            "properties": {"min": _VEC, "max": _VEC},
            "additionalProperties": False,
        },
        "sources": {"type": "array", "items": _ATOM},
        "sinks": {"type": "array", "items": _ATOM},
        "payoff": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind", "c"],
                    "properties": {"kind": {"const": "constant_c"}, "c": {"type": "number"}},
                    "additionalProperties": False,
                },
                {
                    "type": "object",
                    "required": ["kind", "source_values", "sink_values"],
                    "properties": {
                        "kind": {"const": "per_atom"},
                        "source_values": {"type": "array", "items": {"type": "number"}},
                        "sink_values": {"type": "array", "items": {"type": "number"}},
                    },
                    "additionalProperties": False,
                },
            ]
        },
        "solver": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["exact", "heuristic"]},
                "oracle_limit": {"type": "integer", "minimum": 2},
                "multistarts": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
                "tolerances": {
                    "type": "object",
                    "properties": {
                        "tol": {"type": "number", "exclusiveMinimum": 0},
                        "max_iter": {"type": "integer", "minimum": 1},
                        "eps": {"type": "number", "exclusiveMinimum": 0},
                        "collapse_tol": {"type": "number", "exclusiveMinimum": 0},
                    },
                    "additionalProperties": False,
                },
            },
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


def dumps(obj) -> str:
    """Canonical JSON text (sorted keys, shortest float repr, trailing newline)."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    return obj


def digest(obj) -> str:
    return hashlib.sha256(dumps(obj).encode()).hexdigest()


def _parse(text: str, what: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")


def read_json(path: str, what: str = "file"):
    try:
        with open(path, encoding="utf-8") as fh:
            return _parse(fh.read(), f"{what} {path}")
    except OSError as exc:
        raise InputError(f"cannot read {what} {path}: {exc.strerror}")


def write_json(path: str, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


# --- problems ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Problem:
    raw: dict
    mu: AtomicMeasure
    nu: AtomicMeasure
    payoff: object
    alpha: float
    cfg: RelaxationConfig
    mode: str
    domain: tuple | None

    @property
    def dim(self) -> int:
        return int(self.raw["dimension"])

    @property
    def diam(self) -> float:
        """Diameter of the domain box (or of the atom bounding box)."""
        if self.domain is not None:
            lo, hi = self.domain
            return float(np.linalg.norm(np.asarray(hi) - np.asarray(lo)))
        return diameter(self.mu, self.nu)

    @property
    def digest(self) -> str:
        return digest(self.raw)


def problem_from_dict(raw: dict) -> Problem:
    """Validate and build a :class:`Problem`; raises :class:`InputError`."""
    errors = sorted(jsonschema.Draft202012Validator(PROBLEM_SCHEMA).iter_errors(raw),
                    key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"{'/'.join(map(str, e.absolute_path)) or '<root>'}: {e.message}" for e in errors]
        raise InputError("schema violation:\n  " + "\n  ".join(lines))
    m = raw["dimension"]
    for side in ("sources", "sinks"):
        for i, atom in enumerate(raw[side]):
            if len(atom["position"]) != m:
                raise InputError(f"{side}/{i}/position: expected {m} coordinates")
    def measure(side):
        atoms = raw[side]
        pos = np.array([a["position"] for a in atoms], float).reshape(len(atoms), m)
        return AtomicMeasure(pos, [a["mass"] for a in atoms])

    mu, nu = measure("sources"), measure("sinks")
    domain = None
    if "domain" in raw:
        lo, hi = np.array(raw["domain"]["min"], float), np.array(raw["domain"]["max"], float)
        if lo.shape != (m,) or hi.shape != (m,) or np.any(lo > hi):
            raise InputError("domain: min/max must be ordered corners of the right dimension")
        for side, meas in (("sources", mu), ("sinks", nu)):
            for i, p in enumerate(meas.positions):
                if np.any(p < lo - POSITION_TOL) or np.any(p > hi + POSITION_TOL):
                    raise InputError(f"{side}/{i}/position: outside the domain box")
        domain = (tuple(lo), tuple(hi))
    pay = raw["payoff"]
    if pay["kind"] == "constant_c":
        payoff = ConstantC(float(pay["c"]))
    else:
        if len(pay["source_values"]) != len(raw["sources"]):
            raise InputError("payoff/source_values: one value per source atom is required")
        if len(pay["sink_values"]) != len(raw["sinks"]):
            raise InputError("payoff/sink_values: one value per sink atom is required")
        payoff = PerAtom(mu.positions, pay["source_values"], nu.positions, pay["sink_values"])
    solver = raw.get("solver", {})
    tols = solver.get("tolerances", {})
    cfg = RelaxationConfig(
        oracle_limit=solver.get("oracle_limit", 6),
        multistarts=solver.get("multistarts", 8),
        seed=solver.get("seed", 0),
        **{k: tols[k] for k in ("tol", "max_iter", "eps", "collapse_tol") if k in tols},
    )
    return Problem(raw, mu, nu, payoff, float(raw["alpha"]), cfg,
                   solver.get("mode", "exact"), domain)


def load_problem(path: str) -> Problem:
    raw = read_json(path, "problem")
    if not isinstance(raw, dict):
        raise InputError("problem: top level must be an object")
    return problem_from_dict(raw)


# --- reports -----------------------------------------------------------------

def path_to_dict(T: TransportPath) -> dict:
    return {
        "positions": [[float(x) for x in p] for p in T.positions],
        "is_boundary": [bool(b) for b in T.is_boundary],
        "edges": [[int(u), int(v), float(f)] for u, v, f in zip(T.tails, T.heads, T.flows)],
    }


def path_from_dict(d: dict, dim: int = 2, validate: bool = True) -> TransportPath:
    pos = np.array(d["positions"], float)
    if pos.size == 0:
        return TransportPath.empty(dim)
    return TransportPath(pos, d["is_boundary"], [tuple(e) for e in d["edges"]], validate=validate)


def _atoms(meas: AtomicMeasure, used):
    return [{"position": [float(x) for x in p], "mass": float(m), "used": float(u)}
            for (p, m), u in zip(meas, used)]


def _components_to_list(report: SolveReport):
    out = []
    for c in report.components:
        slack = None
        if c.slack_atom is not None:
            side, idx = c.slack_atom
            meas = report.mu if side == "source" else report.nu
            slack = {"side": side, "index": int(idx),
                     "position": [float(x) for x in meas.positions[idx]]}
        out.append({"sources": list(c.sources), "sinks": list(c.sinks),
                    "mu_mass": c.mu_mass, "nu_mass": c.nu_mass, "slack_atom": slack,
                    "slack_amount": c.slack_amount, "balance": c.balance})
    return out


def solve_report_to_dict(report: SolveReport) -> dict:
    return {
        "path": path_to_dict(report.path),
        "allocation": {
            "sources": _atoms(report.mu, report.allocation.source_used),
            "sinks": _atoms(report.nu, report.allocation.sink_used),
        },
        "energy": report.energy,
        "components": _components_to_list(report),
        "certified": report.certified,
        "alpha": report.alpha,
    }


def solve_report_from_dict(d: dict, dim: int = 2, validate: bool = True) -> SolveReport:
    """Rebuild a report; component summaries are recomputed from the path."""
    def meas(atoms):
        pos = np.array([a["position"] for a in atoms], float).reshape(len(atoms), dim)
        return AtomicMeasure(pos, [a["mass"] for a in atoms]), [a["used"] for a in atoms]

    mu, su = meas(d["allocation"]["sources"])
    nu, ku = meas(d["allocation"]["sinks"])
    path = path_from_dict(d["path"], dim, validate)
    alloc = Allocation(su, ku)
    comps = _summaries(path, mu, nu, alloc) if validate else ()
    return SolveReport(path, alloc, float(d["energy"]), comps, bool(d["certified"]),
                       float(d["alpha"]), mu, nu)


def sweep_report_to_dict(report: SweepReport) -> dict:
    return {
        "alpha": report.alpha,
        "records": [
            {"c": r.c, "energy": r.energy, "m_alpha": r.m_alpha,
             "boundary_mass": r.boundary_mass, "unmoved_mass": r.unmoved_mass,
             "solve": solve_report_to_dict(r.report)}
            for r in report.records
        ],
        "d_alpha_oracle": report.d_alpha_oracle,
        "gap": report.gap,
        "jumps": [list(j) for j in report.jumps],
        "s_restricted": report.s_restricted,
        "certified": report.certified,
    }


def sweep_report_from_dict(d: dict, dim: int = 2, validate: bool = True) -> SweepReport:
    records = []
    for r in d["records"]:
        rep = solve_report_from_dict(r["solve"], dim, validate)
        records.append(SweepRecord(float(r["c"]), float(r["energy"]), float(r["m_alpha"]),
                                   float(r["boundary_mass"]), float(r["unmoved_mass"]),
                                   rep.path, rep))
    return SweepReport(float(d["alpha"]), tuple(records), d["d_alpha_oracle"], d["gap"],
                       tuple(tuple(j) for j in d["jumps"]), d["s_restricted"],
                       bool(d["certified"]))


def report_file(kind: str, body: dict, problem: Problem, wall_time: float) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "provenance": {
            "input_digest": problem.digest,
            "solver_version": __version__,
            "wall_time_s": float(wall_time),
        },
        "dimension": problem.dim,
        "report": body,
    }


def load_report(path: str) -> dict:
    raw = read_json(path, "report")
    if not isinstance(raw, dict) or raw.get("format_version") != FORMAT_VERSION:
        raise InputError(f"report {path}: missing or unsupported format_version")
    for key in ("kind", "provenance", "report"):
        if key not in raw:
            raise InputError(f"report {path}: missing field {key!r}")
    if raw["kind"] not in ("solve", "sweep", "oracle"):
        raise InputError(f"report {path}: unknown kind {raw['kind']!r}")
    return raw
