"""Command-line front end.

Subcommands: bounds (bound table for a lattice model), exact (exact
distances with error bars next to the bounds), verify (named self-check
suites), pointprocess (half-line process bounds), table1 (bounds on the
built-in n = d = 1000 example).  Lattice subcommands report full
total-variation norms; pointprocess reports d_TV (half-norm); each
header states which.  Identical inputs and seed give byte-identical
text output in sequential mode.

Exit codes: 0 success, 1 validation problem, 2 verification failure,
3 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import bounds as bounds_mod
from . import pointprocess as pp_mod
from . import verify as verify_mod
from .measures import ResourceCapError, SeriesDivergenceError
from .model import ModelSpec, exact_tv_many, reference_example

_LATTICE_CONVENTION = "full total-variation norm ||F - G_ell||"
_PROCESS_CONVENTION = "d_TV (half of the total-variation norm)"


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage to 1
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cpbounds",
                     description="Total variation bounds for compound "
                                 "Poisson approximation of sums of "
                                 "multivariate indicators")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, lmax_default):
        p.add_argument("--lmax", type=int, default=lmax_default,
                       help="highest correction order to report")
        p.add_argument("--tol", type=float, default=1e-12,
                       help="series and window truncation tolerance")
        p.add_argument("--format", choices=("text", "csv", "json"),
                       default="text", help="output format")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized subcommands")
        p.add_argument("--parallel", action="store_true",
                       help="chunked tree reductions (deterministic, not "
                            "bit-identical to sequential)")

    p = sub.add_parser("bounds", help="bound table for a lattice model")
    p.add_argument("--input", required=True,
                   help="model JSON path, or the literal 'paper-example'")
    common(p, 4)

    p = sub.add_parser("exact",
                       help="exact distances with error bars, next to bounds")
    p.add_argument("--input", help="model JSON path")
    p.add_argument("--n", type=int, help="factor count for a seeded random model")
    p.add_argument("--d", type=int, help="category count for a seeded random model")
    common(p, 2)

    p = sub.add_parser("verify", help="run a named self-check suite")
    p.add_argument("--suite", required=True,
                   help="one of: " + ", ".join(verify_mod.SUITE_NAMES))
    common(p, 2)

    p = sub.add_parser("pointprocess", help="half-line process bound table")
    p.add_argument("--input", required=True, help="process JSON path")
    common(p, 2)

    p = sub.add_parser("table1",
                       help="bounds on the built-in n=d=1000 example")
    common(p, 4)
    return parser


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise _UsageError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise _UsageError(
            f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


def _require_field(data: dict, field: str, path: str):
    if field not in data:
        raise _UsageError(f"{path}: missing field {field!r}")
    return data[field]


def _load_model(source: str, path_label: str | None = None):
    """Returns a ModelSpec, or ('zero', n, d) for the all-zero trivial case."""
    if source == "paper-example":
        return reference_example()
    path = path_label or source
    data = _load_json(source)
    if not isinstance(data, dict):
        raise _UsageError(f"{path}: top level must be a JSON object")
    if "generator" in data:
        if data["generator"] == "paper-example":
            return reference_example()
        raise _UsageError(f"{path}: unknown generator {data['generator']!r}")
    p = np.asarray(_require_field(data, "p", path), dtype=float)
    q = np.asarray(_require_field(data, "q", path), dtype=float)
    if p.ndim != 1:
        raise _UsageError(f"{path}: field 'p' must be a flat array")
    if q.ndim != 2 or q.shape[0] != p.shape[0]:
        raise _UsageError(f"{path}: field 'q' must be an array of "
                          f"{p.shape[0]} rows")
    for key, want in (("n", p.shape[0]), ("d", q.shape[1])):
        if key in data and int(data[key]) != want:
            raise _UsageError(f"{path}: field {key!r} is {data[key]}, but "
                              f"the arrays imply {want}")
    if p.size and not p.any():
        return ("zero", int(p.shape[0]), int(q.shape[1]))
    try:
        return ModelSpec(p=p, q=q)
    except ValueError as exc:
        raise _UsageError(f"{path}: {exc}") from exc


def _load_process(source: str):
    data = _load_json(source)
    if not isinstance(data, dict):
        raise _UsageError(f"{source}: top level must be a JSON object")
    p = np.asarray(_require_field(data, "p", source), dtype=float)
    resolution = int(data.get("resolution", pp_mod.DEFAULT_RESOLUTION))
    if "exponential_rates" in data and ("grid" in data or "densities" in data):
        raise _UsageError(f"{source}: give either 'exponential_rates' or "
                          "'grid'/'densities', not both")
    try:
        if "exponential_rates" in data:
            rates = np.asarray(data["exponential_rates"], dtype=float)
            return pp_mod.PointProcessSpec(p=p, rates=rates), resolution
        grid = _require_field(data, "grid", source)
        dens = np.asarray(_require_field(data, "densities", source), dtype=float)
        x = np.asarray(_require_field(grid, "x", source), dtype=float)
        w = np.asarray(_require_field(grid, "weights", source), dtype=float)
        return pp_mod.PointProcessSpec(p=p, x=x, weights=w, densities=dens), resolution
    except ValueError as exc:
        raise _UsageError(f"{source}: {exc}") from exc


def _fmt(v) -> str:
    if v is None:
        return "-"
    if v != 0.0 and abs(v) < 1e-6:
        return f"{v:.2e}"
    return f"{v:.6f}"


def _text_table(rows: list[dict], columns: list[str], out: io.TextIOBase):
    cells = [[("-" if r.get(c) in (None, "") else
               _fmt(r[c]) if isinstance(r.get(c), float) else str(r[c]))
              for c in columns] for r in rows]
    widths = [max(len(col), *(len(row[i]) for row in cells)) if cells else len(col)
              for i, col in enumerate(columns)]
    out.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip() + "\n")
    for row in cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")


_CSV_COLUMNS = ["section", "name", "kind", "ell", "value", "error_bar",
                "applicable", "condition", "source"]


def _flat_rows(payload: dict) -> list[dict]:
    flat = []
    for name, value in payload.get("coefficients", {}).items():
        flat.append({"section": "coefficients", "name": name,
                     "kind": "coefficient", "value": value})
    for row in payload.get("exact", []):
        flat.append({"section": "exact", "name": "exact_norm",
                     "kind": "exact", "ell": row["ell"],
                     "value": row["distance"], "error_bar": row["error_bar"],
                     "condition": row.get("note", "")})
    for row in payload.get("rows", []):
        flat.append({"section": "bounds", **row})
    for row in payload.get("properties", []):
        flat.append({"section": "properties", "name": row["name"],
                     "kind": "property", "value": float(row["failures"]),
                     "condition": f"trials={row['trials']}"})
    return flat


def _emit(payload: dict, fmt: str, out: io.TextIOBase):
    if fmt == "json":
        json.dump(payload, out, indent=2)
        out.write("\n")
        return
    if fmt == "csv":
        writer = csv.DictWriter(out, fieldnames=_CSV_COLUMNS,
                                extrasaction="ignore", lineterminator="\n")
        writer.writeheader()
        for row in _flat_rows(payload):
            row = dict(row)
            for key in ("value", "error_bar"):
                if isinstance(row.get(key), float):
                    row[key] = repr(row[key])
            writer.writerow(row)
        return
    out.write(f"command: {payload['command']}\n")
    if "convention" in payload:
        out.write(f"convention: {payload['convention']}\n")
    for key in ("model", "suite", "seed", "passed"):
        if key in payload:
            out.write(f"{key}: {payload[key]}\n")
    coeffs = payload.get("coefficients")
    if coeffs:
        out.write("coefficients:\n")
        for name, value in coeffs.items():
            out.write(f"  {name} = {_fmt(value)}\n")
    if payload.get("exact"):
        out.write("exact distances:\n")
        _text_table(payload["exact"], ["ell", "distance", "error_bar", "note"], out)
    if payload.get("rows"):
        out.write("bounds:\n")
        _text_table(payload["rows"],
                    ["name", "ell", "value", "applicable", "condition", "source"],
                    out)
    if payload.get("properties"):
        _text_table(payload["properties"],
                    ["name", "trials", "failures"], out)
        for prop in payload["properties"]:
            if prop["failures"] and prop.get("first_counterexample") is not None:
                out.write("first counterexample for "
                          f"{prop['name']}: "
                          + json.dumps(prop["first_counterexample"]) + "\n")


def _zero_reports(n: int, d: int, lmax: int) -> list[bounds_mod.BoundReport]:
    """Bound table for a model that fires nothing: every applicable value
    is zero (the limiting value of each formula as all p_j -> 0)."""
    template = ModelSpec(p=np.full(n, 1e-9), q=np.ones((n, 1)))
    rows = []
    for rep in (bounds_mod.upper_bounds(template, lmax)
                + bounds_mod.lower_bounds(template)):
        applicable = rep.applicable
        if rep.name.endswith("_d1"):
            applicable = d == 1
        rows.append(bounds_mod.BoundReport(
            rep.name, rep.kind, 0.0 if applicable else None, applicable,
            condition=rep.condition, ell=rep.ell, source=rep.source))
    return rows


def _coefficient_payload(co: bounds_mod.Coefficients) -> dict:
    return {"lam": co.lam, "max_p": co.max_p, "sum_p_sq": co.sum_p_sq,
            "geometric": co.geometric, "linear": co.linear,
            "coarse_geometric": co.coarse_geometric,
            "coarse_linear": co.coarse_linear}


def _cmd_bounds(args, source: str) -> dict:
    model = _load_model(source)
    if args.lmax < 0:
        raise _UsageError("--lmax must be >= 0")
    if isinstance(model, tuple):
        _, n, d = model
        return {"command": "bounds", "convention": _LATTICE_CONVENTION,
                "model": f"n={n} d={d} (all-zero p)",
                "coefficients": {"lam": 0.0, "max_p": 0.0, "sum_p_sq": 0.0,
                                 "geometric": 0.0, "linear": 0.0,
                                 "coarse_geometric": 0.0, "coarse_linear": 0.0},
                "rows": [r.as_dict() for r in _zero_reports(n, d, args.lmax)]}
    co = bounds_mod.coefficients(model, args.parallel)
    rows = (bounds_mod.upper_bounds(model, args.lmax, args.parallel)
            + bounds_mod.lower_bounds(model, args.parallel))
    return {"command": "bounds", "convention": _LATTICE_CONVENTION,
            "model": f"n={model.n} d={model.d}",
            "coefficients": _coefficient_payload(co),
            "rows": [r.as_dict() for r in rows]}


def _cmd_exact(args) -> dict:
    if args.input is not None:
        model = _load_model(args.input)
    elif args.n is not None and args.d is not None:
        if args.n < 1 or args.d < 1:
            raise _UsageError("--n and --d must be positive")
        rng = np.random.default_rng(args.seed)
        p = rng.uniform(0.02, 0.3, size=args.n)
        q = rng.uniform(0.05, 1.0, size=(args.n, args.d))
        q /= q.sum(axis=1, keepdims=True)
        model = ModelSpec(p=p, q=q)
    else:
        raise _UsageError("exact needs --input, or both --n and --d")
    if args.lmax < 0:
        raise _UsageError("--lmax must be >= 0")
    if isinstance(model, tuple):
        _, n, d = model
        exact_rows = [{"ell": ell, "distance": 0.0, "error_bar": 0.0,
                       "note": ""} for ell in range(min(args.lmax, n) + 1)]
        return {"command": "exact", "convention": _LATTICE_CONVENTION,
                "model": f"n={n} d={d} (all-zero p)", "exact": exact_rows,
                "rows": [r.as_dict() for r in _zero_reports(n, d, args.lmax)]}
    ells = list(range(min(args.lmax, model.n) + 1))
    results = exact_tv_many(model, ells, tol=args.tol)
    exact_rows = []
    prev = None
    for res in results:
        note = ""
        if prev is not None and res.distance > prev.distance + prev.error_bar + res.error_bar:
            note = "larger than previous order"
        exact_rows.append({"ell": res.ell, "distance": res.distance,
                           "error_bar": res.error_bar, "note": note})
        prev = res
    rows = (bounds_mod.upper_bounds(model, args.lmax, args.parallel)
            + bounds_mod.lower_bounds(model, args.parallel))
    return {"command": "exact", "convention": _LATTICE_CONVENTION,
            "model": f"n={model.n} d={model.d}", "exact": exact_rows,
            "rows": [r.as_dict() for r in rows]}


def _cmd_verify(args) -> tuple[dict, int]:
    try:
        report = verify_mod.run_suite(args.suite, seed=args.seed)
    except ValueError as exc:
        raise _UsageError(str(exc)) from exc
    payload = {"command": "verify", "suite": report.suite, "seed": report.seed,
               "passed": report.passed,
               "properties": [p.as_dict() for p in report.properties]}
    return payload, 0 if report.passed else 2


def _cmd_pointprocess(args) -> dict:
    spec, resolution = _load_process(args.input)
    alpha, beta = pp_mod.process_coefficients(spec, resolution, args.parallel)
    rows = pp_mod.pp_bounds(spec, resolution, args.parallel)
    return {"command": "pointprocess", "convention": _PROCESS_CONVENTION,
            "model": f"n={spec.n} resolution={resolution}",
            "coefficients": {"lam": spec.lam, "geometric": alpha,
                             "linear": beta},
            "rows": [r.as_dict() for r in rows]}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        code = 0
        if args.command == "bounds":
            payload = _cmd_bounds(args, args.input)
        elif args.command == "table1":
            payload = _cmd_bounds(args, "paper-example")
            payload["command"] = "table1"
        elif args.command == "exact":
            payload = _cmd_exact(args)
        elif args.command == "verify":
            payload, code = _cmd_verify(args)
        else:
            payload = _cmd_pointprocess(args)
        _emit(payload, args.format, sys.stdout)
        return code
    except _UsageError as exc:
        print(f"cpbounds: error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, SeriesDivergenceError) as exc:
        print(f"cpbounds: error: {exc}", file=sys.stderr)
        return 1
    except ResourceCapError as exc:
        print(f"cpbounds: resource cap: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
