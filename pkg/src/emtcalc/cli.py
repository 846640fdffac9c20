"""Command-line driver for deriving, comparing and checking tensors.

Exit codes: 0 success/equal/all-pass, 1 nonzero difference or failed
property (a first-class outcome, not an error), 2 usage or parse error,
3 internal error.  All artifacts are deterministic JSON; human-readable
text is a rendering of the JSON.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from .canon import canonicalize, match_free
from .dsl import Program, expand_defs, parse, render
from .expr import (FieldSpec, TensorExpr, Term, TensorError, UsageError,
                   expr_from_json, expr_to_json, set_dim, subs_params)
from .hilbert import hilbert_emt
from .variational import noether_emt
from .verify import check_property, oracle_equal

EXIT_OK = 0
EXIT_DIFFERENT = 1
EXIT_USAGE = 2
EXIT_INTERNAL = 3

STAGES = ("promoted", "pruned", "varied", "flat")


def _threads() -> int:
    """Parallelism bound from EMT_THREADS (0 = auto).  The pipeline is
    currently sequential, so the value is validated and recorded only."""
    raw = os.environ.get("EMT_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"EMT_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise UsageError("EMT_THREADS must be >= 0")
    return n


def _fields_to_json(fields) -> dict:
    return {name: {"rank": s.rank, "symmetry": s.symmetry, "kind": s.kind}
            for name, s in sorted(fields.items())}


def _fields_from_json(obj) -> dict:
    return {name: FieldSpec(name, d["rank"], d["symmetry"], d["kind"])
            for name, d in obj.items()}


def write_artifact(e: TensorExpr, fields, path: str | None, extra=None) -> dict:
    doc = {"expr": expr_to_json(e), "fields": _fields_to_json(fields)}
    if extra:
        doc.update(extra)
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
    return doc


def read_artifact(path: str) -> tuple[TensorExpr, dict]:
    """Load an expression artifact; bare expression JSON is accepted too."""
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read artifact {path}: {exc}")
    if "expr" in obj:
        return expr_from_json(obj["expr"]), _fields_from_json(obj.get("fields", {}))
    return expr_from_json(obj), {}


def _load_program(path: str, delta: str | None = None) -> Program:
    try:
        prog = parse(Path(path).read_text())
        if delta is not None:
            prog = parse(Path(delta).read_text(), base=prog)
    except OSError as exc:
        raise UsageError(f"cannot read program: {exc}")
    return prog


def _parse_dim(text: str):
    if text == "D":
        return "D"
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"--dim must be an integer or 'D', got {text!r}")


def _parse_sets(pairs) -> dict:
    values = {}
    for item in pairs or ():
        name, _, val = item.partition("=")
        if not _:
            raise UsageError(f"--set expects NAME=VALUE, got {item!r}")
        try:
            values[name] = Fraction(val)
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"--set value for {name!r} is not a rational: {val!r}")
    return values


def _finish(e: TensorExpr, prog: Program, dim, sets) -> TensorExpr:
    if sets:
        e = subs_params(e, sets)
    if isinstance(dim, int):
        e = set_dim(e, dim)
    return canonicalize(e, prog.fields)


def cmd_canon(args) -> int:
    prog = _load_program(args.file)
    e = _finish(expand_defs(prog), prog, _parse_dim(args.dim), _parse_sets(args.set))
    write_artifact(e, prog.fields, args.output, {"rendered": render(e)})
    return EXIT_OK


def cmd_derive(args) -> int:
    dim = _parse_dim(args.dim)
    sets = _parse_sets(args.set)
    if args.method == "noether":
        prog = _load_program(args.file, args.delta)
        T = noether_emt(expand_defs(prog), prog, ("mu", "nu"))
        T = _finish(T, prog, dim, sets)
        write_artifact(T, prog.fields, args.output,
                       {"method": "noether", "rendered": render(T)})
        return EXIT_OK
    prog = _load_program(args.file)
    stages: dict | None = {} if args.emit_stage else None
    T = hilbert_emt(prog, ("mu", "nu"), dim, stages=stages)
    if args.emit_stage:
        e = stages[args.emit_stage]
        if sets:
            e = canonicalize(subs_params(e, sets))
        write_artifact(e, prog.fields, args.output,
                       {"method": "hilbert", "stage": args.emit_stage,
                        "rendered": render(e)})
        return EXIT_OK
    if sets:
        T = canonicalize(subs_params(T, sets), prog.fields)
    write_artifact(T, prog.fields, args.output,
                   {"method": "hilbert", "rendered": render(T)})
    return EXIT_OK


def cmd_diff(args) -> int:
    a, fa = read_artifact(args.a)
    b, fb = read_artifact(args.b)
    fields = {**fb, **fa}
    b = match_free(a, b)
    d = canonicalize(
        a + TensorExpr(tuple(Term(-t.coeff, t.params, t.factors)
                             for t in b.terms), b.dim), fields)
    write_artifact(d, fields, args.output,
                   {"equal": d.is_zero(), "rendered": render(d)})
    return EXIT_OK if d.is_zero() else EXIT_DIFFERENT


def cmd_check(args) -> int:
    prog = _load_program(args.file)
    T, _ = read_artifact(args.emt)
    props = [p.strip() for p in args.properties.split(",") if p.strip()]
    if not props:
        raise UsageError("--properties needs at least one property name")
    gauge = None
    for name, spec in prog.fields.items():
        if spec.kind == "dynamical":
            gauge = name
    results = {}
    ok = True
    for prop in props:
        r = check_property(T, prop, prog.fields, gauge_field=gauge,
                           mode=args.mode, trials=args.trials,
                           seed=args.seed, degree=args.degree)
        results[prop] = r
        ok = ok and r["verdict"] == "pass"
    text = json.dumps({"verdict": "pass" if ok else "fail",
                       "properties": results},
                      indent=1, sort_keys=True, default=str) + "\n"
    (Path(args.output).write_text(text) if args.output
     else sys.stdout.write(text))
    return EXIT_OK if ok else EXIT_DIFFERENT


def cmd_oracle_compare(args) -> int:
    a, fa = read_artifact(args.a)
    b, fb = read_artifact(args.b)
    fields = {**fb, **fa}
    if not fields:
        raise UsageError("artifacts carry no field declarations; "
                         "compare artifacts produced by this tool")
    r = oracle_equal(a, match_free(a, b), fields, trials=args.trials,
                     seed=args.seed, degree=args.degree)
    text = json.dumps(r, indent=1, sort_keys=True, default=str) + "\n"
    (Path(args.output).write_text(text) if args.output
     else sys.stdout.write(text))
    return EXIT_OK if r["verdict"] == "equal" else EXIT_DIFFERENT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="emtcalc",
        description="Derive and compare energy-momentum tensors from "
                    "flat-spacetime Lagrangians.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dim=True):
        p.add_argument("-o", "--output", help="write the JSON artifact here")
        if dim:
            p.add_argument("--dim", default="4",
                           help="spacetime dimension (integer or 'D')")
            p.add_argument("--set", action="append", metavar="NAME=VALUE",
                           help="substitute a rational value for a parameter")

    p = sub.add_parser("canon", help="canonicalize a program's Lagrangian")
    p.add_argument("file")
    common(p)
    p.set_defaults(func=cmd_canon)

    p = sub.add_parser("derive", help="derive an energy-momentum tensor")
    p.add_argument("method", choices=("noether", "hilbert"))
    p.add_argument("file")
    p.add_argument("--delta", help="overlay program with delta rules "
                                   "(noether only)")
    p.add_argument("--emit-stage", choices=STAGES,
                   help="emit an intermediate pipeline stage (hilbert only)")
    common(p)
    p.set_defaults(func=cmd_derive)

    p = sub.add_parser("diff", help="canonical difference of two artifacts")
    p.add_argument("a")
    p.add_argument("b")
    common(p, dim=False)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("check", help="verify properties of a tensor")
    p.add_argument("file", help="program declaring the fields")
    p.add_argument("--emt", required=True, help="tensor artifact to check")
    p.add_argument("--properties", required=True,
                   help="comma-separated property names")
    p.add_argument("--mode", choices=("symbolic", "numeric"),
                   default="symbolic")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=4)
    common(p, dim=False)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("oracle-compare",
                       help="compare two artifacts on random exact "
                            "field configurations")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--degree", type=int, default=3)
    common(p, dim=False)
    p.set_defaults(func=cmd_oracle_compare)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        _threads()
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TensorError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
