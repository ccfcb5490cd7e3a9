"""Command-line interface.

Exit codes: 0 success, 1 scenario failure (runtime error, invalid unitary,
or a conservation verdict other than the expected one), 2 parse or usage
error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import scenario as scn
from .dynamics import CHECK_TOL, simulate, validate_momentum_conserving
from .frc import builtin_transforms
from .scenario.ast import TransformQuery
from .scenario.runner import TransformResult, label_bound, resolve_unitary, transform_query

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _read_source(path: str) -> str:
    p = Path(path)
    if p.exists():
        return p.read_text(encoding="utf-8")
    try:
        return scn.source(p.name)
    except KeyError:
        raise _UsageError(f"no such file: {path}") from None


def _load(path: str) -> scn.Scenario:
    return scn.parse(_read_source(path))


def _point_arg(text: str | None):
    if text is not None and text.lstrip("+-").isdigit():
        return int(text)
    return text


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _cmd_run(args) -> int:
    sc = _load(args.file)
    res = scn.run(sc, tolerance=args.tolerance, shots=args.sample, seed=args.seed)
    if args.json:
        text = res.json()
    elif args.csv:
        if args.query is not None and not 0 <= args.query < len(res.results):
            raise _UsageError(f"--query must be in 0..{len(res.results) - 1}")
        text = res.csv(args.query)
    else:
        text = res.text()
    _emit(text, args.out)
    failed = [r for r in res.results if getattr(r, "kind", "") == "check" and not r.as_expected]
    return EXIT_FAIL if failed else EXIT_OK


def _cmd_check(args) -> int:
    sc = _load(args.file)
    subset = [p.strip() for p in args.set.split(",") if p.strip()]
    if not subset:
        raise _UsageError("--set needs at least one particle")
    declared = {p.name for p in sc.particles}
    unknown = [p for p in subset if p not in declared]
    if unknown:
        raise _UsageError(f"unknown particle(s) in --set: {', '.join(unknown)}")
    report = scn.check(sc, subset, _point_arg(args.reference), tolerance=args.tolerance)
    if args.json:
        _emit(json.dumps({"schema": 1, **report.to_json()}, indent=2) + "\n", args.out)
    else:
        _emit(report.table() + "\n", args.out)
    return EXIT_OK if report.passed == (args.expect == "pass") else EXIT_FAIL


def _cmd_transform(args) -> int:
    sc = _load(args.file)
    order = tuple(p.strip() for p in args.order.split(",")) if args.order else None
    q = TransformQuery(args.coords, order, _point_arg(args.at))
    pipeline = scn.build_pipeline(sc)
    res: TransformResult = transform_query(sc, pipeline, simulate(pipeline), q)
    if args.json:
        _emit(json.dumps({"schema": 1, **res.to_json()}, indent=2) + "\n", args.out)
    else:
        _emit(res.text() + "\n", args.out)
    return EXIT_OK


def _cmd_validate_unitary(args) -> int:
    sc = _load(args.file)
    names = list(sc.unitaries)
    for ev in sc.events:
        u = getattr(ev, "unitary", None)
        if u is not None and u not in names:
            names.append(u)
    bound = label_bound(sc)
    ok = True
    for name in names:
        check = validate_momentum_conserving(resolve_unitary(sc, name, bound))
        ok &= check.ok
        print(f"{name}: {'momentum conserving' if check else 'INVALID'}")
        for d in check.diagnostics:
            print(f"  - {d}")
    if not names:
        print("no unitaries defined or used")
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_examples(args) -> int:
    if args.emit:
        try:
            sys.stdout.write(scn.source(args.emit))
        except KeyError as exc:
            raise _UsageError(str(exc.args[0])) from None
        return EXIT_OK
    for name in scn.BUNDLED:
        print(name)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="qrfnet", description="Simulate networks of quantum reference frames.")
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("run", help="run a scenario and print its queries")
    p.add_argument("file")
    fmt = p.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    p.add_argument("--query", type=int, help="with --csv, emit only this query's table")
    p.add_argument("--out", metavar="PATH")
    p.add_argument("--sample", type=int, metavar="N", help="sample N shots instead of enumerating branches")
    p.add_argument("--seed", type=int, default=0, metavar="K")
    p.add_argument("--tolerance", type=float, default=CHECK_TOL, help="conservation comparison tolerance")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("check", help="individual-case conservation check")
    p.add_argument("file")
    p.add_argument("--set", required=True, help="comma-separated conserving set, e.g. G,F,F2,S,S2")
    p.add_argument("--reference", help="reference point (index, start, prepared, end or checkpoint)")
    p.add_argument("--expect", choices=("pass", "fail"), default="pass")
    p.add_argument("--tolerance", type=float, default=CHECK_TOL, help="conservation comparison tolerance")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("transform", aliases=["transform-coords"], help="print a state before and after a coordinate change")
    p.add_argument("file")
    p.add_argument("--coords", required=True, choices=sorted(builtin_transforms()))
    p.add_argument("--order", help="particles feeding the matrix columns (default: declaration order)")
    p.add_argument("--at", help="point in the pipeline (default: prepared)")
    p.add_argument("--json", action="store_true")
    p.add_argument("--out", metavar="PATH")
    p.set_defaults(func=_cmd_transform)

    p = sub.add_parser("validate-unitary", help="check that interactions conserve total momentum")
    p.add_argument("file")
    p.set_defaults(func=_cmd_validate_unitary)

    p = sub.add_parser("examples", help="list or print bundled scenarios")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--list", action="store_true")
    g.add_argument("--emit", metavar="NAME")
    p.set_defaults(func=_cmd_examples)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if args.command is None:
            raise _UsageError("a subcommand is required")
        if getattr(args, "query", None) is not None and not args.csv:
            raise _UsageError("--query only applies with --csv")
        return args.func(args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except scn.ScenarioError as exc:
        for d in exc.errors:
            print(f"{getattr(args, 'file', '<input>')}:{d}", file=sys.stderr)
        return EXIT_USAGE
    except scn.ScenarioRuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
