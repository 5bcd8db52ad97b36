"""``dvl`` command line.

Exit codes: 0 ok, 1 load or parse error, 2 lint violations (or fixture
mismatch), 3 compile error, 4 execution error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .compiler import TaskGraph, compile, execute
from .dataprep import TransformPlan, emit_sql
from .errors import DvlError, LoadError
from .faithful import check
from .hive import compile_hive, parse_hive
from .manifest import load_manifest
from .marks import marks_to_json
from .render import render
from .specmodel import parse_spec, serialize_spec

EXIT_OK, EXIT_LOAD, EXIT_LINT, EXIT_COMPILE, EXIT_EXEC = 0, 1, 2, 3, 4


class _Fail(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise _Fail(EXIT_LOAD, f"cannot read {path}: {e.strerror}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as e:
        raise _Fail(EXIT_EXEC, f"cannot write {path}: {e.strerror}") from None


def _load(db_path: str, spec_path: str | None):
    try:
        db = load_manifest(db_path)
        spec = parse_spec(_read(spec_path)) if spec_path else None
    except DvlError as e:
        raise _Fail(EXIT_LOAD, str(e)) from None
    return db, spec


def _compile(spec, db, plan=None) -> TaskGraph:
    try:
        return compile(spec, db, plan)
    except DvlError as e:
        raise _Fail(EXIT_COMPILE, str(e)) from None


def _execute(graph: TaskGraph):
    try:
        return execute(graph)
    except DvlError as e:
        raise _Fail(EXIT_EXEC, str(e)) from None


def _run(graph: TaskGraph, args):
    # the plan is written before execution so it is available when execution fails
    if args.emit_plan:
        _write(args.emit_plan, graph.dumps())
    ex = _execute(graph)
    if args.emit_marks:
        _write(args.emit_marks, marks_to_json(ex.marks))
    return ex


def cmd_render(args) -> int:
    db, spec = _load(args.db, args.spec)
    ex = _run(_compile(spec, db), args)
    _write(args.output, render(ex))
    return EXIT_OK


def cmd_lint(args) -> int:
    db, spec = _load(args.db, args.spec)
    ex = _execute(_compile(spec, db))
    report = check(ex.db, spec, ex)
    sys.stdout.write(report.dumps() if args.json else report.to_text())
    return EXIT_OK if report.faithful else EXIT_LINT


def cmd_hive(args) -> int:
    db, _ = _load(args.db, None)
    try:
        prog = parse_hive(_read(args.program))
        plan, spec = compile_hive(prog, args.table, db)
    except DvlError as e:
        raise _Fail(EXIT_LOAD, str(e)) from None
    if args.emit_spec:
        _write(args.emit_spec, serialize_spec(spec))
    if args.emit_prep:
        _write(args.emit_prep, json.dumps(plan.to_json(), indent=2) + "\n")
    ex = _run(_compile(spec, db, plan), args)
    _write(args.output, render(ex))
    return EXIT_OK


def cmd_sql(args) -> int:
    db, _ = _load(args.db, None)
    try:
        plan = TransformPlan.from_json(_read(args.prep))
        stmts = emit_sql(plan, db)
    except DvlError as e:
        raise _Fail(EXIT_LOAD, str(e)) from None
    sys.stdout.write("".join(s.rstrip(";") + ";\n" for s in stmts))
    return EXIT_OK


def cmd_fixtures(args) -> int:
    from . import fixtures

    if args.action == "list":
        for name in fixtures.list_fixtures():
            print(name)
        return EXIT_OK
    names = [args.name] if args.name else fixtures.list_fixtures()
    bad = 0
    for name in names:
        try:
            res = fixtures.run_fixture(name, update=args.update)
        except KeyError:
            raise _Fail(EXIT_LOAD, f"unknown fixture {name!r}") from None
        print(f"{'PASS' if res.ok else 'FAIL'} {name}" + ("" if res.ok else f": {res.message}"))
        bad += not res.ok
    return EXIT_OK if not bad else EXIT_LINT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dvl", description="Render relational databases faithfully.")
    p.add_argument("--version", action="version", version=f"dvl {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="execute a spec and write SVG")
    r.add_argument("--db", required=True, help="database manifest (JSON)")
    r.add_argument("--spec", required=True, help="plot spec (.dvl.json)")
    r.add_argument("-o", "--output", required=True, help="output SVG path")
    r.add_argument("--emit-marks", help="write mark tables as JSON")
    r.add_argument("--emit-plan", help="write the task graph as JSON")
    r.set_defaults(func=cmd_render)

    lint = sub.add_parser("lint", help="check faithfulness")
    lint.add_argument("--db", required=True)
    lint.add_argument("--spec", required=True)
    lint.add_argument("--json", action="store_true", help="JSON report instead of text")
    lint.set_defaults(func=cmd_lint)

    h = sub.add_parser("hive", help="compile and render a HiVE program")
    h.add_argument("--program", required=True)
    h.add_argument("--table", required=True)
    h.add_argument("--db", required=True)
    h.add_argument("-o", "--output", required=True)
    h.add_argument("--emit-spec", help="write the generated spec")
    h.add_argument("--emit-prep", help="write the generated decomposition plan")
    h.add_argument("--emit-marks")
    h.add_argument("--emit-plan")
    h.set_defaults(func=cmd_hive)

    s = sub.add_parser("sql", help="print SQL for a prep plan")
    s.add_argument("--db", required=True)
    s.add_argument("--prep", required=True)
    s.set_defaults(func=cmd_sql)

    f = sub.add_parser("fixtures", help="list or run bundled fixtures")
    f.add_argument("action", choices=("list", "run"))
    f.add_argument("name", nargs="?")
    f.add_argument("--update", action="store_true", help="rewrite goldens instead of comparing")
    f.set_defaults(func=cmd_fixtures)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _Fail as e:
        print(f"dvl: {e}", file=sys.stderr)
        return e.code
    except LoadError as e:
        print(f"dvl: {e}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())
