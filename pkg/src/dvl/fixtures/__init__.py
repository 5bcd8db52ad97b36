"""Bundled example databases and specs with their expected results.

Each directory under ``data/`` holding a ``fixture.json`` is one fixture::

    data/<name>/
        fixture.json        description, manifest path, spec or HiVE program, expected lint verdict
        manifest.json       tables, constraints, optional prep plan
        spec.dvl.json       plot spec (absent for HiVE fixtures)
        program.hive        HiVE program (HiVE fixtures only)
        marks.golden.json   expected mark tables

Paths inside ``fixture.json`` are relative to its directory, so twins can reuse
another fixture's data. Directories starting with ``_`` hold shared inputs only.
"""

from __future__ import annotations

import difflib
import json
from dataclasses import dataclass
from pathlib import Path

from ..compiler import Execution, compile, execute
from ..errors import DvlError
from ..faithful import FaithfulnessReport, check
from ..hive import compile_hive, parse_hive
from ..manifest import load_manifest
from ..marks import marks_to_json
from ..relcore import Database
from ..render import render
from ..specmodel import PlotSpec, parse_spec

DATA = Path(__file__).resolve().parent / "data"
GOLDEN = "marks.golden.json"


@dataclass
class Fixture:
    name: str
    directory: Path
    description: str
    db: Database
    spec: PlotSpec
    plan: object | None
    expect_faithful: bool
    expect_violated: tuple[str, ...]

    @property
    def golden_path(self) -> Path:
        return self.directory / GOLDEN

    def execute(self) -> Execution:
        return execute(compile(self.spec, self.db, self.plan))


@dataclass
class FixtureResult:
    name: str
    ok: bool
    message: str = ""
    marks_json: str = ""
    svg: str = ""
    report: FaithfulnessReport | None = None


def list_fixtures() -> list[str]:
    return sorted(p.parent.name for p in DATA.glob("*/fixture.json"))


def load_fixture(name: str) -> Fixture:
    d = DATA / name
    meta_path = d / "fixture.json"
    if not meta_path.is_file():
        raise KeyError(name)
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    db = load_manifest(d / meta["manifest"])
    plan = None
    if "hive" in meta:
        prog = parse_hive((d / meta["hive"]["program"]).read_text(encoding="utf-8"))
        plan, spec = compile_hive(prog, meta["hive"]["table"], db)
    else:
        spec = parse_spec((d / meta["spec"]).read_text(encoding="utf-8"))
    exp = meta.get("expect", {})
    return Fixture(name, d, meta.get("description", ""), db, spec, plan, exp.get("faithful", True),
                   tuple(exp.get("violated", ())))


def _diff(expected: str, actual: str, limit: int = 20) -> str:
    lines = list(difflib.unified_diff(expected.splitlines(), actual.splitlines(), "golden", "actual",
                                      lineterm="", n=1))
    more = len(lines) - limit
    return "\n".join(lines[:limit]) + (f"\n... {more} more line(s)" if more > 0 else "")


def run_fixture(name: str, update: bool = False) -> FixtureResult:
    """Execute, lint and compare against the golden; ``update`` rewrites the golden instead."""
    try:
        fx = load_fixture(name)
        ex = fx.execute()
        report = check(ex.db, fx.spec, ex)
        marks = marks_to_json(ex.marks)
        svg = render(ex)
    except DvlError as e:
        return FixtureResult(name, False, f"{type(e).__name__}: {e}")
    res = FixtureResult(name, True, marks_json=marks, svg=svg, report=report)
    problems = []
    if report.faithful != fx.expect_faithful:
        problems.append(f"expected {'faithful' if fx.expect_faithful else 'unfaithful'}, got {report.verdict}")
    violated = tuple(sorted(report.violated_constraints))
    if violated != tuple(sorted(fx.expect_violated)):
        problems.append(f"violated constraints {list(violated)}, expected {sorted(fx.expect_violated)}")
    if update:
        fx.golden_path.write_text(marks, encoding="utf-8")
    elif not fx.golden_path.is_file():
        problems.append(f"no golden; run with --update to create {GOLDEN}")
    else:
        expected = fx.golden_path.read_text(encoding="utf-8")
        if expected != marks:
            problems.append("marks differ from golden:\n" + _diff(expected, marks))
    if problems:
        res.ok = False
        res.message = "; ".join(problems)
    return res
