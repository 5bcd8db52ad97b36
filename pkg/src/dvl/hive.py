"""HiVE front end: four statements describing a nested space-filling view.

    sHier(/,$city,$type); sLayout(/,SQ,SQ); sSize(/,$price,$bdrms); sColor(/,_,$bdrms)

compiles to a hierarchical decomposition of the table plus one rect view per
level, each laid out by its level's algorithm and nested in the level above.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .dataprep import AggExpr, Hier, TransformPlan, fk_name
from .errors import HiveSyntaxError, SpecError
from .relcore import Database
from .specmodel import (Const, Field, LayoutBinding, LayoutRef, NestDecl, PlotSpec, SPACE_FILLING,
                        ViewSpec, check_structure)

STATEMENTS = ("sHier", "sLayout", "sSize", "sColor")
DEFAULT_LAYOUT = "SQ"
NEST_PADDING = 2.0
UNCOLORED_FILL = "#e0e0e0"

_TOKEN = re.compile(r"(?P<ws>\s+)|(?P<attr>\$[A-Za-z_][A-Za-z0-9_]*)|(?P<name>[A-Za-z][A-Za-z0-9_]*)"
                    r"|(?P<unset>_)|(?P<punct>[/(),;])")


@dataclass(frozen=True)
class HiveProgram:
    hier: tuple[str, ...]
    layouts: tuple[str | None, ...] = ()
    sizes: tuple[str | None, ...] = ()
    colors: tuple[str | None, ...] = ()

    def level_layout(self, k: int) -> str:
        return self.layouts[k] or DEFAULT_LAYOUT


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokens(src: str) -> list[_Tok]:
    out = []
    pos, line, col = 0, 1, 1
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise HiveSyntaxError(f"unexpected character {src[pos]!r}", line, col)
        text = m.group()
        if m.lastgroup != "ws":
            out.append(_Tok(m.lastgroup, text, line, col))
        nl = text.count("\n")
        if nl:
            line += nl
            col = len(text) - text.rfind("\n")
        else:
            col += len(text)
        pos = m.end()
    out.append(_Tok("eof", "", line, col))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = _tokens(src)
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def take(self, kind: str, text: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            want = repr(text) if text is not None else kind
            got = repr(t.text) if t.text else "end of input"
            raise HiveSyntaxError(f"expected {want}, found {got}", t.line, t.col)
        self.i += 1
        return t

    def program(self) -> HiveProgram:
        stmts: dict[str, list] = {}
        while self.peek().kind != "eof":
            head = self.take("name")
            if head.text not in STATEMENTS:
                raise HiveSyntaxError(f"unknown statement {head.text!r}", head.line, head.col)
            if head.text in stmts:
                raise HiveSyntaxError(f"duplicate {head.text} statement", head.line, head.col)
            self.take("punct", "(")
            path = self.take("punct", "/") if self.peek().text == "/" else self.peek()
            if path.text != "/":
                raise HiveSyntaxError("only the root path '/' is supported", path.line, path.col)
            args = []
            while self.peek().text == ",":
                self.take("punct", ",")
                args.append(self.arg(head.text))
            self.take("punct", ")")
            stmts[head.text] = args
            if self.peek().text == ";":
                self.take("punct", ";")
            elif self.peek().kind != "eof":
                t = self.peek()
                raise HiveSyntaxError(f"expected ';', found {t.text!r}", t.line, t.col)
        if "sHier" not in stmts:
            t = self.peek()
            raise HiveSyntaxError("program has no sHier statement", t.line, t.col)
        hier = stmts["sHier"]
        if not hier or any(a is None for a in hier):
            raise HiveSyntaxError("sHier needs one or more $attributes", 1, 1)
        n = len(hier)

        def pad(name: str) -> tuple:
            vals = stmts.get(name, [])
            if len(vals) > n:
                raise HiveSyntaxError(f"{name} has {len(vals)} levels but sHier has {n}", 1, 1)
            return tuple(vals) + (None,) * (n - len(vals))

        return HiveProgram(tuple(hier), pad("sLayout"), pad("sSize"), pad("sColor"))

    def arg(self, stmt: str) -> str | None:
        t = self.peek()
        if t.kind == "unset":
            self.i += 1
            return None
        if stmt == "sLayout":
            tok = self.take("name")
            if tok.text not in SPACE_FILLING:
                raise HiveSyntaxError(f"unknown layout code {tok.text!r}", tok.line, tok.col)
            return tok.text
        if t.kind != "attr":
            raise HiveSyntaxError(f"expected $attribute or _, found {t.text!r}", t.line, t.col)
        self.i += 1
        return t.text[1:]


def parse_hive(src: str) -> HiveProgram:
    return _Parser(src).program()


def print_hive(prog: HiveProgram) -> str:
    def args(vals, attr: bool) -> str:
        return "".join("," + ("_" if v is None else ("$" + v if attr else v)) for v in vals)

    return (f"sHier(/{args(prog.hier, True)}); sLayout(/{args(prog.layouts, False)}); "
            f"sSize(/{args(prog.sizes, True)}); sColor(/{args(prog.colors, True)})")


def _alias(attr: str, prefix: tuple[str, ...]) -> str:
    return f"avg_{attr}" if attr in prefix else attr


def compile_hive(prog: HiveProgram, table: str, db: Database, width: float = 800, height: float = 600
                 ) -> tuple[TransformPlan, PlotSpec]:
    """Decomposition plan plus nested rect views for ``prog`` over ``table``."""
    if table not in db.tables:
        raise SpecError(f"unknown table {table!r}")
    schema = db.table(table).schema
    for a in (*prog.hier, *prog.sizes, *prog.colors):
        if a is not None and a not in schema:
            raise SpecError(f"{table} has no attribute {a!r}")
    for a in (*prog.sizes, *prog.colors):
        if a is not None and not schema.type_of(a).numeric:
            raise SpecError(f"{table}.{a} is not numeric and cannot be averaged")
    names = tuple(f"{table}_{a}" for a in prog.hier)
    aggs = []
    for k in range(len(prog.hier)):
        prefix = prog.hier[:k + 1]
        level = []
        for a in (prog.sizes[k], prog.colors[k]):
            if a is not None and all(x.attr != a for x in level):
                level.append(AggExpr("avg", a, _alias(a, prefix)))
        aggs.append(tuple(level))
    plan = TransformPlan((Hier(table, prog.hier, tuple(aggs), names),), outputs=names)

    views, layouts, nests = [], {}, []
    for k, attr in enumerate(prog.hier):
        prefix = prog.hier[:k + 1]
        lname = f"L_{attr}"
        size = prog.sizes[k]
        layouts[lname] = LayoutBinding(lname, prog.level_layout(k),
                                       weight=_alias(size, prefix) if size is not None else 1.0)
        enc = {c: LayoutRef(lname, c) for c in ("x", "y", "w", "h")}
        color = prog.colors[k]
        if color is not None:
            enc["color"] = Field(_alias(color, prefix))
        else:
            enc["color"] = Const(UNCOLORED_FILL)
        enc["stroke"] = Const("white")
        views.append(ViewSpec(f"V_{attr}", names[k], "rect", enc))
        if k > 0:
            link = fk_name(names[k], prog.hier[:k], names[k - 1])
            nests.append(NestDecl((f"V_{attr}",), f"V_{prog.hier[k - 1]}", (link,), padding=NEST_PADDING))
    spec = PlotSpec(width, height, tuple(views), tuple(nests), {}, layouts, axes=False)
    check_structure(spec)
    return plan, spec
