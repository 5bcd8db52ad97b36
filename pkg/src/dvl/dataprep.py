"""Relational preparation operators and their plan / SQL representation.

In-memory execution is the reference semantics. :func:`emit_sql` produces an
equivalent list of ``CREATE TABLE ... AS SELECT`` statements, and
:func:`run_sql` executes such a list on SQLite for cross-checking.
"""

from __future__ import annotations

import json
import math
import re
import sqlite3
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import ExprError, PlanError, SchemaError
from .expr import Expr
from .relcore import (Attribute, AttributeType, Database, ForeignKey, Schema, Table,
                      make_table, sort_key)

INT, REAL = AttributeType.INTEGER, AttributeType.REAL


def fk_name(src: str, attrs: Sequence[str], dst: str) -> str:
    """Default name for a generated constraint, e.g. ``Tt.city->Tc``."""
    return f"{src}.{'+'.join(attrs)}->{dst}"


# -- aggregates -----------------------------------------------------------------

_AGG_RE = re.compile(r"^\s*(count|sum|avg|min|max)\s*\(\s*([A-Za-z_][A-Za-z0-9_]*)?\s*\)\s*$")


@dataclass(frozen=True)
class AggExpr:
    kind: str
    attr: str | None
    alias: str

    def __post_init__(self):
        if self.kind not in ("count", "sum", "avg", "min", "max"):
            raise PlanError(f"unknown aggregate {self.kind!r}")
        if self.kind != "count" and not self.attr:
            raise PlanError(f"{self.kind} needs an attribute")

    @classmethod
    def parse(cls, alias: str, text: str) -> AggExpr:
        m = _AGG_RE.match(text)
        if not m:
            raise PlanError(f"cannot parse aggregate {text!r}")
        return cls(m.group(1), m.group(2), alias)

    def __str__(self) -> str:
        return f"{self.kind}({self.attr or ''})"

    def result_type(self, table: Table) -> AttributeType:
        if self.kind == "count":
            return INT
        t = table.schema.type_of(self.attr)
        if self.kind in ("sum", "avg") and not t.numeric:
            raise PlanError(f"{self.kind}({self.attr}) on non-numeric column of {table.name}")
        if self.kind == "avg":
            return REAL
        return t

    def compute(self, values: list[Any]) -> Any:
        """Reduce the attribute values of one group (nulls ignored, SQL-style)."""
        if self.kind == "count" and self.attr is None:
            return len(values)
        present = [v for v in values if v is not None]
        if self.kind == "count":
            return len(present)
        if not present:
            return None
        if self.kind == "sum":
            return sum(present)
        if self.kind == "avg":
            return math.fsum(present) / len(present)
        return min(present) if self.kind == "min" else max(present)

    def to_json(self) -> dict:
        out = {"alias": self.alias, "kind": self.kind}
        if self.attr is not None:
            out["attr"] = self.attr
        return out


def parse_aggs(doc: Any) -> tuple[AggExpr, ...]:
    """Accept ``{"n": "count()"}`` shorthand or a list of full objects."""
    if isinstance(doc, Mapping):
        return tuple(AggExpr.parse(k, v) for k, v in doc.items())
    if isinstance(doc, list):
        out = []
        for d in doc:
            if not isinstance(d, Mapping) or set(d) - {"alias", "kind", "attr"}:
                raise PlanError(f"bad aggregate {d!r}")
            out.append(AggExpr(d["kind"], d.get("attr"), d["alias"]))
        return tuple(out)
    raise PlanError(f"bad aggregate list {doc!r}")


def _group(table: Table, keys: Sequence[str]) -> dict[tuple, list[int]]:
    """Groups in sorted key order (nulls first)."""
    groups = table.index_on(keys)
    return dict(sorted(groups.items(), key=lambda kv: tuple(sort_key(v) for v in kv[0])))


def _aggregate(table: Table, keys: Sequence[str], aggs: Sequence[AggExpr], out: str) -> Table:
    for k in keys:
        table.schema.index(k)
    cols = [Attribute(k, table.schema.type_of(k)) for k in keys]
    for a in aggs:
        if a.attr is not None:
            table.schema.index(a.attr)
        cols.append(Attribute(a.alias, a.result_type(table)))
    names = [c.name for c in cols]
    if len(set(names)) != len(names):
        raise PlanError(f"{out}: duplicate output column names {names}")
    rows = []
    for kv, idx in _group(table, keys).items():
        row = list(kv)
        for a in aggs:
            if a.attr is None:
                row.append(len(idx))
            else:
                j = table.schema.index(a.attr)
                row.append(a.compute([table.rows[i][j] for i in idx]))
        rows.append(row)
    if not keys:
        # a global aggregate is a single row keyed by a synthetic id
        return make_table(out, [(c.name, c.type) for c in cols], rows)
    return Table(Schema(out, tuple(cols), tuple(keys)), rows)


# -- operators -------------------------------------------------------------------


def normalize(db: Database, table: str, attrs: Sequence[str], dim_name: str,
              fact_name: str) -> tuple[Table, Table, ForeignKey]:
    res = normalize_many(db, table, [attrs], [dim_name], fact_name)
    dims, fact = res
    return dims[0][0], fact, dims[0][1]


def normalize_many(db: Database, table: str, attr_groups: Sequence[Sequence[str]],
                   names: Sequence[str] | None = None, fact_name: str | None = None
                   ) -> tuple[list[tuple[Table, ForeignKey]], Table]:
    """Factor each attribute group into its own dimension table.

    Dimension ids are dense and follow first occurrence. The fact table keeps the
    remaining columns and gets one ``<dim>_id`` reference column per group, placed
    where the group's first attribute used to be.
    """
    src = db.table(table)
    groups = [tuple(g) for g in attr_groups]
    if not groups or any(not g for g in groups):
        raise PlanError("normalize needs nonempty attribute groups")
    flat = [a for g in groups for a in g]
    if len(set(flat)) != len(flat):
        raise PlanError(f"overlapping attribute groups {[list(g) for g in groups]}")
    for a in flat:
        src.schema.index(a)
    names = list(names) if names else ["_".join(g) for g in groups]
    fact_name = fact_name or f"{table}_fact"
    if len(names) != len(groups):
        raise PlanError("one dimension name per group is required")
    produced = names + [fact_name]
    if len(set(produced)) != len(produced):
        raise PlanError(f"duplicate output names {produced}")
    for n in produced:
        if n in db.tables:
            raise PlanError(f"table {n!r} already exists")

    dims: list[Table] = []
    id_maps: list[dict[tuple, int]] = []
    for g, dname in zip(groups, names):
        if "id" in g:
            raise PlanError(f"{dname}: a normalized attribute may not be named 'id'")
        ids: dict[tuple, int] = {}
        for vals in src.project(g):
            ids.setdefault(vals, len(ids))
        cols = [("id", INT)] + [(a, src.schema.type_of(a)) for a in g]
        rows = [(i, *vals) for vals, i in ids.items()]
        extra = [g] if all(v is not None for vals in ids for v in vals) else []
        dims.append(make_table(dname, cols, rows, primary_key=("id",), keys=extra))
        id_maps.append(ids)

    ref_cols = [f"{d}_id" for d in names]
    owner = {a: gi for gi, g in enumerate(groups) for a in g}
    layout: list[tuple[str, Any]] = []  # ("col", index) or ("ref", group index)
    cols: list[Attribute] = []
    placed = set()
    for i, a in enumerate(src.schema.attributes):
        if a.name in owner:
            gi = owner[a.name]
            if gi not in placed:
                placed.add(gi)
                layout.append(("ref", gi))
                cols.append(Attribute(ref_cols[gi], INT))
        else:
            layout.append(("col", i))
            cols.append(a)
    if len({c.name for c in cols}) != len(cols):
        raise PlanError(f"{fact_name}: reference column collides with an existing column")
    group_idx = [[src.schema.index(a) for a in g] for g in groups]
    rows = []
    for row in src.rows:
        out = []
        for kind, v in layout:
            if kind == "col":
                out.append(row[v])
            else:
                out.append(id_maps[v][tuple(row[j] for j in group_idx[v])])
        rows.append(out)

    def mapped(key: Sequence[str]) -> tuple[str, ...]:
        res: list[str] = []
        for a in key:
            n = ref_cols[owner[a]] if a in owner else a
            if n not in res:
                res.append(n)
        return tuple(res)

    keys = [mapped(k) for k in src.declared_keys]
    fact = Table(Schema(fact_name, tuple(cols), keys[0]), rows, keys[1:])
    fks = [ForeignKey(fk_name(fact_name, [rc], d.name), fact_name, (rc,), d.name, ("id",),
                      src_is_key=fact.is_key([rc]), dst_is_key=True)
           for rc, d in zip(ref_cols, dims)]
    return list(zip(dims, fks)), fact


def hier(db: Database, table: str, hierarchy: Sequence[str],
         aggs: Sequence[Sequence[AggExpr]], names: Sequence[str] | None = None
         ) -> tuple[list[Table], list[ForeignKey]]:
    """One grouped table per hierarchy prefix, chained by foreign keys."""
    src = db.table(table)
    hierarchy = list(hierarchy)
    if not hierarchy:
        raise PlanError("hier needs a nonempty hierarchy")
    if len(set(hierarchy)) != len(hierarchy):
        raise PlanError(f"repeated attribute in hierarchy {hierarchy}")
    aggs = [tuple(a) for a in aggs] + [()] * (len(hierarchy) - len(aggs))
    if len(aggs) > len(hierarchy):
        raise PlanError("more aggregate levels than hierarchy levels")
    names = list(names) if names else [f"{table}_{a}" for a in hierarchy]
    if len(names) != len(hierarchy):
        raise PlanError("one table name per hierarchy level is required")
    for n in names:
        if n in db.tables:
            raise PlanError(f"table {n!r} already exists")
    tables = [_aggregate(src, hierarchy[:k + 1], aggs[k], names[k]) for k in range(len(hierarchy))]
    fks = []
    for k in range(len(hierarchy) - 1):
        prefix = tuple(hierarchy[:k + 1])
        fks.append(ForeignKey(fk_name(names[k + 1], prefix, names[k]), names[k + 1], prefix,
                              names[k], prefix, src_is_key=False, dst_is_key=True))
    return tables, fks


def groupby(db: Database, table: str, keys: Sequence[str], aggs: Sequence[AggExpr],
            out: str) -> tuple[Table, list[ForeignKey]]:
    """Group ``table`` on ``keys``.

    Besides the grouped table this returns the constraint from the source rows to
    their group, plus copies of source constraints whose columns are all group keys.
    """
    if out in db.tables:
        raise PlanError(f"table {out!r} already exists")
    src = db.table(table)
    res = _aggregate(src, keys, aggs, out)
    fks = []
    if keys:
        fks.append(ForeignKey(fk_name(table, keys, out), table, tuple(keys), out, tuple(keys),
                              src_is_key=src.is_key(keys), dst_is_key=True))
        for fk in db.constraints.values():
            if fk.src_table == table and set(fk.src_attrs) <= set(keys):
                fks.append(ForeignKey(fk_name(out, fk.src_attrs, fk.dst_table), out, fk.src_attrs,
                                      fk.dst_table, fk.dst_attrs,
                                      src_is_key=res.is_key(fk.src_attrs), dst_is_key=fk.dst_is_key))
    return res, fks


Projection = tuple[str, str]


def _projections(doc: Any) -> tuple[Projection, ...]:
    if isinstance(doc, Mapping):
        items = list(doc.items())
    elif isinstance(doc, (list, tuple)):
        items = []
        for p in doc:
            if isinstance(p, str):
                items.append((p if p == "*" else p.split(".")[-1], p))
            elif isinstance(p, (list, tuple)) and len(p) == 2:
                items.append((p[0], p[1]))
            else:
                raise PlanError(f"bad projection {p!r}")
    else:
        raise PlanError(f"bad projection list {doc!r}")
    return tuple((str(a), str(e)) for a, e in items)


def select(db: Database, table: str, projections: Sequence[Projection], out: str
           ) -> tuple[Table, list[ForeignKey]]:
    """Project expressions per row; ``("*", "*")`` keeps every input column."""
    if out in db.tables:
        raise PlanError(f"table {out!r} already exists")
    src = db.table(table)
    types = {a.name: a.type for a in src.schema.attributes}
    plan: list[tuple[str, Expr | None, int]] = []
    for alias, source in projections:
        if source == "*":
            for i, a in enumerate(src.schema.attributes):
                plan.append((a.name, None, i))
        elif source in types:
            plan.append((alias, None, src.schema.index(source)))
        else:
            try:
                e = Expr(source)
                e.infer_type(types)
            except ExprError as err:
                raise PlanError(f"{out}.{alias}: {err}") from None
            plan.append((alias, e, -1))
    names = [p[0] for p in plan]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise PlanError(f"{out}: duplicate output column(s) {dupes}")
    cols = []
    for alias, e, i in plan:
        cols.append((alias, e.infer_type(types) if e else src.schema.attributes[i].type))
    rows = []
    for r, row in enumerate(src.rows):
        rec = dict(zip(src.schema.names, row))
        vals = []
        for alias, e, i in plan:
            vals.append(row[i] if e is None else _coerce_result(e.evaluate(rec), dict(cols)[alias]))
        rows.append(vals)
    # a key survives when all its columns are copied unchanged under the same name
    copied = {alias for alias, e, i in plan if e is None and src.schema.attributes[i].name == alias}
    keys = [k for k in src.declared_keys if set(k) <= copied]
    if keys:
        res = make_table(out, cols, rows, primary_key=keys[0], keys=keys[1:])
    else:
        if "id" in names:
            raise PlanError(f"{out}: no key survives and column 'id' is taken")
        res = make_table(out, cols, rows)
    fks = [ForeignKey(fk_name(out, fk.src_attrs, fk.dst_table), out, fk.src_attrs,
                      fk.dst_table, fk.dst_attrs, src_is_key=res.is_key(fk.src_attrs),
                      dst_is_key=fk.dst_is_key)
           for fk in db.constraints.values()
           if fk.src_table == table and set(fk.src_attrs) <= copied]
    return res, fks


def _coerce_result(value: Any, kind: AttributeType) -> Any:
    if value is None:
        return None
    if kind is REAL and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def join(db: Database, left: str, right: str, on: tuple[Sequence[str], Sequence[str]],
         projections: Sequence[Projection] | None, out: str) -> Table:
    """Inner equi-join in nested-loop order (left rows outer)."""
    if out in db.tables:
        raise PlanError(f"table {out!r} already exists")
    lt, rt = db.table(left), db.table(right)
    lon, ron = list(on[0]), list(on[1])
    if len(lon) != len(ron) or not lon:
        raise PlanError("join columns must pair up")
    for a, b in zip(lon, ron):
        ta, tb = lt.schema.type_of(a), rt.schema.type_of(b)
        if ta != tb and not (ta.numeric and tb.numeric):
            raise PlanError(f"join columns {left}.{a} and {right}.{b} are not compatible")
    out_cols, sources = _join_columns(lt, rt, projections)
    index = rt.index_on(ron)
    rows = []
    for lrow_vals, lrow in zip(lt.project(lon), lt.rows):
        if any(v is None for v in lrow_vals):
            continue
        for j in index.get(lrow_vals, ()):
            rrow = rt.rows[j]
            rows.append([lrow[i] if side == 0 else rrow[i] for side, i in sources])
    names = [n for n, _ in out_cols]
    lkey = [_output_name(0, lt.schema.index(a), sources, names) for a in lt.primary_key]
    rkey = [_output_name(1, rt.schema.index(a), sources, names) for a in rt.primary_key]
    for cand in (lkey, lkey + rkey):
        if all(cand):
            idx = [names.index(c) for c in cand]
            if len({tuple(r[i] for i in idx) for r in rows}) == len(rows):
                return make_table(out, out_cols, rows, primary_key=cand)
    if "id" in names:
        raise PlanError(f"{out}: no key survives and column 'id' is taken")
    return make_table(out, out_cols, rows)


def _output_name(side: int, idx: int, sources: list[tuple[int, int]], names: list[str]) -> str | None:
    for n, s in zip(names, sources):
        if s == (side, idx):
            return n
    return None


def _join_columns(lt: Table, rt: Table, projections: Sequence[Projection] | None
                  ) -> tuple[list[tuple[str, AttributeType]], list[tuple[int, int]]]:
    if not projections:
        lnames, rnames = set(lt.schema.names), set(rt.schema.names)
        cols, sources = [], []
        for side, t, other in ((0, lt, rnames), (1, rt, lnames)):
            for i, a in enumerate(t.schema.attributes):
                name = f"{t.name}_{a.name}" if a.name in other else a.name
                cols.append((name, a.type))
                sources.append((side, i))
        names = [c[0] for c in cols]
        if len(set(names)) != len(names):
            raise PlanError(f"cannot disambiguate join columns {names}; give projections")
        return cols, sources
    cols, sources = [], []
    for alias, ref in projections:
        if "." in ref:
            tname, col = ref.split(".", 1)
            if tname == lt.name and col in lt.schema:
                side = 0
            elif tname == rt.name and col in rt.schema:
                side = 1
            else:
                raise PlanError(f"unknown join column {ref!r}")
        else:
            col = ref
            hits = [s for s, t in ((0, lt), (1, rt)) if col in t.schema]
            if len(hits) != 1:
                raise PlanError(f"{'ambiguous' if hits else 'unknown'} join column {ref!r}")
            side = hits[0]
        t = lt if side == 0 else rt
        i = t.schema.index(col)
        cols.append((alias, t.schema.attributes[i].type))
        sources.append((side, i))
    names = [c[0] for c in cols]
    if len(set(names)) != len(names):
        raise PlanError(f"duplicate join output names {names}")
    return cols, sources


# -- plans -------------------------------------------------------------------------


@dataclass(frozen=True)
class Normalize:
    table: str
    attrs: tuple[str, ...]
    dim: str
    fact: str
    op = "normalize"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.table,)

    @property
    def writes(self) -> tuple[str, ...]:
        return (self.dim, self.fact)

    def apply(self, db: Database) -> Database:
        dim, fact, fk = normalize(db, self.table, self.attrs, self.dim, self.fact)
        return db.with_tables(dim, fact).with_constraints(fk)


@dataclass(frozen=True)
class NormalizeMany:
    table: str
    groups: tuple[tuple[str, ...], ...]
    names: tuple[str, ...] | None = None
    fact: str | None = None
    op = "normalize_many"

    @property
    def dim_names(self) -> tuple[str, ...]:
        return self.names or tuple("_".join(g) for g in self.groups)

    @property
    def fact_name(self) -> str:
        return self.fact or f"{self.table}_fact"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.table,)

    @property
    def writes(self) -> tuple[str, ...]:
        return self.dim_names + (self.fact_name,)

    def apply(self, db: Database) -> Database:
        dims, fact = normalize_many(db, self.table, self.groups, self.dim_names, self.fact_name)
        return db.with_tables(*[d for d, _ in dims], fact).with_constraints(*[fk for _, fk in dims])


@dataclass(frozen=True)
class Hier:
    table: str
    hierarchy: tuple[str, ...]
    aggs: tuple[tuple[AggExpr, ...], ...] = ()
    names: tuple[str, ...] | None = None
    op = "hier"

    @property
    def level_names(self) -> tuple[str, ...]:
        return self.names or tuple(f"{self.table}_{a}" for a in self.hierarchy)

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.table,)

    @property
    def writes(self) -> tuple[str, ...]:
        return self.level_names

    def apply(self, db: Database) -> Database:
        tables, fks = hier(db, self.table, self.hierarchy, self.aggs, self.level_names)
        return db.with_tables(*tables).with_constraints(*fks)


@dataclass(frozen=True)
class GroupBy:
    table: str
    keys: tuple[str, ...]
    aggs: tuple[AggExpr, ...]
    out: str
    op = "groupby"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.table,)

    @property
    def writes(self) -> tuple[str, ...]:
        return (self.out,)

    def apply(self, db: Database) -> Database:
        t, fks = groupby(db, self.table, self.keys, self.aggs, self.out)
        return db.with_tables(t).with_constraints(*fks)


@dataclass(frozen=True)
class Select:
    table: str
    projections: tuple[Projection, ...]
    out: str
    op = "select"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.table,)

    @property
    def writes(self) -> tuple[str, ...]:
        return (self.out,)

    def apply(self, db: Database) -> Database:
        t, fks = select(db, self.table, self.projections, self.out)
        return db.with_tables(t).with_constraints(*fks)


@dataclass(frozen=True)
class Join:
    left: str
    right: str
    on: tuple[tuple[str, ...], tuple[str, ...]]
    out: str
    projections: tuple[Projection, ...] | None = None
    op = "join"

    @property
    def reads(self) -> tuple[str, ...]:
        return (self.left, self.right)

    @property
    def writes(self) -> tuple[str, ...]:
        return (self.out,)

    def apply(self, db: Database) -> Database:
        return db.with_tables(join(db, self.left, self.right, self.on, self.projections, self.out))


TransformStep = Union[Normalize, NormalizeMany, Hier, GroupBy, Select, Join]


@dataclass(frozen=True)
class TransformPlan:
    """Ordered steps plus the tables kept afterwards (empty ``outputs`` keeps all)."""

    steps: tuple[TransformStep, ...] = ()
    outputs: tuple[str, ...] = ()

    def __post_init__(self):
        later: dict[str, int] = {}
        for i, s in enumerate(self.steps):
            for w in s.writes:
                if w in later:
                    raise PlanError(f"table {w!r} is produced twice")
                later[w] = i
        for i, s in enumerate(self.steps):
            for r in s.reads:
                if r in later and later[r] >= i:
                    raise PlanError(f"step {i} ({s.op}) reads {r!r} before it is produced")

    @property
    def produced(self) -> tuple[str, ...]:
        return tuple(w for s in self.steps for w in s.writes)

    def execute(self, db: Database) -> Database:
        for s in self.steps:
            try:
                db = s.apply(db)
            except SchemaError as e:
                raise PlanError(f"{s.op} step: {e}") from None
        if self.outputs:
            db = db.restrict(self.outputs)
        return db

    def to_json(self) -> dict:
        return {"steps": [step_to_json(s) for s in self.steps], "outputs": list(self.outputs)}

    @classmethod
    def from_json(cls, doc: Any) -> TransformPlan:
        if isinstance(doc, str):
            try:
                doc = json.loads(doc)
            except json.JSONDecodeError as e:
                raise PlanError(f"malformed plan JSON: {e}") from None
        if not isinstance(doc, Mapping) or set(doc) - {"steps", "outputs"}:
            raise PlanError("plan must be an object with 'steps' and optional 'outputs'")
        steps = tuple(step_from_json(s, i) for i, s in enumerate(doc.get("steps", [])))
        return cls(steps, tuple(doc.get("outputs", ())))


_STEP_FIELDS = {
    "normalize": ({"table", "attrs", "dim", "fact"}, set()),
    "normalize_many": ({"table", "groups"}, {"names", "fact"}),
    "hier": ({"table", "hierarchy"}, {"aggs", "names"}),
    "groupby": ({"table", "keys", "out"}, {"aggs"}),
    "select": ({"table", "projections", "out"}, set()),
    "join": ({"left", "right", "on", "out"}, {"projections"}),
}


def step_from_json(doc: Any, i: int = 0) -> TransformStep:
    if not isinstance(doc, Mapping) or "op" not in doc:
        raise PlanError(f"steps/{i}: step must be an object with 'op'")
    op = doc["op"]
    if op not in _STEP_FIELDS:
        raise PlanError(f"steps/{i}: unknown op {op!r}")
    required, optional = _STEP_FIELDS[op]
    keys = set(doc) - {"op"}
    if required - keys:
        raise PlanError(f"steps/{i}: missing {sorted(required - keys)}")
    if keys - required - optional:
        raise PlanError(f"steps/{i}: unknown field(s) {sorted(keys - required - optional)}")
    if op == "normalize":
        return Normalize(doc["table"], tuple(doc["attrs"]), doc["dim"], doc["fact"])
    if op == "normalize_many":
        names = tuple(doc["names"]) if doc.get("names") else None
        return NormalizeMany(doc["table"], tuple(tuple(g) for g in doc["groups"]), names, doc.get("fact"))
    if op == "hier":
        names = tuple(doc["names"]) if doc.get("names") else None
        return Hier(doc["table"], tuple(doc["hierarchy"]),
                    tuple(parse_aggs(a) for a in doc.get("aggs", [])), names)
    if op == "groupby":
        return GroupBy(doc["table"], tuple(doc["keys"]), parse_aggs(doc.get("aggs", [])), doc["out"])
    if op == "select":
        return Select(doc["table"], _projections(doc["projections"]), doc["out"])
    on = doc["on"]
    if not (isinstance(on, list) and len(on) == 2):
        raise PlanError(f"steps/{i}: 'on' must be [left attrs, right attrs]")
    proj = _projections(doc["projections"]) if doc.get("projections") else None
    return Join(doc["left"], doc["right"], (tuple(on[0]), tuple(on[1])), doc["out"], proj)


def step_to_json(s: TransformStep) -> dict:
    if isinstance(s, Normalize):
        return {"op": s.op, "table": s.table, "attrs": list(s.attrs), "dim": s.dim, "fact": s.fact}
    if isinstance(s, NormalizeMany):
        out = {"op": s.op, "table": s.table, "groups": [list(g) for g in s.groups]}
        if s.names:
            out["names"] = list(s.names)
        if s.fact:
            out["fact"] = s.fact
        return out
    if isinstance(s, Hier):
        out = {"op": s.op, "table": s.table, "hierarchy": list(s.hierarchy),
               "aggs": [[a.to_json() for a in level] for level in s.aggs]}
        if s.names:
            out["names"] = list(s.names)
        return out
    if isinstance(s, GroupBy):
        return {"op": s.op, "table": s.table, "keys": list(s.keys),
                "aggs": [a.to_json() for a in s.aggs], "out": s.out}
    if isinstance(s, Select):
        return {"op": s.op, "table": s.table, "projections": [list(p) for p in s.projections],
                "out": s.out}
    out = {"op": s.op, "left": s.left, "right": s.right, "on": [list(s.on[0]), list(s.on[1])],
           "out": s.out}
    if s.projections:
        out["projections"] = [list(p) for p in s.projections]
    return out


# -- SQL emission ------------------------------------------------------------------


def quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def _null_safe_eq(a: str, b: str) -> str:
    return f"({a} = {b} OR ({a} IS NULL AND {b} IS NULL))"


def _agg_sql(a: AggExpr) -> str:
    if a.kind == "count":
        return f"COUNT({quote(a.attr) if a.attr else '*'}) AS {quote(a.alias)}"
    return f"{a.kind.upper()}({quote(a.attr)}) AS {quote(a.alias)}"


def _group_sql(out: str, table: str, keys: Sequence[str], aggs: Sequence[AggExpr]) -> str:
    cols = [quote(k) for k in keys] + [_agg_sql(a) for a in aggs]
    if not keys:
        cols.insert(0, '0 AS "id"')
    sql = f"CREATE TABLE {quote(out)} AS SELECT {', '.join(cols)} FROM {quote(table)}"
    if keys:
        sql += " GROUP BY " + ", ".join(quote(k) for k in keys)
    return sql + ";"


def emit_sql(plan: TransformPlan, db: Database, dialect: str = "generic") -> list[str]:
    """Translate each step into ``CREATE TABLE ... AS SELECT`` statements.

    Schemas of the inputs are needed to expand ``*`` and to lay out fact tables, so
    the plan is simulated against ``db`` alongside emission.
    """
    if dialect != "generic":
        raise PlanError(f"unsupported SQL dialect {dialect!r}")
    out: list[str] = []
    for s in plan.steps:
        out.extend(_step_sql(s, db))
        db = s.apply(db)
    return out


def _step_sql(s: TransformStep, db: Database) -> list[str]:
    q = quote
    if isinstance(s, (Normalize, NormalizeMany)):
        if isinstance(s, Normalize):
            groups, names, fact = [s.attrs], [s.dim], s.fact
        else:
            groups, names, fact = list(s.groups), list(s.dim_names), s.fact_name
        src = db.table(s.table)
        stmts = []
        for g, d in zip(groups, names):
            cols = ", ".join(q(a) for a in g)
            stmts.append(
                f"CREATE TABLE {q(d)} AS SELECT (ROW_NUMBER() OVER (ORDER BY MIN(\"__rn\")) - 1) "
                f"AS \"id\", {cols} FROM (SELECT *, ROW_NUMBER() OVER () AS \"__rn\" "
                f"FROM {q(s.table)}) AS \"__src\" GROUP BY {cols};")
        owner = {a: gi for gi, g in enumerate(groups) for a in g}
        select_cols, placed = [], set()
        for a in src.schema.names:
            if a in owner:
                gi = owner[a]
                if gi not in placed:
                    placed.add(gi)
                    select_cols.append(f"\"d{gi}\".\"id\" AS {q(names[gi] + '_id')}")
            else:
                select_cols.append(f"\"t\".{q(a)}")
        joins = []
        for gi, g in enumerate(groups):
            cond = " AND ".join(_null_safe_eq(f"\"t\".{q(a)}", f"\"d{gi}\".{q(a)}") for a in g)
            joins.append(f"JOIN {q(names[gi])} AS \"d{gi}\" ON {cond}")
        stmts.append(f"CREATE TABLE {q(fact)} AS SELECT {', '.join(select_cols)} "
                     f"FROM {q(s.table)} AS \"t\" {' '.join(joins)};")
        return stmts
    if isinstance(s, Hier):
        return [_group_sql(name, s.table, s.hierarchy[:k + 1], s.aggs[k] if k < len(s.aggs) else ())
                for k, name in enumerate(s.level_names)]
    if isinstance(s, GroupBy):
        return [_group_sql(s.out, s.table, s.keys, s.aggs)]
    if isinstance(s, Select):
        src = db.table(s.table)
        result, _ = select(db, s.table, s.projections, s.out)
        cols = []
        if "id" in result.schema.names and result.primary_key == ("id",) and \
                not any(a == "id" for a, _ in s.projections) and "id" not in src.schema.names:
            cols.append('(ROW_NUMBER() OVER () - 1) AS "id"')
        for alias, source in s.projections:
            if source == "*":
                cols.extend(q(a) for a in src.schema.names)
            elif source in src.schema:
                cols.append(f"{q(source)} AS {q(alias)}")
            else:
                cols.append(f"{Expr(source).to_sql(q)} AS {q(alias)}")
        return [f"CREATE TABLE {q(s.out)} AS SELECT {', '.join(cols)} FROM {q(s.table)};"]
    if isinstance(s, Join):
        lt, rt = db.table(s.left), db.table(s.right)
        result = join(db, s.left, s.right, s.on, s.projections, s.out)
        out_cols, sources = _join_columns(lt, rt, s.projections)
        cols = []
        if result.schema.names[0] == "id" and out_cols[0][0] != "id":
            cols.append('(ROW_NUMBER() OVER (ORDER BY "l"."__rn", "r"."__rn") - 1) AS "id"')
        for (name, _), (side, i) in zip(out_cols, sources):
            t, alias = (lt, '"l"') if side == 0 else (rt, '"r"')
            cols.append(f"{alias}.{q(t.schema.names[i])} AS {q(name)}")
        cond = " AND ".join(f"\"l\".{q(a)} = \"r\".{q(b)}" for a, b in zip(*s.on))
        return [f"CREATE TABLE {q(s.out)} AS SELECT {', '.join(cols)} "
                f"FROM (SELECT *, ROW_NUMBER() OVER () AS \"__rn\" FROM {q(s.left)}) AS \"l\" "
                f"JOIN (SELECT *, ROW_NUMBER() OVER () AS \"__rn\" FROM {q(s.right)}) AS \"r\" "
                f"ON {cond};"]
    raise PlanError(f"unknown step {s!r}")  # pragma: no cover


_SQL_TYPES = {INT: "INTEGER", REAL: "REAL", AttributeType.TEXT: "TEXT", AttributeType.BOOLEAN: "INTEGER"}


def run_sql(db: Database, statements: Iterable[str], tables: Iterable[str]
            ) -> dict[str, tuple[list[str], list[tuple]]]:
    """Load ``db`` into an in-memory SQLite database, run ``statements`` and
    return the rows of ``tables`` (column order as produced by the engine)."""
    conn = sqlite3.connect(":memory:")
    try:
        for t in db.tables.values():
            cols = ", ".join(f"{quote(a.name)} {_SQL_TYPES[a.type]}" for a in t.schema.attributes)
            conn.execute(f"CREATE TABLE {quote(t.name)} ({cols})")
            marks = ", ".join("?" for _ in t.schema.attributes)
            conn.executemany(f"INSERT INTO {quote(t.name)} VALUES ({marks})", t.rows)
        for stmt in statements:
            conn.execute(stmt)
        out = {}
        for name in tables:
            cur = conn.execute(f"SELECT * FROM {quote(name)}")
            cols = [d[0] for d in cur.description]
            out[name] = (cols, cur.fetchall())
        return out
    finally:
        conn.close()


def comparable_rows(rows: Iterable[Sequence[Any]], digits: int = 9) -> list[tuple]:
    """Multiset form used to compare engine output with in-memory tables:
    booleans become 0/1 and reals are rounded to ``digits`` places."""
    def norm(v: Any) -> Any:
        if isinstance(v, bool):
            return int(v)
        if isinstance(v, float):
            r = round(v, digits)
            return int(r) if r.is_integer() else r
        return v
    out = [tuple(norm(v) for v in row) for row in rows]
    return sorted(out, key=lambda r: tuple(sort_key(v) for v in r))
