"""In-memory relational model: typed tables, keys, foreign keys and active domains.

Tables are immutable once built. A :class:`Database` is a value too; the
``with_*`` helpers return new databases that share unchanged tables.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import ForeignKeyViolation, KeyViolation, LoadError, SchemaError


class AttributeType(str, Enum):
    INTEGER = "integer"
    REAL = "real"
    TEXT = "text"
    BOOLEAN = "boolean"

    @property
    def numeric(self) -> bool:
        return self in (AttributeType.INTEGER, AttributeType.REAL)

    def accepts(self, value: Any) -> bool:
        if value is None:
            return True
        if self is AttributeType.BOOLEAN:
            return isinstance(value, bool)
        if isinstance(value, bool):
            return False
        if self is AttributeType.INTEGER:
            return isinstance(value, int)
        if self is AttributeType.REAL:
            return isinstance(value, (int, float))
        return isinstance(value, str)

    @classmethod
    def parse(cls, name: str) -> AttributeType:
        aliases = {"int": "integer", "float": "real", "double": "real", "str": "text",
                   "string": "text", "bool": "boolean"}
        try:
            return cls(aliases.get(name, name))
        except ValueError:
            raise SchemaError(f"unknown attribute type {name!r}") from None

    @classmethod
    def of_value(cls, value: Any) -> AttributeType | None:
        if value is None:
            return None
        if isinstance(value, bool):
            return cls.BOOLEAN
        if isinstance(value, int):
            return cls.INTEGER
        if isinstance(value, float):
            return cls.REAL
        if isinstance(value, str):
            return cls.TEXT
        raise SchemaError(f"unsupported value {value!r}")


def compatible(a: AttributeType, b: AttributeType) -> bool:
    return a == b or (a.numeric and b.numeric)


@dataclass(frozen=True)
class Attribute:
    name: str
    type: AttributeType


@dataclass(frozen=True)
class Schema:
    table_name: str
    attributes: tuple[Attribute, ...]
    primary_key: tuple[str, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise SchemaError(f"{self.table_name}: duplicate attribute(s) {dupes}")
        if not self.primary_key:
            raise SchemaError(f"{self.table_name}: primary key must be nonempty")
        missing = [k for k in self.primary_key if k not in names]
        if missing:
            raise SchemaError(f"{self.table_name}: primary key attribute(s) {missing} not in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def index(self, name: str) -> int:
        for i, a in enumerate(self.attributes):
            if a.name == name:
                return i
        raise SchemaError(f"{self.table_name} has no attribute {name!r}")

    def type_of(self, name: str) -> AttributeType:
        return self.attributes[self.index(name)].type

    def __contains__(self, name: object) -> bool:
        return any(a.name == name for a in self.attributes)


def _normalize_value(kind: AttributeType, value: Any) -> Any:
    if kind is AttributeType.REAL and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


class Table:
    """A named relation with declared keys. Rows are tuples aligned to the schema."""

    __slots__ = ("schema", "rows", "declared_keys", "_index_cache")

    def __init__(self, schema: Schema, rows: Iterable[Sequence[Any]],
                 keys: Iterable[Sequence[str]] = (), check: bool = True):
        arity = len(schema.attributes)
        kinds = [a.type for a in schema.attributes]
        stored = []
        for r, row in enumerate(rows):
            if len(row) != arity:
                raise SchemaError(f"{schema.table_name}: row {r} has {len(row)} values, expected {arity}")
            stored.append(tuple(_normalize_value(k, v) for k, v in zip(kinds, row)))
        self.schema = schema
        self.rows: tuple[tuple[Any, ...], ...] = tuple(stored)
        declared = [tuple(schema.primary_key)]
        for k in keys:
            k = tuple(k)
            for name in k:
                schema.index(name)
            if k and k not in declared:
                declared.append(k)
        self.declared_keys: tuple[tuple[str, ...], ...] = tuple(declared)
        self._index_cache: dict[tuple[str, ...], dict] = {}
        if check:
            self._check_types()
            for k in self.declared_keys:
                dup = _first_key_violation(self, k)
                if dup is not None:
                    raise KeyViolation(f"{self.name}: key {list(k)} violated on value {dup!r}")

    def _check_types(self) -> None:
        for r, row in enumerate(self.rows):
            for a, v in zip(self.schema.attributes, row):
                if not a.type.accepts(v):
                    raise SchemaError(f"{self.name}: row {r}, column {a.name!r}: "
                                      f"value {v!r} is not {a.type.value}")

    @property
    def name(self) -> str:
        return self.schema.table_name

    @property
    def primary_key(self) -> tuple[str, ...]:
        return self.schema.primary_key

    def __len__(self) -> int:
        return len(self.rows)

    def __repr__(self) -> str:
        cols = ", ".join(f"{a.name}:{a.type.value}" for a in self.schema.attributes)
        return f"Table({self.name}({cols}); {len(self.rows)} rows)"

    def column(self, name: str) -> list[Any]:
        i = self.schema.index(name)
        return [row[i] for row in self.rows]

    def project(self, names: Sequence[str]) -> list[tuple[Any, ...]]:
        idx = [self.schema.index(n) for n in names]
        return [tuple(row[i] for i in idx) for row in self.rows]

    def row_dict(self, i: int) -> dict[str, Any]:
        return dict(zip(self.schema.names, self.rows[i]))

    def records(self) -> list[dict[str, Any]]:
        names = self.schema.names
        return [dict(zip(names, row)) for row in self.rows]

    def key_of(self, i: int) -> tuple[Any, ...]:
        """Primary-key values of row ``i``."""
        idx = [self.schema.index(n) for n in self.primary_key]
        row = self.rows[i]
        return tuple(row[j] for j in idx)

    def is_key(self, names: Iterable[str]) -> bool:
        """True if ``names`` contains some declared key (i.e. is a superkey)."""
        s = set(names)
        return any(set(k) <= s for k in self.declared_keys)

    def index_on(self, names: Sequence[str]) -> dict[tuple[Any, ...], list[int]]:
        """Row positions grouped by their values on ``names`` (cached)."""
        names = tuple(names)
        idx = self._index_cache.get(names)
        if idx is None:
            idx = {}
            for i, vals in enumerate(self.project(names)):
                idx.setdefault(vals, []).append(i)
            self._index_cache[names] = idx
        return idx

    def with_rows(self, rows: Iterable[Sequence[Any]], check: bool = True) -> Table:
        return Table(self.schema, rows, self.declared_keys, check=check)

    def renamed(self, name: str) -> Table:
        schema = Schema(name, self.schema.attributes, self.schema.primary_key)
        return Table(schema, self.rows, self.declared_keys, check=False)


def make_table(name: str, columns: Sequence[tuple[str, AttributeType | str]],
               rows: Iterable[Sequence[Any]], primary_key: Sequence[str] | None = None,
               keys: Iterable[Sequence[str]] = ()) -> Table:
    """Build a table from (name, type) pairs; adds a synthetic ``id`` key if none is given."""
    attrs = [Attribute(n, t if isinstance(t, AttributeType) else AttributeType.parse(t))
             for n, t in columns]
    rows = [tuple(r) for r in rows]
    if primary_key is None:
        if any(a.name == "id" for a in attrs):
            primary_key = ("id",)
        else:
            attrs.insert(0, Attribute("id", AttributeType.INTEGER))
            rows = [(i, *r) for i, r in enumerate(rows)]
            primary_key = ("id",)
    return Table(Schema(name, tuple(attrs), tuple(primary_key)), rows, keys)


def _first_key_violation(table: Table, attrs: Sequence[str]) -> Any:
    """Return an offending key value (or a null marker), else None."""
    seen = set()
    for vals in table.project(attrs):
        if any(v is None for v in vals):
            return "null"
        if vals in seen:
            return vals[0] if len(vals) == 1 else vals
        seen.add(vals)
    return None


# -- constraints ------------------------------------------------------------


class Relationship(str, Enum):
    ONE_TO_ONE = "OneToOne"
    MANY_TO_ONE = "ManyToOne"
    GENERAL = "General"


@dataclass(frozen=True)
class ForeignKey:
    name: str
    src_table: str
    src_attrs: tuple[str, ...]
    dst_table: str
    dst_attrs: tuple[str, ...]
    src_is_key: bool = False
    dst_is_key: bool = True

    def __str__(self) -> str:
        return (f"{self.name}({self.src_table}.({','.join(self.src_attrs)}) -> "
                f"{self.dst_table}.({','.join(self.dst_attrs)}))")


@dataclass(frozen=True)
class Materialization:
    """Declares that ``table`` stores the rows of constraint ``constraint``.

    ``src_attrs`` identify the referencing row and ``dst_attrs`` the referenced
    values; a view of ``table`` that shows both on one mark draws the constraint.
    """

    table: str
    constraint: str
    src_attrs: tuple[str, ...]
    dst_attrs: tuple[str, ...]


@dataclass(frozen=True)
class Database:
    tables: Mapping[str, Table] = field(default_factory=dict)
    constraints: Mapping[str, ForeignKey] = field(default_factory=dict)
    materializations: Mapping[str, Materialization] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "tables", dict(self.tables))
        object.__setattr__(self, "constraints", dict(self.constraints))
        object.__setattr__(self, "materializations", dict(self.materializations))
        for fk in self.constraints.values():
            self._check_endpoints(fk)

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise SchemaError(f"unknown table {name!r}") from None

    def constraint(self, name: str) -> ForeignKey:
        try:
            return self.constraints[name]
        except KeyError:
            raise SchemaError(f"unknown constraint {name!r}") from None

    def _check_endpoints(self, fk: ForeignKey) -> None:
        src, dst = self.table(fk.src_table), self.table(fk.dst_table)
        if len(fk.src_attrs) != len(fk.dst_attrs) or not fk.src_attrs:
            raise SchemaError(f"{fk.name}: attribute lists differ in length")
        for a, b in zip(fk.src_attrs, fk.dst_attrs):
            ta, tb = src.schema.type_of(a), dst.schema.type_of(b)
            if not compatible(ta, tb):
                raise SchemaError(f"{fk.name}: {fk.src_table}.{a} ({ta.value}) is not "
                                  f"compatible with {fk.dst_table}.{b} ({tb.value})")

    def foreign_key(self, name: str, src_table: str, src_attrs: Sequence[str],
                    dst_table: str, dst_attrs: Sequence[str]) -> ForeignKey:
        """Build a constraint with key flags derived from the declared keys."""
        src, dst = self.table(src_table), self.table(dst_table)
        fk = ForeignKey(name, src_table, tuple(src_attrs), dst_table, tuple(dst_attrs),
                        src_is_key=src.is_key(src_attrs), dst_is_key=dst.is_key(dst_attrs))
        self._check_endpoints(fk)
        return fk

    def with_tables(self, *tables: Table) -> Database:
        new = dict(self.tables)
        for t in tables:
            new[t.name] = t
        return Database(new, self.constraints, self.materializations)

    def with_constraints(self, *fks: ForeignKey) -> Database:
        new = dict(self.constraints)
        for fk in fks:
            if fk.name in new and new[fk.name] != fk:
                raise SchemaError(f"constraint {fk.name!r} already defined")
            new[fk.name] = fk
        return Database(self.tables, new, self.materializations)

    def with_materialization(self, m: Materialization) -> Database:
        self.table(m.table)
        fk = self.constraint(m.constraint)
        if len(m.src_attrs) != len(self.table(fk.src_table).primary_key) and \
                len(m.src_attrs) != len(fk.src_attrs):
            raise SchemaError(f"materialization of {fk.name}: src attrs do not match")
        new = dict(self.materializations)
        new[m.table] = m
        return Database(self.tables, self.constraints, new)

    def restrict(self, names: Iterable[str]) -> Database:
        """Keep only ``names``; constraints touching dropped tables are dropped."""
        keep = {n: self.table(n) for n in names}
        fks = {k: fk for k, fk in self.constraints.items()
               if fk.src_table in keep and fk.dst_table in keep}
        mats = {k: m for k, m in self.materializations.items()
                if m.table in keep and m.constraint in fks}
        return Database(keep, fks, mats)

    def constraints_between(self, src: str, dst: str) -> list[ForeignKey]:
        return [fk for fk in self.constraints.values()
                if fk.src_table == src and fk.dst_table == dst]

    def validate(self) -> None:
        """Raise if any declared key or foreign key fails on the instance."""
        for t in self.tables.values():
            for k in t.declared_keys:
                if not check_key(t, k):
                    raise KeyViolation(f"{t.name}: key {list(k)} does not hold")
        for fk in self.constraints.values():
            if not check_fk(self, fk):
                raise ForeignKeyViolation(f"{fk} does not hold on the instance")


# -- operations ---------------------------------------------------------------


def check_key(table: Table, attrs: Iterable[str]) -> bool:
    attrs = list(attrs)
    for a in attrs:
        table.schema.index(a)
    seen = set()
    for vals in table.project(attrs):
        if any(v is None for v in vals) or vals in seen:
            return False
        seen.add(vals)
    return True


def check_fk(db: Database, fk: ForeignKey) -> bool:
    """Every non-null source tuple appears among the destination tuples.

    Source rows with a null in any referencing attribute are skipped.
    """
    src, dst = db.table(fk.src_table), db.table(fk.dst_table)
    targets = set(dst.index_on(fk.dst_attrs))
    for vals in src.project(fk.src_attrs):
        if any(v is None for v in vals):
            continue
        if vals not in targets:
            return False
    return True


def classify_relationship(fk: ForeignKey) -> Relationship:
    if fk.dst_is_key:
        return Relationship.ONE_TO_ONE if fk.src_is_key else Relationship.MANY_TO_ONE
    return Relationship.GENERAL


def sort_key(value: Any) -> tuple:
    """Total order used for deterministic sorting: nulls first, then by value."""
    if value is None:
        return (0, 0)
    if isinstance(value, (bool, int, float)):
        return (1, value)
    return (2, value)


def active_domain(table: Table, attr: str) -> list[Any]:
    values = {v for v in table.column(attr) if v is not None}
    return sorted(values, key=sort_key)


# -- loading ------------------------------------------------------------------

_INT_RE = re.compile(r"^[+-]?\d+$")


def _infer_text_kind(values: list[str]) -> AttributeType:
    present = [v for v in values if v != ""]
    if not present:
        return AttributeType.TEXT
    if all(_INT_RE.match(v) for v in present):
        return AttributeType.INTEGER
    if all(v.lower() in ("true", "false") for v in present):
        return AttributeType.BOOLEAN
    try:
        for v in present:
            if not math.isfinite(float(v)):
                raise ValueError(v)
        return AttributeType.REAL
    except ValueError:
        return AttributeType.TEXT


def _coerce(value: Any, kind: AttributeType, row: int, column: str) -> Any:
    if value is None or value == "":
        return None
    try:
        if kind is AttributeType.INTEGER:
            if isinstance(value, bool):
                raise ValueError
            if isinstance(value, float):
                if not value.is_integer():
                    raise ValueError
                return int(value)
            if isinstance(value, str) and not _INT_RE.match(value.strip()):
                raise ValueError
            return int(value)
        if kind is AttributeType.REAL:
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind is AttributeType.BOOLEAN:
            if isinstance(value, bool):
                return value
            if isinstance(value, str) and value.strip().lower() in ("true", "false"):
                return value.strip().lower() == "true"
            raise ValueError
        return value if isinstance(value, str) else str(value)
    except (TypeError, ValueError):
        raise LoadError(f"row {row}, column {column!r}: cannot coerce {value!r} "
                        f"to {kind.value}") from None


def _parse_payload(payload: str) -> tuple[list[str], list[list[Any]], bool]:
    text = payload.lstrip("﻿")
    if text.lstrip().startswith("["):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise LoadError(f"malformed JSON: {e}") from None
        header: list[str] = []
        for obj in data:
            if not isinstance(obj, dict):
                raise LoadError("JSON payload must be an array of flat objects")
            for k in obj:
                if k not in header:
                    header.append(k)
        rows = []
        for r, obj in enumerate(data):
            if set(obj) != set(header):
                raise LoadError(f"row {r}: ragged object, keys {sorted(obj)}")
            vals = []
            for k in header:
                v = obj[k]
                if isinstance(v, (dict, list)):
                    raise LoadError(f"row {r}, column {k!r}: nested value")
                vals.append(v)
            rows.append(vals)
        return header, rows, True
    reader = csv.reader(io.StringIO(text))
    lines = [line for line in reader]
    if not lines:
        raise LoadError("empty CSV payload (no header)")
    header = lines[0]
    rows = lines[1:]
    for r, line in enumerate(rows):
        if len(line) != len(header):
            raise LoadError(f"row {r}: ragged row with {len(line)} fields, expected {len(header)}")
    return header, rows, False


def load_table(payload: str, name: str, type_hints: Mapping[str, str | AttributeType] | None = None,
               keys: Sequence[Sequence[str]] = ()) -> Table:
    """Parse CSV text or a JSON array of flat objects into a :class:`Table`.

    The first declared key becomes the primary key. Without declared keys an
    existing ``id`` column is used, otherwise a 0-based synthetic ``id`` is prepended.
    """
    header, raw, is_json = _parse_payload(payload)
    dupes = sorted({h for h in header if header.count(h) > 1})
    if dupes:
        raise LoadError(f"{name}: duplicate header(s) {dupes}")
    hints = {k: (v if isinstance(v, AttributeType) else AttributeType.parse(v))
             for k, v in (type_hints or {}).items()}
    unknown = sorted(set(hints) - set(header))
    if unknown and raw:
        raise LoadError(f"{name}: type hints for unknown column(s) {unknown}")
    kinds = []
    for c, col in enumerate(header):
        if col in hints:
            kinds.append(hints[col])
        elif is_json:
            seen = {AttributeType.of_value(row[c]) for row in raw} - {None}
            if seen <= {AttributeType.INTEGER, AttributeType.REAL} and AttributeType.REAL in seen:
                kinds.append(AttributeType.REAL)
            elif len(seen) == 1:
                kinds.append(seen.pop())
            elif not seen:
                kinds.append(AttributeType.TEXT)
            else:
                raise LoadError(f"{name}: column {col!r} mixes types {sorted(s.value for s in seen)}")
        else:
            kinds.append(_infer_text_kind([row[c] for row in raw]))
    if not raw:
        # an empty payload keeps its hinted schema
        for h, kind in hints.items():
            if h not in header:
                header.append(h)
                kinds.append(kind)
    rows = [[_coerce(v, k, r, col) for v, k, col in zip(row, kinds, header)]
            for r, row in enumerate(raw)]
    columns = list(zip(header, kinds))
    keys = [tuple(k) for k in keys]
    try:
        if keys:
            return make_table(name, columns, rows, primary_key=keys[0], keys=keys[1:])
        return make_table(name, columns, rows)
    except KeyViolation as e:
        raise LoadError(str(e)) from None
    except SchemaError as e:
        raise LoadError(str(e)) from None
