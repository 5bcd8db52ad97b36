"""Database manifests: table sources, constraints and an optional prep plan."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .dataprep import TransformPlan
from .errors import DvlError, ForeignKeyViolation, LoadError
from .relcore import Database, Materialization, check_fk, load_table

_TABLE_FIELDS = {"name", "path", "keys", "types"}
_TOP_FIELDS = {"tables", "constraints", "materializations", "prep"}


@dataclass(frozen=True)
class TableSource:
    name: str
    path: Path
    keys: tuple[tuple[str, ...], ...] = ()
    types: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConstraintDecl:
    name: str
    src_table: str
    src_attrs: tuple[str, ...]
    dst_table: str
    dst_attrs: tuple[str, ...]


@dataclass(frozen=True)
class Manifest:
    """Parsed manifest; relative paths are already resolved against its directory."""

    tables: tuple[TableSource, ...]
    constraints: tuple[ConstraintDecl, ...] = ()
    materializations: tuple[Materialization, ...] = ()
    prep: TransformPlan | None = None
    base_dir: Path = Path(".")


def _read_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise LoadError(f"cannot read {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise LoadError(f"{path}: malformed JSON: {e}") from None


def parse_manifest(doc: Any, base_dir: Path) -> Manifest:
    if not isinstance(doc, dict):
        raise LoadError("manifest must be a JSON object")
    unknown = set(doc) - _TOP_FIELDS
    if unknown:
        raise LoadError(f"manifest: unknown field(s) {sorted(unknown)}")
    tables = []
    for i, t in enumerate(doc.get("tables", [])):
        if not isinstance(t, dict) or {"name", "path"} - set(t) or set(t) - _TABLE_FIELDS:
            raise LoadError(f"manifest tables/{i}: expected name, path and optional keys/types")
        tables.append(TableSource(t["name"], base_dir / t["path"],
                                  tuple(tuple(k) for k in t.get("keys", [])), dict(t.get("types", {}))))
    constraints = []
    for i, c in enumerate(doc.get("constraints", [])):
        try:
            constraints.append(ConstraintDecl(c["name"], c["src"]["table"], tuple(c["src"]["attrs"]),
                                              c["dst"]["table"], tuple(c["dst"]["attrs"])))
        except (KeyError, TypeError):
            raise LoadError(f"manifest constraints/{i}: expected name, src{{table,attrs}}, "
                            f"dst{{table,attrs}}") from None
    mats = []
    for i, m in enumerate(doc.get("materializations", [])):
        try:
            mats.append(Materialization(m["table"], m["constraint"], tuple(m["src"]), tuple(m["dst"])))
        except (KeyError, TypeError):
            raise LoadError(f"manifest materializations/{i}: expected table, constraint, src, dst") from None
    prep = doc.get("prep")
    if isinstance(prep, str):
        prep = _read_json(base_dir / prep)
    try:
        plan = TransformPlan.from_json(prep) if prep is not None else None
    except DvlError as e:
        raise LoadError(f"manifest prep: {e}") from None
    return Manifest(tuple(tables), tuple(constraints), tuple(mats), plan, base_dir)


def read_manifest(path: str | Path) -> Manifest:
    path = Path(path)
    return parse_manifest(_read_json(path), path.parent)


def build_database(manifest: Manifest) -> Database:
    """Load tables, run the prep plan and verify every constraint on the result.

    Constraints between base tables are registered before the plan runs so that
    operators can carry them over to derived tables.
    """
    db = Database()
    for src in manifest.tables:
        try:
            text = src.path.read_text(encoding="utf-8")
        except OSError as e:
            raise LoadError(f"table {src.name}: cannot read {src.path}: {e.strerror}") from None
        try:
            db = db.with_tables(load_table(text, src.name, src.types, src.keys))
        except LoadError as e:
            raise LoadError(f"table {src.name}: {e}") from None

    def add(db: Database, decls) -> Database:
        for c in decls:
            try:
                fk = db.foreign_key(c.name, c.src_table, c.src_attrs, c.dst_table, c.dst_attrs)
                db = db.with_constraints(fk)
            except DvlError as e:
                raise LoadError(f"constraint {c.name}: {e}") from None
        return db

    early = [c for c in manifest.constraints if c.src_table in db.tables and c.dst_table in db.tables]
    late = [c for c in manifest.constraints if c not in early]
    db = add(db, early)
    if manifest.prep is not None:
        db = manifest.prep.execute(db)
    db = add(db, late)
    for m in manifest.materializations:
        try:
            db = db.with_materialization(m)
        except DvlError as e:
            raise LoadError(f"materialization {m.table}: {e}") from None
        check_materialization(db, m)
    for fk in db.constraints.values():
        if not check_fk(db, fk):
            raise ForeignKeyViolation(f"constraint {fk} does not hold on the loaded data")
    return db


def check_materialization(db: Database, m: Materialization) -> None:
    """The table must list exactly the (source key, referenced value) pairs of the constraint."""
    fk = db.constraint(m.constraint)
    src = db.table(fk.src_table)
    if len(m.src_attrs) != len(src.primary_key) or len(m.dst_attrs) != len(fk.dst_attrs):
        raise LoadError(f"materialization {m.table}: expected {len(src.primary_key)} source and "
                        f"{len(fk.dst_attrs)} target attribute(s)")
    expected = set()
    for key, vals in zip(src.project(src.primary_key), src.project(fk.src_attrs)):
        if all(v is not None for v in vals):
            expected.add(key + vals)
    actual = set(db.table(m.table).project(m.src_attrs + m.dst_attrs))
    if actual != expected:
        raise LoadError(f"materialization {m.table} does not match the pairs of {fk.name}")


def load_manifest(path: str | Path) -> Database:
    return build_database(read_manifest(path))
