"""Foreign references: constraint-path enumeration, validation and lookup.

A reference in one view reads values from the rows (or marks) of another table
by following constraints. Forward hops land on a key of the referenced table,
so each hop picks at most one row; reverse hops are allowed when they are 1-1 or
when the reference aggregates.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass
from typing import Any

from .errors import AmbiguousReference, DanglingReference, ExprError, RefError, SpecError
from .expr import Expr
from .relcore import Database, ForeignKey, Table
from .specmodel import (MARK_CHANNELS, Const, Diagnostic, ExprEnc, Field, ForeignRef, LayoutRef,
                        NestDecl, PlotSpec, ViewSpec)

DEFAULT_MAX_HOPS = 3

# channel sets that identify a mark's position, by mark type
POSITION_KEYS = {
    "point": ("x", "y"), "rect": ("x", "y"), "square": ("x", "y"),
    "label": ("x", "y"), "text": ("x", "y"), "link": ("x1", "y1", "x2", "y2"),
}


@dataclass(frozen=True)
class Hop:
    constraint: str
    forward: bool = True


@dataclass(frozen=True)
class FkPath:
    origin: str
    terminal: str
    hops: tuple[Hop, ...] = ()

    def __str__(self) -> str:
        if not self.hops:
            return f"{self.origin} (same rows)"
        parts = [h.constraint if h.forward else f"~{h.constraint}" for h in self.hops]
        return f"{self.origin} -[{', '.join(parts)}]-> {self.terminal}"

    def start_attrs(self, db: Database) -> tuple[str, ...]:
        """Attributes of the origin table that the first hop reads."""
        if not self.hops:
            return ()
        fk = db.constraint(self.hops[0].constraint)
        return fk.src_attrs if self.hops[0].forward else fk.dst_attrs

    def constraints(self) -> tuple[str, ...]:
        return tuple(h.constraint for h in self.hops)


def hop_unique(fk: ForeignKey, forward: bool) -> bool:
    """Does the hop select at most one row per input row?"""
    return fk.dst_is_key if forward else fk.src_is_key


def hop_one_to_one(fk: ForeignKey) -> bool:
    return fk.src_is_key and fk.dst_is_key


@dataclass(frozen=True)
class PathInfo:
    """Verdict for one reference.

    ``preserves_key``: every hop is 1-1, so distinct source keys retrieve distinct
    target rows. ``returns_key``: the retrieved properties include a key of the
    terminal (a declared key, or the mark's position channels).
    """

    unambiguous: bool
    preserves_key: bool
    returns_key: bool
    terminal: str
    path: FkPath | None = None
    aggregated: bool = False


def enumerate_paths(db: Database, origin: str, target: str, max_hops: int = DEFAULT_MAX_HOPS,
                    allow_general: bool = False) -> list[FkPath]:
    """All constraint paths of 1..max_hops hops from ``origin`` to ``target``.

    Forward hops must land on a key of their destination and reverse hops must be
    1-1, unless ``allow_general`` (aggregating references) lifts both restrictions.
    A constraint is used at most once per path, and a path ends the first time it
    reaches ``target``.
    """
    db.table(origin)
    db.table(target)
    out: list[FkPath] = []
    fks = sorted(db.constraints.values(), key=lambda f: f.name)

    def walk(cur: str, hops: list[Hop], used: set[str]) -> None:
        if hops and cur == target:
            out.append(FkPath(origin, target, tuple(hops)))
            return
        if len(hops) >= max_hops:
            return
        for fk in fks:
            if fk.name in used:
                continue
            for forward, here, there in ((True, fk.src_table, fk.dst_table),
                                         (False, fk.dst_table, fk.src_table)):
                if here != cur:
                    continue
                if not allow_general and not hop_unique(fk, forward):
                    continue
                if not forward and not allow_general and not hop_one_to_one(fk):
                    continue
                hops.append(Hop(fk.name, forward))
                used.add(fk.name)
                walk(there, hops, used)
                used.discard(fk.name)
                hops.pop()

    walk(origin, [], set())
    return out


def connected(db: Database, a: str, b: str) -> bool:
    """Undirected reachability over constraints (any path length)."""
    seen, todo = {a}, [a]
    while todo:
        cur = todo.pop()
        if cur == b:
            return True
        for fk in db.constraints.values():
            for x, y in ((fk.src_table, fk.dst_table), (fk.dst_table, fk.src_table)):
                if x == cur and y not in seen:
                    seen.add(y)
                    todo.append(y)
    return False


def _target_table(spec: PlotSpec | None, ref: ForeignRef) -> str:
    if ref.view is not None:
        if spec is None or not spec.has_view(ref.view):
            raise RefError(f"unknown view {ref.view!r}")
        return spec.view(ref.view).table
    return ref.table


def target_columns(db: Database, spec: PlotSpec | None, ref: ForeignRef) -> set[str]:
    """Names a reference may read: data columns plus, for views, mark channels."""
    cols = set(db.table(_target_table(spec, ref)).schema.names)
    if ref.view is not None:
        cols |= MARK_CHANNELS[spec.view(ref.view).mark] | {"x", "y", "w", "h"}
    return cols


def _identity_path(db: Database, source: str, attrs: Sequence[str]) -> FkPath | None:
    t = db.table(source)
    if attrs and t.is_key(attrs):
        return FkPath(source, source, ())
    return None


def _pred_as_keys(db: Database, source: str, target: str, ref: ForeignRef) -> tuple[str, ...] | None:
    """An ``on`` predicate that spells out a constraint is treated as that constraint."""
    f = ref.filter
    if f.eq or not f.on:
        return None
    tcols = tuple(t for t, _ in f.on)
    scols = tuple(s for _, s in f.on)
    for fk in db.constraints.values():
        if fk.src_table == source and fk.dst_table == target and \
                sorted(zip(fk.src_attrs, fk.dst_attrs)) == sorted(zip(scols, tcols)):
            return scols
    return None


def candidate_paths(db: Database, source: str, target: str, ref: ForeignRef,
                    max_hops: int = DEFAULT_MAX_HOPS) -> list[FkPath]:
    f = ref.filter
    allow = ref.agg is not None
    if f.kind == "keys":
        attrs = f.attrs
    elif f.kind == "pred":
        attrs = _pred_as_keys(db, source, target, ref)
        if attrs is None:
            return []
    else:
        attrs = None
    paths = enumerate_paths(db, source, target, max_hops, allow_general=allow)
    if attrs is not None:
        paths = [p for p in paths if sorted(p.start_attrs(db)) == sorted(attrs)]
        if source == target:
            ident = _identity_path(db, source, attrs)
            if ident is not None:
                paths.insert(0, ident)
    elif f.kind == "infer" and source == target:
        paths.insert(0, FkPath(source, source, ()))
    return paths


def validate_ref(db: Database, spec: PlotSpec | None, view: ViewSpec, ref: ForeignRef,
                 props: Sequence[str] | None = None, max_hops: int = DEFAULT_MAX_HOPS) -> PathInfo:
    """Check that ``ref`` (used by ``view``) resolves, and classify it.

    ``props`` overrides the retrieved property names, so references that read
    the same marks through the same filter can be judged together.
    """
    source = view.table
    target = _target_table(spec, ref)
    db.table(source)
    tgt = db.table(target)
    props = tuple(props) if props is not None else ref.target_props
    allowed = target_columns(db, spec, ref)
    missing = [p for p in props if p not in allowed]
    if missing:
        raise RefError(f"{target_desc(ref)} has no propert{'y' if len(missing) == 1 else 'ies'} {missing}")
    f = ref.filter
    aggregated = ref.agg is not None

    if f.kind == "all":
        if not aggregated:
            raise AmbiguousReference(f"reference to all of {target_desc(ref)} needs an aggregate")
        return PathInfo(True, False, False, target, None, True)

    if f.kind == "pred" and _pred_as_keys(db, source, target, ref) is None:
        for col, _ in f.eq:
            tgt_cols = allowed
            if col not in tgt_cols:
                raise RefError(f"{target_desc(ref)} has no column {col!r}")
        for col, scol in f.on:
            if col not in allowed:
                raise RefError(f"{target_desc(ref)} has no column {col!r}")
            db.table(source).schema.index(scol)
        cols = [c for c, _ in f.eq] + [c for c, _ in f.on]
        if not aggregated and not tgt.is_key(cols):
            raise AmbiguousReference(f"predicate on {cols} does not identify a single row of "
                                     f"{target}; add an aggregate")
        return PathInfo(True, False, _returns_key(db, spec, ref, props), target, None, aggregated)

    if f.kind == "keys":
        src_t = db.table(source)
        for a in f.attrs:
            src_t.schema.index(a)
    paths = candidate_paths(db, source, target, ref, max_hops)
    if not paths:
        how = f"from {list(f.attrs)}" if f.kind == "keys" else "between the tables"
        raise RefError(f"no valid constraint path {how} of {source} to {target_desc(ref)}")
    if len(paths) > 1:
        shortest = min(len(p.hops) for p in paths)
        best = [p for p in paths if len(p.hops) == shortest]
        if not aggregated or len(best) > 1:
            opts = "; ".join(str(p) for p in paths)
            raise AmbiguousReference(f"{len(paths)} constraint paths from {source} to "
                                     f"{target_desc(ref)} ({opts}); name the filter attributes")
        paths = best
    path = paths[0]
    fks = [db.constraint(h.constraint) for h in path.hops]
    unique = all(hop_unique(fk, h.forward) for fk, h in zip(fks, path.hops))
    if not unique and not aggregated:
        raise AmbiguousReference(f"path {path} may match several rows; add an aggregate")
    preserves = all(hop_one_to_one(fk) for fk in fks) and unique
    if not path.hops:
        preserves = True
    return PathInfo(True, preserves and not aggregated, _returns_key(db, spec, ref, props) and not aggregated,
                    target, path, aggregated)


def target_desc(ref: ForeignRef) -> str:
    return f"view {ref.view}" if ref.view else f"table {ref.table}"


def _returns_key(db: Database, spec: PlotSpec | None, ref: ForeignRef, props: Sequence[str]) -> bool:
    ps = set(props)
    tgt = db.table(_target_table(spec, ref))
    if ref.view is not None:
        if set(POSITION_KEYS[spec.view(ref.view).mark]) <= ps:
            return True
        # for views, data attributes are not mark properties unless encoded
        return False
    return tgt.is_key(ps)


# -- evaluation -------------------------------------------------------------------


def follow(db: Database, path: FkPath, source: Table) -> list[list[int] | None]:
    """Terminal row positions reached from each source row (``None`` for null keys)."""
    out: list[list[int] | None] = []
    steps = []
    for h in path.hops:
        fk = db.constraint(h.constraint)
        if h.forward:
            here, there = db.table(fk.src_table), db.table(fk.dst_table)
            steps.append((here, [here.schema.index(a) for a in fk.src_attrs], there.index_on(fk.dst_attrs)))
        else:
            here, there = db.table(fk.dst_table), db.table(fk.src_table)
            steps.append((here, [here.schema.index(a) for a in fk.dst_attrs], there.index_on(fk.src_attrs)))
    for r in range(len(source.rows)):
        cur = [r]
        null = False
        for here, idx, index in steps:
            nxt: list[int] = []
            for i in cur:
                vals = tuple(here.rows[i][j] for j in idx)
                if any(v is None for v in vals):
                    null = True
                    continue
                nxt.extend(index.get(vals, ()))
            cur = nxt
        out.append(None if null and not cur else cur)
    return out


def reduce_values(agg: str, values: list[Any]) -> Any:
    vals = [v for v in values if v is not None]
    if agg == "count":
        return len(values)
    if agg == "sum":
        return sum(vals) if vals else 0
    if not vals:
        return None
    if agg == "max":
        return max(vals)
    if agg == "min":
        return min(vals)
    if agg == "avg":
        return sum(vals) / len(vals)
    raise RefError(f"unknown aggregate {agg!r}")


def _projector(ref: ForeignRef) -> Callable[[Mapping[str, Any]], Any]:
    if ref.expr is not None:
        e = Expr(ref.expr)
        return e.evaluate
    prop = ref.prop
    return lambda rec: rec[prop]


def evaluate_ref(db: Database, spec: PlotSpec | None, view: ViewSpec, ref: ForeignRef,
                 targets: Sequence[Mapping[str, Any]], info: PathInfo | None = None) -> list[Any]:
    """Value of ``ref`` for every row of ``view``'s table.

    ``targets`` are the target records aligned with the target table's rows
    (for views: data attributes merged with resolved mark channels).
    """
    if info is None:
        info = validate_ref(db, spec, view, ref)
    source = db.table(view.table)
    project = _projector(ref)
    f = ref.filter
    if f.kind == "all":
        vals = [_safe(project, t, ref) for t in targets]
        agg = reduce_values(ref.agg, vals)
        return [agg] * len(source.rows)
    if info.path is not None:
        matches = follow(db, info.path, source)
    else:
        matches = _predicate_matches(source, targets, ref)
    out = []
    for r, m in enumerate(matches):
        if m is None:
            out.append(None if ref.agg is None else reduce_values(ref.agg, []))
            continue
        if ref.agg is None:
            if not m:
                raise DanglingReference(f"row {r} of {source.name} has no match in {target_desc(ref)} "
                                        f"(a constraint is violated upstream)")
            if len(m) > 1:
                raise AmbiguousReference(f"row {r} of {source.name} matches {len(m)} rows of "
                                         f"{target_desc(ref)}")
            out.append(_safe(project, targets[m[0]], ref))
        else:
            out.append(reduce_values(ref.agg, [_safe(project, targets[i], ref) for i in m]))
    return out


def _safe(project: Callable, rec: Mapping[str, Any], ref: ForeignRef) -> Any:
    try:
        return project(rec)
    except KeyError as e:
        raise RefError(f"{target_desc(ref)} has no property {e.args[0]!r}") from None
    except ExprError as e:
        raise RefError(str(e)) from None


def _predicate_matches(source: Table, targets: Sequence[Mapping[str, Any]], ref: ForeignRef) -> list[list[int]]:
    f = ref.filter
    base = [i for i, t in enumerate(targets) if all(t.get(c) == v for c, v in f.eq)]
    out = []
    for rec in source.records():
        out.append([i for i in base if all(targets[i].get(tc) == rec[sc] for tc, sc in f.on)])
    return out


def get(marks: Sequence[Mapping[str, Any]], source_rows: Sequence[Mapping[str, Any]],
        filter: Mapping[str, str] | Callable[[Mapping, Mapping], bool] | None,
        props: str | Sequence[str] | Mapping[str, str] | None = None,
        agg: str | Callable[[list, Mapping], Any] | None = None) -> list[Any]:
    """Direct lookup from ``source_rows`` into ``marks``.

    ``filter`` maps source attributes to mark attributes used as search keys, or
    is a predicate ``(mark, source_row) -> bool``, or ``None`` for all marks.
    ``props`` projects: a name yields a scalar, a list a dict, and a mapping
    ``{new: old}`` a renamed dict. ``agg`` reduces the projected matches; it is
    an aggregate name or a callable ``(matches, source_row) -> scalar``.
    """
    if filter is None and agg is None:
        raise AmbiguousReference("a lookup over all marks needs an aggregate")
    index: dict[tuple, list[int]] | None = None
    if isinstance(filter, Mapping):
        src_attrs, mark_attrs = list(filter.keys()), list(filter.values())
        index = {}
        for i, m in enumerate(marks):
            index.setdefault(tuple(m[a] for a in mark_attrs), []).append(i)

    def project(m: Mapping[str, Any]) -> Any:
        if props is None:
            return dict(m)
        if isinstance(props, str):
            return m[props]
        if isinstance(props, Mapping):
            return {new: m[old] for new, old in props.items()}
        return {p: m[p] for p in props}

    out = []
    for r, row in enumerate(source_rows):
        if filter is None:
            hits = list(range(len(marks)))
        elif index is not None:
            hits = index.get(tuple(row[a] for a in src_attrs), [])
        else:
            hits = [i for i, m in enumerate(marks) if filter(m, row)]
        rows = [project(marks[i]) for i in hits]
        if agg is None:
            if not rows:
                raise DanglingReference(f"source row {r} has no matching mark")
            if len(rows) > 1:
                raise AmbiguousReference(f"source row {r} matches {len(rows)} marks")
            out.append(rows[0])
        elif callable(agg):
            out.append(agg(rows, row))
        else:
            out.append(reduce_values(agg, rows))
    return out


# -- nesting paths -------------------------------------------------------------------


@dataclass(frozen=True)
class NestLink:
    """How child rows find their parent mark: a constraint path or attribute pairs."""

    path: FkPath | None = None
    pairs: tuple[tuple[str, str], ...] = ()

    @property
    def constraints(self) -> tuple[str, ...]:
        return self.path.constraints() if self.path else ()


def nest_link(db: Database, spec: PlotSpec, nest: NestDecl, child: str) -> NestLink | None:
    """Resolve how rows of ``child`` map to marks of ``nest.parent``.

    Returns ``None`` for selector nests without a relationship (the whole child
    view goes into the selected mark).
    """
    ctable = spec.view(child).table
    ptable = spec.view(nest.parent).table
    if nest.using is not None:
        if nest.using_pairs:
            pairs = tuple(nest.using)
            ct, pt = db.table(ctable), db.table(ptable)
            for c, p in pairs:
                ct.schema.index(c)
                pt.schema.index(p)
            if not pt.is_key([p for _, p in pairs]):
                raise RefError(f"nest attributes {[p for _, p in pairs]} are not a key of {ptable}")
            return NestLink(pairs=pairs)
        hops, cur = [], ctable
        for name in nest.using:
            fk = db.constraint(name)
            if fk.src_table == cur:
                hops.append(Hop(name, True))
                cur = fk.dst_table
            elif fk.dst_table == cur and fk.src_is_key:
                hops.append(Hop(name, False))
                cur = fk.src_table
            else:
                raise RefError(f"constraint {name} does not continue a path from {cur}")
            if not hop_unique(fk, hops[-1].forward):
                raise RefError(f"constraint {name} does not land on a key")
        if cur != ptable:
            raise RefError(f"using path ends at {cur}, not at {ptable}")
        return NestLink(path=FkPath(ctable, ptable, tuple(hops)))
    if ctable == ptable:
        return NestLink(path=FkPath(ctable, ptable, ()))
    paths = enumerate_paths(db, ctable, ptable)
    if len(paths) == 1:
        return NestLink(path=paths[0])
    if not paths and nest.by_function:
        return None
    if not paths:
        raise RefError(f"no constraint path from {ctable} to {ptable} for nesting {child} in {nest.parent}")
    shortest = min(len(p.hops) for p in paths)
    best = [p for p in paths if len(p.hops) == shortest]
    if len(best) == 1:
        return NestLink(path=best[0])
    raise AmbiguousReference(f"{len(paths)} constraint paths from {ctable} to {ptable}; "
                             f"give 'using' for nesting {child} in {nest.parent}")


def nest_assignment(db: Database, link: NestLink, child: Table, parent: Table) -> list[int | None]:
    """Parent row position for every child row."""
    if link.pairs:
        index = parent.index_on([p for _, p in link.pairs])
        out = []
        for vals in child.project([c for c, _ in link.pairs]):
            hits = index.get(vals, [])
            out.append(hits[0] if len(hits) == 1 else None)
        return out
    out = []
    for m in follow(db, link.path, child):
        out.append(m[0] if m and len(m) == 1 else None)
    return out


# -- spec validation ------------------------------------------------------------------


def check_spec_references(spec: PlotSpec, db: Database) -> list[Diagnostic]:
    from .layouts import validate_layout_inputs

    diags: list[Diagnostic] = []

    def add(ptr: str, code: str, msg: str) -> None:
        diags.append(Diagnostic(ptr, code, msg))

    for i, v in enumerate(spec.views):
        vptr = f"/views/{i}"
        if v.table not in db.tables:
            add(f"{vptr}/table", "unresolved-reference", f"unknown table {v.table!r}")
            continue
        table = db.table(v.table)
        cols = set(table.schema.names)
        for ch, e in v.encodings.items():
            ptr = f"{vptr}/encodings/{ch}"
            if isinstance(e, Field) and e.attr not in cols:
                add(ptr, "unresolved-reference", f"{v.table} has no attribute {e.attr!r}")
            elif isinstance(e, ExprEnc):
                try:
                    Expr(e.expr).infer_type({a.name: a.type for a in table.schema.attributes})
                except ExprError as err:
                    add(ptr, "bad-expression", str(err))
            elif isinstance(e, ForeignRef):
                if e.table is not None and e.table not in db.tables:
                    add(f"{ptr}/ref", "unresolved-reference", f"unknown table {e.table!r}")
                    continue
                if e.view is not None and spec.view(e.view).table not in db.tables:
                    continue
                try:
                    validate_ref(db, spec, v, e)
                except AmbiguousReference as err:
                    add(f"{ptr}/ref", "ambiguous-reference", str(err))
                except (RefError, SpecError) as err:
                    add(f"{ptr}/ref", "unresolved-reference", str(err))
                except Exception as err:  # schema lookups inside the ref
                    add(f"{ptr}/ref", "unresolved-reference", str(err))
        seen_layouts = []
        for ch, e in v.encodings.items():
            if isinstance(e, LayoutRef) and e.layout not in seen_layouts:
                seen_layouts.append(e.layout)
                verdict = validate_layout_inputs(db, spec, v, spec.layouts[e.layout])
                if not verdict.ok:
                    add(f"/layouts/{e.layout}", "bad-layout", verdict.message)
    for i, n in enumerate(spec.nests):
        nptr = f"/nests/{i}"
        if spec.view(n.parent).table not in db.tables:
            continue
        if n.by_function:
            pt = db.table(spec.view(n.parent).table)
            if n.select_attr not in pt.schema:
                add(f"{nptr}/select/attr", "unresolved-reference",
                    f"{pt.name} has no attribute {n.select_attr!r}")
        for c in n.children:
            if spec.view(c).table not in db.tables:
                continue
            try:
                nest_link(db, spec, n, c)
            except AmbiguousReference as err:
                add(f"{nptr}/using", "ambiguous-nest", str(err))
            except Exception as err:
                add(f"{nptr}/using", "unresolved-reference", str(err))
    return diags
