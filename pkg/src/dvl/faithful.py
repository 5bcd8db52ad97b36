"""Faithfulness checks: table coverage, geometric keys, and foreign key preservation.

A visualization is faithful when every table has a view, no two marks of a
view are indistinguishable, and every foreign key is visible through one of
four mechanisms: a key-returning reference that traverses it, an explicit
mark over its materialization table, a nest along it, or a shared scale.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .compiler import Execution
from .errors import DvlError
from .layouts import Extent
from .marks import MarkTable
from .relcore import Database, ForeignKey
from .resolver import hop_one_to_one, nest_link, validate_ref
from .scales import Scale, domains_equal
from .specmodel import ExprEnc, Field, ForeignRef, PlotSpec, ViewSpec, X_POSITIONS, Y_POSITIONS

OVERLAP_THRESHOLD = 0.95
PROXIMITY_GAP = 20.0

TRAVERSAL = "foreign-attribute-traversal"
EXPLICIT_MARK = "explicit-mark"
NESTING = "nesting"
SHARED_SCALE = "shared-scale"
MECHANISMS = (TRAVERSAL, EXPLICIT_MARK, NESTING, SHARED_SCALE)
ALIGNMENT_LEVELS = ("shared-domain", "relative-alignment", "shared-channel", "absolute-alignment",
                    "spatial-proximity")


@dataclass(frozen=True)
class OverlapEvidence:
    view: str
    key_a: tuple
    key_b: tuple
    overlap_fraction: float


@dataclass
class KeyCheck:
    view: str
    violations: list[OverlapEvidence] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass
class FkCheck:
    constraint: str
    mechanism: str | None = None
    via: str = ""
    nearest_miss: str = ""
    alignment: str | None = None

    @property
    def preserved(self) -> bool:
        return self.mechanism is not None


@dataclass
class FaithfulnessReport:
    table_coverage: dict[str, list[str]]
    key_checks: dict[str, KeyCheck]
    fk_checks: dict[str, FkCheck]

    @property
    def unmapped(self) -> list[str]:
        return [t for t, vs in self.table_coverage.items() if not vs]

    @property
    def violated_constraints(self) -> list[str]:
        return [c for c, chk in self.fk_checks.items() if not chk.preserved]

    @property
    def faithful(self) -> bool:
        return (not self.unmapped and all(k.ok for k in self.key_checks.values())
                and not self.violated_constraints)

    verdict = faithful

    def to_json(self) -> dict:
        return {
            "faithful": self.faithful,
            "table_coverage": {t: (vs or None) for t, vs in self.table_coverage.items()},
            "key_checks": {v: {"ok": k.ok, "violations": [
                {"a": list(e.key_a), "b": list(e.key_b), "overlap": round(e.overlap_fraction, 6)}
                for e in k.violations]} for v, k in self.key_checks.items()},
            "fk_checks": {c: {"preserved": f.preserved, "mechanism": f.mechanism, "via": f.via,
                              **({"nearest_miss": f.nearest_miss} if not f.preserved else {}),
                              **({"alignment": f.alignment} if f.alignment else {})}
                          for c, f in self.fk_checks.items()},
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = ["coverage:"]
        for t, vs in self.table_coverage.items():
            lines.append(f"  {t:<24} {', '.join(vs) if vs else 'UNMAPPED'}")
        lines.append("keys:")
        for v, k in self.key_checks.items():
            if k.ok:
                lines.append(f"  {v:<24} ok")
                continue
            e = k.violations[0]
            more = f" (+{len(k.violations) - 1} more)" if len(k.violations) > 1 else ""
            lines.append(f"  {v:<24} OVERPLOTTED {list(e.key_a)} ~ {list(e.key_b)} "
                         f"overlap {e.overlap_fraction:.3f}{more}")
        lines.append("constraints:")
        for c, f in self.fk_checks.items():
            if f.preserved:
                extra = f", alignment {f.alignment}" if f.alignment else ""
                lines.append(f"  {c:<24} preserved by {f.mechanism} ({f.via}{extra})")
            else:
                lines.append(f"  {c:<24} VIOLATED: {f.nearest_miss}")
        lines.append("verdict: " + ("faithful" if self.faithful else "not faithful"))
        return "\n".join(lines) + "\n"


# -- coverage -------------------------------------------------------------------------------


def check_coverage(db: Database, spec: PlotSpec) -> dict[str, list[str]]:
    return {t: [v.name for v in spec.views if v.table == t] for t in db.tables}


# -- keys ------------------------------------------------------------------------------------


def overlap_fraction(a: Extent, b: Extent) -> float:
    """Intersection area over the smaller area; zero-area extents count only if identical."""
    small = min(a.area, b.area)
    if small <= 0:
        return 1.0 if a.as_tuple() == b.as_tuple() else 0.0
    return a.intersection_area(b) / small


def _segment(ch: dict[str, Any]) -> tuple:
    p, q = (ch["x1"], ch["y1"]), (ch["x2"], ch["y2"])
    return tuple(sorted((p, q)))


def check_keys(marks: MarkTable, threshold: float = OVERLAP_THRESHOLD) -> KeyCheck:
    """Flag every pair of marks whose extents overlap by more than ``threshold``."""
    out = KeyCheck(marks.view)
    recs = marks.records
    if marks.mark == "link":
        seen: dict[tuple, int] = {}
        for i, r in enumerate(recs):
            seg = _segment(r.channels)
            if seg in seen:
                out.violations.append(OverlapEvidence(marks.view, recs[seen[seg]].key, r.key, 1.0))
            else:
                seen[seg] = i
        return out
    # sweep along x so only candidates with overlapping x intervals are compared
    order = sorted(range(len(recs)), key=lambda i: (recs[i].extent.x, i))
    active: list[int] = []
    for i in order:
        a = recs[i].extent
        active = [j for j in active if recs[j].extent.x2 >= a.x]
        for j in active:
            f = overlap_fraction(recs[j].extent, a)
            if f > threshold:
                ka, kb = sorted((recs[j].key, recs[i].key), key=repr)
                out.violations.append(OverlapEvidence(marks.view, ka, kb, f))
        active.append(i)
    out.violations.sort(key=lambda e: (repr(e.key_a), repr(e.key_b)))
    return out


# -- constraint preservation ---------------------------------------------------------------------


def _ref_groups(view: ViewSpec) -> dict[tuple, tuple[ForeignRef, list[str]]]:
    """Non-aggregating refs of a view grouped by (target view, filter)."""
    groups: dict[tuple, tuple[ForeignRef, list[str]]] = {}
    for e in view.encodings.values():
        if isinstance(e, ForeignRef) and e.view is not None and e.agg is None:
            g = groups.setdefault((e.view, e.filter), (e, []))
            g[1].extend(p for p in e.target_props if p not in g[1])
    return groups


def _key_refs(db: Database, spec: PlotSpec, view: ViewSpec):
    """Yield (ref, info) for reference groups that retrieve a key of their target view."""
    for (tv, _), (ref, props) in _ref_groups(view).items():
        try:
            info = validate_ref(db, spec, view, ref, props)
        except DvlError:
            continue
        if info.returns_key and info.path is not None:
            yield ref, info


def _traverses(db: Database, info, fk: ForeignKey) -> bool:
    hops = info.path.hops
    for i, h in enumerate(hops):
        if h.constraint == fk.name:
            # the hops after C must not merge distinct rows of C's endpoint
            return all(hop_one_to_one(db.constraint(x.constraint)) for x in hops[i + 1:])
    return False


def _mechanism_traversal(db: Database, spec: PlotSpec, fk: ForeignKey) -> str | None:
    for v in spec.views:
        for ref, info in _key_refs(db, spec, v):
            if _traverses(db, info, fk):
                return f"{v.name} -> {ref.view} along {info.path}"
    return None


def _referenced_names(db: Database, spec: PlotSpec, view: ViewSpec) -> set[str]:
    names: set[str] = set()
    for e in view.encodings.values():
        if isinstance(e, Field):
            names.add(e.attr)
        elif isinstance(e, ExprEnc):
            names.update(e.names)
    for ref, info in _key_refs(db, spec, view):
        names.update(info.path.start_attrs(db))
    return names


def _mechanism_explicit(db: Database, spec: PlotSpec, fk: ForeignKey) -> str | None:
    for m in db.materializations.values():
        if m.constraint != fk.name:
            continue
        for v in spec.views:
            if v.table != m.table:
                continue
            names = _referenced_names(db, spec, v)
            if set(m.src_attrs) <= names and set(m.dst_attrs) <= names:
                return f"{v.name} over {m.table}"
    return None


def _mechanism_nesting(db: Database, spec: PlotSpec, fk: ForeignKey) -> str | None:
    for n in spec.nests:
        for c in n.children:
            try:
                link = nest_link(db, spec, n, c)
            except DvlError:
                continue
            if link is None:
                continue
            if fk.name in link.constraints:
                return f"{c} in {n.parent}"
            if link.pairs and spec.view(c).table == fk.src_table and spec.view(n.parent).table == fk.dst_table \
                    and sorted(link.pairs) == sorted(zip(fk.src_attrs, fk.dst_attrs)):
                return f"{c} in {n.parent}"
    return None


@dataclass(frozen=True)
class _ScaledUse:
    view: str
    channel: str
    scale: str


def _uses(spec: PlotSpec, table: str, attr: str) -> list[_ScaledUse]:
    out = []
    for v in spec.views:
        if v.table != table:
            continue
        for c, e in v.encodings.items():
            if isinstance(e, Field) and e.attr == attr and e.scale is not None:
                out.append(_ScaledUse(v.name, c, e.scale))
    return out


def _scales_match(a: str, b: str, scales: dict[str, Scale] | None) -> bool:
    if a == b:
        return True
    if scales is None or a not in scales or b not in scales:
        return False
    return bool(scales[a].domain) and domains_equal(scales[a], scales[b])


def _shared_pairs(spec: PlotSpec, fk: ForeignKey, scales: dict[str, Scale] | None):
    """Per attribute pair of ``fk``, the (source use, target use) pairs sharing a scale."""
    per_pair = []
    for x, y in zip(fk.src_attrs, fk.dst_attrs):
        hits = [(s, t) for s in _uses(spec, fk.src_table, x) for t in _uses(spec, fk.dst_table, y)
                if _scales_match(s.scale, t.scale, scales)]
        per_pair.append(hits)
    return per_pair


def _mechanism_scale(spec: PlotSpec, fk: ForeignKey, scales: dict[str, Scale] | None):
    per_pair = _shared_pairs(spec, fk, scales)
    if per_pair and all(per_pair):
        s, t = per_pair[0][0]
        via = f"{s.view}.{s.channel} ~ {t.view}.{t.channel} via scale {s.scale}" + \
            ("" if s.scale == t.scale else f" = {t.scale}")
        return via, per_pair
    return None, per_pair


def _axis(channel: str) -> str | None:
    if channel in X_POSITIONS:
        return "x"
    if channel in Y_POSITIONS:
        return "y"
    return None


def _view_box(execution: Execution | None, view: str) -> Extent | None:
    if execution is None or view not in execution.marks:
        return None
    mt = execution.marks[view]
    frames = {r.frame for r in mt.records}
    if mt.view_extent is not None:
        return mt.view_extent
    if len(frames) == 1:
        return next(iter(frames))
    return None


def _effective_range(scale: Scale | None, spec_range, box: Extent | None, axis: str | None):
    if spec_range is not None:
        return tuple(spec_range)
    if box is None or axis is None:
        return None
    return (0.0, box.w if axis == "x" else box.h)


def alignment_level(spec: PlotSpec, fk: ForeignKey, execution: Execution | None = None,
                    gap: float = PROXIMITY_GAP) -> str | None:
    """Highest alignment rung reached by a constraint preserved through shared scales."""
    scales = execution.scales if execution is not None else None
    best = None
    for hits in _shared_pairs(spec, fk, scales)[:1]:
        for s, t in hits:
            level = 0
            ss, ts = spec.scales.get(s.scale), spec.scales.get(t.scale)
            sb, tb = _view_box(execution, s.view), _view_box(execution, t.view)
            ra = _effective_range(None, ss.range if ss else None, sb, _axis(s.channel))
            rb = _effective_range(None, ts.range if ts else None, tb, _axis(t.channel))
            if ra is not None and ra == rb:
                level = 1
                ax = _axis(s.channel)
                if ax is not None and ax == _axis(t.channel):
                    level = 2
                    if sb is not None and tb is not None:
                        aligned = (sb.x, sb.w) == (tb.x, tb.w) if ax == "x" else (sb.y, sb.h) == (tb.y, tb.h)
                        if aligned:
                            level = 3
                            if ax == "x":
                                d = max(tb.y - sb.y2, sb.y - tb.y2)
                            else:
                                d = max(tb.x - sb.x2, sb.x - tb.x2)
                            if d <= gap:
                                level = 4
            best = level if best is None else max(best, level)
    return None if best is None else ALIGNMENT_LEVELS[best]


def _nearest_miss(db: Database, spec: PlotSpec, fk: ForeignKey, per_pair) -> str:
    src_views = [v.name for v in spec.views if v.table == fk.src_table]
    dst_views = [v.name for v in spec.views if v.table == fk.dst_table]
    cols = f"{fk.src_table}({', '.join(fk.src_attrs)}) -> {fk.dst_table}({', '.join(fk.dst_attrs)})"
    if not src_views or not dst_views:
        return f"{cols}: no view over {fk.src_table if not src_views else fk.dst_table}"
    for v in spec.views:
        for ref, info in _key_refs(db, spec, v):
            if spec.view(ref.view).table == fk.dst_table:
                return f"{cols}: {v.name} references {ref.view} but not along this constraint"
    if any(per_pair):
        return f"{cols}: only some attribute pairs share a scale"
    src_scales = {u.scale for a in fk.src_attrs for u in _uses(spec, fk.src_table, a)}
    dst_scales = {u.scale for a in fk.dst_attrs for u in _uses(spec, fk.dst_table, a)}
    if src_scales or dst_scales:
        return (f"{cols}: scales {sorted(src_scales) or '-'} vs {sorted(dst_scales) or '-'} "
                f"are neither shared nor equal")
    for n in spec.nests:
        if any(spec.view(c).table == fk.src_table for c in n.children) and \
                spec.view(n.parent).table == fk.dst_table:
            return f"{cols}: nest of {list(n.children)} in {n.parent} uses another path"
    return f"{cols}: no reference, explicit mark, nest or shared scale connects {src_views} and {dst_views}"


def check_fk_preservation(db: Database, spec: PlotSpec, execution: Execution | None = None
                          ) -> dict[str, FkCheck]:
    scales = execution.scales if execution is not None else None
    out: dict[str, FkCheck] = {}
    for name, fk in db.constraints.items():
        chk = FkCheck(name)
        via = _mechanism_traversal(db, spec, fk)
        if via:
            chk.mechanism, chk.via = TRAVERSAL, via
        elif (via := _mechanism_explicit(db, spec, fk)):
            chk.mechanism, chk.via = EXPLICIT_MARK, via
        elif (via := _mechanism_nesting(db, spec, fk)):
            chk.mechanism, chk.via = NESTING, via
        else:
            via, per_pair = _mechanism_scale(spec, fk, scales)
            if via:
                chk.mechanism, chk.via = SHARED_SCALE, via
                chk.alignment = alignment_level(spec, fk, execution)
            else:
                chk.nearest_miss = _nearest_miss(db, spec, fk, per_pair)
        out[name] = chk
    return out


def check(db: Database, spec: PlotSpec, execution: Execution,
          threshold: float = OVERLAP_THRESHOLD) -> FaithfulnessReport:
    """Full report; ``db`` is the database the spec was executed against."""
    keys = {name: check_keys(mt, threshold) for name, mt in execution.marks.items()}
    return FaithfulnessReport(check_coverage(db, spec), keys, check_fk_preservation(db, spec, execution))


__all__ = ["FaithfulnessReport", "KeyCheck", "FkCheck", "OverlapEvidence", "check", "check_coverage",
           "check_keys", "check_fk_preservation", "alignment_level", "overlap_fraction", "MECHANISMS"]
