"""Compile a spec over a database into a task graph, then execute it into mark tables.

Tasks are channel-granular: each channel of each view is its own node, so a
reference into another view only waits for the channels it reads. That is
what lets a table rect take its height from the labels nested inside it while
the labels take their positions from the rect.

Coordinates are screen pixels with y pointing down. Scaled y channels are
flipped once, here, so larger values sit higher in their frame.
"""

from __future__ import annotations

import heapq
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

from . import layouts as lay
from .dataprep import TransformPlan
from .errors import CompileError, DvlError, ExecutionError, ExprError, LayoutError, ScaleError
from .expr import Expr
from .layouts import Extent
from .marks import DEFAULTS, MarkRecord, MarkTable, mark_extent, measure_text
from .relcore import Database
from .resolver import PathInfo, evaluate_ref, nest_assignment, nest_link, validate_ref
from .scales import Scale
from .specmodel import (COLOR_CHANNELS, Const, ExprEnc, Field, ForeignRef, LayoutRef, PlotSpec,
                        POSITIONS, ViewSpec, X_POSITIONS, Y_POSITIONS, layout_outputs, validate_spec)

TASK_KINDS = ("Transform", "TrainScale", "InstantiateMarks", "NestExtents", "ResolveForeign",
              "RunLayout", "MeasureText", "Extents", "Render")


@dataclass(frozen=True)
class TaskNode:
    id: str
    kind: str
    view: str | None = None
    channel: str | None = None
    deps: tuple[str, ...] = ()
    detail: str | None = None


@dataclass
class TaskGraph:
    spec: PlotSpec
    db: Database
    nodes: dict[str, TaskNode]
    order: list[str]
    plan: TransformPlan | None = None
    # (view, channel) -> id of the node that writes it
    providers: dict[tuple[str, str], str] = field(default_factory=dict)

    @property
    def edges(self) -> list[tuple[str, str]]:
        return [(d, n.id) for n in self.nodes.values() for d in n.deps]

    def to_json(self) -> dict:
        nodes = []
        for nid in self.order:
            n = self.nodes[nid]
            d = {"id": n.id, "kind": n.kind, "deps": list(n.deps)}
            if n.view is not None:
                d["view"] = n.view
            if n.channel is not None:
                d["channel"] = n.channel
            if n.detail is not None:
                d["detail"] = n.detail
            nodes.append(d)
        return {"nodes": nodes, "edges": [list(e) for e in self.edges]}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True) + "\n"


# -- channel bookkeeping -----------------------------------------------------------------


def effective_encodings(view: ViewSpec) -> dict[str, Any]:
    """Declared encodings plus constant defaults for every unset channel."""
    enc: dict[str, Any] = {c: Const(v) for c, v in DEFAULTS[view.mark].items()}
    enc.update(view.encodings)
    return enc


def _scaled(e: Any) -> bool:
    return isinstance(e, (Field, ExprEnc))


def _top_frame(spec: PlotSpec, view: ViewSpec) -> Extent:
    if view.extent is not None:
        return Extent(*view.extent)
    return Extent(0.0, 0.0, float(spec.width), float(spec.height))


class _Builder:
    def __init__(self, spec: PlotSpec, db: Database, plan: TransformPlan | None):
        self.spec, self.db, self.plan = spec, db, plan
        self.nodes: dict[str, TaskNode] = {}
        self.providers: dict[tuple[str, str], str] = {}
        self.enc = {v.name: effective_encodings(v) for v in spec.views}

    def add(self, nid: str, kind: str, deps: Sequence[str] = (), **kw) -> str:
        uniq = tuple(dict.fromkeys(deps))
        self.nodes[nid] = TaskNode(nid, kind, deps=uniq, **kw)
        return nid

    def prop_source(self, target: str, prop: str) -> str:
        """Node that must run before ``prop`` of view ``target`` can be read."""
        view = self.spec.view(target)
        enc = self.enc[target]
        if view.mark == "square" and prop in ("w", "h"):
            return f"extent:{target}"
        if prop in enc:
            return self.providers[(target, prop)]
        if prop in ("w", "h"):
            if view.mark in ("label", "text"):
                return f"measure:{target}"
            if view.mark == "point":
                return self.providers[(target, "r")]
            return f"extent:{target}"
        if prop in ("x", "y"):
            return f"extent:{target}"
        return f"marks:{target}"

    def build(self) -> TaskGraph:
        spec = self.spec
        transforms = []
        if self.plan is not None:
            for i, s in enumerate(self.plan.steps):
                transforms.append(self.add(f"transform:{i}", "Transform", transforms[-1:],
                                           detail=type(s).__name__))
        used: dict[str, list[tuple[str, str]]] = {}
        for v in spec.views:
            for c, e in v.encodings.items():
                if _scaled(e) and e.scale is not None:
                    used.setdefault(e.scale, []).append((v.name, c))
        for name in spec.scales:
            self.add(f"train:{name}", "TrainScale", transforms,
                     detail=",".join(f"{v}.{c}" for v, c in used.get(name, [])))

        # first pass: instantiate marks and register channel providers
        for v in spec.views:
            self.add(f"marks:{v.name}", "InstantiateMarks", transforms, view=v.name)
            for c, e in self.enc[v.name].items():
                if isinstance(e, LayoutRef):
                    self.providers[(v.name, c)] = f"layout:{v.name}.{e.layout}"
                else:
                    self.providers[(v.name, c)] = f"chan:{v.name}.{c}"

        for v in spec.views:
            name = v.name
            parent = spec.parent_of(name)
            base = [f"marks:{name}"]
            if parent is not None:
                frame = self.add(f"frame:{name}", "NestExtents",
                                 [f"marks:{name}", f"extent:{parent[1]}"], view=name)
            else:
                frame = f"marks:{name}"
            layouts_seen: list[str] = []
            for c, e in self.enc[name].items():
                nid = f"chan:{name}.{c}"
                if isinstance(e, LayoutRef):
                    if e.layout not in layouts_seen:
                        layouts_seen.append(e.layout)
                    continue
                if isinstance(e, ForeignRef):
                    deps = list(base)
                    if e.view is not None:
                        deps.append(f"marks:{e.view}")
                        props = list(e.target_props)
                        props += [col for col, _ in e.filter.eq] + [col for col, _ in e.filter.on]
                        for p in props:
                            deps.append(self.prop_source(e.view, p))
                    self.add(nid, "ResolveForeign", deps, view=name, channel=c,
                             detail=f"{e.target}")
                else:
                    deps = base + ([frame] if self._needs_frame(c, e) else [])
                    if _scaled(e) and e.scale is not None:
                        deps.append(f"train:{e.scale}")
                    self.add(nid, "InstantiateMarks", deps, view=name, channel=c)
            for lname in layouts_seen:
                b = spec.layouts[lname]
                deps = base + [frame]
                if b.algo in ("force", "tree"):
                    deps += self._size_sources(v)
                self.add(f"layout:{name}.{lname}", "RunLayout", deps, view=name, detail=b.algo)
            if v.mark in ("label", "text"):
                self.add(f"measure:{name}", "MeasureText",
                         [self.providers[(name, "text")], self.providers[(name, "fontSize")]], view=name)
            deps = [self.providers[(name, c)] for c in self.enc[name]]
            if v.mark in ("label", "text"):
                deps.append(f"measure:{name}")
            self.add(f"extent:{name}", "Extents", deps, view=name)
        self.add("render", "Render", [f"extent:{v.name}" for v in spec.views])
        missing = [(n.id, d) for n in self.nodes.values() for d in n.deps if d not in self.nodes]
        if missing:
            raise CompileError(f"internal: task {missing[0][0]} depends on unknown {missing[0][1]}")
        order = _stable_order(self.nodes)
        return TaskGraph(spec, self.db, self.nodes, order, self.plan, dict(self.providers))

    def _needs_frame(self, c: str, e: Any) -> bool:
        # only positions and frame-relative lengths read the nested frame
        if c in POSITIONS:
            return True
        if c in ("w", "h") and _scaled(e) and e.scale is not None:
            s = self.spec.scales[e.scale]
            return s.kind != "identity" and s.range is None
        return False

    def _size_sources(self, v: ViewSpec) -> list[str]:
        if v.mark in ("label", "text"):
            out = [f"measure:{v.name}"]
            out += [self.providers[(v.name, c)] for c in ("w", "h") if c in v.encodings]
            return out
        if v.mark == "point":
            return [self.providers[(v.name, "r")]]
        if v.mark in ("rect", "square"):
            return [self.providers[(v.name, c)] for c in ("w", "h")]
        return []


def _stable_order(nodes: dict[str, TaskNode]) -> list[str]:
    """Kahn's algorithm, always taking the earliest-declared ready node."""
    rank = {nid: i for i, nid in enumerate(nodes)}
    indeg = {nid: 0 for nid in nodes}
    users: dict[str, list[str]] = {nid: [] for nid in nodes}
    for n in nodes.values():
        for d in n.deps:
            indeg[n.id] += 1
            users[d].append(n.id)
    ready = [rank[n] for n, k in indeg.items() if k == 0]
    heapq.heapify(ready)
    ids = list(nodes)
    order = []
    while ready:
        nid = ids[heapq.heappop(ready)]
        order.append(nid)
        for u in users[nid]:
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(ready, rank[u])
    if len(order) != len(nodes):
        cycle = _find_cycle(nodes, {n for n, k in indeg.items() if k > 0})
        raise CompileError("dependency cycle: " + " -> ".join(cycle), cycle=cycle)
    return order


def _find_cycle(nodes: dict[str, TaskNode], stuck: set[str]) -> list[str]:
    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(n: str) -> list[str] | None:
        state[n] = 1
        stack.append(n)
        for d in nodes[n].deps:
            if d not in stuck:
                continue
            if state.get(d) == 1:
                return stack[stack.index(d):] + [d]
            if d not in state:
                found = visit(d)
                if found:
                    return found
        stack.pop()
        state[n] = 2
        return None

    for n in nodes:
        if n in stuck and n not in state:
            found = visit(n)
            if found:
                # deps point backwards; report in data-flow order
                return list(reversed(found))
    return sorted(stuck)


def compile(spec: PlotSpec, db: Database, plan: TransformPlan | None = None) -> TaskGraph:
    """Validate ``spec`` against ``db`` (after ``plan``) and build its task graph."""
    target_db = plan.execute(db) if plan is not None else db
    diags = validate_spec(spec, target_db)
    if diags:
        raise CompileError("invalid spec:\n" + "\n".join(f"  {d}" for d in diags))
    return _Builder(spec, db, plan).build()


# -- execution -------------------------------------------------------------------------------


@dataclass
class Execution:
    """Result of running a task graph: mark tables plus the trained scales."""

    graph: TaskGraph
    db: Database
    marks: dict[str, MarkTable]
    scales: dict[str, Scale]
    # (view, channel) -> scale used for that channel of a top-level view
    axis_scales: dict[tuple[str, str], Scale] = field(default_factory=dict)
    implicit: dict[tuple[str, str, int | None], Scale] = field(default_factory=dict)
    ref_info: dict[tuple[str, str], PathInfo] = field(default_factory=dict)

    def __getitem__(self, view: str) -> MarkTable:
        return self.marks[view]

    def __iter__(self):
        return iter(self.marks)

    def __len__(self) -> int:
        return len(self.marks)


class _State:
    def __init__(self, graph: TaskGraph, db: Database):
        self.graph, self.spec, self.db = graph, graph.spec, db
        self.enc = {v.name: effective_encodings(v) for v in graph.spec.views}
        self.rows: dict[str, list[dict[str, Any]]] = {}
        self.parent: dict[str, list[int | None]] = {}
        self.frames: dict[str, list[Extent]] = {}
        self.channels: dict[str, dict[str, list[Any]]] = {}
        self.measured: dict[str, list[tuple[float, float]]] = {}
        self.tables: dict[str, MarkTable] = {}
        self.scales: dict[str, Scale] = {}
        self.implicit: dict[tuple[str, str, int | None], Scale] = {}
        self.axis_scales: dict[tuple[str, str], Scale] = {}
        self.ref_info: dict[tuple[str, str], PathInfo] = {}

    # -- task bodies -----------------------------------------------------------------------

    def transform(self, node: TaskNode) -> None:
        plan = self.graph.plan
        i = int(node.id.split(":")[1])
        self.db = plan.steps[i].apply(self.db)
        if i == len(plan.steps) - 1 and plan.outputs:
            self.db = self.db.restrict(plan.outputs)

    def train(self, name: str) -> None:
        s = self.spec.scales[name]
        scale = Scale(name, s.kind, s.domain, s.range)
        for v in self.spec.views:
            t = self.db.table(v.table)
            for c, e in v.encodings.items():
                if _scaled(e) and e.scale == name:
                    scale.train(_raw_values(e, t.records(), v.name, c))
                    scale.record(v.name, c, e.attr if isinstance(e, Field) else e.expr)
        self.scales[name] = scale

    def instantiate(self, view: ViewSpec) -> None:
        t = self.db.table(view.table)
        self.rows[view.name] = t.records()
        self.channels[view.name] = {}
        self.tables[view.name] = MarkTable(view.name, view.mark, t.primary_key,
                                           [MarkRecord(t.key_of(i), {}) for i in range(len(t))])
        if self.spec.parent_of(view.name) is None:
            frame = _top_frame(self.spec, view)
            self.parent[view.name] = [None] * len(t)
            self.frames[view.name] = [frame] * len(t)
            self.tables[view.name].view_extent = frame
        else:
            self.parent[view.name] = self._assign_parents(view)

    def _assign_parents(self, view: ViewSpec) -> list[int | None]:
        nest, pname = self.spec.parent_of(view.name)
        pview = self.spec.view(pname)
        ptable, ctable = self.db.table(pview.table), self.db.table(view.table)
        link = nest_link(self.db, self.spec, nest, view.name)
        eligible: set[int] | None = None
        if nest.by_function:
            chooser = dict(nest.select_views)
            eligible = set()
            for i, row in enumerate(ptable.records()):
                sel = row[nest.select_attr]
                if sel not in chooser:
                    raise ExecutionError(f"selector {nest.select_attr}={sel!r} of {pname} row {i} "
                                         f"names no child view")
                if chooser[sel] not in nest.children:
                    raise ExecutionError(f"selector picks unknown view {chooser[sel]!r}")
                if chooser[sel] == view.name:
                    eligible.add(i)
        if link is None:
            if len(ctable) == 0:
                return []
            if len(eligible) != 1:
                raise ExecutionError(f"{view.name} is selected by {len(eligible)} marks of {pname} "
                                     f"but has no relationship to split its rows")
            only = next(iter(eligible))
            return [only] * len(ctable)
        out = nest_assignment(self.db, link, ctable, ptable)
        for i, p in enumerate(out):
            if p is None:
                raise ExecutionError(f"row {i} of {ctable.name} has no parent mark in {pname}")
            if eligible is not None and p not in eligible:
                raise ExecutionError(f"row {i} of {ctable.name} belongs to a {pname} mark that does "
                                     f"not select {view.name}")
        return out

    def nest_frames(self, view: ViewSpec) -> None:
        nest, pname = self.spec.parent_of(view.name)
        pmarks = self.tables[pname]
        self.frames[view.name] = [pmarks.records[p].extent.inset(nest.padding) for p in self.parent[view.name]]

    def channel(self, view: ViewSpec, c: str) -> None:
        e = self.enc[view.name][c]
        rows = self.rows[view.name]
        frames = self.frames.get(view.name, [])
        if isinstance(e, ForeignRef):
            vals = self._resolve(view, c, e)
            for v in vals if c in X_POSITIONS | Y_POSITIONS else ():
                if v is None:
                    raise ExecutionError(f"{view.name}.{c}: reference produced a null position")
            self.channels[view.name][c] = vals
            return
        if isinstance(e, Const):
            if c in X_POSITIONS:
                vals = [f.x + e.value for f in frames]
            elif c in Y_POSITIONS:
                vals = [f.y + e.value for f in frames]
            else:
                vals = [e.value] * len(rows)
            self.channels[view.name][c] = vals
            return
        raw = _raw_values(e, rows, view.name, c)
        self.channels[view.name][c] = self._apply_scale(view, c, e, raw)

    def _scale_for(self, view: ViewSpec, c: str, e: Any, raw: list[Any], part: int | None,
                   idx: list[int]) -> Scale | None:
        if e.scale is not None:
            return self.scales[e.scale]
        positional = c in X_POSITIONS or c in Y_POSITIONS
        if positional or c in COLOR_CHANNELS or c == "symbol":
            key = (view.name, c, part if positional else None)
            s = self.implicit.get(key)
            if s is None:
                vals = [raw[i] for i in idx] if positional else raw
                sample = next((v for v in vals if v is not None), None)
                numeric = isinstance(sample, (int, float)) and not isinstance(sample, bool)
                s = Scale(f"{view.name}.{c}" + ("" if key[2] is None else f"[{part}]"),
                          "linear" if numeric else "ordinal")
                try:
                    s.train(vals)
                except ScaleError as err:
                    raise ExecutionError(f"{view.name}.{c}: {err}") from None
                self.implicit[key] = s
            return s
        return None

    def _apply_scale(self, view: ViewSpec, c: str, e: Any, raw: list[Any]) -> list[Any]:
        frames = self.frames.get(view.name) or [None] * len(raw)
        parts: dict[int | None, list[int]] = {}
        for i, p in enumerate(self.parent[view.name]):
            parts.setdefault(p, []).append(i)
        out: list[Any] = [None] * len(raw)
        for part, idx in parts.items():
            scale = self._scale_for(view, c, e, raw, part, idx)
            if part is None and scale is not None and (c in X_POSITIONS or c in Y_POSITIONS):
                self.axis_scales.setdefault((view.name, c), scale)
            for i in idx:
                try:
                    out[i] = _map_value(scale, c, raw[i], frames[i])
                except ScaleError as err:
                    raise ExecutionError(f"{view.name}.{c} row {i}: {err}") from None
        return out

    def _targets(self, name: str) -> list[dict[str, Any]]:
        view = self.spec.view(name)
        chans = self.channels.get(name, {})
        out = []
        recs = self.tables[name].records
        for i, row in enumerate(self.rows[name]):
            d = dict(row)
            for c, vals in chans.items():
                d[c] = vals[i]
            if view.mark in ("label", "text") and name in self.measured:
                mw, mh = self.measured[name][i]
                if "w" not in chans:
                    d["w"] = mw
                if "h" not in chans:
                    d["h"] = mh
            elif view.mark == "point" and "r" in chans:
                d["w"] = d["h"] = 2 * chans["r"][i]
            ext = recs[i].extent
            if ext is not None and view.mark in ("link", "square"):
                if view.mark == "link":
                    d["x"], d["y"] = ext.x, ext.y
                d["w"], d["h"] = ext.w, ext.h
            out.append(d)
        return out

    def _resolve(self, view: ViewSpec, c: str, ref: ForeignRef) -> list[Any]:
        info = validate_ref(self.db, self.spec, view, ref)
        self.ref_info[(view.name, c)] = info
        if ref.view is not None:
            targets = self._targets(ref.view)
        else:
            targets = self.db.table(ref.table).records()
        try:
            return evaluate_ref(self.db, self.spec, view, ref, targets, info)
        except DvlError as err:
            raise ExecutionError(f"{view.name}.{c}: {err}") from None

    def layout(self, view: ViewSpec, lname: str) -> None:
        b = self.spec.layouts[lname]
        rows = self.rows[view.name]
        frames = self.frames[view.name]
        slots = {c: e.slot for c, e in self.enc[view.name].items()
                 if isinstance(e, LayoutRef) and e.layout == lname}
        parts: dict[int | None, list[int]] = {}
        for i, p in enumerate(self.parent[view.name]):
            parts.setdefault(p, []).append(i)
        outs = {s: [0.0] * len(rows) for s in layout_outputs(b.algo)}
        nested = self.spec.parent_of(view.name) is not None
        for part, idx in parts.items():
            frame = frames[idx[0]]
            try:
                res = self._run_algo(view, b, [rows[i] for i in idx], idx, frame, nested)
            except LayoutError as err:
                raise LayoutError(f"layout {lname} of {view.name}: {err}") from None
            for s, col in res.columns.items():
                for j, i in enumerate(idx):
                    outs[s][i] = col[j]
        for c, s in slots.items():
            self.channels[view.name][c] = list(outs[s])

    def _sizes(self, view: ViewSpec, idx: list[int]) -> list[tuple[float, float]]:
        ch = self.channels[view.name]
        if view.mark in ("label", "text"):
            m = self.measured[view.name]
            ws = ch.get("w") if "w" in view.encodings else None
            hs = ch.get("h") if "h" in view.encodings else None
            return [(ws[i] if ws else m[i][0], hs[i] if hs else m[i][1]) for i in idx]
        if view.mark == "point":
            return [(2 * ch["r"][i], 2 * ch["r"][i]) for i in idx]
        if view.mark in ("rect", "square"):
            if view.mark == "square":
                return [(min(ch["w"][i], ch["h"][i]),) * 2 for i in idx]
            return [(ch["w"][i], ch["h"][i]) for i in idx]
        return [(0.0, 0.0)] * len(idx)

    def _run_algo(self, view: ViewSpec, b, rows: list[dict], idx: list[int], frame: Extent,
                  nested: bool) -> lay.LayoutResult:
        algo = b.algo
        if algo in ("SQ", "OS", "VT", "HZ"):
            if isinstance(b.weight, str):
                weights = [0.0 if r[b.weight] is None else float(r[b.weight]) for r in rows]
            else:
                weights = [1.0 if b.weight is None else float(b.weight)] * len(rows)
            if algo in ("SQ", "OS"):
                return lay.squarify(weights, frame, ordered=algo == "OS")
            return lay.partition(weights, frame, algo)
        if algo == "EQ":
            return lay.grid(len(rows), frame, b.cols)
        table = self.db.table(view.table)
        key = b.key or table.primary_key[0]
        if algo == "tree":
            res = lay.tree_layout([(r[key], r[b.parent]) for r in rows], frame)
        else:
            keys = [r[key] for r in rows]
            et = self.db.table(b.edges.table)
            edges = list(zip(et.column(b.edges.src), et.column(b.edges.dst)))
            if nested:
                present = set(keys)
                edges = [(s, t) for s, t in edges if s in present and t in present]
            sizes = self._sizes(view, idx)
            res = lay.force_layout(edges, keys, frame, 1 if b.seed is None else b.seed,
                                   lay.DEFAULT_ITERATIONS if b.iterations is None else b.iterations,
                                   sizes)
        if view.mark in ("point", "link"):
            return res
        sizes = self._sizes(view, idx)
        xs = [x - w / 2 for x, (w, _) in zip(res.columns["x"], sizes)]
        ys = [y - h / 2 for y, (_, h) in zip(res.columns["y"], sizes)]
        return lay.LayoutResult({"x": xs, "y": ys})

    def measure(self, view: ViewSpec) -> None:
        ch = self.channels[view.name]
        self.measured[view.name] = [measure_text(t, f) for t, f in zip(ch["text"], ch["fontSize"])]

    def extents(self, view: ViewSpec) -> None:
        table = self.tables[view.name]
        ch = self.channels[view.name]
        names = list(ch)
        for i, rec in enumerate(table.records):
            vals = {c: ch[c][i] for c in names}
            for c in X_POSITIONS | Y_POSITIONS | {"w", "h", "r"}:
                if c in vals and vals[c] is None and c in DEFAULTS[view.mark]:
                    raise ExecutionError(f"{view.name} row {i}: channel {c} is null")
            if view.mark == "square":
                side = min(vals["w"], vals["h"])
                vals["w"] = vals["h"] = side
                ch["w"][i] = ch["h"][i] = side
            rec.channels = vals
            rec.frame = self.frames[view.name][i]
            rec.parent = self.parent[view.name][i]
            try:
                rec.extent = mark_extent(view.mark, vals)
            except (TypeError, LayoutError) as err:
                raise ExecutionError(f"{view.name} row {i}: bad geometry ({err})") from None

    def run(self) -> Execution:
        for nid in self.graph.order:
            n = self.graph.nodes[nid]
            kind = n.kind
            if kind == "Transform":
                self.transform(n)
            elif kind == "TrainScale":
                try:
                    self.train(nid.split(":", 1)[1])
                except ScaleError as err:
                    raise ExecutionError(str(err)) from None
            elif kind == "InstantiateMarks" and n.channel is None:
                self.instantiate(self.spec.view(n.view))
            elif kind == "NestExtents":
                self.nest_frames(self.spec.view(n.view))
            elif kind in ("InstantiateMarks", "ResolveForeign"):
                self.channel(self.spec.view(n.view), n.channel)
            elif kind == "RunLayout":
                self.layout(self.spec.view(n.view), nid.split(".", 1)[1])
            elif kind == "MeasureText":
                self.measure(self.spec.view(n.view))
            elif kind == "Extents":
                self.extents(self.spec.view(n.view))
        return Execution(self.graph, self.db, self.tables, self.scales, self.axis_scales,
                         self.implicit, self.ref_info)


def _raw_values(e: Any, rows: list[Mapping[str, Any]], view: str, c: str) -> list[Any]:
    if isinstance(e, Field):
        return [r[e.attr] for r in rows]
    ex = Expr(e.expr)
    try:
        return [ex.evaluate(r) for r in rows]
    except ExprError as err:
        raise ExecutionError(f"{view}.{c}: {err}") from None


def _map_value(scale: Scale | None, c: str, v: Any, frame: Extent) -> Any:
    if c in X_POSITIONS or c in Y_POSITIONS:
        if v is None:
            raise ScaleError("null position")
        horiz = c in X_POSITIONS
        if scale is None or scale.kind == "identity":
            return (frame.x if horiz else frame.y) + v
        if scale.range is not None:
            p = scale.position(v)
        else:
            p = scale.position(v, 0.0, frame.w if horiz else frame.h)
        return frame.x + p if horiz else frame.y + frame.h - p
    if scale is None:
        return v
    if c in COLOR_CHANNELS:
        return scale.paint(v)
    if c == "symbol":
        return scale.symbol(v)
    if scale.kind == "identity":
        return v
    if c in ("w", "h"):
        if scale.range is not None:
            return scale.position(v)
        return scale.position(v, 0.0, frame.w if c == "w" else frame.h)
    if scale.range is None:
        raise ScaleError(f"scale {scale.name} needs a range to drive channel {c}")
    return scale.position(v)


def execute(graph: TaskGraph, db: Database | None = None) -> Execution:
    """Run ``graph`` in its recorded order."""
    return _State(graph, graph.db if db is None else db).run()


def run(spec: PlotSpec, db: Database, plan: TransformPlan | None = None) -> Execution:
    return execute(compile(spec, db, plan))


def nest_extents(execution: Execution, child: str) -> list[Extent]:
    """View extent (frame) of every row of a nested child view."""
    return [r.frame for r in execution.marks[child].records]


def nest_by_function(execution: Execution, child: str) -> list[int | None]:
    """Parent mark hosting every row of ``child`` (selector nests included)."""
    return [r.parent for r in execution.marks[child].records]
