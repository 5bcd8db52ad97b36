"""Plot specifications: views, encodings, scales, layout bindings and nesting.

Specs are immutable values parsed from JSON (``.dvl.json``). Multi-channel
sugar (``spread``) is expanded at parse time so each channel carries exactly
one encoding; :func:`serialize_spec` emits that expanded canonical form.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any, Union

from .errors import ExprError, SpecError
from .expr import Expr

MARKS = ("point", "rect", "square", "link", "label", "text")

_RECT_CHANNELS = frozenset({"x", "y", "w", "h", "color", "stroke", "strokeWidth", "fill", "opacity"})
_LABEL_CHANNELS = frozenset({"x", "y", "text", "fontSize", "dx", "dy", "textDecoration", "w", "h"})
MARK_CHANNELS: dict[str, frozenset[str]] = {
    "point": frozenset({"x", "y", "r", "color", "symbol"}),
    "rect": _RECT_CHANNELS,
    "square": _RECT_CHANNELS,
    "link": frozenset({"x1", "y1", "x2", "y2", "stroke", "strokeWidth", "opacity", "curve"}),
    "label": _LABEL_CHANNELS,
    "text": _LABEL_CHANNELS,
}

# channels whose value is a screen position, by axis
X_POSITIONS = frozenset({"x", "x1", "x2"})
Y_POSITIONS = frozenset({"y", "y1", "y2"})
POSITIONS = X_POSITIONS | Y_POSITIONS
LENGTHS = {"w": "x", "h": "y", "r": "x"}
COLOR_CHANNELS = frozenset({"color", "stroke", "fill"})

SCALE_KINDS = ("linear", "ordinal", "identity")
LAYOUT_ALGOS = ("SQ", "OS", "VT", "HZ", "EQ", "tree", "force")
SPACE_FILLING = ("SQ", "OS", "VT", "HZ", "EQ")
AGGS = ("max", "min", "sum", "count", "avg")


def layout_outputs(algo: str) -> tuple[str, ...]:
    return ("x", "y", "w", "h") if algo in SPACE_FILLING else ("x", "y")


# -- encodings ------------------------------------------------------------------


@dataclass(frozen=True)
class Field:
    attr: str
    scale: str | None = None


@dataclass(frozen=True)
class Const:
    value: Any


@dataclass(frozen=True)
class ExprEnc:
    expr: str
    scale: str | None = None

    @property
    def names(self) -> tuple[str, ...]:
        return Expr(self.expr).names


@dataclass(frozen=True)
class Filter:
    """How a reference picks target rows.

    ``infer``: follow the unique constraint path; ``keys``: source attributes
    used as search keys; ``pred``: equality predicate (``eq`` constants on target
    columns, ``on`` target column = source column); ``all``: every target row.
    """

    kind: str = "infer"
    attrs: tuple[str, ...] = ()
    eq: tuple[tuple[str, Any], ...] = ()
    on: tuple[tuple[str, str], ...] = ()


@dataclass(frozen=True)
class ForeignRef:
    view: str | None = None
    table: str | None = None
    filter: Filter = Filter()
    prop: str | None = None
    expr: str | None = None
    agg: str | None = None

    @property
    def target(self) -> str:
        return self.view or self.table

    @property
    def target_props(self) -> tuple[str, ...]:
        if self.expr is not None:
            return Expr(self.expr).names
        return (self.prop,) if self.prop else ()


@dataclass(frozen=True)
class LayoutRef:
    layout: str
    slot: str


Encoding = Union[Field, Const, ExprEnc, ForeignRef, LayoutRef]


# -- declarations ----------------------------------------------------------------


@dataclass(frozen=True)
class ScaleSpec:
    name: str
    kind: str = "linear"
    domain: tuple | None = None
    range: tuple | None = None


@dataclass(frozen=True)
class EdgeSource:
    table: str
    src: str
    dst: str


@dataclass(frozen=True)
class LayoutBinding:
    name: str
    algo: str
    weight: str | float | None = None
    cols: int | None = None
    key: str | None = None
    parent: str | None = None
    edges: EdgeSource | None = None
    seed: int | None = None
    iterations: int | None = None


@dataclass(frozen=True)
class ViewSpec:
    name: str
    table: str
    mark: str
    encodings: Mapping[str, Encoding] = field(default_factory=dict)
    extent: tuple[float, float, float, float] | None = None

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, ViewSpec) and self.name == other.name and self.table == other.table
                and self.mark == other.mark and dict(self.encodings) == dict(other.encodings)
                and self.extent == other.extent)

    def __hash__(self) -> int:
        return hash((self.name, self.table, self.mark))


@dataclass(frozen=True)
class NestDecl:
    """Place child views inside the marks of ``parent``.

    ``using`` is a constraint path (tuple of names) or attribute pairs
    ``((child_attr, parent_attr), ...)``. ``select`` maps a parent attribute's
    value to the child view that the parent mark hosts.
    """

    children: tuple[str, ...]
    parent: str
    using: tuple | None = None
    select_attr: str | None = None
    select_views: tuple[tuple[Any, str], ...] = ()
    padding: float = 0.0

    @property
    def by_function(self) -> bool:
        return self.select_attr is not None

    @property
    def using_pairs(self) -> bool:
        return bool(self.using) and not isinstance(self.using[0], str)


@dataclass(frozen=True)
class PlotSpec:
    width: float = 800
    height: float = 600
    views: tuple[ViewSpec, ...] = ()
    nests: tuple[NestDecl, ...] = ()
    scales: Mapping[str, ScaleSpec] = field(default_factory=dict)
    layouts: Mapping[str, LayoutBinding] = field(default_factory=dict)
    axes: bool = True
    child_axes: bool = False

    def __hash__(self) -> int:
        return hash((self.width, self.height, tuple(v.name for v in self.views)))

    def view(self, name: str) -> ViewSpec:
        for v in self.views:
            if v.name == name:
                return v
        raise SpecError(f"unknown view {name!r}")

    def has_view(self, name: str) -> bool:
        return any(v.name == name for v in self.views)

    def parent_of(self, view: str) -> tuple[NestDecl, str] | None:
        for n in self.nests:
            if view in n.children:
                return n, n.parent
        return None


# -- parsing ---------------------------------------------------------------------


def _expect(cond: bool, msg: str, ptr: str) -> None:
    if not cond:
        raise SpecError(msg, ptr)


def _fields(doc: Any, ptr: str, required: set[str], optional: set[str]) -> None:
    _expect(isinstance(doc, Mapping), "expected an object", ptr)
    missing = required - set(doc)
    _expect(not missing, f"missing field(s) {sorted(missing)}", ptr)
    extra = set(doc) - required - optional
    if extra:
        bad = sorted(extra)[0]
        raise SpecError(f"unknown field {bad!r}", f"{ptr}/{bad}")


def _ident(v: Any, ptr: str) -> str:
    _expect(isinstance(v, str) and v != "", "expected a nonempty name", ptr)
    return v


def _number(v: Any, ptr: str) -> float:
    _expect(isinstance(v, (int, float)) and not isinstance(v, bool), "expected a number", ptr)
    return v


def _check_expr(src: Any, ptr: str) -> str:
    _expect(isinstance(src, str), "expected an expression string", ptr)
    try:
        Expr(src)
    except ExprError as e:
        raise SpecError(str(e), ptr) from None
    return src


def _parse_filter(doc: Any, ptr: str) -> Filter:
    if doc is None:
        return Filter("all")
    if isinstance(doc, str):
        return Filter("keys", (doc,))
    if isinstance(doc, list):
        _expect(doc and all(isinstance(a, str) for a in doc), "expected attribute names", ptr)
        return Filter("keys", tuple(doc))
    _fields(doc, ptr, set(), {"eq", "on"})
    eq = doc.get("eq", {})
    on = doc.get("on", {})
    _expect(isinstance(eq, Mapping) and isinstance(on, Mapping), "eq/on must be objects", ptr)
    _expect(bool(eq) or bool(on), "predicate needs eq or on", ptr)
    for k, v in on.items():
        _ident(v, f"{ptr}/on/{k}")
    return Filter("pred", eq=tuple(eq.items()), on=tuple(on.items()))


def _parse_ref(doc: Any, ptr: str, channel: str | None) -> ForeignRef:
    _fields(doc, ptr, set(), {"view", "table", "filter", "prop", "expr", "agg"})
    _expect(("view" in doc) != ("table" in doc), "exactly one of view/table is required", ptr)
    _expect(not ("prop" in doc and "expr" in doc), "prop and expr are exclusive", ptr)
    filt = _parse_filter(doc["filter"], f"{ptr}/filter") if "filter" in doc else Filter()
    agg = doc.get("agg")
    if agg is not None:
        _expect(agg in AGGS, f"unknown aggregate {agg!r}", f"{ptr}/agg")
    if filt.kind == "all":
        _expect(agg is not None, "a null filter needs an aggregate", f"{ptr}/filter")
    expr = _check_expr(doc["expr"], f"{ptr}/expr") if "expr" in doc else None
    prop = doc.get("prop")
    if prop is None and expr is None:
        prop = channel
    if prop is not None:
        _ident(prop, f"{ptr}/prop")
    return ForeignRef(view=doc.get("view"), table=doc.get("table"), filter=filt, prop=prop,
                      expr=expr, agg=agg)


def parse_encoding(doc: Any, ptr: str, channel: str) -> Encoding:
    if isinstance(doc, str):
        return Field(doc)
    if isinstance(doc, (int, float, bool)):
        return Const(doc)
    _expect(isinstance(doc, Mapping), "expected an encoding object", ptr)
    kinds = [k for k in ("field", "const", "expr", "ref", "layout") if k in doc]
    _expect(len(kinds) == 1, "encoding needs exactly one of field/const/expr/ref/layout", ptr)
    kind = kinds[0]
    if kind == "field":
        _fields(doc, ptr, {"field"}, {"scale"})
        return Field(_ident(doc["field"], f"{ptr}/field"),
                     _ident(doc["scale"], f"{ptr}/scale") if "scale" in doc else None)
    if kind == "const":
        _fields(doc, ptr, {"const"}, set())
        v = doc["const"]
        _expect(v is None or isinstance(v, (str, int, float, bool)), "constant must be a scalar",
                f"{ptr}/const")
        return Const(v)
    if kind == "expr":
        _fields(doc, ptr, {"expr"}, {"scale"})
        return ExprEnc(_check_expr(doc["expr"], f"{ptr}/expr"),
                       _ident(doc["scale"], f"{ptr}/scale") if "scale" in doc else None)
    if kind == "ref":
        _fields(doc, ptr, {"ref"}, set())
        return _parse_ref(doc["ref"], f"{ptr}/ref", channel)
    _fields(doc, ptr, {"layout"}, {"slot"})
    return LayoutRef(_ident(doc["layout"], f"{ptr}/layout"),
                     _ident(doc.get("slot", channel), f"{ptr}/slot"))


def _expand_spread(item: Any, ptr: str) -> list[tuple[str, Encoding]]:
    _expect(isinstance(item, Mapping), "expected an object", ptr)
    if "layout" in item:
        _fields(item, ptr, {"layout", "channels"}, set())
        chans = item["channels"]
        _expect(isinstance(chans, list) and chans, "expected channel list", f"{ptr}/channels")
        name = _ident(item["layout"], f"{ptr}/layout")
        out = []
        for c in chans:
            if isinstance(c, str):
                out.append((c, LayoutRef(name, c)))
            else:
                _expect(isinstance(c, list) and len(c) == 2, "expected [channel, slot]", f"{ptr}/channels")
                out.append((c[0], LayoutRef(name, c[1])))
        return out
    _fields(item, ptr, {"ref"}, set())
    ref = item["ref"]
    _fields(ref, f"{ptr}/ref", {"props"}, {"view", "table", "filter", "agg"})
    props = ref["props"]
    if isinstance(props, str):
        props = {props: props}
    elif isinstance(props, list):
        props = {p: p for p in props}
    _expect(isinstance(props, Mapping) and props, "props must be a name, list or object",
            f"{ptr}/ref/props")
    out = []
    for channel, prop in props.items():
        sub = {k: v for k, v in ref.items() if k != "props"}
        sub["prop"] = prop
        out.append((channel, _parse_ref(sub, f"{ptr}/ref", channel)))
    return out


def _parse_view(doc: Any, ptr: str) -> ViewSpec:
    _fields(doc, ptr, {"name", "table", "mark"}, {"encodings", "spread", "extent"})
    name = _ident(doc["name"], f"{ptr}/name")
    table = _ident(doc["table"], f"{ptr}/table")
    mark = doc["mark"]
    _expect(mark in MARKS, f"unknown mark type {mark!r}", f"{ptr}/mark")
    encs: dict[str, Encoding] = {}
    raw = doc.get("encodings", {})
    _expect(isinstance(raw, Mapping), "expected an object", f"{ptr}/encodings")
    legal = MARK_CHANNELS[mark]
    for ch, e in raw.items():
        cptr = f"{ptr}/encodings/{ch}"
        _expect(ch in legal, f"channel {ch!r} is not valid for {mark} marks", cptr)
        encs[ch] = parse_encoding(e, cptr, ch)
    spread = doc.get("spread", [])
    _expect(isinstance(spread, list), "expected a list", f"{ptr}/spread")
    for i, item in enumerate(spread):
        sptr = f"{ptr}/spread/{i}"
        for ch, enc in _expand_spread(item, sptr):
            _expect(ch in legal, f"channel {ch!r} is not valid for {mark} marks", sptr)
            _expect(ch not in encs, f"channel {ch!r} is encoded twice", sptr)
            encs[ch] = enc
    extent = None
    if "extent" in doc:
        ext = doc["extent"]
        _expect(isinstance(ext, list) and len(ext) == 4, "extent must be [x, y, w, h]", f"{ptr}/extent")
        extent = tuple(_number(v, f"{ptr}/extent/{i}") for i, v in enumerate(ext))
        _expect(extent[2] >= 0 and extent[3] >= 0, "extent size must be nonnegative", f"{ptr}/extent")
    return ViewSpec(name, table, mark, encs, extent)


def _parse_scale(name: str, doc: Any, ptr: str) -> ScaleSpec:
    _fields(doc, ptr, set(), {"type", "domain", "range"})
    kind = doc.get("type", "linear")
    _expect(kind in SCALE_KINDS, f"unknown scale type {kind!r}", f"{ptr}/type")
    dom = doc.get("domain")
    rng = doc.get("range")
    if dom is not None:
        _expect(isinstance(dom, list), "domain must be a list", f"{ptr}/domain")
        if kind == "linear":
            _expect(len(dom) == 2, "linear domain is [min, max]", f"{ptr}/domain")
            _number(dom[0], f"{ptr}/domain/0")
            _number(dom[1], f"{ptr}/domain/1")
            _expect(dom[0] <= dom[1], "domain min exceeds max", f"{ptr}/domain")
        else:
            _expect(len(set(map(repr, dom))) == len(dom), "ordinal domain has duplicates", f"{ptr}/domain")
    if rng is not None:
        _expect(isinstance(rng, list) and len(rng) >= 2, "range must be a list of 2+ values",
                f"{ptr}/range")
    return ScaleSpec(name, kind, tuple(dom) if dom is not None else None,
                     tuple(rng) if rng is not None else None)


def _parse_layout(name: str, doc: Any, ptr: str) -> LayoutBinding:
    _fields(doc, ptr, {"algo"}, {"weight", "cols", "key", "parent", "edges", "seed", "iterations"})
    algo = doc["algo"]
    _expect(algo in LAYOUT_ALGOS, f"unknown layout algorithm {algo!r}", f"{ptr}/algo")
    weight = doc.get("weight")
    if weight is not None:
        _expect(isinstance(weight, str) or (isinstance(weight, (int, float)) and not isinstance(weight, bool)),
                "weight must be an attribute name or a number", f"{ptr}/weight")
    if algo in ("SQ", "OS", "VT", "HZ"):
        _expect(weight is not None, f"{algo} needs a weight attribute or constant", ptr)
    edges = None
    if "edges" in doc:
        e = doc["edges"]
        _fields(e, f"{ptr}/edges", {"table", "src", "dst"}, set())
        edges = EdgeSource(_ident(e["table"], f"{ptr}/edges/table"), _ident(e["src"], f"{ptr}/edges/src"),
                           _ident(e["dst"], f"{ptr}/edges/dst"))
    if algo == "force":
        _expect(edges is not None, "force needs an edge table", ptr)
        _expect(isinstance(doc.get("seed"), int), "force needs an integer seed", f"{ptr}/seed")
    if algo == "tree":
        _expect(isinstance(doc.get("parent"), str), "tree needs a parent attribute", f"{ptr}/parent")
    for k in ("cols", "iterations", "seed"):
        if k in doc:
            _expect(isinstance(doc[k], int) and not isinstance(doc[k], bool) and doc[k] >= 0,
                    f"{k} must be a nonnegative integer", f"{ptr}/{k}")
    return LayoutBinding(name, algo, weight, doc.get("cols"), doc.get("key"), doc.get("parent"),
                         edges, doc.get("seed"), doc.get("iterations"))


def _parse_nest(doc: Any, ptr: str) -> NestDecl:
    _fields(doc, ptr, {"parent"}, {"child", "children", "using", "select", "padding"})
    _expect(("child" in doc) != ("children" in doc), "exactly one of child/children is required", ptr)
    if "child" in doc:
        children = (_ident(doc["child"], f"{ptr}/child"),)
    else:
        ch = doc["children"]
        _expect(isinstance(ch, list) and ch, "expected a list of views", f"{ptr}/children")
        children = tuple(_ident(c, f"{ptr}/children/{i}") for i, c in enumerate(ch))
    using = doc.get("using")
    if using is not None:
        uptr = f"{ptr}/using"
        if isinstance(using, str):
            using = (using,)
        elif isinstance(using, list) and using and all(isinstance(u, str) for u in using):
            using = tuple(using)
        elif isinstance(using, list) and using and all(
                isinstance(u, list) and len(u) == 2 and all(isinstance(a, str) for a in u) for u in using):
            using = tuple(tuple(u) for u in using)
        else:
            raise SpecError("using must be a constraint name, a list of names, or attribute pairs", uptr)
    sel_attr, sel_views = None, ()
    if "select" in doc:
        sel = doc["select"]
        _fields(sel, f"{ptr}/select", {"attr", "views"}, set())
        sel_attr = _ident(sel["attr"], f"{ptr}/select/attr")
        views = sel["views"]
        _expect(isinstance(views, Mapping) and views, "expected an object", f"{ptr}/select/views")
        for k, v in views.items():
            _expect(v in children, f"selected view {v!r} is not a child", f"{ptr}/select/views/{k}")
        sel_views = tuple(sorted(views.items()))
    else:
        _expect(len(children) == 1, "several children need a select", ptr)
    padding = _number(doc.get("padding", 0), f"{ptr}/padding")
    return NestDecl(children, _ident(doc["parent"], f"{ptr}/parent"), using, sel_attr, sel_views,
                    float(padding))


def spec_from_json(doc: Any) -> PlotSpec:
    _fields(doc, "", set(), {"width", "height", "views", "nests", "scales", "layouts", "axes", "childAxes"})
    width = _number(doc.get("width", 800), "/width")
    height = _number(doc.get("height", 600), "/height")
    _expect(width >= 0 and height >= 0, "plot size must be nonnegative", "")
    views_doc = doc.get("views", [])
    _expect(isinstance(views_doc, list), "expected a list", "/views")
    views = []
    seen = set()
    for i, v in enumerate(views_doc):
        view = _parse_view(v, f"/views/{i}")
        _expect(view.name not in seen, f"duplicate view name {view.name!r}", f"/views/{i}/name")
        seen.add(view.name)
        views.append(view)
    scales_doc = doc.get("scales", {})
    _expect(isinstance(scales_doc, Mapping), "expected an object", "/scales")
    scales = {k: _parse_scale(k, v, f"/scales/{k}") for k, v in scales_doc.items()}
    layouts_doc = doc.get("layouts", {})
    _expect(isinstance(layouts_doc, Mapping), "expected an object", "/layouts")
    layouts = {k: _parse_layout(k, v, f"/layouts/{k}") for k, v in layouts_doc.items()}
    nests_doc = doc.get("nests", [])
    _expect(isinstance(nests_doc, list), "expected a list", "/nests")
    nests = tuple(_parse_nest(n, f"/nests/{i}") for i, n in enumerate(nests_doc))
    for k in ("axes", "childAxes"):
        if k in doc:
            _expect(isinstance(doc[k], bool), "expected a boolean", f"/{k}")
    spec = PlotSpec(width, height, tuple(views), nests, scales, layouts,
                    doc.get("axes", True), doc.get("childAxes", False))
    check_structure(spec)
    return spec


def check_structure(spec: PlotSpec) -> None:
    """Intra-spec references: views, scales, layouts and nests must resolve."""
    names = {v.name for v in spec.views}
    layout_users: dict[str, str] = {}
    for i, v in enumerate(spec.views):
        slots: dict[str, list[str]] = {}
        for ch, e in v.encodings.items():
            ptr = f"/views/{i}/encodings/{ch}"
            scale = getattr(e, "scale", None)
            if scale is not None:
                _expect(scale in spec.scales, f"unknown scale {scale!r}", f"{ptr}/scale")
            if isinstance(e, ForeignRef) and e.view is not None:
                _expect(e.view in names, f"unknown view {e.view!r}", f"{ptr}/ref/view")
            if isinstance(e, LayoutRef):
                _expect(e.layout in spec.layouts, f"unknown layout {e.layout!r}", f"{ptr}/layout")
                owner = layout_users.setdefault(e.layout, v.name)
                _expect(owner == v.name, f"layout {e.layout!r} is already bound to view {owner!r}", ptr)
                outputs = layout_outputs(spec.layouts[e.layout].algo)
                _expect(e.slot in outputs, f"layout {e.layout!r} has no output {e.slot!r}", f"{ptr}/slot")
                slots.setdefault(e.layout, []).append(e.slot)
        for lname, used in slots.items():
            outputs = layout_outputs(spec.layouts[lname].algo)
            _expect(sorted(used) == sorted(outputs) and len(set(used)) == len(used),
                    f"layout {lname!r} outputs {list(outputs)} must each be bound exactly once",
                    f"/views/{i}/encodings")
    nested: set[str] = set()
    for i, n in enumerate(spec.nests):
        ptr = f"/nests/{i}"
        _expect(n.parent in names, f"unknown view {n.parent!r}", f"{ptr}/parent")
        for c in n.children:
            _expect(c in names, f"unknown view {c!r}", ptr)
            _expect(c != n.parent, "a view cannot nest in itself", ptr)
            _expect(c not in nested, f"view {c!r} is nested twice", ptr)
            nested.add(c)
    # nesting must be a forest
    parent = {c: n.parent for n in spec.nests for c in n.children}
    for start in parent:
        seen, cur = set(), start
        while cur in parent:
            _expect(cur not in seen, f"nesting cycle through view {cur!r}", "/nests")
            seen.add(cur)
            cur = parent[cur]
    for i, v in enumerate(spec.views):
        if v.extent is not None:
            _expect(v.name not in nested, "nested views take their extent from the parent mark",
                    f"/views/{i}/extent")


def parse_spec(document: str) -> PlotSpec:
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise SpecError(f"malformed JSON: {e.msg} (line {e.lineno}, col {e.colno})") from None
    return spec_from_json(doc)


# -- serialization -----------------------------------------------------------------


def _filter_json(f: Filter) -> Any:
    if f.kind == "all":
        return None
    if f.kind == "keys":
        return list(f.attrs)
    out = {}
    if f.eq:
        out["eq"] = dict(f.eq)
    if f.on:
        out["on"] = dict(f.on)
    return out


def encoding_to_json(e: Encoding) -> dict:
    if isinstance(e, Field):
        return {"field": e.attr, **({"scale": e.scale} if e.scale else {})}
    if isinstance(e, Const):
        return {"const": e.value}
    if isinstance(e, ExprEnc):
        return {"expr": e.expr, **({"scale": e.scale} if e.scale else {})}
    if isinstance(e, LayoutRef):
        return {"layout": e.layout, "slot": e.slot}
    ref: dict[str, Any] = {"view": e.view} if e.view else {"table": e.table}
    if e.filter.kind != "infer":
        ref["filter"] = _filter_json(e.filter)
    if e.expr is not None:
        ref["expr"] = e.expr
    else:
        ref["prop"] = e.prop
    if e.agg:
        ref["agg"] = e.agg
    return {"ref": ref}


def spec_to_json(spec: PlotSpec) -> dict:
    out: dict[str, Any] = {"width": spec.width, "height": spec.height}
    views = []
    for v in spec.views:
        d: dict[str, Any] = {"name": v.name, "table": v.table, "mark": v.mark}
        if v.encodings:
            d["encodings"] = {ch: encoding_to_json(e) for ch, e in v.encodings.items()}
        if v.extent is not None:
            d["extent"] = list(v.extent)
        views.append(d)
    if views:
        out["views"] = views
    if spec.scales:
        scales = {}
        for name, s in spec.scales.items():
            d = {"type": s.kind}
            if s.domain is not None:
                d["domain"] = list(s.domain)
            if s.range is not None:
                d["range"] = list(s.range)
            scales[name] = d
        out["scales"] = scales
    if spec.layouts:
        layouts = {}
        for name, b in spec.layouts.items():
            d = {"algo": b.algo}
            for k in ("weight", "cols", "key", "parent", "seed", "iterations"):
                if getattr(b, k) is not None:
                    d[k] = getattr(b, k)
            if b.edges is not None:
                d["edges"] = {"table": b.edges.table, "src": b.edges.src, "dst": b.edges.dst}
            layouts[name] = d
        out["layouts"] = layouts
    if spec.nests:
        nests = []
        for n in spec.nests:
            d = {"parent": n.parent}
            if len(n.children) == 1 and not n.by_function:
                d["child"] = n.children[0]
            else:
                d["children"] = list(n.children)
            if n.using is not None:
                d["using"] = [list(u) if isinstance(u, tuple) else u for u in n.using]
            if n.by_function:
                d["select"] = {"attr": n.select_attr, "views": dict(n.select_views)}
            if n.padding:
                d["padding"] = n.padding
            nests.append(d)
        out["nests"] = nests
    if not spec.axes:
        out["axes"] = False
    if spec.child_axes:
        out["childAxes"] = True
    return out


def serialize_spec(spec: PlotSpec) -> str:
    return json.dumps(spec_to_json(spec), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- validation against a database ------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    pointer: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.pointer or '/'}: [{self.code}] {self.message}"


def validate_spec(spec: PlotSpec, db) -> list[Diagnostic]:
    """Resolve every table, attribute, constraint, reference and nest against ``db``."""
    from .resolver import check_spec_references
    return check_spec_references(spec, db)
