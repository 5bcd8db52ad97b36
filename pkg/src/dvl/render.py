"""Deterministic SVG output: one primitive per mark, axes for positional scales, color guides."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Any
from xml.sax.saxutils import escape, quoteattr

from .layouts import Extent
from .marks import MarkTable, text_of
from .scales import Scale
from .specmodel import COLOR_CHANNELS, ExprEnc, Field, PlotSpec, X_POSITIONS, Y_POSITIONS

SVG_NS = "http://www.w3.org/2000/svg"
FONT_FAMILY = "sans-serif"
TICK = 4.0
GUIDE_WIDTH = 110.0
SWATCH = 10.0
MAX_GUIDE_ENTRIES = 10


def fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "0.000" if s == "-0.000" else s


def _paint(v: Any, default: str = "none") -> str:
    return default if v is None else str(v)


@dataclass(frozen=True)
class Prim:
    """One SVG element: tag, ordered attributes, optional text body."""

    tag: str
    attrs: tuple[tuple[str, str], ...]
    body: str | None = None

    def svg(self) -> str:
        a = "".join(f" {k}={quoteattr(v)}" for k, v in self.attrs)
        if self.body is None:
            return f"<{self.tag}{a}/>"
        return f"<{self.tag}{a}>{escape(self.body)}</{self.tag}>"


@dataclass
class Layer:
    view: str
    prims: list[Prim] = field(default_factory=list)


@dataclass
class Scene:
    width: float
    height: float
    layers: list[Layer] = field(default_factory=list)
    axes: list[Prim] = field(default_factory=list)
    guides: list[Prim] = field(default_factory=list)

    @property
    def extent(self) -> Extent:
        return Extent(0.0, 0.0, self.width, self.height)


# -- marks to primitives ---------------------------------------------------------------


def _symbol_path(sym: str, cx: float, cy: float, r: float) -> str:
    if sym == "square":
        pts = [(cx - r, cy - r), (cx + r, cy - r), (cx + r, cy + r), (cx - r, cy + r)]
    elif sym == "triangle":
        pts = [(cx, cy - r), (cx + r, cy + r), (cx - r, cy + r)]
    elif sym == "diamond":
        pts = [(cx, cy - r), (cx + r, cy), (cx, cy + r), (cx - r, cy)]
    elif sym == "cross":
        q = r / 3
        pts = [(cx - q, cy - r), (cx + q, cy - r), (cx + q, cy - q), (cx + r, cy - q), (cx + r, cy + q),
               (cx + q, cy + q), (cx + q, cy + r), (cx - q, cy + r), (cx - q, cy + q), (cx - r, cy + q),
               (cx - r, cy - q), (cx - q, cy - q)]
    else:  # star
        q = r / 2.5
        pts = [(cx, cy - r), (cx + q, cy - q), (cx + r, cy), (cx + q, cy + q), (cx, cy + r),
               (cx - q, cy + q), (cx - r, cy), (cx - q, cy - q)]
    return "M" + " L".join(f"{fmt(x)} {fmt(y)}" for x, y in pts) + " Z"


def mark_primitive(mark: str, ch: Mapping[str, Any]) -> Prim:
    if mark == "point":
        sym = ch.get("symbol") or "circle"
        fill = _paint(ch.get("color"), "black")
        if sym == "circle":
            return Prim("circle", (("cx", fmt(ch["x"])), ("cy", fmt(ch["y"])), ("r", fmt(ch["r"])),
                                   ("fill", fill)))
        return Prim("path", (("d", _symbol_path(sym, ch["x"], ch["y"], ch["r"])), ("fill", fill)))
    if mark in ("rect", "square"):
        fill = ch.get("fill") if ch.get("fill") is not None else ch.get("color")
        attrs = [("x", fmt(ch["x"])), ("y", fmt(ch["y"])), ("width", fmt(max(ch["w"], 0.0))),
                 ("height", fmt(max(ch["h"], 0.0))), ("fill", _paint(fill))]
        if ch.get("stroke") is not None:
            attrs += [("stroke", str(ch["stroke"])), ("stroke-width", fmt(ch.get("strokeWidth", 1.0)))]
        if ch.get("opacity", 1.0) != 1.0:
            attrs.append(("opacity", fmt(ch["opacity"])))
        return Prim("rect", tuple(attrs))
    if mark == "link":
        x1, y1, x2, y2 = ch["x1"], ch["y1"], ch["x2"], ch["y2"]
        style = [("stroke", _paint(ch.get("stroke"), "black")), ("stroke-width", fmt(ch.get("strokeWidth", 1.0)))]
        if ch.get("opacity", 1.0) != 1.0:
            style.append(("opacity", fmt(ch["opacity"])))
        if ch.get("curve"):
            mx = (x1 + x2) / 2
            d = f"M{fmt(x1)} {fmt(y1)} C{fmt(mx)} {fmt(y1)} {fmt(mx)} {fmt(y2)} {fmt(x2)} {fmt(y2)}"
            return Prim("path", (("d", d), ("fill", "none"), *style))
        return Prim("line", (("x1", fmt(x1)), ("y1", fmt(y1)), ("x2", fmt(x2)), ("y2", fmt(y2)), *style))
    attrs = [("x", fmt(ch["x"] + ch.get("dx", 0.0))), ("y", fmt(ch["y"] + ch.get("dy", 0.0))),
             ("font-size", fmt(ch["fontSize"])), ("font-family", FONT_FAMILY),
             ("dominant-baseline", "hanging")]
    if ch.get("textDecoration") not in (None, "none"):
        attrs.append(("text-decoration", str(ch["textDecoration"])))
    return Prim("text", tuple(attrs), text_of(ch.get("text")))


# -- axes and guides ----------------------------------------------------------------------


def _tick_values(scale: Scale) -> list[Any]:
    if not scale.domain:
        return []
    if scale.kind == "linear":
        lo, hi = scale.domain
        if lo == hi:
            return [lo]
        return [lo + (hi - lo) * q for q in (0.0, 0.25, 0.5, 0.75, 1.0)]
    return list(scale.domain)


def _tick_label(v: Any) -> str:
    if isinstance(v, float):
        return f"{v:.4g}"
    return text_of(v)


def _axis(scale: Scale | None, axis: str, frame: Extent) -> list[Prim]:
    out: list[Prim] = []
    if axis == "x":
        y = frame.y2
        out.append(Prim("line", (("x1", fmt(frame.x)), ("y1", fmt(y)), ("x2", fmt(frame.x2)), ("y2", fmt(y)),
                                 ("stroke", "#444444"), ("stroke-width", "1.000"))))
    else:
        x = frame.x
        out.append(Prim("line", (("x1", fmt(x)), ("y1", fmt(frame.y)), ("x2", fmt(x)), ("y2", fmt(frame.y2)),
                                 ("stroke", "#444444"), ("stroke-width", "1.000"))))
    if scale is None or scale.kind == "identity":
        return out
    for v in _tick_values(scale):
        if scale.range is not None:
            p = scale.position(v)
        else:
            p = scale.position(v, 0.0, frame.w if axis == "x" else frame.h)
        if axis == "x":
            px = frame.x + p
            out.append(Prim("line", (("x1", fmt(px)), ("y1", fmt(frame.y2)), ("x2", fmt(px)),
                                     ("y2", fmt(frame.y2 + TICK)), ("stroke", "#444444"),
                                     ("stroke-width", "1.000"))))
            out.append(Prim("text", (("x", fmt(px)), ("y", fmt(frame.y2 + TICK + 2)), ("font-size", "10.000"),
                                     ("font-family", FONT_FAMILY), ("dominant-baseline", "hanging"),
                                     ("text-anchor", "middle")), _tick_label(v)))
        else:
            py = frame.y2 - p
            out.append(Prim("line", (("x1", fmt(frame.x - TICK)), ("y1", fmt(py)), ("x2", fmt(frame.x)),
                                     ("y2", fmt(py)), ("stroke", "#444444"), ("stroke-width", "1.000"))))
            out.append(Prim("text", (("x", fmt(frame.x - TICK - 2)), ("y", fmt(py)), ("font-size", "10.000"),
                                     ("font-family", FONT_FAMILY), ("dominant-baseline", "middle"),
                                     ("text-anchor", "end")), _tick_label(v)))
    return out


def _guide(scale: Scale, x: float, y: float) -> tuple[list[Prim], float]:
    out = [Prim("text", (("x", fmt(x)), ("y", fmt(y)), ("font-size", "10.000"), ("font-family", FONT_FAMILY),
                         ("dominant-baseline", "hanging")), scale.name)]
    y += 14
    if scale.kind == "linear" and scale.domain:
        values = [scale.domain[0], scale.domain[-1]]
    else:
        values = list(scale.domain)[:MAX_GUIDE_ENTRIES]
    for v in values:
        out.append(Prim("rect", (("x", fmt(x)), ("y", fmt(y)), ("width", fmt(SWATCH)), ("height", fmt(SWATCH)),
                                 ("fill", _paint(scale.paint(v))))))
        out.append(Prim("text", (("x", fmt(x + SWATCH + 4)), ("y", fmt(y)), ("font-size", "10.000"),
                                 ("font-family", FONT_FAMILY), ("dominant-baseline", "hanging")),
                        _tick_label(v)))
        y += SWATCH + 4
    return out, y + 6


def build_scene(marks: Mapping[str, MarkTable], spec: PlotSpec,
                axis_scales: Mapping[tuple[str, str], Scale] | None = None,
                color_scales: list[Scale] | None = None,
                child_scales: Mapping[tuple[str, str, int | None], Scale] | None = None) -> Scene:
    """Primitives per view in declaration order, then axes and color guides."""
    axis_scales = axis_scales or {}
    color_scales = color_scales or []
    scene = Scene(float(spec.width), float(spec.height))
    for v in spec.views:
        mt = marks.get(v.name)
        layer = Layer(v.name)
        if mt is not None:
            layer.prims = [mark_primitive(mt.mark, r.channels) for r in mt.records]
        scene.layers.append(layer)
    if spec.axes:
        seen: set[tuple] = set()
        for v in spec.views:
            if spec.parent_of(v.name) is not None or v.name not in marks:
                continue
            frame = marks[v.name].view_extent
            for c, e in v.encodings.items():
                if not isinstance(e, (Field, ExprEnc)) or not (c in X_POSITIONS or c in Y_POSITIONS):
                    continue
                axis = "x" if c in X_POSITIONS else "y"
                scale = axis_scales.get((v.name, c))
                key = (frame.as_tuple(), axis, id(scale) if scale is not None else None,
                       scale.domain if scale is not None else None)
                if key in seen:
                    continue
                seen.add(key)
                scene.axes += _axis(scale, axis, frame)
        if spec.child_axes and child_scales:
            for (view, c, part), scale in child_scales.items():
                if part is None or not (c in X_POSITIONS or c in Y_POSITIONS) or view not in marks:
                    continue
                frame = next((r.frame for r in marks[view].records if r.parent == part), None)
                if frame is not None:
                    scene.axes += _axis(scale, "x" if c in X_POSITIONS else "y", frame)
    if color_scales:
        x, y = scene.width + 10, 10.0
        for s in color_scales:
            prims, y = _guide(s, x, y)
            scene.guides += prims
        scene.width += GUIDE_WIDTH
    return scene


def scene_for(execution) -> Scene:
    """Scene of an executed graph, with its axes and color guides."""
    spec = execution.graph.spec
    colors: list[Scale] = []
    for v in spec.views:
        for c, e in v.encodings.items():
            if c in COLOR_CHANNELS and isinstance(e, (Field, ExprEnc)):
                s = execution.scales.get(e.scale) if e.scale else execution.implicit.get((v.name, c, None))
                if s is not None and s.kind != "identity" and s.domain and s not in colors:
                    colors.append(s)
    return build_scene(execution.marks, spec, execution.axis_scales, colors, execution.implicit)


def render_svg(scene: Scene) -> str:
    head = (f'<svg xmlns="{SVG_NS}" version="1.1" width="{fmt(scene.width)}" '
            f'height="{fmt(scene.height)}">')
    parts = [head]
    for layer in scene.layers:
        if not layer.prims:
            continue
        parts.append(f"<g class={quoteattr('view ' + layer.view)}>")
        parts += [p.svg() for p in layer.prims]
        parts.append("</g>")
    if scene.axes:
        parts.append('<g class="axes">')
        parts += [p.svg() for p in scene.axes]
        parts.append("</g>")
    if scene.guides:
        parts.append('<g class="guides">')
        parts += [p.svg() for p in scene.guides]
        parts.append("</g>")
    if len(parts) == 1:
        return head + "</svg>\n"
    return "\n".join(parts) + "\n</svg>\n"


def render(execution) -> str:
    return render_svg(scene_for(execution))
