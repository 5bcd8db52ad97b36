"""Mark tables: one record per data row with resolved channels and a spatial extent."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any

from .layouts import Extent

DEFAULT_RADIUS = 3.0
DEFAULT_FONT_SIZE = 12.0
DEFAULT_RECT_SIZE = 10.0
# fixed text metrics: advance per glyph and line height, as multiples of the font size
GLYPH_ADVANCE = 0.6
LINE_HEIGHT = 1.2

# channel defaults per mark type; positions are offsets from the frame origin
DEFAULTS: dict[str, dict[str, Any]] = {
    "point": {"x": 0.0, "y": 0.0, "r": DEFAULT_RADIUS, "color": "black", "symbol": "circle"},
    "rect": {"x": 0.0, "y": 0.0, "w": DEFAULT_RECT_SIZE, "h": DEFAULT_RECT_SIZE, "color": "black",
             "strokeWidth": 1.0, "opacity": 1.0},
    "link": {"x1": 0.0, "y1": 0.0, "x2": 0.0, "y2": 0.0, "stroke": "black", "strokeWidth": 1.0,
             "opacity": 1.0, "curve": False},
    "label": {"x": 0.0, "y": 0.0, "text": "", "fontSize": DEFAULT_FONT_SIZE, "dx": 0.0, "dy": 0.0,
              "textDecoration": "none"},
}
DEFAULTS["square"] = DEFAULTS["rect"]
DEFAULTS["text"] = DEFAULTS["label"]


def text_of(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def measure_text(text: Any, font_size: float) -> tuple[float, float]:
    return GLYPH_ADVANCE * font_size * len(text_of(text)), LINE_HEIGHT * font_size


def mark_extent(mark: str, ch: dict[str, Any]) -> Extent:
    """Spatial extent implied by a mark's channels (screen coordinates, y down)."""
    if mark == "point":
        r = ch["r"]
        return Extent(ch["x"] - r, ch["y"] - r, 2 * r, 2 * r)
    if mark in ("rect", "square"):
        return Extent(ch["x"], ch["y"], max(ch["w"], 0.0), max(ch["h"], 0.0))
    if mark == "link":
        x0, x1 = sorted((ch["x1"], ch["x2"]))
        y0, y1 = sorted((ch["y1"], ch["y2"]))
        return Extent(x0, y0, x1 - x0, y1 - y0)
    w, h = ch.get("w"), ch.get("h")
    mw, mh = measure_text(ch["text"], ch["fontSize"])
    return Extent(ch["x"] + ch["dx"], ch["y"] + ch["dy"], mw if w is None else w, mh if h is None else h)


@dataclass
class MarkRecord:
    key: tuple
    channels: dict[str, Any]
    extent: Extent | None = None
    frame: Extent | None = None
    parent: int | None = None


def _round(v: Any, digits: int) -> Any:
    if isinstance(v, float):
        r = round(v, digits)
        return 0.0 if r == 0 else r
    return v


@dataclass
class MarkTable:
    """Marks of one view, aligned with the rows of its data table."""

    view: str
    mark: str
    key_names: tuple[str, ...]
    records: list[MarkRecord] = field(default_factory=list)
    view_extent: Extent | None = None

    def __len__(self) -> int:
        return len(self.records)

    def column(self, channel: str) -> list[Any]:
        return [r.channels.get(channel) for r in self.records]

    def extents(self) -> list[Extent]:
        return [r.extent for r in self.records]

    def to_json(self, digits: int = 6) -> dict:
        recs = []
        for r in self.records:
            d = {"key": [_round(k, digits) for k in r.key],
                 "channels": {c: _round(v, digits) for c, v in sorted(r.channels.items())},
                 "extent": [_round(v, digits) for v in r.extent.as_tuple()] if r.extent else None}
            if r.parent is not None:
                d["parent"] = r.parent
            recs.append(d)
        out = {"view": self.view, "mark": self.mark, "key": list(self.key_names), "records": recs}
        if self.view_extent is not None:
            out["extent"] = [_round(v, digits) for v in self.view_extent.as_tuple()]
        return out


def marks_to_json(tables: dict[str, MarkTable], digits: int = 6) -> str:
    """Canonical JSON of all mark tables (floats rounded to ``digits`` places)."""
    doc = {"views": [t.to_json(digits) for t in tables.values()]}
    return json.dumps(doc, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
