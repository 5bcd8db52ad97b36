"""Layout algorithms used as channel sources.

Space-filling layouts (SQ, OS, VT, HZ, EQ) return ``x, y, w, h`` per input
row; tree and force layouts return centre positions ``x, y``. All functions are
pure and deterministic; the force layout draws from a seeded xorshift64 stream.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from typing import Any

from .errors import LayoutError
from .relcore import Database
from .specmodel import LayoutBinding, PlotSpec, ViewSpec


@dataclass(frozen=True)
class Extent:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w < 0 or self.h < 0:
            raise LayoutError(f"negative extent size ({self.w}, {self.h})")

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x2(self) -> float:
        return self.x + self.w

    @property
    def y2(self) -> float:
        return self.y + self.h

    def intersection_area(self, other: Extent) -> float:
        dx = min(self.x2, other.x2) - max(self.x, other.x)
        dy = min(self.y2, other.y2) - max(self.y, other.y)
        return dx * dy if dx > 0 and dy > 0 else 0.0

    def contains(self, other: Extent, eps: float = 1e-9) -> bool:
        return (other.x >= self.x - eps and other.y >= self.y - eps
                and other.x2 <= self.x2 + eps and other.y2 <= self.y2 + eps)

    def inset(self, pad: float) -> Extent:
        pad = min(pad, self.w / 2, self.h / 2)
        return Extent(self.x + pad, self.y + pad, self.w - 2 * pad, self.h - 2 * pad)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)


@dataclass(frozen=True)
class LayoutResult:
    """Output channels aligned with the input rows."""

    columns: dict[str, list[float]]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()), []))

    def row(self, i: int) -> dict[str, float]:
        return {k: v[i] for k, v in self.columns.items()}

    def rects(self) -> list[Extent]:
        c = self.columns
        return [Extent(x, y, w, h) for x, y, w, h in zip(c["x"], c["y"], c["w"], c["h"])]


def _rects_result(rects: Sequence[Extent]) -> LayoutResult:
    return LayoutResult({"x": [r.x for r in rects], "y": [r.y for r in rects],
                         "w": [r.w for r in rects], "h": [r.h for r in rects]})


def _check_weights(weights: Sequence[float]) -> list[float]:
    ws = [float(w) for w in weights]
    if any(w < 0 or math.isnan(w) for w in ws):
        raise LayoutError("layout weights must be nonnegative")
    if ws and sum(ws) <= 0:
        raise LayoutError("layout weights are all zero")
    return ws


# -- squarify -----------------------------------------------------------------------


def _worst(row: Sequence[float], side: float) -> float:
    s = sum(row)
    if s <= 0 or side <= 0:
        return math.inf
    s2, side2 = s * s, side * side
    return max(max(side2 * r / s2, s2 / (side2 * r)) for r in row)


def _lay_row(row: list[tuple[int, float]], rect: Extent, out: dict[int, Extent], last: bool) -> Extent:
    """Place ``row`` along the shorter side of ``rect``; return the remainder."""
    s = sum(a for _, a in row)
    if rect.w >= rect.h:
        # a column on the left
        thick = rect.w if last else s / rect.h
        y = rect.y
        for j, (i, a) in enumerate(row):
            h = rect.y2 - y if j == len(row) - 1 else a / thick
            out[i] = Extent(rect.x, y, thick, h)
            y += h
        return Extent(rect.x + thick, rect.y, max(rect.w - thick, 0.0), rect.h)
    thick = rect.h if last else s / rect.w
    x = rect.x
    for j, (i, a) in enumerate(row):
        w = rect.x2 - x if j == len(row) - 1 else a / thick
        out[i] = Extent(x, rect.y, w, thick)
        x += w
    return Extent(rect.x, rect.y + thick, rect.w, max(rect.h - thick, 0.0))


def squarify(weights: Sequence[float], extent: Extent, ordered: bool = False) -> LayoutResult:
    """Squarified treemap tiling of ``extent``.

    ``ordered=False`` (SQ) lays items out largest first; ``ordered=True`` (OS)
    keeps input order. Results are aligned with the input either way. Zero
    weights get zero-area rectangles at the extent origin.
    """
    ws = _check_weights(weights)
    if not ws:
        return _rects_result([])
    total = math.fsum(ws)  # exact, so independent of input order
    out: dict[int, Extent] = {}
    items = [(i, w) for i, w in enumerate(ws) if w > 0]
    for i, w in enumerate(ws):
        if w == 0:
            out[i] = Extent(extent.x, extent.y, 0.0, 0.0)
    if extent.w == 0 or extent.h == 0:
        axis = "HZ" if extent.w == 0 else "VT"
        res = partition([w for _, w in items], extent, axis).rects()
        for (i, _), r in zip(items, res):
            out[i] = r
        return _rects_result([out[i] for i in range(len(ws))])
    if not ordered:
        items.sort(key=lambda t: (-t[1], t[0]))
    scale = extent.area / total
    queue = [(i, w * scale) for i, w in items]
    rect = extent
    row: list[tuple[int, float]] = []
    k = 0
    while k < len(queue):
        side = min(rect.w, rect.h)
        cand = row + [queue[k]]
        if not row or _worst([a for _, a in cand], side) <= _worst([a for _, a in row], side):
            row = cand
            k += 1
        else:
            rect = _lay_row(row, rect, out, last=False)
            row = []
    if row:
        _lay_row(row, rect, out, last=True)
    return _rects_result([out[i] for i in range(len(ws))])


def partition(weights: Sequence[float], extent: Extent, axis: str) -> LayoutResult:
    """Slice-and-dice: ``VT`` cuts the width into columns, ``HZ`` the height into rows."""
    if axis not in ("VT", "HZ"):
        raise LayoutError(f"unknown partition axis {axis!r}")
    ws = _check_weights(weights)
    total = math.fsum(ws)
    rects = []
    length = extent.w if axis == "VT" else extent.h
    start = extent.x if axis == "VT" else extent.y
    end = start + length
    acc = 0.0
    for j, w in enumerate(ws):
        lo = start + length * acc / total
        acc += w
        hi = end if j == len(ws) - 1 else start + length * acc / total
        if axis == "VT":
            rects.append(Extent(lo, extent.y, hi - lo, extent.h))
        else:
            rects.append(Extent(extent.x, lo, extent.w, hi - lo))
    return _rects_result(rects)


def grid(n: int, extent: Extent, cols: int | None = None) -> LayoutResult:
    """Equal cells in row-major order (the EQ layout)."""
    if n < 0:
        raise LayoutError("grid needs a nonnegative count")
    if n == 0:
        return _rects_result([])
    cols = cols or math.ceil(math.sqrt(n))
    if cols < 1:
        raise LayoutError("grid needs at least one column")
    rows = math.ceil(n / cols)
    cw, ch = extent.w / cols, extent.h / rows
    return _rects_result([Extent(extent.x + (i % cols) * cw, extent.y + (i // cols) * ch, cw, ch)
                          for i in range(n)])


# -- tree --------------------------------------------------------------------------------


def tree_layout(edges: Sequence[tuple[Any, Any]], extent: Extent) -> LayoutResult:
    """Layered tree drawing of a forest.

    ``edges`` holds one ``(key, parent_key)`` pair per node in input order; a
    null or self parent marks a root. Leaves take evenly spaced slots in
    depth-first order, parents sit at the mean x of their children, and depth
    levels are evenly spaced top to bottom.
    """
    keys = [k for k, _ in edges]
    if len(set(keys)) != len(keys):
        raise LayoutError("tree node keys must be unique")
    pos = {k: i for i, k in enumerate(keys)}
    children: dict[Any, list[Any]] = {k: [] for k in keys}
    roots = []
    for k, p in edges:
        if p is None or p == k:
            roots.append(k)
        elif p not in pos:
            raise LayoutError(f"tree node {k!r} has unknown parent {p!r}")
        else:
            children[p].append(k)
    depth: dict[Any, int] = {}
    order: list[Any] = []
    for r in roots:
        stack = [(r, 0)]
        while stack:
            node, d = stack.pop()
            depth[node] = d
            order.append(node)
            for c in reversed(children[node]):
                stack.append((c, d + 1))
    if len(depth) != len(keys):
        witness = next(k for k in keys if k not in depth)
        raise LayoutError(f"tree contains a cycle through node {witness!r}")
    leaves = [k for k in order if not children[k]]
    n_leaves = max(len(leaves), 1)
    levels = max(depth.values(), default=0) + 1
    xs: dict[Any, float] = {}
    for slot, k in enumerate(leaves):
        xs[k] = extent.x + (slot + 0.5) * extent.w / n_leaves
    for k in reversed(order):
        if children[k]:
            xs[k] = sum(xs[c] for c in children[k]) / len(children[k])
    ys = {k: extent.y + (depth[k] + 0.5) * extent.h / levels for k in keys}
    return LayoutResult({"x": [xs[k] for k in keys], "y": [ys[k] for k in keys]})


# -- force -----------------------------------------------------------------------------------


class XorShift64:
    """xorshift64 (shifts 13, 7, 17); ``uniform`` uses the top 53 bits."""

    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = (seed & self.MASK) or 0x9E3779B97F4A7C15

    def next(self) -> int:
        x = self.state
        x ^= (x << 13) & self.MASK
        x ^= x >> 7
        x ^= (x << 17) & self.MASK
        self.state = x
        return x

    def uniform(self) -> float:
        return (self.next() >> 11) / float(1 << 53)


DEFAULT_ITERATIONS = 300


def force_layout(edges: Sequence[tuple[Any, Any]], node_keys: Sequence[Any], extent: Extent,
                 seed: int, iterations: int = DEFAULT_ITERATIONS,
                 node_sizes: Sequence[tuple[float, float]] | None = None) -> LayoutResult:
    """Fruchterman-Reingold placement of node centres.

    Repulsion ``k^2/d`` and attraction ``d^2/k`` with ``k = sqrt(area/n)``; node
    sizes shrink the distance used for repulsion, so large nodes push harder.
    The step limit cools linearly from ``max(w, h)/10`` to zero. Centres are
    clamped so each node box stays inside ``extent``.
    """
    n = len(node_keys)
    index = {k: i for i, k in enumerate(node_keys)}
    if len(index) != n:
        raise LayoutError("force layout node keys must be unique")
    links = []
    for s, t in edges:
        if s not in index or t not in index:
            bad = s if s not in index else t
            raise LayoutError(f"edge endpoint {bad!r} is not a node")
        if s != t:
            links.append((index[s], index[t]))
    sizes = list(node_sizes) if node_sizes is not None else [(0.0, 0.0)] * n
    if len(sizes) != n:
        raise LayoutError("one size per node is required")
    rng = XorShift64(seed)

    def bounds(i: int) -> tuple[float, float, float, float]:
        hw, hh = min(sizes[i][0], extent.w) / 2, min(sizes[i][1], extent.h) / 2
        return extent.x + hw, extent.x2 - hw, extent.y + hh, extent.y2 - hh

    xs, ys = [], []
    for i in range(n):
        x0, x1, y0, y1 = bounds(i)
        xs.append(x0 + rng.uniform() * (x1 - x0))
        ys.append(y0 + rng.uniform() * (y1 - y0))
    if n == 0 or iterations <= 0:
        return LayoutResult({"x": xs, "y": ys})
    k = math.sqrt(max(extent.area, 1e-9) / n)
    radius = [math.hypot(w, h) / 2 for w, h in sizes]
    t0 = max(extent.w, extent.h) / 10
    for it in range(iterations):
        temp = t0 * (1 - it / iterations)
        dx = [0.0] * n
        dy = [0.0] * n
        for i in range(n):
            for j in range(i + 1, n):
                ddx, ddy = xs[i] - xs[j], ys[i] - ys[j]
                dist = math.hypot(ddx, ddy)
                if dist < 1e-9:
                    ang = rng.uniform() * 2 * math.pi
                    ddx, ddy, dist = math.cos(ang) * 1e-3, math.sin(ang) * 1e-3, 1e-3
                eff = max(dist - radius[i] - radius[j], 0.01 * k)
                f = k * k / eff
                ux, uy = ddx / dist, ddy / dist
                dx[i] += ux * f
                dy[i] += uy * f
                dx[j] -= ux * f
                dy[j] -= uy * f
        for i, j in links:
            ddx, ddy = xs[i] - xs[j], ys[i] - ys[j]
            dist = math.hypot(ddx, ddy)
            if dist < 1e-9:
                continue
            f = dist * dist / k
            ux, uy = ddx / dist, ddy / dist
            dx[i] -= ux * f
            dy[i] -= uy * f
            dx[j] += ux * f
            dy[j] += uy * f
        for i in range(n):
            d = math.hypot(dx[i], dy[i])
            if d > 0:
                step = min(d, temp)
                xs[i] += dx[i] / d * step
                ys[i] += dy[i] / d * step
            x0, x1, y0, y1 = bounds(i)
            xs[i] = min(max(xs[i], x0), x1)
            ys[i] = min(max(ys[i], y0), y1)
    return LayoutResult({"x": xs, "y": ys})


# -- input validation -----------------------------------------------------------------------


class LayoutScope(str, Enum):
    SCALAR = "Scalar"
    ROW = "Row"
    TABLE = "Table"
    RELATED_ROWS = "RelatedRows"
    RELATED_TABLES = "RelatedTables"
    GLOBAL = "Global"


@dataclass(frozen=True)
class LayoutVerdict:
    ok: bool
    scope: LayoutScope
    message: str = ""


def validate_layout_inputs(db: Database, spec: PlotSpec, view: ViewSpec,
                           binding: LayoutBinding) -> LayoutVerdict:
    """Every table a layout reads must be connected to the view's table."""
    from .resolver import connected

    if view.table not in db.tables:
        return LayoutVerdict(False, LayoutScope.TABLE, f"unknown table {view.table!r}")
    table = db.table(view.table)
    if binding.algo == "force":
        e = binding.edges
        if e.table not in db.tables:
            return LayoutVerdict(False, LayoutScope.RELATED_TABLES, f"unknown edge table {e.table!r}")
        et = db.table(e.table)
        for a in (e.src, e.dst):
            if a not in et.schema:
                return LayoutVerdict(False, LayoutScope.RELATED_TABLES, f"{e.table} has no attribute {a!r}")
        if e.table != view.table and not connected(db, e.table, view.table):
            return LayoutVerdict(False, LayoutScope.RELATED_TABLES,
                                 f"edge table {e.table} is not connected to {view.table} by constraints")
        return LayoutVerdict(True, LayoutScope.RELATED_TABLES)
    if binding.algo == "tree":
        key = binding.key or (table.primary_key[0] if len(table.primary_key) == 1 else None)
        if key is None or key not in table.schema:
            return LayoutVerdict(False, LayoutScope.TABLE, f"tree layout needs a single key column in {table.name}")
        if binding.parent not in table.schema:
            return LayoutVerdict(False, LayoutScope.TABLE, f"{table.name} has no attribute {binding.parent!r}")
        return LayoutVerdict(True, LayoutScope.TABLE)
    if isinstance(binding.weight, str):
        if binding.weight not in table.schema:
            return LayoutVerdict(False, LayoutScope.TABLE, f"{table.name} has no attribute {binding.weight!r}")
        if not table.schema.type_of(binding.weight).numeric:
            return LayoutVerdict(False, LayoutScope.TABLE, f"weight {binding.weight!r} is not numeric")
    return LayoutVerdict(True, LayoutScope.TABLE)
