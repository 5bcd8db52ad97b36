"""Scales: train on value streams, then map values to pixels or paint.

A scale is the simplest layout: it sees one attribute value at a time. Training
and application are separate phases so that a named scale shared by several
views is trained over all of their attributes before any of them is applied.
"""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass, field
from typing import Any

from .errors import ScaleError

# ordinal paint palette (10 categories, cycled beyond that)
PALETTE = ("#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
           "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac")
# two-stop ramp for numeric paint
RAMP = ("#deebf7", "#08519c")
SYMBOLS = ("circle", "square", "triangle", "diamond", "cross", "star")

NAMED_COLORS = {
    "black": "#000000", "white": "#ffffff", "red": "#ff0000", "green": "#008000",
    "blue": "#0000ff", "gray": "#808080", "grey": "#808080", "orange": "#ffa500",
    "steelblue": "#4682b4", "none": "none",
}


def _family(v: Any) -> str:
    if isinstance(v, bool):
        return "boolean"
    if isinstance(v, (int, float)):
        return "number"
    if isinstance(v, str):
        return "text"
    raise ScaleError(f"cannot scale value {v!r}")


@dataclass(eq=False)
class Scale:
    name: str
    kind: str = "linear"
    explicit_domain: tuple | None = None
    range: tuple | None = None
    domain: tuple = ()
    family: str | None = None
    apply_log: list[tuple[str, str, str]] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("linear", "ordinal", "identity"):
            raise ScaleError(f"unknown scale kind {self.kind!r}")
        if self.explicit_domain is not None:
            self.domain = tuple(self.explicit_domain)
            for v in self.domain:
                self._note_family(v)

    def __repr__(self) -> str:
        return f"Scale({self.name!r}, {self.kind}, domain={list(self.domain)}, range={self.range})"

    def _note_family(self, v: Any) -> None:
        fam = _family(v)
        if self.family is None:
            self.family = fam
        elif self.family != fam:
            raise ScaleError(f"scale {self.name}: mixed {self.family} and {fam} values")

    @property
    def trained(self) -> bool:
        return bool(self.domain)

    def train(self, values: Iterable[Any]) -> Scale:
        """Extend the domain with ``values`` (nulls ignored); repeatable and idempotent."""
        vals = [v for v in values if v is not None]
        for v in vals:
            self._note_family(v)
        if self.kind == "identity" or self.explicit_domain is not None or not vals:
            return self
        if self.kind == "linear":
            if self.family != "number":
                raise ScaleError(f"linear scale {self.name} needs numbers, got {self.family}")
            lo, hi = min(vals), max(vals)
            if self.domain:
                lo, hi = min(lo, self.domain[0]), max(hi, self.domain[1])
            self.domain = (lo, hi)
        else:
            seen = list(self.domain)
            known = set(seen)
            for v in vals:
                if v not in known:
                    known.add(v)
                    seen.append(v)
            self.domain = tuple(seen)
        return self

    def record(self, view: str, channel: str, attr: str) -> None:
        entry = (view, channel, attr)
        if entry not in self.apply_log:
            self.apply_log.append(entry)

    # -- application --------------------------------------------------------------

    def position(self, value: Any, lo: float | None = None, hi: float | None = None) -> Any:
        """Map ``value`` into the pixel interval [lo, hi] (default: the scale's range)."""
        if value is None:
            return None
        if self.kind == "identity":
            return value
        if lo is None or hi is None:
            if self.range is None:
                raise ScaleError(f"scale {self.name} has no range")
            if self.kind == "ordinal" and len(self.range) == len(self.domain) and len(self.range) != 2:
                return self.range[self._index(value)]
            lo, hi = self.range[0], self.range[-1]
        if self.kind == "linear":
            if not self.domain:
                return (lo + hi) / 2
            dmin, dmax = self.domain
            if dmax == dmin:
                return (lo + hi) / 2
            v = min(max(value, dmin), dmax)
            return lo + (v - dmin) / (dmax - dmin) * (hi - lo)
        i = self._index(value)
        n = len(self.domain)
        return lo + (i + 0.5) * (hi - lo) / n

    apply = position

    def _index(self, value: Any) -> int:
        for i, d in enumerate(self.domain):
            if d == value and _family(d) == _family(value):
                return i
        raise ScaleError(f"value {value!r} is not in the domain of scale {self.name}")

    def paint(self, value: Any) -> Any:
        """Map ``value`` to a color."""
        if value is None:
            return None
        if self.kind == "identity":
            return value
        if self.kind == "ordinal":
            colors = self.range or PALETTE
            return colors[self._index(value) % len(colors)]
        stops = self.range or RAMP
        t = self.position(value, 0.0, 1.0)
        return interpolate(stops[0], stops[-1], t)

    def symbol(self, value: Any) -> Any:
        if value is None or self.kind == "identity":
            return value
        names = self.range or SYMBOLS
        if self.kind == "linear":
            return names[min(int(self.position(value, 0.0, len(names) - 1e-9)), len(names) - 1)]
        return names[self._index(value) % len(names)]


def to_rgb(color: str) -> tuple[int, int, int]:
    c = NAMED_COLORS.get(color, color)
    if not (isinstance(c, str) and c.startswith("#") and len(c) == 7):
        raise ScaleError(f"unsupported color {color!r}")
    return int(c[1:3], 16), int(c[3:5], 16), int(c[5:7], 16)


def interpolate(a: str, b: str, t: float) -> str:
    ra, rb = to_rgb(a), to_rgb(b)
    mix = [round(x + (y - x) * t) for x, y in zip(ra, rb)]
    return "#" + "".join(f"{v:02x}" for v in mix)


def train(scale: Scale, values: Iterable[Any]) -> Scale:
    return scale.train(values)


def apply(scale: Scale, value: Any) -> Any:
    return scale.position(value)


def domains_equal(s1: Scale, s2: Scale) -> bool:
    return s1.kind == s2.kind and tuple(s1.domain) == tuple(s2.domain)


def ranges_equal(s1: Scale, s2: Scale) -> bool:
    return s1.range is not None and s2.range is not None and tuple(s1.range) == tuple(s2.range)
