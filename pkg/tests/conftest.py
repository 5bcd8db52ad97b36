import pytest

from dvl.relcore import Database, make_table


@pytest.fixture
def nodelink_db() -> Database:
    n = make_table("N", [("id", "integer"), ("a", "real"), ("b", "real")],
                   [(1, 1.0, 2.0), (2, 3.0, 1.0), (3, 2.0, 5.0)])
    e = make_table("E", [("id", "integer"), ("s", "integer"), ("t", "integer")], [(0, 1, 2), (1, 2, 3)])
    db = Database({"N": n, "E": e})
    return db.with_constraints(db.foreign_key("C1", "E", ["s"], "N", ["id"]),
                               db.foreign_key("C2", "E", ["t"], "N", ["id"]))


NODELINK_SPEC = {
    "width": 200, "height": 100,
    "views": [
        {"name": "VN", "table": "N", "mark": "point", "encodings": {"x": "a", "y": "b"}},
        {"name": "VE", "table": "E", "mark": "link", "spread": [
            {"ref": {"view": "VN", "filter": ["s"], "props": {"x1": "x", "y1": "y"}}},
            {"ref": {"view": "VN", "filter": ["t"], "props": {"x2": "x", "y2": "y"}}}]}],
}


def aspect(r) -> float:
    return max(r.w / r.h, r.h / r.w) if r.w > 0 and r.h > 0 else float("inf")


def tiling_errors(rects, extent, weights, rel=1e-9):
    """Ways in which ``rects`` fail to tile ``extent`` proportionally to ``weights``."""
    errs = []
    total = sum(weights)
    for i, (r, w) in enumerate(zip(rects, weights)):
        if not extent.contains(r, eps=1e-9 * max(extent.w, extent.h, 1)):
            errs.append(f"rect {i} {r} leaves {extent}")
        share = r.area / extent.area
        if abs(share - w / total) > rel:
            errs.append(f"rect {i} share {share} != {w / total}")
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            ov = rects[i].intersection_area(rects[j])
            if ov > 1e-9 * extent.area:
                errs.append(f"rects {i} and {j} overlap by {ov}")
    if abs(sum(r.area for r in rects) - extent.area) > 1e-6 * extent.area:
        errs.append("areas do not sum to the extent")
    return errs
