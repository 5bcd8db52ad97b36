import pytest
from hypothesis import given, settings, strategies as st

from dvl.errors import AmbiguousReference, DanglingReference, RefError
from dvl.relcore import Database, make_table
from dvl.resolver import Hop, enumerate_paths, evaluate_ref, get, validate_ref
from dvl.specmodel import Filter, ForeignRef, ViewSpec, spec_from_json

from conftest import NODELINK_SPEC


def test_two_paths_edges_to_nodes(nodelink_db):
    paths = enumerate_paths(nodelink_db, "E", "N")
    assert sorted(p.constraints() for p in paths) == [("C1",), ("C2",)]


def test_self_path():
    n = make_table("N", [("id", "integer"), ("p", "integer")], [(0, None), (1, 0), (2, 0)])
    db = Database({"N": n})
    db = db.with_constraints(db.foreign_key("C", "N", ["p"], "N", ["id"]))
    [p] = enumerate_paths(db, "N", "N", max_hops=1)
    assert p.hops == (Hop("C"),)


def test_unrelated_tables():
    db = Database({"A": make_table("A", [("a", "integer")], []), "B": make_table("B", [("b", "integer")], [])})
    assert enumerate_paths(db, "A", "B") == []


def test_validate_keyed_ref_preserves_key(nodelink_db):
    spec = spec_from_json(NODELINK_SPEC)
    ve = spec.view("VE")
    ref = ve.encodings["x1"]
    info = validate_ref(nodelink_db, spec, ve, ref, props=("x", "y"))
    assert info.unambiguous and info.returns_key and not info.aggregated
    assert info.path.hops == (Hop("C1"),)


def test_validate_unnamed_filter_is_ambiguous(nodelink_db):
    spec = spec_from_json(NODELINK_SPEC)
    ref = ForeignRef(view="VN", prop="x")
    with pytest.raises(AmbiguousReference):
        validate_ref(nodelink_db, spec, spec.view("VE"), ref)


def test_validate_predicate_with_agg():
    t = make_table("T", [("id", "integer"), ("color", "text"), ("x", "real")],
                   [(0, "green", 1.0), (1, "green", 4.0), (2, "red", 9.0)])
    s = make_table("S", [("id", "integer")], [(0,)])
    db = Database({"T": t, "S": s})
    ref = ForeignRef(table="T", filter=Filter("pred", eq=(("color", "green"),)), prop="x", agg="max")
    view = ViewSpec("VS", "S", "point")
    info = validate_ref(db, None, view, ref)
    assert info.unambiguous and not info.preserves_key
    assert evaluate_ref(db, None, view, ref, list(t.records()), info) == [4.0]
    with pytest.raises(AmbiguousReference):
        validate_ref(db, None, view, ForeignRef(table="T", filter=Filter("pred", eq=(("color", "green"),)),
                                                 prop="x"))


def test_validate_general_hop_needs_agg():
    a = make_table("A", [("id", "integer"), ("k", "integer")], [(0, 1)])
    b = make_table("B", [("id", "integer"), ("k", "integer")], [(0, 1), (1, 1)])
    db = Database({"A": a, "B": b})
    db = db.with_constraints(db.foreign_key("G", "A", ["k"], "B", ["k"]))
    view = ViewSpec("VA", "A", "point")
    with pytest.raises(RefError):
        validate_ref(db, None, view, ForeignRef(table="B", filter=Filter("keys", ("k",)), prop="id"))
    ref = ForeignRef(table="B", filter=Filter("keys", ("k",)), prop="id", agg="count")
    info = validate_ref(db, None, view, ref)
    assert info.aggregated
    assert evaluate_ref(db, None, view, ref, list(b.records()), info) == [2]


def test_all_filter_requires_agg(nodelink_db):
    view = ViewSpec("VE", "E", "link")
    with pytest.raises(AmbiguousReference):
        validate_ref(nodelink_db, None, view, ForeignRef(table="N", filter=Filter("all"), prop="a"))


def test_get_keyed_lookup_renames():
    marks = [{"id": 1, "x": 10.0, "y": 5.0}, {"id": 2, "x": 20.0, "y": 6.0}]
    rows = [{"aid": 2}, {"aid": 1}]
    assert get(marks, rows, {"aid": "id"}, {"x1": "x", "y1": "y"}) == [
        {"x1": 20.0, "y1": 6.0}, {"x1": 10.0, "y1": 5.0}]


def test_get_max_right_edge():
    marks = [{"x": 0.0, "w": 30.0}, {"x": 5.0, "w": 50.0}, {"x": 60.0, "w": 1.0}]
    right = get(marks, [{}], None, ["x", "w"], lambda ms, row: max(m["x"] + m["w"] for m in ms))
    assert right == [61.0]


def test_get_empty_marks_count():
    assert get([], [{"a": 1}], None, "x", "count") == [0]


def test_get_errors():
    marks = [{"id": 1}, {"id": 1}]
    with pytest.raises(AmbiguousReference):
        get(marks, [{"k": 1}], {"k": "id"}, "id")
    with pytest.raises(DanglingReference):
        get(marks, [{"k": 2}], {"k": "id"}, "id")
    with pytest.raises(AmbiguousReference):
        get(marks, [{}], None, "id")


def test_dangling_reference_raises():
    n = make_table("N", [("id", "integer"), ("a", "real")], [(1, 0.0)])
    e = make_table("E", [("id", "integer"), ("s", "integer")], [(0, 9)])
    db = Database({"N": n, "E": e})
    db = db.with_constraints(db.foreign_key("C", "E", ["s"], "N", ["id"]))
    ref = ForeignRef(table="N", filter=Filter("keys", ("s",)), prop="a")
    with pytest.raises(DanglingReference):
        evaluate_ref(db, None, ViewSpec("VE", "E", "link"), ref, list(n.records()))


# -- equivalence with a brute-force join ----------------------------------------


@st.composite
def _chain_db(draw):
    """A(id, b1, b2) -> B(id, c) -> C(id, val), foreign keys always satisfied."""
    nc = draw(st.integers(1, 8))
    nb = draw(st.integers(1, 8))
    na = draw(st.integers(0, 20))
    vals = draw(st.lists(st.integers(-99, 99), min_size=nc, max_size=nc))
    c = make_table("C", [("id", "integer"), ("val", "integer")], list(enumerate(vals)))
    b = make_table("B", [("id", "integer"), ("c", "integer")],
                   [(i, draw(st.integers(0, nc - 1))) for i in range(nb)])
    a = make_table("A", [("id", "integer"), ("b1", "integer"), ("b2", "integer")],
                   [(i, draw(st.integers(0, nb - 1)), draw(st.integers(0, nb - 1))) for i in range(na)])
    db = Database({"A": a, "B": b, "C": c})
    return db.with_constraints(db.foreign_key("F1", "A", ["b1"], "B", ["id"]),
                               db.foreign_key("F2", "A", ["b2"], "B", ["id"]),
                               db.foreign_key("G", "B", ["c"], "C", ["id"]))


@settings(max_examples=80, deadline=None)
@given(_chain_db(), st.sampled_from(["b1", "b2"]))
def test_matches_brute_force_join(db, attr):
    a, b, c = db.table("A"), db.table("B"), db.table("C")
    view = ViewSpec("VA", "A", "point")
    ref = ForeignRef(table="C", filter=Filter("keys", (attr,)), prop="val")
    info = validate_ref(db, None, view, ref)
    assert [h.constraint for h in info.path.hops] == ["F1" if attr == "b1" else "F2", "G"]
    got = evaluate_ref(db, None, view, ref, list(c.records()), info)
    expected = []
    for ra in a.records():
        hits = [rc["val"] for rb in b.records() if rb["id"] == ra[attr]
                for rc in c.records() if rc["id"] == rb["c"]]
        assert len(hits) == 1
        expected.append(hits[0])
    assert got == expected
    # the count along the same path is at least one whenever the constraints hold
    cnt = ForeignRef(table="C", filter=Filter("keys", (attr,)), prop="val", agg="count")
    assert all(n >= 1 for n in evaluate_ref(db, None, view, cnt, list(c.records())))


@settings(max_examples=40, deadline=None)
@given(_chain_db())
def test_unnamed_chain_is_ambiguous(db):
    with pytest.raises(AmbiguousReference):
        validate_ref(db, None, ViewSpec("VA", "A", "point"), ForeignRef(table="C", prop="val"))
