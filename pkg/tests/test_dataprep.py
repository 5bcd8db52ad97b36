from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from dvl.dataprep import (AggExpr, GroupBy, Hier, Join, Normalize, NormalizeMany, Select, TransformPlan,
                          comparable_rows, emit_sql, groupby, hier, join, normalize, normalize_many,
                          run_sql, select)
from dvl.errors import PlanError
from dvl.relcore import AttributeType, Database, check_fk, check_key, make_table


def _db(*tables, fks=()):
    db = Database({t.name: t for t in tables})
    return db.with_constraints(*fks) if fks else db


def _join_back(fact, dims, cols):
    """Rebuild the original rows (restricted to ``cols``) from a fact table and its dims."""
    out = []
    for row in fact.records():
        rec = dict(row)
        for dim in dims:
            ref = rec.pop(f"{dim.name}_id")
            hit = [d for d in dim.records() if d["id"] == ref]
            assert len(hit) == 1
            rec.update({k: v for k, v in hit[0].items() if k != "id"})
        out.append(tuple(rec[c] for c in cols))
    return Counter(out)


def test_normalize_single_attribute():
    t = make_table("T", [("a", "integer"), ("b", "text")], [(1, "x"), (2, "y"), (3, "x")])
    dim, fact, fk = normalize(_db(t), "T", ["b"], "B", "A")
    assert dim.schema.names == ("id", "b")
    assert dim.rows == ((0, "x"), (1, "y"))
    assert fact.schema.names == ("id", "a", "B_id")
    assert (fk.src_table, fk.src_attrs, fk.dst_table, fk.dst_attrs) == ("A", ("B_id",), "B", ("id",))
    assert fk.dst_is_key and not fk.src_is_key
    assert _join_back(fact, [dim], ["id", "a", "b"]) == Counter(tuple(r) for r in t.rows)


def test_normalize_whole_single_column_table():
    t = make_table("T", [("v", "text")], [("p",), ("q",), ("p",)], primary_key=None)
    dim, fact, _ = normalize(_db(t), "T", ["v"], "D", "F")
    assert sorted(dim.column("v")) == ["p", "q"]
    assert fact.column("D_id") == [0, 1, 0]


def test_normalize_constant_column():
    t = make_table("T", [("a", "integer"), ("c", "text")], [(i, "k") for i in range(5)])
    dim, fact, _ = normalize(_db(t), "T", ["c"], "D", "F")
    assert len(dim) == 1
    assert _join_back(fact, [dim], ["id", "a", "c"]) == Counter(tuple(r) for r in t.rows)


def test_normalize_name_collision():
    t = make_table("T", [("a", "integer")], [(1,)])
    with pytest.raises(PlanError):
        normalize(_db(t), "T", ["a"], "T", "F")


def test_normalize_many_two_groups():
    t = make_table("T", [("sex", "integer"), ("age", "integer")], [(0, 40), (1, 40), (0, 50)])
    pairs, fact = normalize_many(_db(t), "T", [["sex"], ["age"]], ["Tsex", "Tage"], "Tf")
    assert [d.name for d, _ in pairs] == ["Tsex", "Tage"]
    assert {"Tsex_id", "Tage_id"} <= set(fact.schema.names)
    dims = [d for d, _ in pairs]
    assert _join_back(fact, dims, ["id", "sex", "age"]) == Counter(tuple(r) for r in t.rows)


def test_normalize_many_single_group_matches_normalize():
    t = make_table("T", [("a", "integer"), ("b", "text")], [(1, "x"), (2, "y"), (3, "x")])
    [(dim, fk)], fact = normalize_many(_db(t), "T", [["b"]], ["B"], "A")
    dim2, fact2, fk2 = normalize(_db(t), "T", ["b"], "B", "A")
    assert dim.rows == dim2.rows and fact.rows == fact2.rows and fk == fk2


def test_normalize_many_overlapping_groups():
    t = make_table("T", [("a", "integer"), ("b", "integer")], [(1, 2)])
    with pytest.raises(PlanError, match="overlapping"):
        normalize_many(_db(t), "T", [["a"], ["a", "b"]])


_cell = st.one_of(st.none(), st.integers(0, 3))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(_cell, _cell, _cell), max_size=15))
def test_normalize_lossless(rows):
    t = make_table("T", [("a", "integer"), ("b", "integer"), ("c", "integer")], rows)
    db = _db(t)
    pairs, fact = normalize_many(db, "T", [["a"], ["b", "c"]], ["Da", "Dbc"], "F")
    dims = [d for d, _ in pairs]
    assert _join_back(fact, dims, ["id", "a", "b", "c"]) == Counter(tuple(r) for r in t.rows)
    out = db.with_tables(fact, *dims).with_constraints(*(fk for _, fk in pairs))
    for _, fk in pairs:
        assert check_fk(out, fk)
    for d in dims:
        assert check_key(d, ["id"])


def _housing():
    rows = [("sf", "condo", 900.0, 1), ("sf", "house", 1500.0, 3), ("sf", "condo", 700.0, 2),
            ("la", "house", 1100.0, 4), ("la", "house", 1000.0, 2)]
    return make_table("T", [("city", "text"), ("type", "text"), ("price", "real"), ("bdrms", "integer")],
                      rows)


def test_hier_two_levels():
    t = _housing()
    (tc, tt), (fk,) = hier(_db(t), "T", ["city", "type"],
                          [[AggExpr("avg", "price", "price")], [AggExpr("avg", "bdrms", "bdrms")]],
                          ["Tc", "Tt"])
    assert tc.schema.names == ("city", "price")
    assert tt.schema.names == ("city", "type", "bdrms")
    assert (fk.src_table, fk.src_attrs, fk.dst_table, fk.dst_attrs) == ("Tt", ("city",), "Tc", ("city",))
    assert check_key(tc, ["city"]) and check_key(tt, ["city", "type"])
    db = _db(t).with_tables(tc, tt).with_constraints(fk)
    assert check_fk(db, fk)
    # brute-force mean per group
    for rec in tc.records():
        prices = [r["price"] for r in t.records() if r["city"] == rec["city"]]
        assert rec["price"] == pytest.approx(sum(prices) / len(prices))
    for rec in tt.records():
        b = [r["bdrms"] for r in t.records() if (r["city"], r["type"]) == (rec["city"], rec["type"])]
        assert rec["bdrms"] == pytest.approx(sum(b) / len(b))


def test_hier_single_level():
    tables, fks = hier(_db(_housing()), "T", ["city"], [[AggExpr("count", None, "n")]])
    assert len(tables) == 1 and fks == []


def test_hier_rejects_text_avg():
    with pytest.raises(PlanError):
        hier(_db(_housing()), "T", ["city"], [[AggExpr("avg", "type", "x")]])


def test_aggexpr_parse():
    assert AggExpr.parse("n", "count()") == AggExpr("count", None, "n")
    assert AggExpr.parse("s", "sum(price)") == AggExpr("sum", "price", "s")
    with pytest.raises(PlanError):
        AggExpr.parse("x", "median(price)")
    with pytest.raises(PlanError):
        AggExpr("sum", None, "x")


def test_groupby_count():
    t = make_table("T", [("cp", "integer")], [(0,), (1,), (0,), (0,)])
    g, _ = groupby(_db(t), "T", ["cp"], [AggExpr("count", None, "n")], "G")
    assert {r["cp"]: r["n"] for r in g.records()} == {0: 3, 1: 1}
    assert g.primary_key == ("cp",)


def test_groupby_all_columns_counts_one():
    t = make_table("T", [("a", "integer"), ("b", "integer")], [(1, 1), (1, 2), (2, 1)], primary_key=None)
    g, _ = groupby(_db(t), "T", ["id", "a", "b"], [AggExpr("count", None, "n")], "G")
    assert set(g.column("n")) == {1}


def test_groupby_sum_matches_loop():
    rows = [(i % 3, i) for i in range(10)]
    t = make_table("T", [("k", "integer"), ("v", "integer")], rows)
    g, fks = groupby(_db(t), "T", ["k"], [AggExpr("sum", "v", "s")], "G")
    expected = {}
    for k, v in rows:
        expected[k] = expected.get(k, 0) + v
    assert {r["k"]: r["s"] for r in g.records()} == expected
    assert all(isinstance(s, int) for s in g.column("s"))
    db = _db(t).with_tables(g).with_constraints(*fks)
    assert all(check_fk(db, fk) for fk in fks)


def test_select_adds_boolean():
    t = make_table("T", [("chol", "integer")], [(200,), (250,)])
    s, _ = select(_db(t), "T", [("*", "*"), ("sel", "chol > 230")], "S")
    assert s.schema.type_of("sel") is AttributeType.BOOLEAN
    assert s.column("sel") == [False, True]
    assert s.primary_key == ("id",)


def test_select_identity_and_format():
    t = make_table("T", [("id1", "integer"), ("id2", "integer")], [(1, 2), (3, 4)], primary_key=None)
    s, _ = select(_db(t), "T", [("id1", "id1"), ("lab", 'f"{id1}={id2}"')], "S")
    assert s.column("id1") == [1, 3]
    assert s.column("lab") == ["1=2", "3=4"]
    assert s.schema.type_of("lab") is AttributeType.TEXT


def test_select_errors():
    t = make_table("T", [("a", "integer")], [(1,)])
    with pytest.raises(PlanError):
        select(_db(t), "T", [("x", "nope + 1")], "S")
    with pytest.raises(PlanError):
        select(_db(t), "T", [("x", "a + 'q'")], "S")


def test_join_edges_with_nodes():
    n = make_table("N", [("id", "integer"), ("x", "real")], [(1, 0.5), (2, 1.5)])
    e = make_table("E", [("id", "integer"), ("s", "integer"), ("t", "integer")], [(0, 1, 2), (1, 2, 1)])
    j = join(_db(n, e), "E", "N", (["s"], ["id"]), None, "J")
    assert "E_id" in j.schema.names and "N_id" in j.schema.names
    assert [r["x"] for r in j.records()] == [0.5, 1.5]


def test_join_empty_right():
    n = make_table("N", [("id", "integer")], [])
    e = make_table("E", [("s", "integer")], [(1,)])
    assert len(join(_db(n, e), "E", "N", (["s"], ["id"]), [("s", "s")], "J")) == 0


def test_join_ambiguous_projection():
    a = make_table("A", [("k", "integer")], [(1,)])
    b = make_table("B", [("k", "integer")], [(1,)])
    with pytest.raises(PlanError, match="ambiguous"):
        join(_db(a, b), "A", "B", (["k"], ["k"]), [("k", "k")], "J")


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 4), max_size=10), st.lists(st.integers(0, 4), max_size=10))
def test_join_count_matches_nested_loops(lv, rv):
    a = make_table("A", [("k", "integer")], [(v,) for v in lv])
    b = make_table("B", [("k", "integer")], [(v,) for v in rv])
    j = join(_db(a, b), "A", "B", (["k"], ["k"]), None, "J")
    assert len(j) == sum(1 for x in lv for y in rv if x == y)


def test_emit_sql_groupby_text():
    t = make_table("T", [("cp", "integer"), ("slope", "integer")], [(0, 1)])
    plan = TransformPlan((GroupBy("T", ("cp", "slope"), (AggExpr("count", None, "n"),), "g"),))
    assert emit_sql(plan, _db(t)) == [
        'CREATE TABLE "g" AS SELECT "cp", "slope", COUNT(*) AS "n" FROM "T" GROUP BY "cp", "slope";']


def test_emit_sql_empty_plan():
    assert emit_sql(TransformPlan(), _db()) == []


def test_plan_rejects_forward_reads():
    with pytest.raises(PlanError):
        TransformPlan((GroupBy("G", ("a",), (), "H"), GroupBy("T", ("a",), (), "G")))


def test_plan_json_round_trip():
    plan = TransformPlan((NormalizeMany("T", (("a",), ("b",)), ("Da", "Db"), "F"),
                          Hier("T", ("a", "b"), ((AggExpr("count", None, "n"),),), None),
                          Select("T", (("*", "*"), ("z", "a + 1")), "S"),
                          Join("F", "Da", (("Da_id",), ("id",)), "J", None)), ("J",))
    assert TransformPlan.from_json(plan.to_json()) == plan


def _sql_matches_memory(plan, db):
    produced = plan.produced
    got = run_sql(db, emit_sql(plan, db), produced)
    mem = TransformPlan(plan.steps).execute(db)
    for name in produced:
        cols, rows = got[name]
        table = mem.table(name)
        assert cols == list(table.schema.names), name
        assert comparable_rows(rows) == comparable_rows(table.rows), name


def test_emit_sql_normalize_runs_on_sqlite():
    t = make_table("T", [("a", "integer"), ("b", "text")], [(1, "x"), (2, None), (3, "x"), (4, None)])
    plan = TransformPlan((Normalize("T", ("b",), "B", "A"),))
    assert len(emit_sql(plan, _db(t))) == 2
    _sql_matches_memory(plan, _db(t))


def test_emit_sql_every_op_runs_on_sqlite():
    t = _housing()
    plan = TransformPlan((
        Hier("T", ("city", "type"), ((AggExpr("avg", "price", "price"),),
                                     (AggExpr("max", "bdrms", "mb"), AggExpr("count", None, "n"))),
             ("Tc", "Tt")),
        Select("T", (("*", "*"), ("cheap", "price < 1000"), ("lab", 'f"{city}/{type}"')), "S"),
        Join("S", "Tc", (("city",), ("city",)), "J", (("sid", "S.id"), ("avgp", "Tc.price"))),
        NormalizeMany("T", (("city",), ("type",)), ("Dc", "Dt"), "F"),
        GroupBy("T", (), (AggExpr("sum", "bdrms", "b"), AggExpr("min", "price", "p")), "All"),
    ))
    _sql_matches_memory(plan, _db(t))
