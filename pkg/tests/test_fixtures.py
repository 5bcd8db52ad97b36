import pytest

from dvl.cli import main
from dvl.fixtures import DATA, list_fixtures, load_fixture, run_fixture


@pytest.mark.parametrize("name", list_fixtures())
def test_fixture_matches_golden(name):
    res = run_fixture(name)
    assert res.ok, res.message


def _by_key(mt):
    return {r.key: r for r in mt.records}


def test_parallel_links_leave_from_label_edges():
    ex = load_fixture("gallery-parallel-coords").execute()
    src, dst = _by_key(ex["Vsex"]), _by_key(ex["Vage"])
    rows = ex.db.table("L_sex_age").records()
    for rec, row in zip(ex["VL_sex_age"].records, rows):
        s, t = src[(row["Tsex_id"],)].extent, dst[(row["Tage_id"],)].extent
        assert rec.channels["x1"] == s.x + s.w
        assert rec.channels["y1"] == s.y + s.h / 2
        assert rec.channels["x2"] == t.x


def test_er_links_hit_column_labels():
    ex = load_fixture("er-diagram").execute()
    cols = _by_key(ex["VC"])
    for rec, row in zip(ex["VF"].records, ex.db.table("fkeys").records()):
        a, b = cols[(row["tid1"], row["col1"])], cols[(row["tid2"], row["col2"])]
        assert (rec.channels["x1"], rec.channels["y1"]) == (a.channels["x"], a.channels["y"])
        assert (rec.channels["x2"], rec.channels["y2"]) == (b.channels["x"], b.channels["y"])


def test_broken_nodelink_fails_lint():
    d = DATA / "nodelink-broken"
    assert main(["lint", "--db", str(d / "manifest.json"), "--spec", str(d / "spec.dvl.json")]) == 2


def test_unknown_fixture():
    with pytest.raises(KeyError):
        load_fixture("nope")
