import json

import pytest

from dvl.cli import main
from dvl.fixtures import DATA
from dvl.specmodel import parse_spec, validate_spec
from dvl.dataprep import TransformPlan
from dvl.manifest import load_manifest


def _fx(name, f):
    return str(DATA / name / f)


def _write_db(tmp_path, tables, constraints=()):
    for name, text in tables.items():
        (tmp_path / f"{name}.csv").write_text(text)
    doc = {"tables": [{"name": n, "path": f"{n}.csv"} for n in tables], "constraints": list(constraints)}
    (tmp_path / "db.json").write_text(json.dumps(doc))
    return str(tmp_path / "db.json")


def test_render_ok(tmp_path, capsys):
    out, marks, plan = tmp_path / "a.svg", tmp_path / "m.json", tmp_path / "p.json"
    code = main(["render", "--db", _fx("gallery-scatter", "manifest.json"),
                 "--spec", _fx("gallery-scatter", "spec.dvl.json"), "-o", str(out),
                 "--emit-marks", str(marks), "--emit-plan", str(plan)])
    assert code == 0
    assert out.read_text().startswith("<svg")
    assert json.loads(marks.read_text())
    assert json.loads(plan.read_text())["nodes"]
    assert "<svg" not in capsys.readouterr().err


def test_render_missing_table_file(tmp_path, capsys):
    doc = {"tables": [{"name": "T", "path": "missing.csv"}]}
    (tmp_path / "db.json").write_text(json.dumps(doc))
    (tmp_path / "s.json").write_text('{"views": []}')
    code = main(["render", "--db", str(tmp_path / "db.json"), "--spec", str(tmp_path / "s.json"),
                 "-o", str(tmp_path / "o.svg")])
    assert code == 1
    assert "missing.csv" in capsys.readouterr().err


def test_render_cycle(tmp_path, capsys):
    db = _write_db(tmp_path, {"N": "id,a\n0,1\n1,2\n"})
    spec = {"views": [
        {"name": "VA", "table": "N", "mark": "point",
         "encodings": {"x": {"ref": {"view": "VB", "filter": ["id"], "prop": "x"}}}},
        {"name": "VB", "table": "N", "mark": "point",
         "encodings": {"x": {"ref": {"view": "VA", "filter": ["id"], "prop": "x"}}}}]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    code = main(["render", "--db", db, "--spec", str(tmp_path / "s.json"), "-o", str(tmp_path / "o.svg")])
    assert code == 3
    assert "cycle" in capsys.readouterr().err


def test_render_execution_error(tmp_path, capsys):
    # a parent cycle in the data passes loading but breaks the tree layout
    db = _write_db(tmp_path, {"N": "id,pid\n0,1\n1,0\n"},
                   [{"name": "P", "src": {"table": "N", "attrs": ["pid"]},
                     "dst": {"table": "N", "attrs": ["id"]}}])
    spec = {"layouts": {"L": {"algo": "tree", "parent": "pid"}},
            "views": [{"name": "V", "table": "N", "mark": "point",
                       "spread": [{"layout": "L", "channels": ["x", "y"]}]}]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    code = main(["render", "--db", db, "--spec", str(tmp_path / "s.json"), "-o", str(tmp_path / "o.svg")])
    assert code == 4
    assert "cycle" in capsys.readouterr().err


def test_lint_faithful(capsys):
    code = main(["lint", "--db", _fx("nodelink", "manifest.json"), "--spec", _fx("nodelink", "spec.dvl.json")])
    assert code == 0
    assert "verdict: faithful" in capsys.readouterr().out


def test_lint_broken_lists_constraints(capsys):
    code = main(["lint", "--json", "--db", _fx("nodelink-broken", "manifest.json"),
                 "--spec", _fx("nodelink-broken", "spec.dvl.json")])
    assert code == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["fk_checks"]["C1"]["preserved"] and not report["fk_checks"]["C2"]["preserved"]


def test_lint_unmapped_table(tmp_path, capsys):
    db = _write_db(tmp_path, {"A": "a\n1\n", "B": "b\n2\n"})
    spec = {"views": [{"name": "VA", "table": "A", "mark": "point", "encodings": {"x": "a"}}]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["lint", "--db", db, "--spec", str(tmp_path / "s.json")]) == 2
    assert "UNMAPPED" in capsys.readouterr().out


def test_hive_end_to_end(tmp_path):
    out, spec_out, prep_out = tmp_path / "h.svg", tmp_path / "s.json", tmp_path / "p.json"
    code = main(["hive", "--program", _fx("hive-housing", "program.hive"), "--table", "T",
                 "--db", _fx("hive-housing", "manifest.json"), "-o", str(out),
                 "--emit-spec", str(spec_out), "--emit-prep", str(prep_out)])
    assert code == 0
    assert out.read_text().count("<rect") > 0
    db = load_manifest(_fx("hive-housing", "manifest.json"))
    plan = TransformPlan.from_json(prep_out.read_text())
    assert validate_spec(parse_spec(spec_out.read_text()), plan.execute(db)) == []


def test_hive_bad_program(tmp_path, capsys):
    (tmp_path / "bad.hive").write_text("sHier(/,$city); sLayout(/,XX)")
    code = main(["hive", "--program", str(tmp_path / "bad.hive"), "--table", "T",
                 "--db", _fx("hive-housing", "manifest.json"), "-o", str(tmp_path / "o.svg")])
    assert code == 1
    assert "line 1, col 27" in capsys.readouterr().err


def test_sql(tmp_path, capsys):
    db = _write_db(tmp_path, {"T": "cp,slope\n0,1\n1,1\n"})
    plan = {"steps": [{"op": "groupby", "table": "T", "keys": ["cp", "slope"], "aggs": {"n": "count()"},
                       "out": "g"}]}
    (tmp_path / "plan.json").write_text(json.dumps(plan))
    assert main(["sql", "--db", db, "--prep", str(tmp_path / "plan.json")]) == 0
    assert capsys.readouterr().out == \
        'CREATE TABLE "g" AS SELECT "cp", "slope", COUNT(*) AS "n" FROM "T" GROUP BY "cp", "slope";\n'


def test_fixtures_commands(capsys):
    assert main(["fixtures", "list"]) == 0
    assert "nodelink" in capsys.readouterr().out.split()
    assert main(["fixtures", "run", "nodelink"]) == 0
    assert capsys.readouterr().out.startswith("PASS nodelink")
    assert main(["fixtures", "run", "no-such-fixture"]) == 1


def test_version(capsys):
    with pytest.raises(SystemExit) as err:
        main(["--version"])
    assert err.value.code == 0
    assert capsys.readouterr().out.startswith("dvl ")
