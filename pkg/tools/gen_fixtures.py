"""Regenerate the bundled fixture inputs (CSV tables, manifests, specs).

Goldens are not written here; run ``dvl fixtures run --update`` afterwards.
All randomness is seeded, so rerunning produces identical files.
"""

from __future__ import annotations

import csv
import io
import json
import random
import shutil
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1] / "src" / "dvl" / "fixtures" / "data"


def write_csv(path: Path, header: list[str], rows: list[tuple]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow(["" if v is None else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8")


def write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def fixture(name: str, description: str, spec=None, manifest="manifest.json", faithful=True,
            violated=(), hive=None) -> Path:
    d = ROOT / name
    d.mkdir(parents=True, exist_ok=True)
    meta = {"description": description, "manifest": manifest,
            "expect": {"faithful": faithful, "violated": sorted(violated)}}
    if spec is not None:
        write_json(d / "spec.dvl.json", spec)
        meta["spec"] = "spec.dvl.json"
    if hive is not None:
        (d / "program.hive").write_text(hive["program"] + "\n", encoding="utf-8")
        meta["hive"] = {"program": "program.hive", "table": hive["table"]}
    write_json(d / "fixture.json", meta)
    return d


def table(name, path, keys=None, types=None) -> dict:
    t = {"name": name, "path": path}
    if keys:
        t["keys"] = keys
    if types:
        t["types"] = types
    return t


def fk(name, src, sattrs, dst, dattrs) -> dict:
    return {"name": name, "src": {"table": src, "attrs": sattrs}, "dst": {"table": dst, "attrs": dattrs}}


def link_refs(view: str, src_filter, dst_view: str, dst_filter) -> list:
    return [{"ref": {"view": view, "filter": src_filter, "props": {"x1": "x", "y1": "y"}}},
            {"ref": {"view": dst_view, "filter": dst_filter, "props": {"x2": "x", "y2": "y"}}}]


# -- gallery ----------------------------------------------------------------------


def gallery(rng: random.Random) -> None:
    # (a) single-table scatterplot
    d = fixture("gallery-scatter", "Single table T(a, b) as a scatterplot.", spec={
        "width": 800, "height": 600,
        "views": [{"name": "V", "table": "T", "mark": "point", "extent": [60, 20, 720, 520],
                   "encodings": {"x": "a", "y": "b"}}]})
    pts = set()
    while len(pts) < 20:
        pts.add((round(rng.uniform(0, 100), 1), round(rng.uniform(0, 50), 1)))
    write_csv(d / "T.csv", ["id", "a", "b"], [(i, a, b) for i, (a, b) in enumerate(sorted(pts))])
    write_json(d / "manifest.json", {"tables": [table("T", "T.csv", [["id"]])]})

    # shared many-to-many decomposition: T(aid, bid) over A and B
    a_vals = sorted(rng.sample(range(10, 90), 5))
    b_vals = sorted(rng.sample(range(10, 90), 4))
    pairs = sorted(rng.sample([(i, j) for i in range(5) for j in range(4)], 11))
    m2m = {"tables": [table("A", "A.csv", [["id"]]), table("B", "B.csv", [["id"]]),
                      table("T", "T.csv", [["id"]])],
           "constraints": [fk("C_TA", "T", ["aid"], "A", ["id"]), fk("C_TB", "T", ["bid"], "B", ["id"])]}

    def write_m2m(d: Path, text: bool) -> None:
        write_csv(d / "A.csv", ["id", "a"], [(i, f"a{v}" if text else v) for i, v in enumerate(a_vals)])
        write_csv(d / "B.csv", ["id", "b"], [(i, f"b{v}" if text else v) for i, v in enumerate(b_vals)])
        write_csv(d / "T.csv", ["id", "aid", "bid"], [(k, i, j) for k, (i, j) in enumerate(pairs)])
        write_json(d / "manifest.json", m2m)

    # (b) punchcard: both axes are shared scales over the referenced ids
    punch = {
        "width": 800, "height": 600, "axes": False,
        "scales": {"sa": {"type": "linear"}, "sb": {"type": "linear"}},
        "views": [
            {"name": "VT", "table": "T", "mark": "point", "extent": [140, 40, 600, 440],
             "encodings": {"x": {"field": "bid", "scale": "sb"}, "y": {"field": "aid", "scale": "sa"},
                           "r": 6}},
            {"name": "VA", "table": "A", "mark": "label", "extent": [40, 40, 80, 440],
             "encodings": {"x": 0, "y": {"field": "id", "scale": "sa"}, "text": "a"}},
            {"name": "VB", "table": "B", "mark": "label", "extent": [140, 500, 600, 30],
             "encodings": {"x": {"field": "id", "scale": "sb"}, "y": 0, "text": "b"}}]}
    d = fixture("gallery-punchcard", "Punchcard of T(aid, bid) with labelled A and B axes on shared scales.",
                spec=punch)
    write_m2m(d, text=True)
    broken = json.loads(json.dumps(punch))
    broken["views"][1]["encodings"]["y"] = {"field": "id"}
    fixture("gallery-punchcard-unshared", "Punchcard whose A labels use their own implicit scale.",
            spec=broken, manifest="../gallery-punchcard/manifest.json", faithful=False, violated=["C_TA"])

    # (c) two dot axes joined by links
    d = fixture("gallery-parallel", "A and B as vertical dot axes; T rows as links between them.", spec={
        "width": 800, "height": 600,
        "views": [
            {"name": "VT", "table": "T", "mark": "link", "extent": [100, 40, 600, 480],
             "encodings": {"stroke": {"const": "#888888"}}, "spread": link_refs("VA", "aid", "VB", "bid")},
            {"name": "VA", "table": "A", "mark": "point", "extent": [100, 40, 600, 480],
             "encodings": {"x": 0, "y": "a", "r": 4}},
            {"name": "VB", "table": "B", "mark": "point", "extent": [100, 40, 600, 480],
             "encodings": {"x": 600, "y": "b", "r": 4}}]})
    write_m2m(d, text=False)

    # hierarchical decomposition: A(a, bid) -> B(b)
    hier_m = {"tables": [table("A", "A.csv", [["id"]]), table("B", "B.csv", [["id"]])],
              "constraints": [fk("C_AB", "A", ["bid"], "B", ["id"])]}
    a_rows = [(i, round(v, 1), i % 4) for i, v in enumerate(rng.sample([x / 2 for x in range(20, 200)], 12))]

    def write_hier(d: Path) -> None:
        write_csv(d / "B.csv", ["id", "b"], [(i, i + 1) for i in range(4)])
        write_csv(d / "A.csv", ["id", "a", "bid"], a_rows)
        write_json(d / "manifest.json", hier_m)

    # (d) small multiples
    sm = {
        "width": 800, "height": 600,
        "views": [
            {"name": "VB", "table": "B", "mark": "rect", "extent": [40, 40, 600, 500],
             "encodings": {"x": "b", "y": 0, "w": 120, "h": 400, "color": {"const": "#e8e8e8"}}},
            {"name": "VA", "table": "A", "mark": "point", "encodings": {"x": 55, "y": "a", "r": 3}}],
        "nests": [{"parent": "VB", "child": "VA", "padding": 5}]}
    d = fixture("gallery-small-multiples", "B rects as facets, each holding its A rows.", spec=sm)
    write_hier(d)
    broken = json.loads(json.dumps(sm))
    del broken["nests"]
    fixture("gallery-small-multiples-flat", "Small multiples with the nest removed.", spec=broken,
            manifest="../gallery-small-multiples/manifest.json", faithful=False, violated=["C_AB"])

    # (e) categorical x through a shared ordinal scale
    d = fixture("gallery-categorical", "A(a) against bid as a category, with B labels on the same scale.",
                spec={
                    "width": 800, "height": 600,
                    "scales": {"sb": {"type": "ordinal"}},
                    "views": [
                        {"name": "VA", "table": "A", "mark": "point", "extent": [60, 40, 700, 480],
                         "encodings": {"x": {"field": "bid", "scale": "sb"}, "y": "a"}},
                        {"name": "VB", "table": "B", "mark": "label", "extent": [60, 540, 700, 20],
                         "encodings": {"x": {"field": "id", "scale": "sb"}, "y": 0, "text": "b"}}]})
    write_hier(d)

    # (f) table: two label columns aligned by a shared row scale
    names = ["ash", "birch", "cedar", "elm", "fir", "hazel", "larch", "oak"]
    d = fixture("gallery-table", "A and B rendered as two aligned text columns.", spec={
        "width": 800, "height": 600, "axes": False,
        "scales": {"s": {"type": "linear", "range": [400, 20]}},
        "views": [
            {"name": "VA", "table": "A", "mark": "label", "extent": [40, 40, 400, 420],
             "encodings": {"x": 0, "y": {"field": "id", "scale": "s"}, "text": "a", "w": 60}},
            {"name": "VB", "table": "B", "mark": "label", "extent": [40, 40, 400, 420],
             "encodings": {"x": {"ref": {"view": "VA", "filter": None, "expr": "x + w", "agg": "max"}},
                           "y": {"field": "id", "scale": "s"}, "text": "b"}}]})
    write_csv(d / "A.csv", ["id", "a"], list(enumerate(names)))
    write_csv(d / "B.csv", ["id", "b"], [(i, round(rng.uniform(1, 9), 2)) for i in range(len(names))])
    write_json(d / "manifest.json", {"tables": [table("A", "A.csv", [["id"]]), table("B", "B.csv", [["id"]])],
                                     "constraints": [fk("C_BA", "B", ["id"], "A", ["id"])]})


# -- node-link pair ---------------------------------------------------------------


def nodelink(rng: random.Random) -> None:
    nodes = [(i, round(rng.uniform(0, 100), 2), round(rng.uniform(0, 100), 2)) for i in range(8)]
    edges = sorted(rng.sample([(s, t) for s in range(8) for t in range(8) if s < t], 10))
    scales = {"sx": {"type": "linear"}, "sy": {"type": "linear"}}
    vn = {"name": "VN", "table": "N", "mark": "point", "extent": [40, 40, 720, 520],
          "encodings": {"x": {"field": "a", "scale": "sx"}, "y": {"field": "b", "scale": "sy"}, "r": 5}}
    spec = {"width": 800, "height": 600, "scales": scales, "views": [
        {"name": "VE", "table": "E", "mark": "link", "extent": [40, 40, 720, 520],
         "encodings": {"stroke": {"const": "#555555"}}, "spread": link_refs("VN", "s", "VN", "t")}, vn]}
    d = fixture("nodelink", "Node-link diagram whose edge endpoints reference node marks.", spec=spec)
    write_csv(d / "N.csv", ["id", "a", "b"], nodes)
    write_csv(d / "E.csv", ["id", "s", "t"], [(i, s, t) for i, (s, t) in enumerate(edges)])
    write_json(d / "manifest.json", {
        "tables": [table("N", "N.csv", [["id"]]), table("E", "E.csv", [["id"]])],
        "constraints": [fk("C1", "E", ["s"], "N", ["id"]), fk("C2", "E", ["t"], "N", ["id"])]})

    dropped = json.loads(json.dumps(spec))
    ve = dropped["views"][0]
    ve["spread"] = ve["spread"][1:]
    ve["encodings"].update({"x1": {"field": "id"}, "y1": 0})
    fixture("nodelink-dropref", "Node-link diagram whose edge sources no longer reference nodes.",
            spec=dropped, manifest="../nodelink/manifest.json", faithful=False, violated=["C1"])

    # endpoints copied into the edge table by joins, encoded through the same scales
    d = fixture("nodelink-broken", "Edges drawn from precomputed endpoint columns.", spec={
        "width": 800, "height": 600, "scales": scales, "views": [
            {"name": "VE", "table": "E2", "mark": "link", "extent": [40, 40, 720, 520],
             "encodings": {"stroke": {"const": "#cc3333"},
                           "x1": {"field": "sa", "scale": "sx"}, "y1": {"field": "sb", "scale": "sy"},
                           "x2": {"field": "ta", "scale": "sx"}, "y2": {"field": "tb", "scale": "sy"}}}, vn]},
        faithful=False, violated=["C1", "C2"])
    write_json(d / "prep.json", {"steps": [
        {"op": "join", "left": "E", "right": "N", "on": [["s"], ["id"]], "out": "E1",
         "projections": [["id", "E.id"], ["s", "s"], ["t", "t"], ["sa", "N.a"], ["sb", "N.b"]]},
        {"op": "join", "left": "E1", "right": "N", "on": [["t"], ["id"]], "out": "E2",
         "projections": [["id", "E1.id"], ["s", "s"], ["t", "t"], ["sa", "sa"], ["sb", "sb"],
                         ["ta", "N.a"], ["tb", "N.b"]]}],
        "outputs": ["N", "E2"]})
    write_json(d / "manifest.json", {
        "tables": [table("N", "../nodelink/N.csv", [["id"]]), table("E", "../nodelink/E.csv", [["id"]])],
        "constraints": [fk("C1", "E2", ["s"], "N", ["id"]), fk("C2", "E2", ["t"], "N", ["id"])],
        "prep": "prep.json"})


# -- tree with a materialized parent constraint ---------------------------------------


def tree(rng: random.Random) -> None:
    rows = [(0, None, "root")]
    for i in range(1, 11):
        rows.append((i, rng.randrange(0, i) if i > 3 else 0, f"n{i}"))
    spec = {"width": 800, "height": 600,
            "layouts": {"LT": {"algo": "tree", "parent": "pid"}},
            "views": [
                {"name": "VP", "table": "P", "mark": "link", "extent": [40, 40, 720, 520],
                 "encodings": {"stroke": {"const": "#777777"}}, "spread": link_refs("VN", "child", "VN", "parent")},
                {"name": "VN", "table": "N", "mark": "point", "extent": [40, 40, 720, 520],
                 "encodings": {"r": 5}, "spread": [{"layout": "LT", "channels": ["x", "y"]}]}]}
    d = fixture("tree", "Tree whose parent edges are marks over the materialized constraint.", spec=spec)
    write_csv(d / "N.csv", ["id", "pid", "name"], rows)
    write_csv(d / "P.csv", ["child", "parent"], [(i, p) for i, p, _ in rows if p is not None])
    base = {"tables": [table("N", "N.csv", [["id"]], {"pid": "integer"}), table("P", "P.csv", [["child"]])],
            "constraints": [fk("CT", "N", ["pid"], "N", ["id"]), fk("PC", "P", ["child"], "N", ["id"]),
                            fk("PP", "P", ["parent"], "N", ["id"])]}
    write_json(d / "manifest.json", {**base, "materializations": [
        {"table": "P", "constraint": "CT", "src": ["child"], "dst": ["parent"]}]})
    d = fixture("tree-unmaterialized", "The tree fixture without declaring P as the materialization.",
                spec=None, faithful=False, violated=["CT"])
    meta = json.loads((d / "fixture.json").read_text())
    meta["spec"] = "../tree/spec.dvl.json"
    write_json(d / "fixture.json", meta)
    base["tables"] = [dict(t, path="../tree/" + t["path"]) for t in base["tables"]]
    write_json(d / "manifest.json", base)


# -- ER diagram over catalog tables ----------------------------------------------------


def er_diagram() -> None:
    schema = {
        "dept": [("id", 1), ("name", 0)],
        "emp": [("id", 1), ("name", 0), ("dept_id", 0), ("mgr_id", 0)],
        "project": [("id", 1), ("title", 0), ("dept_id", 0)],
        "assign": [("emp_id", 1), ("proj_id", 1), ("hours", 0)],
    }
    fks = [("emp", "dept_id", "dept", "id"), ("emp", "mgr_id", "emp", "id"),
           ("project", "dept_id", "dept", "id"), ("assign", "emp_id", "emp", "id"),
           ("assign", "proj_id", "project", "id")]
    tid = {t: i for i, t in enumerate(schema)}
    spec = {
        "width": 800, "height": 600, "axes": False,
        "scales": {"px": {"type": "identity"}},
        "layouts": {"LF": {"algo": "force", "edges": {"table": "fkeys", "src": "tid1", "dst": "tid2"},
                           "seed": 7, "iterations": 300}},
        "views": [
            {"name": "VT", "table": "tables", "mark": "rect", "extent": [120, 100, 560, 420],
             "encodings": {"color": {"const": "white"}, "stroke": {"const": "black"},
                           "w": {"ref": {"view": "VC", "filter": "tid", "prop": "w", "agg": "max"}},
                           "h": {"ref": {"view": "VC", "filter": "tid", "prop": "h", "agg": "sum"}}},
             "spread": [{"layout": "LF", "channels": ["x", "y"]}]},
            {"name": "VC", "table": "columns", "mark": "label",
             "encodings": {"x": 0, "y": {"expr": "ord_pos * 14.4", "scale": "px"}, "text": "colname",
                           "textDecoration": {"expr": "'underline' if is_key else 'none'"}}},
            {"name": "VL", "table": "tables", "mark": "label",
             "encodings": {"text": "tname", "fontSize": 13,
                           "x": {"ref": {"view": "VT", "filter": "tid", "prop": "x"}},
                           "y": {"ref": {"view": "VT", "filter": "tid", "expr": "y - 18"}}}},
            {"name": "VF", "table": "fkeys", "mark": "link",
             "encodings": {"stroke": {"const": "#3366aa"}, "curve": True},
             "spread": link_refs("VC", ["tid1", "col1"], "VC", ["tid2", "col2"])}],
        "nests": [{"parent": "VT", "child": "VC"}]}
    d = fixture("er-diagram", "ER diagram drawn from catalog tables.", spec=spec)
    write_csv(d / "tables.csv", ["tid", "tname"], [(i, t) for t, i in tid.items()])
    write_csv(d / "columns.csv", ["tid", "colname", "ord_pos", "is_key"],
              [(tid[t], c, k, "true" if key else "false") for t, cols in schema.items() for k, (c, key) in enumerate(cols)])
    write_csv(d / "fkeys.csv", ["id", "tid1", "col1", "tid2", "col2"],
              [(i, tid[a], b, tid[c], e) for i, (a, b, c, e) in enumerate(fks)])
    write_json(d / "manifest.json", {
        "tables": [table("tables", "tables.csv", [["tid"]]),
                   table("columns", "columns.csv", [["tid", "colname"]], {"is_key": "boolean"}),
                   table("fkeys", "fkeys.csv", [["id"]])],
        "constraints": [fk("CT", "columns", ["tid"], "tables", ["tid"]),
                        fk("F1", "fkeys", ["tid1", "col1"], "columns", ["tid", "colname"]),
                        fk("F2", "fkeys", ["tid2", "col2"], "columns", ["tid", "colname"])]})


# -- heart case study (synthetic rows) ----------------------------------------------------


def heart(rng: random.Random) -> Path:
    d = ROOT / "_heart"
    d.mkdir(parents=True, exist_ok=True)
    rows, seen = [], set()
    while len(rows) < 60:
        age = rng.randint(30, 75)
        thalach = rng.randint(95, 200)
        if (age, thalach) in seen:
            continue
        seen.add((age, thalach))
        cp = rng.randint(0, 3)
        slope = rng.randint(0, 2)
        chol = 10 * rng.randint(15, 40)
        target = int(thalach > 150 or rng.random() < 0.3)
        sex = rng.randint(0, 1)
        rows.append((len(rows), age, sex, cp, chol, thalach, slope, target))
    write_csv(d / "T.csv", ["id", "age", "sex", "cp", "chol", "thalach", "slope", "target"], rows)
    return d


def heart_nested() -> None:
    d = fixture("heart-nested", "Heatmap of cp x slope with the age/thalach scatter nested in each cell.",
                manifest="manifest.json", spec={
                    "width": 800, "height": 600, "axes": False,
                    "layouts": {"LG": {"algo": "EQ"}},
                    "views": [
                        {"name": "Vs", "table": "T2", "mark": "rect", "extent": [20, 20, 760, 560],
                         "encodings": {"color": {"const": "#f4f4f4"}, "stroke": "n", "strokeWidth": 4},
                         "spread": [{"layout": "LG", "channels": ["x", "y", "w", "h"]}]},
                        {"name": "Vd", "table": "T4", "mark": "point",
                         "encodings": {"x": "age", "y": "thalach", "symbol": "target", "color": "sel",
                                       "r": 3}}],
                    "nests": [{"parent": "Vs", "child": "Vd", "padding": 10}]})
    write_json(d / "prep.json", {"steps": [
        {"op": "select", "table": "T", "projections": [["*", "*"], ["sel", "chol > 230"]], "out": "T4"},
        {"op": "groupby", "table": "T4", "keys": ["cp", "slope"], "aggs": {"n": "count()"}, "out": "T2"}],
        "outputs": ["T4", "T2"]})
    write_json(d / "manifest.json", {"tables": [table("T", "../_heart/T.csv", [["id"]])], "prep": "prep.json"})


def parallel_coords() -> None:
    attrs = ["sex", "age", "chol", "cp", "target"]
    dims = [f"T{a}" for a in attrs]
    steps = [{"op": "normalize_many", "table": "T", "groups": [[a] for a in attrs], "names": dims,
              "fact": "Tf"}]
    views = [{"name": "Vatt", "table": "Tattrs", "mark": "rect", "extent": [40, 30, 720, 540],
              "encodings": {"x": "attr", "y": 0, "w": 60, "h": 540, "color": {"const": "#f6f6f6"}}}]
    links = []
    for a, dim in zip(attrs, dims):
        views.append({"name": f"V{a}", "table": dim, "mark": "label",
                      "encodings": {"x": 0, "y": a, "text": a}})
    for (a1, d1), (a2, d2) in zip(zip(attrs, dims), zip(attrs[1:], dims[1:])):
        out = f"L_{a1}_{a2}"
        k1, k2 = f"{d1}_id", f"{d2}_id"
        steps.append({"op": "groupby", "table": "Tf", "keys": [k1, k2], "aggs": {"c": "count()"}, "out": out})
        links.append({"name": f"VL_{a1}_{a2}", "table": out, "mark": "link",
                      "encodings": {
                          "x1": {"ref": {"view": f"V{a1}", "filter": k1, "expr": "x + w"}},
                          "y1": {"ref": {"view": f"V{a1}", "filter": k1, "expr": "y + h / 2"}},
                          "x2": {"ref": {"view": f"V{a2}", "filter": k2, "prop": "x"}},
                          "y2": {"ref": {"view": f"V{a2}", "filter": k2, "expr": "y + h / 2"}},
                          "strokeWidth": "c", "stroke": "c", "opacity": 0.6, "curve": True}})
    outputs = ["Tattrs"] + dims + [f"L_{a}_{b}" for a, b in zip(attrs, attrs[1:])]
    d = fixture("gallery-parallel-coords", "Parallel coordinates over normalized heart attributes.", spec={
        "width": 800, "height": 600, "axes": False, "views": views + links,
        "nests": [{"parent": "Vatt", "children": [f"V{a}" for a in attrs],
                   "select": {"attr": "attr", "views": {a: f"V{a}" for a in attrs}}, "padding": 16}]})
    write_csv(d / "Tattrs.csv", ["attr"], [(a,) for a in attrs])
    write_json(d / "prep.json", {"steps": steps, "outputs": outputs})
    write_json(d / "manifest.json", {"tables": [table("T", "../_heart/T.csv", [["id"]]),
                                                table("Tattrs", "Tattrs.csv", [["attr"]])],
                                     "prep": "prep.json"})


def hive_housing(rng: random.Random) -> None:
    d = fixture("hive-housing", "HiVE program over a housing table.", hive={
        "program": "sHier(/,$city,$type); sLayout(/,SQ,SQ); sSize(/,$price,$bdrms); sColor(/,_,$bdrms)",
        "table": "T"})
    rows = []
    for i in range(40):
        city = rng.choice(["Austin", "Boston", "Chicago", "Denver", "Seattle"])
        kind = rng.choice(["condo", "house", "loft", "townhome"])
        rows.append((i, city, kind, rng.randint(150, 900) * 1000, rng.randint(1, 5)))
    write_csv(d / "T.csv", ["id", "city", "type", "price", "bdrms"], rows)
    write_json(d / "manifest.json", {"tables": [table("T", "T.csv", [["id"]])]})


def main() -> None:
    if ROOT.exists():
        shutil.rmtree(ROOT)
    ROOT.mkdir(parents=True)
    rng = random.Random(20240611)
    gallery(rng)
    nodelink(rng)
    tree(rng)
    er_diagram()
    heart(rng)
    heart_nested()
    parallel_coords()
    hive_housing(rng)


if __name__ == "__main__":
    main()
