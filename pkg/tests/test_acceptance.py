"""Acceptance criteria 1-9.

Each criterion is a function returning a list of problems (empty means PASS).
Under pytest every test prints one PASS/FAIL line; running this file directly
prints all nine lines without pytest.
"""
import contextlib
import io
import itertools
import json
import os
import random
import subprocess
import sys
from collections import Counter
from fractions import Fraction
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

from conftest import aspect, tiling_errors  # noqa: E402
from dvl.cli import main  # noqa: E402
from dvl.compiler import compile, execute  # noqa: E402
from dvl.dataprep import Normalize, NormalizeMany, TransformPlan, comparable_rows, emit_sql, normalize, \
    normalize_many, run_sql  # noqa: E402
from dvl.faithful import (EXPLICIT_MARK, NESTING, SHARED_SCALE, TRAVERSAL, check,  # noqa: E402
                          check_fk_preservation, check_keys)
from dvl.fixtures import DATA, list_fixtures, load_fixture, run_fixture  # noqa: E402
from dvl.layouts import Extent, force_layout, partition, squarify  # noqa: E402
from dvl.marks import MarkRecord, MarkTable, marks_to_json  # noqa: E402
from dvl.relcore import Database, make_table  # noqa: E402
from dvl.render import render  # noqa: E402
from dvl.resolver import evaluate_ref, get, validate_ref  # noqa: E402
from dvl.specmodel import Filter, ForeignRef, ViewSpec, parse_spec  # noqa: E402

JITTER = "b + ((id * 7919) % 13 - 6) * 0.05"


# -- 1. consistency under perturbation -----------------------------------------


def _jittered(name):
    fx = load_fixture(name)
    doc = json.loads((fx.directory / "spec.dvl.json").read_text())
    for v in doc["views"]:
        if v["name"] == "VN":
            v["encodings"]["y"] = {"expr": JITTER, "scale": "sy"}
    spec = parse_spec(json.dumps(doc))
    return spec, execute(compile(spec, fx.db, fx.plan))


def _endpoint_mismatches(spec, ex):
    nodes = {r.key: r.channels for r in ex["VN"].records}
    edges = ex.db.table(spec.view("VE").table)
    bad = 0
    for rec, row in zip(ex["VE"].records, edges.records()):
        s, t = nodes[(row["s"],)], nodes[(row["t"],)]
        got = [rec.channels[c] for c in ("x1", "y1", "x2", "y2")]
        bad += sum(a != b for a, b in zip(got, [s["x"], s["y"], t["x"], t["y"]]))
    return bad


def criterion_1():
    problems = []
    spec, ex = _jittered("nodelink")
    plain = load_fixture("nodelink").execute()
    moved = sum(a.channels["y"] != b.channels["y"] for a, b in zip(ex["VN"].records, plain["VN"].records))
    if not moved:
        problems.append("jitter did not move any node")
    if _endpoint_mismatches(spec, ex):
        problems.append("referenced endpoints differ from jittered node centres")
    twin_spec, twin = _jittered("nodelink-broken")
    if _endpoint_mismatches(twin_spec, twin) < 1:
        problems.append("precomputed-column twin did not diverge")
    with contextlib.redirect_stdout(io.StringIO()):
        codes = [main(["lint", "--db", str(DATA / n / "manifest.json"), "--spec", str(DATA / n / "spec.dvl.json")])
                 for n in ("nodelink", "nodelink-broken")]
    if codes != [0, 2]:
        problems.append(f"lint exit codes {codes}, expected [0, 2]")
    return problems


# -- 2. the four preservation mechanisms ----------------------------------------

MECHANISM_PAIRS = [
    (TRAVERSAL, "nodelink", "nodelink-dropref", "C1"),
    (EXPLICIT_MARK, "tree", "tree-unmaterialized", "CT"),
    (NESTING, "gallery-small-multiples", "gallery-small-multiples-flat", "C_AB"),
    (SHARED_SCALE, "gallery-punchcard", "gallery-punchcard-unshared", "C_TA"),
]


def _report(name):
    fx = load_fixture(name)
    ex = fx.execute()
    return fx, ex, check(ex.db, fx.spec, ex)


def criterion_2():
    problems = []
    for mech, good, twin, mutated in MECHANISM_PAIRS:
        fx, ex, rep = _report(good)
        got = check_fk_preservation(ex.db, fx.spec, ex)[mutated].mechanism
        if got != mech:
            problems.append(f"{good}: {mutated} preserved by {got}, expected {mech}")
        _, _, trep = _report(twin)
        if trep.violated_constraints != [mutated]:
            problems.append(f"{twin}: violated {trep.violated_constraints}, expected [{mutated}]")
    for name in list_fixtures():
        fx, _, rep = _report(name)
        if fx.expect_faithful and (rep.violated_constraints or not rep.faithful):
            problems.append(f"false positive on {name}: {rep.violated_constraints}")
    return problems


# -- 3. squarify --------------------------------------------------------------------


def criterion_3():
    problems = []
    rng = random.Random(20240601)
    for i in range(200):
        n = rng.randint(1, 12)
        weights = [rng.uniform(0.01, 100.0) for _ in range(n)]
        ext = Extent(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(1, 500), rng.uniform(1, 500))
        rects = squarify(weights, ext).rects()
        errs = tiling_errors(rects, ext, weights, rel=1e-9)
        if errs:
            problems.append(f"vector {i}: {errs[0]}")
    ext = Extent(0, 0, 6, 4)
    for perm in sorted(set(itertools.permutations([6, 6, 4, 3, 2, 2, 1]))):
        sq = max(aspect(r) for r in squarify(perm, ext).rects())
        vt = max(aspect(r) for r in partition(perm, ext, "VT").rects())
        if sq > vt:
            problems.append(f"SQ aspect {sq} > VT aspect {vt} for {perm}")
    return problems


# -- 4. HiVE housing geometry ---------------------------------------------------


def criterion_4():
    problems = []
    fx = load_fixture("hive-housing")
    ex = fx.execute()
    raw = list(fx.db.table("T").records())

    def avg(rows, attr):
        return sum(r[attr] for r in rows) / len(rows)

    cities = sorted({r["city"] for r in raw})
    city_w = {c: avg([r for r in raw if r["city"] == c], "price") for c in cities}
    total = sum(city_w.values())
    parents = ex["V_city"]
    for rec in parents.records:
        share = rec.extent.area / rec.frame.area
        if abs(share - city_w[rec.key[0]] / total) > 1e-9:
            problems.append(f"city {rec.key}: share {share} vs {city_w[rec.key[0]] / total}")
    kids: dict[int, list] = {}
    for rec in ex["V_type"].records:
        host = parents.records[rec.parent].extent
        e = rec.extent
        if not (host.x < e.x and host.y < e.y and e.x2 < host.x2 and e.y2 < host.y2):
            problems.append(f"{rec.key} not strictly inside {parents.records[rec.parent].key}")
        kids.setdefault(rec.parent, []).append(rec)
    for p, recs in kids.items():
        city = parents.records[p].key[0]
        w = {r.key[1]: avg([x for x in raw if x["city"] == city and x["type"] == r.key[1]], "bdrms") for r in recs}
        tot = sum(w.values())
        for r in recs:
            share = r.extent.area / r.frame.area
            if abs(share - w[r.key[1]] / tot) > 1e-9:
                problems.append(f"{r.key}: share {share} vs {w[r.key[1]] / tot}")
    return problems


# -- 5. dataprep losslessness ---------------------------------------------------


def _random_table(rng):
    ncols = rng.randint(1, 4)
    kinds = [rng.choice(["integer", "text", "real"]) for _ in range(ncols)]

    def cell(kind):
        if rng.random() < 0.15:
            return None
        if kind == "integer":
            return rng.randint(0, 3)
        if kind == "real":
            return rng.choice([0.5, 1.25, -2.0])
        return rng.choice(["a", "b", "c d"])

    rows = [tuple(cell(k) for k in kinds) for _ in range(rng.randint(0, 12))]
    cols = [(f"c{i}", k) for i, k in enumerate(kinds)]
    return make_table("T", cols, rows)


def _join_back(fact, dims, cols):
    out = []
    for row in fact.records():
        rec = dict(row)
        for dim in dims:
            ref = rec.pop(f"{dim.name}_id")
            [hit] = [d for d in dim.records() if d["id"] == ref]
            rec.update({k: v for k, v in hit.items() if k != "id"})
        out.append(tuple(rec[c] for c in cols))
    return Counter(out)


def criterion_5():
    problems = []
    rng = random.Random(7)
    for i in range(100):
        t = _random_table(rng)
        db = Database({"T": t})
        names = [c for c in t.schema.names if c != "id"]
        cols = list(t.schema.names)
        original = Counter(tuple(r) for r in t.rows)
        attrs = rng.sample(names, rng.randint(1, len(names)))
        dim, fact, _ = normalize(db, "T", attrs, "D", "F")
        if _join_back(fact, [dim], cols) != original:
            problems.append(f"table {i}: normalize is lossy")
        rest = [c for c in names if c not in attrs]
        groups = [attrs] + ([rest] if rest else [])
        pairs, fact2 = normalize_many(db, "T", groups, [f"D{j}" for j in range(len(groups))], "F2")
        if _join_back(fact2, [d for d, _ in pairs], cols) != original:
            problems.append(f"table {i}: normalize_many is lossy")
        plan = TransformPlan((Normalize("T", tuple(attrs), "D", "F"),
                              NormalizeMany("T", tuple(tuple(g) for g in groups),
                                            tuple(f"D{j}" for j in range(len(groups))), "F2")))
        got = run_sql(db, emit_sql(plan, db), plan.produced)
        mem = plan.execute(db)
        for name in plan.produced:
            sql_cols, sql_rows = got[name]
            table = mem.table(name)
            if sql_cols != list(table.schema.names) or comparable_rows(sql_rows) != comparable_rows(table.rows):
                problems.append(f"table {i}: SQL result for {name} differs from memory")
    return problems


# -- 6. resolver oracle -------------------------------------------------------------


def _chain(rng):
    """T0 -> T1 -> ... with every hop a surjection, so a hop is injective iff it is a bijection."""
    hops = rng.randint(1, 3)
    sizes = [rng.randint(1, 12)]
    for _ in range(hops):
        sizes.insert(0, sizes[0] + rng.choice([0, 0, rng.randint(1, 4)]))
    tables, fks = [], []
    for i, n in enumerate(sizes):
        cols = [("id", "integer"), ("val", "integer")]
        if i + 1 < len(sizes):
            m = sizes[i + 1]
            if n == m and rng.random() < 0.6:
                targets = rng.sample(range(m), m)
            else:
                targets = list(range(m)) + [rng.randrange(m) for _ in range(n - m)]
                rng.shuffle(targets)
            injective = len(set(targets)) == n
            rows = [(r, rng.randint(-9, 9), targets[r]) for r in range(n)]
            tables.append(make_table(f"T{i}", cols + [("f", "integer")], rows,
                                     keys=[["f"]] if injective else []))
        else:
            tables.append(make_table(f"T{i}", cols, [(r, rng.randint(-9, 9)) for r in range(n)]))
    db = Database({t.name: t for t in tables})
    for i in range(hops):
        fks.append(db.foreign_key(f"F{i}", f"T{i}", ["f"], f"T{i + 1}", ["id"]))
    return db.with_constraints(*fks), hops


def criterion_6():
    problems = []
    rng = random.Random(11)
    for case in range(150):
        db, hops = _chain(rng)
        if sum(len(t) for t in db.tables.values()) > 50:
            continue
        src, dst = db.table("T0"), db.table(f"T{hops}")
        view = ViewSpec("V0", "T0", "point")
        ref = ForeignRef(table=dst.name, filter=Filter("keys", ("f",)), prop="val")
        info = validate_ref(db, None, view, ref, props=("id", "val"))
        got = evaluate_ref(db, None, view, ref, list(dst.records()), info)
        # brute force: nested-loop join along the chain
        expected, reached = [], []
        for row in src.records():
            cur = [row]
            for i in range(hops):
                nxt = db.table(f"T{i + 1}")
                cur = [r for c in cur for r in nxt.records() if r["id"] == c["f"]]
            expected.append([c["val"] for c in cur])
            reached.append(tuple(c["id"] for c in cur))
        if any(len(e) != 1 for e in expected) or got != [e[0] for e in expected]:
            problems.append(f"case {case}: get {got} != join {expected}")
        # the same lookup through get(), hop by hop
        rows = list(src.records())
        for i in range(hops):
            nxt = list(db.table(f"T{i + 1}").records())
            hopped = get(nxt, rows, {"f": "id"}, ["id", "val", "f"] if i + 1 < hops else ["id", "val"])
            rows = hopped
        if [r["val"] for r in rows] != [e[0] for e in expected]:
            problems.append(f"case {case}: hop-wise get differs from join")
        distinct = len(set(reached)) == len(reached)
        if info.preserves_key != distinct:
            problems.append(f"case {case}: preserves_key={info.preserves_key} but distinct={distinct}")
    return problems


# -- 7. key-overlap checker -----------------------------------------------------------


def _exact_fraction(a, b):
    fa = [Fraction(v) for v in (a.x, a.y, a.w, a.h)]
    fb = [Fraction(v) for v in (b.x, b.y, b.w, b.h)]
    w = max(Fraction(0), min(fa[0] + fa[2], fb[0] + fb[2]) - max(fa[0], fb[0]))
    h = max(Fraction(0), min(fa[1] + fa[3], fb[1] + fb[3]) - max(fa[1], fb[1]))
    small = min(fa[2] * fa[3], fb[2] * fb[3])
    if small == 0:
        return Fraction(1) if fa == fb else Fraction(0)
    return w * h / small


def criterion_7():
    problems = []
    cases = [
        ("identical points", "point", Extent(5, 5, 6, 6), Extent(5, 5, 6, 6), True),
        ("96% rects", "rect", Extent(0, 0, 10, 10), Extent(0.4, 0, 10, 10), True),
        ("94% rects", "rect", Extent(0, 0, 10, 10), Extent(0.6, 0, 10, 10), False),
    ]
    for label, mark, a, b, violates in cases:
        oracle = _exact_fraction(a, b) > Fraction(95, 100)
        mt = MarkTable("V", mark, ("id",), [MarkRecord((0,), {}, extent=a), MarkRecord((1,), {}, extent=b)])
        got = not check_keys(mt).ok
        if got != violates or oracle != violates:
            problems.append(f"{label}: checker {got}, exact oracle {oracle}, expected {violates}")
    return problems


# -- 8. determinism ---------------------------------------------------------------------

_FORCE_SNIPPET = """
from dvl.layouts import Extent, force_layout
r = force_layout([(0, 1), (1, 2), (2, 0), (3, 4)], list(range(6)), Extent(0, 0, 300, 200), seed=42)
print(repr(r.columns))
"""


def criterion_8():
    problems = []
    for name in list_fixtures():
        a, b = load_fixture(name).execute(), load_fixture(name).execute()
        if marks_to_json(a.marks) != marks_to_json(b.marks):
            problems.append(f"{name}: marks JSON differs between runs")
        if render(a) != render(b):
            problems.append(f"{name}: SVG differs between runs")
    local = repr(force_layout([(0, 1), (1, 2), (2, 0), (3, 4)], list(range(6)), Extent(0, 0, 300, 200),
                              seed=42).columns)
    for hashseed in ("0", "12345"):
        env = dict(os.environ, PYTHONHASHSEED=hashseed)
        out = subprocess.run([sys.executable, "-c", _FORCE_SNIPPET], capture_output=True, text=True,
                             env=env, check=True).stdout.strip()
        if out != local:
            problems.append(f"force layout differs in a fresh process (PYTHONHASHSEED={hashseed})")
    return problems


# -- 9. gallery completeness ------------------------------------------------------------

GALLERY = ["gallery-scatter", "gallery-categorical", "gallery-parallel", "gallery-punchcard",
           "gallery-small-multiples", "gallery-table", "gallery-parallel-coords", "er-diagram", "heart-nested"]


def criterion_9():
    problems = []
    for name in GALLERY:
        res = run_fixture(name)
        if not res.ok:
            problems.append(f"{name}: {res.message}")
        elif not res.report.faithful:
            problems.append(f"{name}: lint verdict {res.report.verdict}")
    return problems


CRITERIA = [
    (1, "links follow jittered nodes; precomputed twin diverges", criterion_1),
    (2, "four preservation mechanisms with failing twins", criterion_2),
    (3, "squarify tiling, proportionality and aspect", criterion_3),
    (4, "HiVE housing containment and area shares", criterion_4),
    (5, "dataprep losslessness and SQL agreement", criterion_5),
    (6, "resolver matches brute-force joins", criterion_6),
    (7, "key-overlap checker thresholds", criterion_7),
    (8, "determinism of marks, SVG and force layout", criterion_8),
    (9, "gallery completeness", criterion_9),
]


def _line(n, title, problems):
    status = "PASS" if not problems else "FAIL"
    detail = "" if not problems else f" ({len(problems)} problem(s); first: {problems[0]})"
    return f"{status} criterion {n}: {title}{detail}"


@pytest.mark.parametrize("n, title, fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(n, title, fn, capsys):
    problems = fn()
    with capsys.disabled():
        print("\n" + _line(n, title, problems))
    assert not problems, problems


if __name__ == "__main__":
    failed = 0
    for n, title, fn in CRITERIA:
        problems = fn()
        failed += bool(problems)
        print(_line(n, title, problems))
    sys.exit(1 if failed else 0)
