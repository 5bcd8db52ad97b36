import pytest
from hypothesis import assume, given, strategies as st

from dvl.errors import ScaleError
from dvl.scales import Scale, apply, domains_equal, interpolate, ranges_equal, train


def lin(values=(), rng=(0.0, 100.0)):
    return train(Scale("s", "linear", range=rng), values)


def test_train_linear():
    assert lin([2, 4, 10]).domain == (2, 10)


def test_shared_training_covers_both_streams():
    s = lin([1, 5])
    train(s, [-3, 2])
    assert s.domain == (-3, 5)


def test_train_ordinal_first_appearance():
    s = train(Scale("o", "ordinal", range=(0, 100)), ["b", "a", "b"])
    assert s.domain == ("b", "a")


def test_train_idempotent():
    s = lin([3, 9, 1])
    before = s.domain
    train(s, [3, 9, 1])
    assert s.domain == before


def test_train_mixed_types():
    with pytest.raises(ScaleError):
        train(Scale("o", "ordinal"), [1, "a"])


def test_apply_examples():
    assert apply(lin([2, 10]), 4) == 25
    assert apply(Scale("i", "identity"), 7) == 7
    o = train(Scale("o", "ordinal", range=(0, 100)), ["a", "b"])
    assert (apply(o, "a"), apply(o, "b")) == (25, 75)


def test_ordinal_unknown_value():
    o = train(Scale("o", "ordinal", range=(0, 100)), ["a"])
    with pytest.raises(ScaleError):
        apply(o, "z")


def test_degenerate_domain_gives_midpoint():
    assert apply(lin([5, 5]), 5) == 50


def test_out_of_domain_clamps():
    s = lin([0, 10])
    assert apply(s, -5) == 0 and apply(s, 50) == 100


def test_domain_and_range_equality():
    a, b = lin([1, 2]), lin([1, 2], rng=(0.0, 50.0))
    assert domains_equal(a, a) and ranges_equal(a, a)
    assert domains_equal(a, b) and not ranges_equal(a, b)
    o1 = train(Scale("o1", "ordinal"), ["a"])
    o2 = train(Scale("o2", "ordinal"), ["b"])
    assert not domains_equal(o1, o2)


def test_paint():
    o = train(Scale("c", "ordinal"), ["x", "y"])
    assert o.paint("x") != o.paint("y")
    assert lin([0, 1], rng=("#000000", "#ffffff")).paint(1) == "#ffffff"
    assert interpolate("#000000", "#ffffff", 0.5) == "#808080"


_finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(_finite, _finite, st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_linear_is_affine(d0, d1, ta, tb, alpha):
    assume(abs(d1 - d0) > 1e-3)
    s = lin([d0, d1], rng=(20.0, 380.0))
    lo, hi = min(d0, d1), max(d0, d1)
    a, b = lo + ta * (hi - lo), lo + tb * (hi - lo)
    mixed = alpha * a + (1 - alpha) * b
    assert apply(s, mixed) == pytest.approx(alpha * apply(s, a) + (1 - alpha) * apply(s, b), abs=1e-9 * 400)


@given(_finite, _finite, st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_endpoints_map_exactly(d0, d1, r0, r1):
    assume(d0 != d1)
    s = lin([d0, d1], rng=(r0, r1))
    lo, hi = s.domain
    assert apply(s, lo) == r0
    assert apply(s, hi) == pytest.approx(r1, abs=1e-9)


@given(st.lists(st.text(min_size=1, max_size=3), min_size=1, max_size=12, unique=True))
def test_ordinal_preserves_order(cats):
    s = train(Scale("o", "ordinal", range=(0.0, 100.0)), cats)
    pos = [apply(s, c) for c in cats]
    assert pos == sorted(pos)
    assert all(0 < p < 100 for p in pos)
