import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morreykit import exprlang as E
from exproracle import agree, random_expression

POINT = (0.7, -1.3, 2.1)


# --- parsing and printing -------------------------------------------------------

@pytest.mark.parametrize("src, value", [
    ("-2^2", -4.0),
    ("2^3^2", 512.0),
    ("2^-1", 0.5),
    ("1 - 2 - 3", -4.0),
    ("8 / 4 / 2", 1.0),
    ("2 * 3 + 4 * 5", 26.0),
    ("-(2 + 3) * 2", -10.0),
    ("(-2)^2", 4.0),
    ("1.5e1 + .5", 15.5),
])
def test_precedence_examples(src, value):
    assert E.evaluate(E.parse(src), POINT) == value


def test_variables_constants_and_calls():
    e = E.parse("x1 + 2*x2 + pi + norm(x) + max(x1, x3) + pow(x3, 2)")
    x1, x2, x3 = POINT
    want = x1 + 2 * x2 + math.pi + math.sqrt(x1**2 + x2**2 + x3**2) + max(x1, x3) + x3**2
    assert E.evaluate(e, POINT) == pytest.approx(want, rel=1e-15)
    assert E.max_variable_index(e) == 3
    assert E.uses_point(E.parse("norm(x)"))
    assert not E.uses_point(E.parse("sin(pi)"))


def test_declared_names():
    e = E.parse("t^2 * x1", names=("t",))
    assert E.evaluate(e, [3.0, 0.0], {"t": 2.0}) == 12.0
    with pytest.raises(E.UnknownIdentifierError):
        E.parse("t^2")
    with pytest.raises(ValueError):
        E.parse("x1", names=("pi",))


@pytest.mark.parametrize("src, offset", [
    ("1 +", 3), ("(1 + 2", 6), ("2 $ 3", 2), ("1 2", 2), ("sin()", 4), ("x", 0),
])
def test_syntax_errors_carry_offsets(src, offset):
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse(src)
    assert info.value.offset == offset
    assert info.value.expected


def test_unknown_identifier_and_arity():
    with pytest.raises(E.UnknownIdentifierError) as info:
        E.parse("1 + foo")
    assert info.value.offset == 4 and info.value.name == "foo"
    with pytest.raises(E.ArityError):
        E.parse("min(1)")
    with pytest.raises(E.ArityError):
        E.parse("sin(1, 2)")
    with pytest.raises(E.ExprSyntaxError):
        E.parse("1e999")


def test_offsets_are_bytes():
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse("é")
    assert info.value.offset == 0
    with pytest.raises(E.ExprSyntaxError) as info:
        E.parse("1 + é $")
    assert info.value.offset == 4


@pytest.mark.parametrize("src, msg", [
    ("1 / (x1 - x1)", "division by zero"),
    ("log(0)", "log"),
    ("sqrt(-1)", "sqrt"),
    ("(-8)^(1/3)", "power"),
    ("0^-1", "division by zero"),
])
def test_evaluation_errors(src, msg):
    with pytest.raises(E.EvaluationError, match=msg):
        E.evaluate(E.parse(src), POINT)


def test_vectorised_evaluation_reports_first_bad_element():
    pts = np.array([[1.0, 0.0], [0.5, 0.0], [-1.0, 0.0], [-2.0, 0.0]])
    with pytest.raises(E.EvaluationError) as info:
        E.evaluate(E.parse("sqrt(x1)"), pts)
    assert info.value.index == (2,)
    out = E.evaluate(E.parse("x1^2 + x2"), pts)
    np.testing.assert_array_equal(out, pts[:, 0] ** 2)


def test_overflow_is_not_an_error():
    assert E.evaluate(E.parse("exp(1000)"), POINT) == math.inf


# --- round trip -----------------------------------------------------------------

leaf = st.one_of(
    st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(E.Num),
    st.integers(1, 4).map(E.Var),
    st.sampled_from(["pi", "e"]).map(E.Const),
)


def _extend(children):
    return st.one_of(
        children.map(E.Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda a: E.BinOp(*a)),
        st.tuples(st.sampled_from(["sin", "log", "abs"]), children).map(
            lambda a: E.Call(a[0], (a[1],))),
        st.tuples(children, children).map(lambda a: E.Call("max", a)),
        st.lists(children, min_size=1, max_size=3).map(lambda a: E.Call("norm", tuple(a))),
    )


trees = st.recursive(leaf, _extend, max_leaves=12)


@given(trees)
def test_round_trip_trees(tree):
    src = E.to_source(tree)
    assert E.parse(src) == tree
    assert E.to_source(E.parse(src)) == src


@given(st.integers(0, 2**32 - 1))
def test_round_trip_sources(seed):
    src = random_expression(np.random.default_rng(seed))
    tree = E.parse(src)
    assert E.parse(E.to_source(tree)) == tree


def test_minimal_parentheses():
    assert E.to_source(E.parse("((x1))")) == "x1"
    assert E.to_source(E.parse("(x1 * x2) + x3")) == "x1 * x2 + x3"
    assert E.to_source(E.parse("x1 - (x2 - x3)")) == "x1 - (x2 - x3)"
    assert E.to_source(E.parse("(x1^x2)^x3")) == "(x1^x2)^x3"
    assert E.to_source(E.parse("x1^(x2^x3)")) == "x1^x2^x3"
    assert E.to_source(E.parse("(-x1)^x2")) == "(-x1)^x2"
    assert E.to_source(E.parse("-(x1^x2)")) == "-x1^x2"
    assert E.to_source(E.parse("2")) == "2.0"


# --- precedence oracle ----------------------------------------------------------

@given(st.integers(0, 2**32 - 1))
def test_precedence_matches_python(seed):
    src = random_expression(np.random.default_rng(seed))
    assert agree(src, POINT) is not False, src


# --- symbolic derivative ---------------------------------------------------------

@pytest.mark.parametrize("src, k, want", [
    ("x1^2 + 3*x2", 1, 2 * 0.7),
    ("x1^2 + 3*x2", 2, 3.0),
    ("sin(x1) * exp(x2)", 1, math.cos(0.7) * math.exp(-1.3)),
    ("x3^x1", 1, 2.1 ** 0.7 * math.log(2.1)),
    ("norm(x)", 3, 2.1 / math.sqrt(0.49 + 1.69 + 4.41)),
    ("1 / (1 + x1^2)", 1, -2 * 0.7 / (1.49 ** 2)),
    ("sqrt(x3) + log(x3)", 3, 0.5 / math.sqrt(2.1) + 1 / 2.1),
    ("pi * x2", 1, 0.0),
])
def test_differentiate_examples(src, k, want):
    d = E.differentiate(E.parse(src), k)
    assert E.evaluate(d, POINT) == pytest.approx(want, rel=1e-14, abs=1e-15)


def test_differentiate_refuses_kinks():
    with pytest.raises(E.NotDifferentiable):
        E.differentiate(E.parse("abs(x1)"), 1)
    assert E.differentiate(E.parse("abs(x1)"), 2) == E.Num(0.0)


@given(st.integers(0, 2**32 - 1))
def test_differentiate_matches_differences(seed):
    rng = np.random.default_rng(seed)
    src = random_expression(rng, 0, max_depth=3)
    tree = E.parse(src)
    k = int(rng.integers(1, 4))
    try:
        d = E.differentiate(tree, k)
    except E.NotDifferentiable:
        return
    h = 1e-6
    lo, hi = list(POINT), list(POINT)
    lo[k - 1] -= h
    hi[k - 1] += h
    try:
        with np.errstate(all="ignore"):
            vals = [E.evaluate(tree, p) for p in (lo, POINT, hi)]
            exact = E.evaluate(d, POINT)
    except E.EvaluationError:
        return
    if not all(np.isfinite(vals + [exact])) or max(map(abs, vals)) > 1e6:
        return
    fd = (vals[2] - vals[0]) / (2 * h)
    scale = max(1.0, max(map(abs, vals)))
    assert exact == pytest.approx(fd, abs=1e-5 * scale + 1e-4 * abs(fd))
