import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slowfast.errors import (ExprSyntaxError, NonFiniteResult, UnboundVariable, UnknownFunction,
                             UnknownVariable)
from slowfast.expr import (BinOp, Call, Neg, Num, Var, cbrt, compile_scalar, compile_vector,
                           eval_expr, free_variables, parse_expr, power_warnings, to_text)


def test_unary_minus_below_plus():
    assert parse_expr("-x1 + x2") == BinOp("+", Neg(Var("x1")), Var("x2"))


def test_unary_minus_binds_tighter_than_power():
    assert parse_expr("-x^2") == BinOp("^", Neg(Var("x")), Num(2.0))
    assert eval_expr(parse_expr("-x^2"), {"x": 3.0}) == 9.0
    assert eval_expr(parse_expr("-(x^2)"), {"x": 3.0}) == -9.0


def test_power_is_right_associative():
    assert parse_expr("a^b^c") == BinOp("^", Var("a"), BinOp("^", Var("b"), Var("c")))
    assert eval_expr(parse_expr("2^3^2"), {}) == 512.0


def test_left_associative_division():
    assert eval_expr(parse_expr("8/4/2"), {}) == 1.0
    assert eval_expr(parse_expr("8-4-2"), {}) == 2.0


def test_impulse_of_cube_root_example_parses():
    e = parse_expr("mu * z^(1/3) + sin(mu) + 0.1*mu")
    assert free_variables(e) == {"mu", "z"}
    mu, z = 0.01, -0.008
    assert eval_expr(e, {"mu": mu, "z": z}) == pytest.approx(mu * -0.2 + math.sin(mu) + 0.1 * mu, rel=1e-14)


def test_incomplete_expression_reports_end_offset():
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr("x1 + ")
    assert err.value.offset == len("x1 + ")


@pytest.mark.parametrize("text", ["2x", "x y", "(x", "x)", "sin x", "x + * y", "", "3 $ 4", "1..2"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        parse_expr(text)


def test_offsets_are_bytes():
    text = "x +\u00a0$"  # no-break space: one character, two bytes
    with pytest.raises(ExprSyntaxError) as err:
        parse_expr(text)
    assert err.value.offset == len("x +\u00a0".encode("utf-8")) == 5


def test_unknown_function_and_variable():
    with pytest.raises(UnknownFunction):
        parse_expr("tan(x)")
    with pytest.raises(UnknownVariable):
        parse_expr("x + w", names=["x"])


def test_eval_examples():
    assert eval_expr(parse_expr("-x1+x2"), {"x1": 1.5, "x2": -1.5}) == -3.0
    assert eval_expr(parse_expr("cbrt(-8)"), {}) == -2.0
    assert eval_expr(parse_expr("sin(cbrt(x2)+mu)"), {"x2": 0.0, "mu": 0.0}) == 0.0


@pytest.mark.parametrize("text,env", [
    ("1/x", {"x": 0.0}),
    ("log(x)", {"x": 0.0}),
    ("log(x)", {"x": -1.0}),
    ("sqrt(x)", {"x": -4.0}),
    ("x^0.5", {"x": -4.0}),
    ("exp(x)", {"x": 1e4}),
    ("x^(-1)", {"x": 0.0}),
    ("x^y", {"x": -2.0, "y": 0.5}),
])
def test_nonfinite_results(text, env):
    with pytest.raises(NonFiniteResult):
        eval_expr(parse_expr(text), env)


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        eval_expr(parse_expr("x + y"), {"x": 1.0})


def test_literal_third_power_is_signed_cube_root():
    assert eval_expr(parse_expr("x^(1/3)"), {"x": -27.0}) == pytest.approx(-3.0, rel=1e-15)
    assert power_warnings(parse_expr("x^(1/3)"))
    assert "cbrt" in power_warnings(parse_expr("x^(1/3)"))[0]
    assert not power_warnings(parse_expr("x^2 + cbrt(x)"))


def test_state_dependent_exponent():
    assert eval_expr(parse_expr("x^y"), {"x": 2.0, "y": 0.5}) == pytest.approx(math.sqrt(2), rel=1e-15)


@pytest.mark.parametrize("x", [1e-12, 3.7e-9, 0.001, 0.5, 1.0, 2.0, 27.0, 123456.789, 9.99e11, 1e12])
def test_cbrt_cubes_back_within_4_ulp(x):
    for v in (x, -x):
        r = cbrt(v)
        assert abs(r * r * r - v) <= 4 * math.ulp(v)


@given(st.floats(min_value=1e-12, max_value=1e12))
def test_cbrt_property(x):
    r = cbrt(x)
    assert abs(r ** 3 - x) <= 4 * math.ulp(x)
    assert cbrt(-x) == -r


# -- round trip and compiled evaluation --------------------------------------

NAMES = ["x", "y", "mu"]
leaves = st.one_of(
    st.floats(min_value=0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(NAMES).map(Var),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "log", "sqrt", "cbrt", "abs"]), children)
        .map(lambda t: Call(*t)),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


@given(trees)
def test_print_parse_round_trip(tree):
    assert parse_expr(to_text(tree)) == tree


@settings(max_examples=200)
@given(trees, st.floats(-3, 3), st.floats(-3, 3), st.floats(0.001, 1))
def test_compiled_matches_interpreter(tree, x, y, mu):
    env = {"x": x, "y": y, "mu": mu}
    try:
        want = eval_expr(tree, env)
    except NonFiniteResult:
        want = None
    if want is not None and not math.isfinite(want):
        want = None
    fn = compile_vector([tree], [["x", "y"]], ["mu"])
    try:
        got = float(fn(np.array([x, y]), mu)[0])
    except NonFiniteResult:
        got = None
    if got is not None and not math.isfinite(got):
        got = None
    if want is None:
        assert got is None
    else:
        assert got == want


def test_compile_vector_groups():
    fn = compile_vector([parse_expr("-x1 + x2"), parse_expr("x1 * y1 + t")], [["x1", "x2"], ["y1"]], ["t"])
    out = fn(np.array([1.0, 2.0]), np.array([3.0]), 0.5)
    assert list(out) == [1.0, 3.5]


def test_compile_scalar():
    fn = compile_scalar(parse_expr("x1^2 + x2^2"), ["x1", "x2"])
    assert fn(3.0, 4.0) == 25.0
    with pytest.raises(NonFiniteResult):
        compile_scalar(parse_expr("1/x"), ["x"])(0.0)


def test_evaluation_is_deterministic():
    e = parse_expr("sin(x)*exp(-y) + cbrt(x*y) - log(abs(x)+1)")
    vals = {eval_expr(e, {"x": 0.37, "y": -1.2}) for _ in range(5)}
    assert len(vals) == 1
