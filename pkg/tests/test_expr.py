import math

import numpy as np
import pytest

from it2mof import expr as ex


def test_parse_structure():
    tree = ex.parse("(x1+3)/10")
    assert tree == ex.Bin("/", ex.Bin("+", ex.Var("x1"), ex.Num(3.0)),
                          ex.Num(10.0))


def test_parse_constant_zero():
    assert ex.parse("0") == ex.Num(0.0)


def test_precedence_and_right_assoc_power():
    # ^ binds tighter than unary minus, which binds tighter than * /
    assert ex.parse("-x^2") == ex.Neg(ex.Bin("^", ex.Var("x"), ex.Num(2.0)))
    assert ex.parse("2^3^2") == ex.Bin(
        "^", ex.Num(2.0), ex.Bin("^", ex.Num(3.0), ex.Num(2.0)))
    assert ex.evaluate(ex.parse("2^3^2"), {}) == 512.0
    assert ex.parse("a+b*c") == ex.parse("a+(b*c)")


def test_sin_squared_at_zero():
    assert ex.evaluate(ex.parse("1 - sin(0.4*x1)^2"), {"x1": 0.0}) == 1.0


def test_disturbance_at_zero():
    assert ex.evaluate(ex.parse("3*exp(-0.1*t)*sin(t)"), {"t": 0.0}) == 0.0


def test_hand_arithmetic():
    assert ex.evaluate(ex.parse("(x1+3)/10"), {"x1": 0.0}) == 0.3
    assert ex.evaluate(ex.parse("(-x1+5)/10"), {"x1": 4.0}) == pytest.approx(0.1)


def test_syntax_error_carries_offset_and_hint():
    with pytest.raises(ex.ExprSyntaxError) as err:
        ex.parse("1 + (2")
    assert err.value.offset == 6
    assert "expected" in str(err.value)


def test_unknown_function():
    with pytest.raises(ex.ExprSyntaxError) as err:
        ex.parse("tan(x)")
    assert "unknown function" in str(err.value)


def test_empty_source_rejected():
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse("   ")


def test_unbound_variable():
    with pytest.raises(ex.UnboundVariableError):
        ex.evaluate(ex.parse("x + y"), {"x": 1.0})


def test_division_by_zero_is_domain_error():
    with pytest.raises(ex.ExprDomainError):
        ex.evaluate(ex.parse("1/x"), {"x": 0.0})


def test_negative_base_fractional_power_is_domain_error():
    with pytest.raises(ex.ExprDomainError):
        ex.evaluate(ex.parse("x^0.5"), {"x": -2.0})
    # integer exponents of negative bases stay fine
    assert ex.evaluate(ex.parse("x^2"), {"x": -3.0}) == 9.0


def test_min_max_arity():
    assert ex.evaluate(ex.parse("min(2, 1+5)"), {}) == 2.0
    assert ex.evaluate(ex.parse("max(2, 1+5)"), {}) == 6.0
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse("min(1)")


# ---------------------------------------------------------------------------
# random round-trip / precedence properties
# ---------------------------------------------------------------------------

def _random_expr(rng, depth, vars_):
    kind = rng.integers(0, 6 if depth > 0 else 2)
    if kind == 0:
        return ex.Num(round(float(rng.uniform(0, 4)), 4))
    if kind == 1:
        return ex.Var(str(rng.choice(vars_)))
    if kind == 2:
        return ex.Neg(_random_expr(rng, depth - 1, vars_))
    if kind == 3:
        op = str(rng.choice(["+", "-", "*", "/"]))
        return ex.Bin(op, _random_expr(rng, depth - 1, vars_),
                      _random_expr(rng, depth - 1, vars_))
    if kind == 4:
        # keep exponents integral so negative bases stay in-domain
        return ex.Bin("^", _random_expr(rng, depth - 1, vars_),
                      ex.Num(float(rng.integers(0, 3))))
    fn = str(rng.choice(["sin", "cos", "exp", "abs", "min", "max"]))
    n_args = ex.FUNCTIONS[fn]
    return ex.Call(fn, tuple(_random_expr(rng, depth - 1, vars_)
                             for _ in range(n_args)))


def test_round_trip_bit_stable_1000():
    rng = np.random.default_rng(7)
    vars_ = ["x1", "x2", "t"]
    checked = 0
    while checked < 1000:
        tree = _random_expr(rng, depth=4, vars_=vars_)
        printed = ex.to_source(tree)
        reparsed = ex.parse(printed)
        assert reparsed == tree, printed
        env = {v: float(rng.uniform(-2, 2)) for v in vars_}
        try:
            a = ex.evaluate(tree, env)
        except ex.ExprDomainError:
            continue
        b = ex.evaluate(ex.parse(ex.to_source(reparsed)), env)
        # bit-for-bit: identical structure evaluates identically
        assert (a == b) or (math.isnan(a) and math.isnan(b))
        checked += 1


def test_precedence_property_10000_triples():
    rng = np.random.default_rng(11)
    left = ex.parse("a+b*c")
    right = ex.parse("a+(b*c)")
    for _ in range(10_000):
        env = {"a": float(rng.uniform(-10, 10)),
               "b": float(rng.uniform(-10, 10)),
               "c": float(rng.uniform(-10, 10))}
        assert ex.evaluate(left, env) == ex.evaluate(right, env)


def test_stack_program_matches_tree_eval():
    rng = np.random.default_rng(3)
    vars_ = ["x1", "x2"]
    slots = {"x1": 0, "x2": 1}
    checked = 0
    while checked < 300:
        tree = _random_expr(rng, depth=4, vars_=vars_)
        vals = [float(rng.uniform(-2, 2)) for _ in vars_]
        env = dict(zip(vars_, vals))
        prog = ex.compile_stack_program(tree, slots)
        try:
            want = ex.evaluate(tree, env)
        except ex.ExprDomainError:
            with pytest.raises(ex.ExprDomainError):
                ex.run_stack_program(prog, vals)
            continue
        assert ex.run_stack_program(prog, vals) == want
        checked += 1
