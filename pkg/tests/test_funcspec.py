import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from synchrosde.funcspec import (
    DeclaredMeta,
    DomainError,
    ExpressionError,
    FunctionDescriptor,
    breakpoints,
    evaluate,
    evaluate_array,
    format_expression,
    is_bounded,
    parse,
    profile,
    proved_support_radius,
    tail_l1_mass,
)
from synchrosde.funcspec import (
    BinOp,
    Compose,
    Const,
    Func,
    Func2,
    Indicator,
    Neg,
    PiecewiseLinear,
    Polynomial,
    Var,
)


class TestParse:
    def test_product_of_sgn_and_indicator(self):
        f = parse("sgn(x)*indicator[-1,1]")
        assert f.ast == BinOp("*", Func("sgn", Var()), Indicator(-1.0, 1.0))

    def test_constant_zero(self):
        assert parse("0").ast == Const(0.0)

    def test_piecewise_four_knots(self):
        f = parse("piecewise_linear[(0,0),(0.25,1),(1,1),(2,0)]")
        assert f.ast == PiecewiseLinear((0.0, 0.25, 1.0, 2.0), (0.0, 1.0, 1.0, 0.0))

    def test_polynomial_and_calls(self):
        f = parse("polynomial[1, -2, 0.5] + min(x, 3) - compose(exp(x), -abs(x))")
        assert evaluate(f, 0.0) == 1.0 + 0.0 - 1.0

    def test_precedence_and_unary(self):
        assert evaluate(parse("1 - 2*x"), 3.0) == -5.0
        assert evaluate(parse("-x*2"), 3.0) == -6.0
        assert evaluate(parse("(1 - 2)*x"), 3.0) == -3.0

    def test_scientific_numbers(self):
        assert evaluate(parse("1e-3 + 2.5E2"), 0.0) == 1e-3 + 250.0

    def test_syntax_error_with_offset(self):
        with pytest.raises(ExpressionError) as e:
            parse("sgn(x) + * 2")
        assert e.value.offset == 9

    def test_unknown_identifier(self):
        with pytest.raises(ExpressionError, match="unknown identifier 'sgnn'"):
            parse("sgnn(x)")

    def test_non_increasing_knots(self):
        with pytest.raises(ExpressionError, match="strictly increasing"):
            parse("piecewise_linear[(0,0),(0,1)]")

    def test_indicator_requires_ordered_bounds(self):
        with pytest.raises(ExpressionError, match="a < b"):
            parse("indicator[1,-1]")

    def test_trailing_input(self):
        with pytest.raises(ExpressionError, match="trailing"):
            parse("x x")


class TestEvaluate:
    @pytest.mark.parametrize(
        "x,expected",
        [(0.5, 1.0), (0.0, 0.0), (3.0, 0.0), (-0.5, -1.0), (1.0, 1.0), (-1.0, -1.0)],
    )
    def test_canonical_alpha(self, x, expected):
        f = parse("sgn(x)*indicator[-1,1]")
        assert evaluate(f, x) == expected

    def test_sgn_zero_convention(self):
        assert evaluate(parse("sgn(x)"), 0.0) == 0.0

    def test_piecewise_constant_extension(self):
        f = parse("piecewise_linear[(0,0),(0.25,1),(1,1),(2,0)]")
        assert evaluate(f, -5.0) == 0.0
        assert evaluate(f, 99.0) == 0.0
        assert evaluate(f, 0.125) == 0.5
        g = parse("piecewise_linear[(-1,3),(1,5)]")
        assert evaluate(g, -10.0) == 3.0
        assert evaluate(g, 10.0) == 5.0

    def test_division_by_zero(self):
        with pytest.raises(DomainError, match="x = 0"):
            evaluate(parse("1/x"), 0.0)
        with pytest.raises(DomainError):
            evaluate_array(parse("1/x"), np.asarray([1.0, 0.0, 2.0]))

    def test_division_ok_off_zero(self):
        assert evaluate(parse("1/x"), 4.0) == 0.25

    def test_array_matches_scalar(self):
        f = parse("abs(x)*sin(2*x) - indicator[0,1]/(2 + cos(x))")
        xs = np.linspace(-3, 3, 101)
        arr = evaluate_array(f, xs)
        assert arr.tolist() == [evaluate(f, float(x)) for x in xs]

    def test_descriptor_is_callable(self):
        f = parse("2*x")
        assert f(1.5) == 3.0
        np.testing.assert_array_equal(f(np.asarray([1.0, 2.0])), [2.0, 4.0])


def _expressions():
    numbers = st.floats(min_value=-5, max_value=5, allow_nan=False, allow_infinity=False)

    def knots(draw):
        start = draw(numbers)
        steps = draw(st.lists(st.floats(min_value=0.125, max_value=2.0), min_size=1, max_size=4))
        xs = [start]
        for d in steps:
            xs.append(xs[-1] + d)
        ys = draw(st.lists(numbers, min_size=len(xs), max_size=len(xs)))
        return PiecewiseLinear(tuple(xs), tuple(ys))

    def indicator(draw):
        a = draw(numbers)
        w = draw(st.floats(min_value=0.25, max_value=4.0))
        return Indicator(a, a + w)

    leaves = st.one_of(
        st.builds(Const, numbers),
        st.just(Var()),
        st.composite(knots)(),
        st.composite(indicator)(),
        st.builds(lambda cs: Polynomial(tuple(cs)), st.lists(numbers, min_size=1, max_size=4)),
    )

    def extend(children):
        return st.one_of(
            st.builds(lambda a, b, op: BinOp(op, a, b), children, children, st.sampled_from("+-*")),
            st.builds(lambda a, c: BinOp("/", a, Const(c)), children,
                      numbers.filter(lambda v: abs(v) > 0.01)),
            st.builds(Neg, children),
            st.builds(lambda a, n: Func(n, a), children, st.sampled_from(["abs", "sgn", "sin", "cos", "exp"])),
            st.builds(lambda a, b, n: Func2(n, a, b), children, children, st.sampled_from(["min", "max"])),
            st.builds(Compose, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=12).map(lambda ast: FunctionDescriptor(ast=ast))


@given(_expressions())
@settings(max_examples=120, deadline=None)
def test_print_parse_roundtrip(f):
    text = format_expression(f)
    g = parse(text)
    xs = np.random.default_rng(0).uniform(-10, 10, 1000)
    a = evaluate_array(f, xs)
    b = evaluate_array(g, xs)
    # same AST semantics: values agree bit-for-bit (nan where both overflow)
    np.testing.assert_array_equal(a, b)


class TestAnalyses:
    def test_support_radius(self):
        assert proved_support_radius(parse("sgn(x)*indicator[-1,1]")) == 1.0
        assert proved_support_radius(parse("indicator[-0.5,2]")) == 2.0
        assert proved_support_radius(parse("piecewise_linear[(0,0),(0.25,1),(1,1),(2,0)]")) == 2.0
        assert proved_support_radius(parse("piecewise_linear[(-1,3),(1,5)]")) is None
        assert proved_support_radius(parse("sgn(x)")) is None
        assert proved_support_radius(parse("sin(3*indicator[-2,2]*x)")) == 2.0
        assert proved_support_radius(parse("0")) == 0.0
        assert proved_support_radius(parse("exp(x)*indicator[-1,3]")) == 3.0

    def test_breakpoints(self):
        assert breakpoints(parse("sgn(x)*indicator[-1,1]")) == (-1.0, 0.0, 1.0)
        assert breakpoints(parse("abs(2*x - 1)")) == (0.5,)
        assert breakpoints(parse("piecewise_linear[(0,0),(1,1)]")) == (0.0, 1.0)
        assert breakpoints(parse("compose(exp(-abs(x)), abs(x))")) == (0.0,)
        assert breakpoints(parse("sin(x)")) == ()

    def test_bounded(self):
        assert is_bounded(parse("exp(-abs(x))"))
        assert is_bounded(parse("0.5 + 0.3*sin(x)"))
        assert not is_bounded(parse("x"))
        assert not is_bounded(parse("exp(x)"))
        assert is_bounded(parse("piecewise_linear[(-1,3),(1,5)]"))

    def test_tail_mass(self):
        assert tail_l1_mass(parse("indicator[-1,1]"), 5.0) == 0.0
        got = tail_l1_mass(parse("exp(-abs(x))"), 10.0)
        assert got == pytest.approx(2.0 * math.exp(-10.0), rel=1e-14)
        got = tail_l1_mass(parse("0.5*exp(-2*abs(x))"), 8.0)
        assert got == pytest.approx(2.0 * 0.5 * math.exp(-16.0) / 2.0, rel=1e-14)
        assert tail_l1_mass(parse("1"), 10.0) is None
        assert tail_l1_mass(parse("exp(abs(x))"), 10.0) is None


class TestProfile:
    def test_constant_sigma(self):
        p = profile(parse("1"), 10.0, 1e-3)
        assert p.sup_norm_est == 1.0
        assert p.lipschitz_est == 0.0
        assert p.inf_sq_est == 1.0

    def test_canonical_alpha(self):
        p = profile(parse("sgn(x)*indicator[-1,1]"), 10.0, 1e-3)
        assert p.sup_norm_est == 1.0
        assert p.support_radius_est == 1.0
        assert p.l1_norm_est == pytest.approx(2.0, abs=2e-3)

    def test_piecewise_lipschitz_matches_brute_force(self):
        f = parse("piecewise_linear[(0,0),(0.25,1),(1,1),(2,0)]")
        p = profile(f, 10.0, 1e-3)
        # oracle: pairwise quotient scan on a coarse independent grid
        xs = np.linspace(-3.0, 3.0, 1201)
        vals = evaluate_array(f, xs)
        brute = max(
            abs(vals[j] - vals[i]) / (xs[j] - xs[i])
            for i in range(0, len(xs), 40)
            for j in range(i + 1, len(xs), 17)
        )
        assert p.lipschitz_est == pytest.approx(4.0, rel=1e-9)
        assert brute <= p.lipschitz_est + 1e-9

    def test_unbounded_markers(self):
        p = profile(parse("sgn(x)"), 10.0, 1e-2)
        assert p.support_radius_est is None
        assert p.l1_norm_est is None

    def test_exp_envelope_l1(self):
        p = profile(parse("exp(-abs(x))"), 10.0, 1e-3)
        assert p.l1_norm_est == pytest.approx(2.0, rel=1e-6)

    def test_declared_overrides(self):
        f = parse("sgn(x)*exp(-abs(x))")
        f = FunctionDescriptor(ast=f.ast, declared=DeclaredMeta(sup_norm=1.0, lipschitz=3.0))
        p = profile(f, 10.0, 1e-3)
        assert p.sup_norm == 1.0
        assert p.lipschitz == 3.0
        assert p.sup_norm_est < 1.0  # grid cannot see the one-sided limit at 0

    def test_known_exact_lipschitz_never_exceeded(self):
        # constants have constant 0, the identity has constant 1: the grid
        # estimate must not exceed the declared exact value
        assert profile(parse("7"), 5.0, 1e-3).lipschitz_est <= 0.0
        assert profile(parse("x"), 5.0, 1e-3).lipschitz_est <= 1.0
        # sgn is flat away from 0: every cell not containing 0 has quotient 0
        f = parse("sgn(x)")
        xs = np.linspace(0.5, 10.0, 2001)
        vals = evaluate_array(f, xs)
        assert np.abs(np.diff(vals)).max() == 0.0

    def test_deterministic(self):
        f = parse("abs(x)*sin(2*x) + indicator[-1,2]")
        p1 = profile(f, 7.0, 1e-3)
        p2 = profile(f, 7.0, 1e-3)
        assert p1 == p2

    @pytest.mark.parametrize(
        "expr", ["sgn(x)*indicator[-1,1]", "abs(sin(2*x))", "piecewise_linear[(0,0),(0.25,1),(1,1),(2,0)]"]
    )
    def test_estimates_monotone_under_refinement(self, expr):
        f = parse(expr)
        coarse = profile(f, 4.0, 1e-2)
        fine = profile(f, 4.0, 5e-3)
        assert fine.sup_norm_est >= coarse.sup_norm_est
        assert fine.lipschitz_est >= coarse.lipschitz_est

    def test_grid_validation(self):
        with pytest.raises(ValueError):
            profile(parse("x"), -1.0, 1e-3)
        with pytest.raises(ValueError):
            profile(parse("x"), 1.0, 0.0)
