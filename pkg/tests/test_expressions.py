"""Tests for the tiny symbolic expression language."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from nullrays import expressions as ex
from nullrays.errors import ParseError


def ev(expr, *pts):
    return expr.evaluate(np.asarray(pts, dtype=float))


class TestEvaluate:
    def test_const(self):
        assert ev(ex.const(2.5), [0.0, 0.0], [1.0, -1.0]) == pytest.approx([2.5, 2.5])

    def test_coord(self):
        got = ev(ex.coord(1), [1.0, 2.0], [3.0, 4.0])
        assert got == pytest.approx([2.0, 4.0])

    def test_sin(self):
        got = ev(ex.Sin(ex.coord(0)), [math.pi / 2.0])
        assert got == pytest.approx([1.0])

    def test_operator_sugar(self):
        e = 2.0 * ex.coord(0) + 1.0 - ex.coord(1)
        assert ev(e, [3.0, 4.0]) == pytest.approx([3.0])
        assert ev(-e, [3.0, 4.0]) == pytest.approx([-3.0])

    def test_single_point_shape(self):
        e = ex.coord(0) * ex.coord(0)
        out = e.evaluate(np.array([3.0, 0.0]))
        assert out.shape == ()
        assert float(out) == pytest.approx(9.0)


class TestGrad:
    def cases(self):
        return [
            (ex.const(4.0), 0),
            (ex.coord(0), 0),
            (ex.coord(0), 1),
            (ex.coord(0) * ex.coord(1), 0),
            (ex.Sin(2.0 * ex.coord(1) + ex.coord(0)), 1),
            (ex.Sin(ex.Sin(ex.coord(0))) * ex.coord(1) + 0.3 * ex.coord(0), 0),
        ]

    def test_grad_matches_finite_difference(self):
        rng = np.random.default_rng(0)
        h = 1e-6
        for expr, k in self.cases():
            for _ in range(5):
                p = rng.uniform(-2.0, 2.0, size=2)
                pp, pm = p.copy(), p.copy()
                pp[k] += h
                pm[k] -= h
                fd = (expr.evaluate(pp) - expr.evaluate(pm)) / (2.0 * h)
                sym = expr.grad(k).evaluate(p)
                assert float(sym) == pytest.approx(float(fd), abs=1e-8)

    def test_constant_folding(self):
        z = ex.const(3.0) + ex.const(4.0)
        assert isinstance(z, ex.Const) and z.value == 7.0
        assert (ex.const(0.0) * ex.coord(1)).is_const(0.0)
        assert (ex.const(1.0) * ex.coord(1)) == ex.coord(1)
        assert ex.coord(0).grad(1).is_const(0.0)


class TestParse:
    def test_roundtrip_values(self):
        e = ex.parse_expr("0.2*sin(x1) + 0.1*sin(x0)", 3)
        p = np.array([0.7, -0.3, 2.0])
        want = 0.2 * math.sin(-0.3) + 0.1 * math.sin(0.7)
        assert float(e.evaluate(p)) == pytest.approx(want)

    def test_pi_and_exponent_literals(self):
        e = ex.parse_expr("sin(pi) + 1e-2", 1)
        assert float(e.evaluate(np.zeros(1))) == pytest.approx(0.01, abs=1e-12)

    def test_unary_minus_and_parens(self):
        e = ex.parse_expr("-(x0 - 2) * 3", 1)
        assert float(e.evaluate(np.array([5.0]))) == pytest.approx(-9.0)

    @pytest.mark.parametrize(
        "text",
        ["x5", "cos(x0)", "x0 +", "(x0", "x0 $ 1", "sin x0", "1..2"],
    )
    def test_rejects_bad_input(self, text):
        with pytest.raises(ParseError):
            ex.parse_expr(text, 2)

    def test_coordinate_range_is_dim_checked(self):
        assert ex.parse_expr("x3", 4) == ex.coord(3)
        with pytest.raises(ParseError):
            ex.parse_expr("x3", 3)


@settings(max_examples=30, deadline=None)
@given(
    a=hst.floats(-3, 3, allow_nan=False),
    b=hst.floats(-3, 3, allow_nan=False),
    x=hst.floats(-3, 3, allow_nan=False),
)
def test_parse_matches_direct_eval(a, b, x):
    e = ex.parse_expr(f"{a} * sin(x0) + {b}", 1)
    got = float(e.evaluate(np.array([x])))
    assert got == pytest.approx(a * math.sin(x) + b, abs=1e-12)
