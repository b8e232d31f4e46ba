import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given, settings, strategies as st

from squeezeop.errors import SeriesDomainError, SingularSeriesError
from squeezeop.halfseries import (
    HalfPowerSeries,
    binomial_coefficient,
    poly_in_n,
    series_exp_negative,
    series_log,
    series_reciprocal,
    series_shift_pow,
    series_sqrt,
    series_sqrt_shift,
)

X = sympy.Symbol("x")
ATOL = 1e-12

coef = st.floats(-2.0, 2.0, allow_nan=False)


def sympy_coeffs(expr, lo, hi):
    ser = sympy.series(expr, X, 0, hi + 1).removeO()
    ser = sympy.expand(ser)
    return np.array([complex(ser.coeff(X, e)) if e != 0 else complex(ser.subs(X, 0) if lo >= 0 else ser.coeff(X, 0)) for e in range(lo, hi + 1)])


def taylor_coeffs(fn, top):
    """Taylor coefficients of ``fn`` at 0 via high-precision numerical differentiation."""
    with mpmath.workdps(60):
        return np.array([complex(c) for c in mpmath.taylor(fn, 0, top)])


def as_fn(s: HalfPowerSeries):
    cs = [mpmath.mpf(float(c.real)) for c in s.coeffs]
    return lambda x: sum(c * x ** (s.leading_exponent + i) for i, c in enumerate(cs))


def as_expr(s: HalfPowerSeries):
    return sum(sympy.Rational(float(c.real)) * X ** (s.leading_exponent + i) for i, c in enumerate(s.coeffs))


def series_st(min_order=3, max_order=7, lead=0, unit=False):
    @st.composite
    def make(draw):
        S = draw(st.integers(min_order, max_order))
        cs = [draw(coef) for _ in range(S + 1)]
        if unit:
            cs[0] = 1.0
        elif abs(cs[0]) < 0.2:
            cs[0] = 1.0
        return HalfPowerSeries(cs, lead)

    return make()


def test_construction_and_access():
    s = HalfPowerSeries([1, 2, 3], -1)
    assert s.order == 2 and s.top == 1
    assert s.coeff(-2) == 0 and s.coeff(0) == 2
    with pytest.raises(IndexError):
        s.coeff(2)
    np.testing.assert_array_equal(s.window(-2, 1), [0, 1, 2, 3])
    assert s(2.0) == pytest.approx(0.5 + 2 + 6)


def test_zero_equality_ignores_exponent():
    assert HalfPowerSeries.zero(4, 0) == HalfPowerSeries.zero(2, 5)
    assert HalfPowerSeries([1.0, 0.0], 0) != HalfPowerSeries([1.0, 1.0], 0)


def test_add_truncates_to_common_top():
    a = HalfPowerSeries([1, 1, 1, 1], 0)
    b = HalfPowerSeries([1, 1], 0)
    c = a + b
    assert c.top == 1
    np.testing.assert_array_equal(c.coeffs, [2, 2])


def test_mul_leading_exponents_add():
    a = HalfPowerSeries([1, 1], -2)
    b = HalfPowerSeries([2, 0], 3)
    c = a * b
    assert c.leading_exponent == 1
    np.testing.assert_allclose(c.coeffs, [2, 2])


@settings(max_examples=40, deadline=None)
@given(series_st(), series_st())
def test_mul_matches_sympy(a, b):
    c = a * b
    prod = sympy.Poly(as_expr(a) * as_expr(b), X)
    ref = np.array([complex(prod.coeff_monomial(X**e)) for e in range(c.top + 1)])
    np.testing.assert_allclose(c.window(0, c.top), ref, atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(series_st())
def test_reciprocal_round_trip(u):
    v = series_reciprocal(u)
    prod = u * v
    one = HalfPowerSeries.constant(1.0, prod.order)
    assert prod.allclose(one, atol=ATOL * max(1.0, float(np.max(np.abs(v.coeffs)))))


@settings(max_examples=25, deadline=None)
@given(series_st(3, 5))
def test_reciprocal_matches_taylor(u):
    v = series_reciprocal(u)
    f = as_fn(u)
    ref = taylor_coeffs(lambda x: 1 / f(x), v.top)
    np.testing.assert_allclose(v.coeffs, ref, rtol=1e-9, atol=1e-9)


def test_reciprocal_singular():
    with pytest.raises(SingularSeriesError):
        series_reciprocal(HalfPowerSeries([0.0, 1.0]))


def test_reciprocal_with_lead():
    v = series_reciprocal(HalfPowerSeries([2.0, 0.0], 3))
    assert v.leading_exponent == -3 and v.coeffs[0] == 0.5


@settings(max_examples=40, deadline=None)
@given(series_st())
def test_sqrt_round_trip(u):
    u = HalfPowerSeries(np.concatenate([[abs(u.coeffs[0].real) + 0.5], u.coeffs[1:]]), 0)
    s = series_sqrt(u)
    assert (s * s).allclose(u, atol=ATOL * max(1.0, float(np.max(np.abs(u.coeffs)))) * 10)


def test_sqrt_domain():
    with pytest.raises(SeriesDomainError):
        series_sqrt(HalfPowerSeries([-1.0, 0.0]))
    with pytest.raises(SeriesDomainError):
        series_sqrt(HalfPowerSeries([1.0, 0.0], 1))
    s = series_sqrt(HalfPowerSeries([4.0, 0.0, 1.0], -2))
    assert s.leading_exponent == -1 and s.coeffs[0] == 2.0


@settings(max_examples=40, deadline=None)
@given(series_st(lead=1))
def test_exp_log_round_trip(w):
    e = series_exp_negative(w)
    g = series_log(e)
    assert g.allclose(w.extend_down(0), atol=1e-12 * max(1.0, float(np.max(np.abs(e.coeffs)))))


@settings(max_examples=25, deadline=None)
@given(series_st(3, 5, lead=1))
def test_exp_matches_taylor(w):
    e = series_exp_negative(w)
    f = as_fn(w)
    ref = taylor_coeffs(lambda x: mpmath.exp(f(x)), e.top)
    np.testing.assert_allclose(e.coeffs, ref, rtol=1e-9, atol=1e-9)


def test_exp_domain():
    with pytest.raises(SeriesDomainError):
        series_exp_negative(HalfPowerSeries([1.0, 1.0], 0))
    with pytest.raises(SeriesDomainError):
        series_log(HalfPowerSeries([2.0, 1.0], 0))


@given(st.floats(-3, 3), st.integers(0, 6))
def test_binomial(p, m):
    ref = float(sympy.binomial(sympy.Rational(p), m))
    assert binomial_coefficient(p, m).real == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_shift_pow_matches_sympy():
    for p, nu in [(0.5, 2.0), (-1.5, 1.0), (-0.75, 0.25)]:
        s = series_shift_pow(p, nu, 8)
        ref = sympy_coeffs((1 + sympy.nsimplify(nu) * X**2) ** sympy.nsimplify(p), 0, 8)
        np.testing.assert_allclose(s.coeffs, ref, atol=1e-13)


def test_sqrt_shift_numeric():
    # (r + nu)^{1/2} - r^{1/2} at r = 1e4
    for nu in (1.0, 2.0):
        s = series_sqrt_shift(nu, 9)
        r = 1e4
        assert s.evaluate_at_r(r).real == pytest.approx(math.sqrt(r + nu) - math.sqrt(r), rel=1e-14)


def test_poly_in_n_exact():
    coeffs = [3.0, -1.0, 2.0]
    s = poly_in_n(coeffs, scale=3, offset=0.5, top=4)
    r = 37.0
    n = 3 * (r + 0.5)
    assert s.evaluate_at_r(r).real == pytest.approx(3 - n + 2 * n * n, rel=1e-14)
    assert s.leading_exponent == -4


def test_numeric_consistency_slope():
    # an even series truncated after x^S leaves an error ~ x^{S+2} = r^{-(S+2)/2}
    S = 2
    full = series_shift_pow(-0.5, 1.0, 12)
    trunc = series_shift_pow(-0.5, 1.0, S)
    rs = np.array([1e3, 1e4, 1e5])
    err = np.abs(full.evaluate_at_r(rs) - trunc.evaluate_at_r(rs))
    slope = np.polyfit(np.log(rs), np.log(err), 1)[0]
    assert slope == pytest.approx(-(S + 2) / 2, abs=0.05)
