import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squeezeop.birkhoff import (
    alpha_coeff,
    asymptotics,
    c_recursion,
    characteristic_roots,
    expand_recurrence,
    formal_solutions,
    omega_coeff,
    predict,
)
from squeezeop.deficiency import solve_branch
from squeezeop.errors import DegenerateRootsError, InconsistencyError, NotExpandableError
from squeezeop.fock import KerrField, OperatorSpec, PolynomialField, TabulatedField, ZeroField


def exact_ab(spec, n0, r):
    """``a(r), b(r)`` from the matrix weights in 50-digit arithmetic."""
    k, l, D = spec.k, spec.l, spec.delta

    def gamma(rr):
        n = n0 + rr * D
        return mpmath.sqrt(mpmath.rf(n - k + 1, k) * mpmath.rf(n - k + 1, l))

    with mpmath.workdps(50):
        g1, g2 = gamma(r + 1), gamma(r + 2)
        delta = mpmath.mpf(spec.f(n0 + (r + 1) * D))
        a = -(1 + 1j * delta) / g2
        b = -g1 / g2
        return complex(a), complex(b)


SPECS = [
    OperatorSpec(3),
    OperatorSpec(4),
    OperatorSpec(5, 2),
    OperatorSpec(2, 1),
    OperatorSpec(4, 0, field=KerrField(1.0, 2)),
    OperatorSpec(3, 1, field=PolynomialField((0.3, 1.0, 1.5))),
    OperatorSpec(6, 0, field=PolynomialField((2.0, 0.0, 0.5, 1.2))),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"k{s.k}l{s.l}-{s.field.descriptor()}")
def test_expansion_matches_exact_coefficients(spec):
    for n0 in range(spec.l, spec.k):
        e = expand_recurrence(spec, n0, 8)
        for r in (2_000, 10_000):
            a, b = exact_ab(spec, n0, r)
            assert abs(e.a_series.evaluate_at_r(r) - a) <= 1e-12 * max(1.0, abs(a))
            assert abs(e.b_series.evaluate_at_r(r) - b) <= 1e-12


@pytest.mark.parametrize("k,l", [(1, 0), (2, 0), (2, 1), (3, 0), (3, 2), (4, 1), (5, 0), (5, 3), (6, 2), (6, 5)])
def test_b_series_lemma(k, l):
    for n0 in range(l, k):
        e = expand_recurrence(OperatorSpec(k, l), n0, 6)
        assert e.b(0) == -1
        assert e.b(1) == 0
        assert e.b(2) == pytest.approx((k + l) / 2, abs=1e-10)


def test_example_k3():
    e = expand_recurrence(OperatorSpec(3), 0, 6)
    # a = -x^3 Delta^{-3/2} (1 + ...)
    assert e.a(0) == e.a(1) == e.a(2) == 0
    assert e.a(3) == pytest.approx(-(3 ** -1.5))


def test_kerr_kappa():
    e = expand_recurrence(OperatorSpec(4, 0, field=KerrField(1.0, 2)), 0, 4)
    assert e.a(0) == pytest.approx(-1j, abs=1e-14)
    n = 10**6
    ratio = KerrField(1.0, 2)(n) / math.sqrt(math.prod(n + 1 + i for i in range(4)))
    assert ratio == pytest.approx(1.0, rel=1e-4)


def test_not_expandable():
    with pytest.raises(NotExpandableError):
        expand_recurrence(OperatorSpec(3, 0, field=KerrField(1.0, 2)), 0)
    with pytest.raises(NotExpandableError):
        expand_recurrence(OperatorSpec(3, 0, field=TabulatedField((0.0, 1.0))), 0)


def test_characteristic_roots_examples():
    assert characteristic_roots(0, -1) == (1, -1)
    rp, rm = characteristic_roots(-1j, -1)
    assert rp == pytest.approx(0.5j + math.sqrt(3) / 2, abs=1e-15)
    assert rm == pytest.approx(0.5j - math.sqrt(3) / 2, abs=1e-15)
    assert abs(abs(rp) - 1) < 1e-15 and abs(abs(rm) - 1) < 1e-15
    rp, rm = characteristic_roots(-3j, -1)
    assert abs(rp) > 1 and rp.imag > 0
    with pytest.raises(DegenerateRootsError):
        characteristic_roots(2, 1)


@given(st.floats(0.0, 1.99))
def test_roots_unit_circle_below_two(kappa):
    rp, rm = characteristic_roots(-1j * kappa, -1)
    assert abs(abs(rp) - 1) < 1e-12 and abs(abs(rm) - 1) < 1e-12
    assert abs(rp - rm) > 1e-12
    assert rp == pytest.approx(0.5j * kappa + math.sqrt(1 - kappa**2 / 4), abs=1e-14)


def _declared(kappa, L1, L2, L3=0.0, L4=0.0):
    return OperatorSpec(3, 0, field=TabulatedField((0.0,) * 4, (kappa, L1, L2, L3, L4, 0.0, 0.0)))


@given(st.floats(0.0, 1.9), st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=30, deadline=None)
def test_omega_alpha_closed_forms(kappa, L1, L2):
    spec = _declared(kappa, L1, L2)
    e = expand_recurrence(spec, 0, 6)
    # read L's in the r-variable directly off a(r)
    k0, l1, l2 = (1j * e.a(s) for s in range(3))
    assert k0.real == pytest.approx(kappa, abs=1e-12)
    rp, rm = characteristic_roots(e.a(0), e.b(0))
    root = math.sqrt(1 - kappa**2 / 4)
    for sgn, rho in ((1, rp), (-1, rm)):
        om = omega_coeff(e, rho)
        assert om == pytest.approx(sgn * 1j * l1.real / root, abs=1e-12)
        al = alpha_coeff(e, rho, om)
        phi = (kappa * 3 / 4 + l2.real) / math.sqrt(4 - kappa**2) + l1.real**2 * kappa / (2 * (4 - kappa**2) ** 1.5)
        assert al.real == pytest.approx(-3 / 4, abs=1e-10)
        assert al.imag == pytest.approx(sgn * phi, abs=1e-10)


def test_alpha_kappa_zero():
    # kappa = 0, L1 = 0: alpha = -(k+l)/4 +- i L2/2
    e = expand_recurrence(_declared(0.0, 0.0, 0.8), 0, 6)
    L2 = (1j * e.a(2)).real
    rp, rm = characteristic_roots(e.a(0), e.b(0))
    assert alpha_coeff(e, rp, 0) == pytest.approx(-0.75 + 0.5j * L2, abs=1e-12)
    assert alpha_coeff(e, rm, 0) == pytest.approx(-0.75 - 0.5j * L2, abs=1e-12)


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: f"k{s.k}l{s.l}-{s.field.descriptor()}")
def test_symmetry_invariants(spec):
    kl = spec.k + spec.l
    for n0 in range(spec.l, spec.k):
        e, (sp, sm) = asymptotics(spec, n0, 4)
        if kl >= 3:
            assert abs(abs(sp.rho) - 1) < 1e-12 and abs(abs(sm.rho) - 1) < 1e-12
            assert sp.alpha.real == pytest.approx(-kl / 4, abs=1e-10)
        assert (sp.alpha + sm.alpha) == pytest.approx(-kl / 2, abs=1e-10)
        assert sp.omega == pytest.approx(-sm.omega, abs=1e-12)
        assert sp.c_coeffs[0] == 1


def test_f_functions_structure():
    e, (sp, _) = asymptotics(OperatorSpec(4, 0, field=KerrField(1.0, 2)), 1, 4)
    F = np.array(sp.f_polys)
    assert np.max(np.abs(F[0])) <= 1e-12
    assert np.max(np.abs(F[1])) <= 1e-12
    assert abs(F[2, 0]) <= 1e-12 and np.max(np.abs(F[2, 2:])) <= 1e-12 and abs(F[2, 1]) > 0.1


def test_inconsistent_alpha_detected():
    e = expand_recurrence(OperatorSpec(3), 0, 6)
    rp, _ = characteristic_roots(e.a(0), e.b(0))
    with pytest.raises(InconsistencyError):
        c_recursion(e, rp, 0.0, -0.5, 4)
    with pytest.raises(InconsistencyError):
        c_recursion(e, 1.1, 0.0, -0.75, 4)


@pytest.mark.parametrize("S", [1, 2, 3])
@pytest.mark.parametrize("spec", [OperatorSpec(3), OperatorSpec(4, 0, field=KerrField(1.0, 2)), OperatorSpec(5, 2)],
                         ids=["k3", "k4kerr", "k5l2"])
def test_formal_solution_satisfies_recurrence(spec, S):
    """Substituting the truncated series leaves a residual O(r^{-(S+3)/2}) relative to d_r."""
    n0 = spec.l
    _, sols = asymptotics(spec, n0, S)
    rs = np.array([200, 400, 800, 1600])
    for sol in sols:
        res = []
        for r in rs:
            a, b = exact_ab(spec, n0, int(r))
            y = predict(sol, np.array([r, r + 1, r + 2]))
            res.append(abs(y[2] + a * y[1] + b * y[0]) / abs(y[0]))
        slope = np.polyfit(np.log(rs), np.log(res), 1)[0]
        assert slope <= -(S + 3) / 2 + 0.2


def test_predict_properties():
    spec = OperatorSpec(3)
    _, (sp, sm) = asymptotics(spec, 0, 4)
    s0 = sp.truncated(0)
    for r in (10, 1000, 10**6):
        assert abs(predict(s0, r)) == pytest.approx(r ** -0.75, rel=1e-12)
    r = 10**5
    ratio = abs(predict(sp, 4 * r)) / abs(predict(sp, r))
    assert ratio == pytest.approx(4 ** -0.75, rel=1e-2)
    ph = cmath.phase(predict(sm, r + 1) / predict(sm, r))
    assert abs(cmath.phase(cmath.exp(1j * (ph - sm.theta_char)))) < 1e-2
    # huge r stays finite in log-space
    assert np.isfinite(predict(sp, 10**15))


def test_c1_against_free_fit():
    """Fit d_r r^{3/4} with free coefficients of r^{-s/2} and (-1)^r r^{-s/2}; compare C_1."""
    spec = OperatorSpec(3)
    _, (sp, sm) = asymptotics(spec, 0, 4)
    sol = solve_branch(spec, 0, 100_000)
    rs = np.arange(10_000, 100_001)
    y = sol.d[rs] * rs**0.75
    x = rs ** -0.5
    sgn = (-1.0) ** rs
    cols = [x**s for s in range(5)] + [sgn * x**s for s in range(5)]
    coef, *_ = np.linalg.lstsq(np.column_stack(cols), y, rcond=None)
    assert coef[1] / coef[0] == pytest.approx(sp.c_coeffs[1], rel=1e-4)
    assert coef[6] / coef[5] == pytest.approx(sm.c_coeffs[1], rel=1e-4)


def test_declared_expansion_matches_kerr_path():
    """A table with the Kerr expansion declared must give the same formal solutions."""
    kerr = OperatorSpec(4, 0, field=KerrField(1.0, 2))
    from squeezeop.classifier import kappa_expansion

    lam = kappa_expansion(kerr, 10).window(0, 10).real
    tab = OperatorSpec(4, 0, field=TabulatedField(tuple(kerr.f(n) for n in range(10)), tuple(lam)))
    for n0 in range(4):
        ek = expand_recurrence(kerr, n0, 8)
        et = expand_recurrence(tab, n0, 8)
        assert et.a_series.allclose(ek.a_series, atol=1e-11)
        sk = formal_solutions(ek, 4)
        st_ = formal_solutions(et, 4)
        for a, b in zip(sk, st_):
            np.testing.assert_allclose(a.c_coeffs, b.c_coeffs, atol=1e-9)
