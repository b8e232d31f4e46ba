"""Formal solutions of the branch recurrence ``d_{r+2} + a(r) d_{r+1} + b(r) d_r = 0``.

For a branch offset ``n0`` the deficiency recurrence, divided by
``gamma_{r+2} = beta^{lk}_{n0+(r+2)Delta}``, has coefficients

    a(r) = -(1 + i delta_{r+1}) / gamma_{r+2},    b(r) = -gamma_{r+1} / gamma_{r+2}

with ``delta_r = f(n0 + r Delta)``.  Both admit expansions in ``x = r^{-1/2}``.
Two independent solutions then behave like

    d_r ~ rho^r exp(Omega sqrt(r)) r^alpha sum_s C_s r^{-s/2}

where ``rho`` solves ``rho^2 + a0 rho + b0 = 0`` and ``Omega``, ``alpha``, ``C_s``
follow from cancelling the expansion order by order.  Only the case of
expansions in ``r^{-1/2}`` without logarithmic terms is handled here.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DegenerateRootsError, InconsistencyError, NotExpandableError
from .fock import OperatorSpec, TabulatedField, pochhammer_poly
from .halfseries import (
    DEFAULT_ORDER,
    HalfPowerSeries,
    poly_in_n,
    series_exp_negative,
    series_reciprocal,
    series_shift_pow,
    series_sqrt,
    series_sqrt_shift,
)

CONSISTENCY_ATOL = 1e-9
UNIT_CIRCLE_TOL = 1e-12


@dataclass(frozen=True)
class RecurrenceExpansion:
    a_series: HalfPowerSeries
    b_series: HalfPowerSeries
    n0: int
    spec: OperatorSpec
    order: int

    def a(self, s: int) -> complex:
        return self.a_series.coeff(s)

    def b(self, s: int) -> complex:
        return self.b_series.coeff(s)


@dataclass(frozen=True)
class AsymptoticSolution:
    """One formal solution ``rho^r e^{Omega sqrt r} r^alpha sum C_s r^{-s/2}`` (``C_0 = 1``)."""

    rho: complex
    theta_char: float
    omega: complex
    alpha: complex
    phi: float
    c_coeffs: tuple
    sign: int = +1
    f_polys: Optional[tuple] = None  # f_j(s) as ascending coefficient arrays in s

    @property
    def order(self) -> int:
        return len(self.c_coeffs) - 1

    def truncated(self, order: int) -> "AsymptoticSolution":
        return AsymptoticSolution(
            self.rho, self.theta_char, self.omega, self.alpha, self.phi,
            tuple(self.c_coeffs[: order + 1]), self.sign, self.f_polys,
        )

    def to_dict(self) -> dict:
        cx = lambda z: {"re": float(z.real), "im": float(z.imag)}
        return {
            "sign": "+" if self.sign > 0 else "-",
            "rho": cx(self.rho),
            "theta": self.theta_char,
            "omega": cx(self.omega),
            "alpha": cx(self.alpha),
            "phi": self.phi,
            "C": [cx(c) for c in self.c_coeffs],
        }


def _beta_lk_sq_poly(k: int, l: int) -> list[int]:
    """Coefficients in ``n`` of ``(beta^{lk}_n)^2 = (n-k+1, k) (n-k+1, l)``."""
    return [int(c) for c in P.polymul(pochhammer_poly(1 - k, k), pochhammer_poly(1 - k, l))]


def _normalized_gamma_sq(k: int, l: int, n0: int, nu: int, top: int) -> HalfPowerSeries:
    """``gamma_{r+nu}^2 / (Delta r)^{k+l}`` as a series in ``x``; starts with 1."""
    d = k - l
    kl = k + l
    s = poly_in_n(_beta_lk_sq_poly(k, l), scale=d, offset=n0 / d + nu, top=top - 2 * kl)
    return s.shift(2 * kl) * (1.0 / d**kl)


def expand_recurrence(spec: OperatorSpec, n0: int, order: int = DEFAULT_ORDER) -> RecurrenceExpansion:
    """Expansions of ``a(r)`` and ``b(r)`` through ``x^order`` for branch ``n0``."""
    spec = spec.normalized()
    k, l, d = spec.k, spec.l, spec.delta
    kl = k + l
    if not (l <= n0 < k):
        raise ValueError(f"branch offset must satisfy l <= n0 < k, got n0={n0}")
    fld = spec.field
    if fld.is_polynomial:
        h = fld.degree
        if 2 * h > kl:
            raise NotExpandableError(f"field of degree {h} outgrows beta ~ n^{kl / 2}")
    elif isinstance(fld, TabulatedField) and fld.expansion is not None:
        h = 0
    else:
        raise NotExpandableError("field has no declared half-power expansion")

    work = order + 2 * h + 4
    q1 = _normalized_gamma_sq(k, l, n0, 1, work)
    q2 = _normalized_gamma_sq(k, l, n0, 2, work)
    inv_sqrt_q2 = series_reciprocal(series_sqrt(q2))
    b = -(series_sqrt(q1) * inv_sqrt_q2)

    # 1/gamma_{r+2} = (Delta)^{-kl/2} x^{kl} / sqrt(q2)
    inv_gamma = (inv_sqrt_q2 * d ** (-kl / 2)).shift(kl)
    if fld.is_polynomial:
        delta_series = poly_in_n(fld.poly_coeffs(), scale=d, offset=n0 / d + 1, top=work)
        ratio = delta_series * inv_gamma
    else:
        ratio = _compose_declared(fld.expansion, d, n0 / d + 1, work)
    a = -inv_gamma - 1j * ratio

    a = _fit(a, order)
    b = _fit(b, order)
    return RecurrenceExpansion(a, b, n0, spec, order)


def _fit(s: HalfPowerSeries, order: int) -> HalfPowerSeries:
    s = s.truncate(order)
    if s.leading_exponent > 0:
        s = s.extend_down(0)
    return s


def _compose_declared(lams, d: int, c: float, top: int) -> HalfPowerSeries:
    """``sum_j lam_j n^{-j/2}`` with ``n = d (r + c)``, i.e. ``y = d^{-1/2} x (1 + c x^2)^{-1/2}``."""
    top = min(top, len(lams) - 1)
    acc = HalfPowerSeries.zero(top)
    for j, lam in enumerate(lams[: top + 1]):
        if lam == 0:
            continue
        term = series_shift_pow(-j / 2, c, top - j).shift(j) * (lam * d ** (-j / 2))
        acc = acc + term
    return acc


def characteristic_roots(a0: complex, b0: complex) -> tuple[complex, complex]:
    """Roots of ``rho^2 + a0 rho + b0``; ``rho_+`` takes the principal square root branch."""
    if b0 == 0:
        raise DegenerateRootsError("b0 must be nonzero")
    disc = complex(a0) ** 2 - 4 * complex(b0)
    disc = complex(disc.real + 0.0, disc.imag + 0.0)
    s = cmath.sqrt(disc)
    if s.real == 0.0 and s.imag < 0:
        s = -s
    rp = (-a0 + s) / 2
    rm = (-a0 - s) / 2
    if abs(rp - rm) <= 1e-12 * max(1.0, abs(rp)):
        raise DegenerateRootsError(f"characteristic roots coincide: {rp}")
    return rp, rm


def omega_coeff(exp: RecurrenceExpansion, rho: complex) -> complex:
    a0, a1, b1 = exp.a(0), exp.a(1), exp.b(1)
    den = a0 * rho / 2 + rho**2
    if abs(den) < 1e-14:
        raise DegenerateRootsError("vanishing denominator in the exponential coefficient")
    return -(a1 * rho + b1) / den


def alpha_coeff(exp: RecurrenceExpansion, rho: complex, omega: complex) -> complex:
    a0, a1, a2 = exp.a(0), exp.a(1), exp.a(2)
    b0, b2 = exp.b(0), exp.b(2)
    den1 = a0 * rho + 2 * b0
    den2 = 2 * rho + a0
    if abs(den1) < 1e-14 or abs(den2) < 1e-14:
        raise DegenerateRootsError("vanishing denominator in the power coefficient")
    return (a2 * rho + b2) / den1 - (omega**2 * (rho / 2 + a0 / 8) + omega * a1 / 2) / den2


def _shift_pow_s(alpha: complex, nu: float, top: int) -> np.ndarray:
    """``(1 + nu x^2)^{alpha - s/2}`` with coefficients that are polynomials in ``s``.

    Returns ``T[j, p]`` = coefficient of ``x^j s^p``.
    """
    deg = top // 2 + 1
    T = np.zeros((top + 1, deg + 1), dtype=complex)
    b = np.array([1.0 + 0j])
    for m in range(top // 2 + 1):
        T[2 * m, : b.size] = b * nu**m
        # binom(p, m+1) = binom(p, m) (p - m) / (m + 1) with p = alpha - s/2
        b = P.polymul(b, np.array([(alpha - m) / (m + 1), -0.5 / (m + 1)]))
    return T


def _series_times_spoly(u: np.ndarray, T: np.ndarray) -> np.ndarray:
    top = T.shape[0] - 1
    out = np.zeros_like(T)
    for i in range(top + 1):
        if u[i] != 0:
            out[i:] += u[i] * T[: top + 1 - i]
    return out


def coefficient_functions(exp: RecurrenceExpansion, rho: complex, omega: complex, alpha: complex, top: int) -> np.ndarray:
    """``F[j, p]``: coefficient of ``s^p`` in ``f_j(s)``, ``j = 0..top``.

    ``f_j(s)`` is the ``x^j`` coefficient of
    ``rho^2 E_2 (1+2x^2)^{alpha-s/2} + rho E_1 a(x) (1+x^2)^{alpha-s/2} + b(x)``
    with ``E_nu = exp(Omega ((r+nu)^{1/2} - r^{1/2}))``.
    """
    a = exp.a_series.window(0, top)
    b = exp.b_series.window(0, top)
    E = {}
    for nu in (1, 2):
        if omega == 0:
            e = np.zeros(top + 1, dtype=complex)
            e[0] = 1.0
        else:
            e = series_exp_negative(series_sqrt_shift(nu, top) * omega).window(0, top)
        E[nu] = e
    T2 = _shift_pow_s(alpha, 2.0, top)
    T1 = _shift_pow_s(alpha, 1.0, top)
    E1a = np.convolve(E[1], a)[: top + 1]
    F = rho**2 * _series_times_spoly(E[2], T2) + rho * _series_times_spoly(E1a, T1)
    F[:, 0] += b
    return F


def c_recursion(exp: RecurrenceExpansion, rho: complex, omega: complex, alpha: complex, order: int, atol: float = CONSISTENCY_ATOL):
    """Coefficients ``C_0 = 1, C_1 .. C_order`` and the functions ``f_j(s)`` used to get them."""
    top = order + 2
    if exp.a_series.top < top or exp.b_series.top < top:
        raise ValueError(f"recurrence expansion only known through x^{min(exp.a_series.top, exp.b_series.top)}, need x^{top}")
    F = coefficient_functions(exp, rho, omega, alpha, top)
    scale = max(1.0, abs(rho) ** 2)
    if np.max(np.abs(F[0])) > atol * scale:
        raise InconsistencyError(f"f_0 does not vanish: {F[0]}")
    if np.max(np.abs(F[1])) > atol * scale:
        raise InconsistencyError(f"f_1 does not vanish: {F[1]}")
    if abs(F[2, 0]) > atol * scale:
        raise InconsistencyError(f"f_2(0) = {F[2, 0]} != 0")
    if np.max(np.abs(F[2, 2:]), initial=0.0) > atol * scale:
        raise InconsistencyError("f_2 is not linear in s")
    if abs(F[2, 1]) <= atol * scale:
        raise InconsistencyError("f_2 has no linear term")
    fval = lambda j, s: P.polyval(s, F[j])
    C = np.zeros(order + 1, dtype=complex)
    C[0] = 1.0
    for sigma in range(3, top + 1):
        acc = sum(fval(sigma - j, j) * C[j] for j in range(sigma - 2))
        C[sigma - 2] = -acc / fval(2, sigma - 2)
    return C, F


def formal_solutions(exp: RecurrenceExpansion, order: Optional[int] = None) -> tuple[AsymptoticSolution, AsymptoticSolution]:
    """Both formal solutions ``(+, -)`` with coefficients through ``C_order``."""
    if order is None:
        order = exp.order - 2
    rp, rm = characteristic_roots(exp.a(0), exp.b(0))
    out = []
    for sign, rho in ((+1, rp), (-1, rm)):
        om = omega_coeff(exp, rho)
        al = alpha_coeff(exp, rho, om)
        C, F = c_recursion(exp, rho, om, al, order)
        out.append(
            AsymptoticSolution(
                rho=rho,
                theta_char=cmath.phase(rho),
                omega=om,
                alpha=al,
                phi=float(al.imag),
                c_coeffs=tuple(complex(c) for c in C),
                sign=sign,
                f_polys=tuple(tuple(complex(v) for v in row) for row in F),
            )
        )
    return out[0], out[1]


def predict(sol: AsymptoticSolution, r):
    """Evaluate the formal solution at ``r`` (scalar or array), overflow-safe."""
    r_arr = np.asarray(r, dtype=float)
    mod = abs(sol.rho)
    log_mod = 0.0 if abs(mod - 1.0) <= UNIT_CIRCLE_TOL else math.log(mod)
    sq = np.sqrt(r_arr)
    lr = np.log(r_arr)
    log_mag = r_arr * log_mod + sol.omega.real * sq + sol.alpha.real * lr
    phase = r_arr * sol.theta_char + sol.omega.imag * sq + sol.alpha.imag * lr
    series = np.zeros_like(r_arr, dtype=complex)
    inv = 1.0 / sq
    for c in reversed(sol.c_coeffs):
        series = series * inv + c
    out = np.exp(log_mag + 1j * phase) * series
    return complex(out) if np.ndim(r) == 0 else out


def fit_combination(d, r_lo: int, r_hi: int, sols) -> tuple[np.ndarray, float]:
    """Least-squares fit ``d_r ~ sum_i c_i predict(sol_i, r)`` on ``r_lo..r_hi``.

    Returns the coefficients and the relative spread ``max |d_r / fit_r - 1|``.
    A generic solution mixes both formal solutions, so a single predictor alone
    does not track it.
    """
    rs = np.arange(r_lo, r_hi + 1)
    basis = np.column_stack([predict(s, rs) for s in sols])
    target = np.asarray(d)[r_lo : r_hi + 1]
    scale = np.linalg.norm(basis, axis=0)
    coef, *_ = np.linalg.lstsq(basis / scale, target, rcond=None)
    coef = coef / scale
    fit = basis @ coef
    ratio = target / fit
    spread = float(np.max(np.abs(ratio - 1.0)))
    return coef, spread


def asymptotics(spec: OperatorSpec, n0: int, order: int = 4) -> tuple[RecurrenceExpansion, tuple[AsymptoticSolution, AsymptoticSolution]]:
    exp = expand_recurrence(spec, n0, order + 2)
    return exp, formal_solutions(exp, order)
