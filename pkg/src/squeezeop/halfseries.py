"""Truncated formal series in ``x = r^{-1/2}`` with complex coefficients.

A :class:`HalfPowerSeries` stores the coefficients of
``x^e, x^{e+1}, ..., x^{e+S}`` where ``e`` is the leading exponent and ``S`` the
order.  Everything beyond ``x^{e+S}`` is unknown; arithmetic propagates that
truncation so no result claims more accuracy than its operands support.
"""

from __future__ import annotations

import math
from typing import Sequence, Union

import numpy as np

from .errors import SeriesDomainError, SingularSeriesError

DEFAULT_ORDER = 8
COEFF_ATOL = 1e-12

Number = Union[int, float, complex]


class HalfPowerSeries:
    __slots__ = ("leading_exponent", "coeffs")

    def __init__(self, coeffs: Sequence[Number], leading_exponent: int = 0):
        c = np.array(coeffs, dtype=complex).ravel()
        if c.size == 0:
            raise ValueError("a series needs at least one coefficient")
        self.coeffs = c
        self.coeffs.setflags(write=False)
        self.leading_exponent = int(leading_exponent)

    # -- constructors -----------------------------------------------------

    @classmethod
    def constant(cls, value: Number, order: int = DEFAULT_ORDER) -> "HalfPowerSeries":
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c, 0)

    @classmethod
    def monomial(cls, exponent: int, value: Number = 1.0, order: int = DEFAULT_ORDER) -> "HalfPowerSeries":
        c = np.zeros(order + 1, dtype=complex)
        c[0] = value
        return cls(c, exponent)

    @classmethod
    def zero(cls, order: int = DEFAULT_ORDER, leading_exponent: int = 0) -> "HalfPowerSeries":
        return cls(np.zeros(order + 1), leading_exponent)

    @classmethod
    def from_terms(cls, terms: dict, top: int) -> "HalfPowerSeries":
        """Build from ``{exponent: coefficient}``, valid through ``x^top``."""
        lo = min(min(terms), top) if terms else top
        c = np.zeros(top - lo + 1, dtype=complex)
        for e, v in terms.items():
            if e <= top:
                c[e - lo] += v
        return cls(c, lo)

    # -- bookkeeping --------------------------------------------------------

    @property
    def order(self) -> int:
        return self.coeffs.size - 1

    @property
    def top(self) -> int:
        """Highest exponent whose coefficient is known."""
        return self.leading_exponent + self.order

    def coeff(self, exponent: int) -> complex:
        """Coefficient of ``x^exponent`` (zero below the leading exponent)."""
        if exponent > self.top:
            raise IndexError(f"x^{exponent} lies beyond the truncation x^{self.top}")
        i = exponent - self.leading_exponent
        return complex(self.coeffs[i]) if i >= 0 else 0j

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients of ``x^lo .. x^hi`` as an array (``hi <= top``)."""
        return np.array([self.coeff(e) for e in range(lo, hi + 1)], dtype=complex)

    def truncate(self, top: int) -> "HalfPowerSeries":
        top = min(top, self.top)
        if top < self.leading_exponent:
            return HalfPowerSeries([0.0], top)
        return HalfPowerSeries(self.coeffs[: top - self.leading_exponent + 1], self.leading_exponent)

    def extend_down(self, lo: int) -> "HalfPowerSeries":
        """Same series re-expressed with leading exponent ``lo <= leading_exponent``."""
        if lo > self.leading_exponent:
            raise ValueError("can only pad towards lower exponents")
        pad = np.zeros(self.leading_exponent - lo, dtype=complex)
        return HalfPowerSeries(np.concatenate([pad, self.coeffs]), lo)

    def normalized(self, atol: float = 0.0) -> "HalfPowerSeries":
        """Drop leading coefficients with modulus ``<= atol`` (exact zeros by default)."""
        nz = np.nonzero(np.abs(self.coeffs) > atol)[0]
        if nz.size == 0:
            return HalfPowerSeries([0.0], self.top)
        i = int(nz[0])
        return HalfPowerSeries(self.coeffs[i:], self.leading_exponent + i)

    def is_zero(self, atol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= atol))

    def __call__(self, x):
        """Evaluate the truncated sum at ``x`` (scalar or array)."""
        x = np.asarray(x, dtype=complex)
        acc = np.zeros_like(x)
        for c in self.coeffs[::-1]:
            acc = acc * x + c
        return acc * x ** self.leading_exponent

    def evaluate_at_r(self, r):
        return self(np.asarray(r, dtype=float) ** -0.5)

    # -- comparison / printing -----------------------------------------------

    def allclose(self, other: "HalfPowerSeries", atol: float = COEFF_ATOL, top: int | None = None) -> bool:
        if not isinstance(other, HalfPowerSeries):
            other = HalfPowerSeries.constant(other, 0)
        hi = min(self.top, other.top) if top is None else top
        lo = min(self.leading_exponent, other.leading_exponent)
        if hi < lo:
            return True
        return bool(np.allclose(self.window(lo, hi), other.window(lo, hi), rtol=0.0, atol=atol))

    def __eq__(self, other):
        if not isinstance(other, HalfPowerSeries):
            return NotImplemented
        if self.is_zero() and other.is_zero():
            return True
        return self.top == other.top and self.allclose(other, atol=0.0)

    __hash__ = None

    def __repr__(self):
        terms = ", ".join(f"x^{self.leading_exponent + i}: {c:.6g}" for i, c in enumerate(self.coeffs))
        return f"HalfPowerSeries({{{terms}}}, top={self.top})"

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        return series_add(self, other)

    __radd__ = __add__

    def __neg__(self):
        return series_scale(self, -1.0)

    def __sub__(self, other):
        return series_add(self, -other if isinstance(other, HalfPowerSeries) else -complex(other))

    def __rsub__(self, other):
        return series_add(-self, other)

    def __mul__(self, other):
        if isinstance(other, HalfPowerSeries):
            return series_mul(self, other)
        return series_scale(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, HalfPowerSeries):
            return series_mul(self, series_reciprocal(other))
        return series_scale(self, 1.0 / complex(other))

    def shift(self, k: int) -> "HalfPowerSeries":
        """Multiply by ``x^k``."""
        return HalfPowerSeries(self.coeffs, self.leading_exponent + k)


def _as_series(v, like: HalfPowerSeries) -> HalfPowerSeries:
    if isinstance(v, HalfPowerSeries):
        return v
    # a plain number is exact: give it as much room as the partner has
    return HalfPowerSeries.constant(complex(v), max(like.top, 0))


def series_add(u: HalfPowerSeries, v) -> HalfPowerSeries:
    v = _as_series(v, u)
    lo = min(u.leading_exponent, v.leading_exponent)
    hi = min(u.top, v.top)
    if hi < lo:
        return HalfPowerSeries([0.0], hi)
    return HalfPowerSeries(u.window(lo, hi) + v.window(lo, hi), lo)


def series_scale(u: HalfPowerSeries, c: Number) -> HalfPowerSeries:
    return HalfPowerSeries(u.coeffs * complex(c), u.leading_exponent)


def series_mul(u: HalfPowerSeries, v) -> HalfPowerSeries:
    if not isinstance(v, HalfPowerSeries):
        return series_scale(u, v)
    S = min(u.order, v.order)
    c = np.convolve(u.coeffs[: S + 1], v.coeffs[: S + 1])[: S + 1]
    return HalfPowerSeries(c, u.leading_exponent + v.leading_exponent)


def series_reciprocal(u: HalfPowerSeries) -> HalfPowerSeries:
    """``1/u`` to the same order; the leading coefficient must be nonzero."""
    a = u.coeffs
    if a[0] == 0:
        raise SingularSeriesError("reciprocal of a series with zero leading coefficient")
    S = u.order
    b = np.zeros(S + 1, dtype=complex)
    b[0] = 1.0 / a[0]
    for n in range(1, S + 1):
        b[n] = -np.dot(a[1 : n + 1], b[n - 1 :: -1][:n]) / a[0]
    return HalfPowerSeries(b, -u.leading_exponent)


def series_sqrt(u: HalfPowerSeries) -> HalfPowerSeries:
    """Principal square root; needs a positive real leading coefficient and even exponent."""
    a = u.coeffs
    c0 = a[0]
    if u.leading_exponent % 2 != 0:
        raise SeriesDomainError("square root needs an even leading exponent")
    if not (c0.real > 0 and abs(c0.imag) <= 1e-14 * abs(c0.real)):
        raise SeriesDomainError(f"square root needs a positive real leading coefficient, got {c0}")
    S = u.order
    s = np.zeros(S + 1, dtype=complex)
    s[0] = math.sqrt(c0.real)
    for n in range(1, S + 1):
        acc = a[n] - np.dot(s[1:n], s[n - 1 : 0 : -1]) if n > 1 else a[n]
        s[n] = acc / (2 * s[0])
    return HalfPowerSeries(s, u.leading_exponent // 2)


def series_exp_negative(u: HalfPowerSeries) -> HalfPowerSeries:
    """``exp(u)`` for a series with only positive powers of ``x`` (decaying in r)."""
    for e in range(u.leading_exponent, min(0, u.top) + 1):
        if u.coeff(e) != 0:
            raise SeriesDomainError("exp needs a series without constant or growing terms")
    top = u.top
    if top < 0:
        return HalfPowerSeries.constant(1.0, 0)
    w = u.window(0, top) if u.leading_exponent <= 0 else u.extend_down(0).window(0, top)
    e = np.zeros(top + 1, dtype=complex)
    e[0] = 1.0
    j = np.arange(top + 1)
    for n in range(1, top + 1):
        e[n] = np.dot(j[1 : n + 1] * w[1 : n + 1], e[n - 1 :: -1][:n]) / n
    return HalfPowerSeries(e, 0)


def series_log(u: HalfPowerSeries) -> HalfPowerSeries:
    """``log(u)`` for a series with constant term 1 (inverse of :func:`series_exp_negative`)."""
    if u.leading_exponent > 0 or any(u.coeff(e) != 0 for e in range(u.leading_exponent, 0)):
        raise SeriesDomainError("log needs a series starting at x^0")
    if abs(u.coeff(0) - 1.0) > 1e-14:
        raise SeriesDomainError("log needs constant term 1")
    top = u.top
    a = u.window(0, top)
    g = np.zeros(top + 1, dtype=complex)
    for n in range(1, top + 1):
        acc = n * a[n]
        for j in range(1, n):
            acc -= j * g[j] * a[n - j]
        g[n] = acc / n
    return HalfPowerSeries(g, 0)


def binomial_coefficient(p: Number, m: int) -> complex:
    """Generalised ``binom(p, m)`` via the falling-factorial recurrence."""
    out = 1.0 + 0j
    for i in range(m):
        out = out * (p - i) / (i + 1)
    return out


def series_shift_pow(p: Number, nu: float, order: int = DEFAULT_ORDER) -> HalfPowerSeries:
    """Binomial series of ``(1 + nu/r)^p = (1 + nu x^2)^p`` through ``x^order``."""
    c = np.zeros(order + 1, dtype=complex)
    b = 1.0 + 0j
    for m in range(order // 2 + 1):
        c[2 * m] = b * nu**m
        b = b * (p - m) / (m + 1)
    return HalfPowerSeries(c, 0)


def series_sqrt_shift(nu: float, order: int = DEFAULT_ORDER) -> HalfPowerSeries:
    """Series of ``(r + nu)^{1/2} - r^{1/2}`` through ``x^order`` (leading term ``nu x / 2``)."""
    if order < 1:
        return HalfPowerSeries([0.0], order)
    c = np.zeros(order, dtype=complex)  # exponents 1..order
    for m in range(1, (order + 1) // 2 + 1):
        c[2 * m - 2] = binomial_coefficient(0.5, m) * nu**m
    return HalfPowerSeries(c, 1)


def poly_in_n(coeffs: Sequence[Number], scale: float = 1.0, offset: float = 0.0, top: int = DEFAULT_ORDER) -> HalfPowerSeries:
    """Exact series of ``sum_j c_j n^j`` with ``n = scale * (r + offset)``.

    ``n^j = scale^j x^{-2j} (1 + offset x^2)^j`` is a finite sum, so the result is
    exact through ``x^top``.
    """
    coeffs = [complex(c) for c in coeffs]
    deg = len(coeffs) - 1
    lo = -2 * deg
    hi = max(top, lo)
    acc = np.zeros(hi - lo + 1, dtype=complex)
    for j, cj in enumerate(coeffs):
        if cj == 0:
            continue
        for m in range(j + 1):
            e = -2 * j + 2 * m
            if e > hi:
                break
            acc[e - lo] += cj * scale**j * math.comb(j, m) * offset**m
    return HalfPowerSeries(acc, lo)
