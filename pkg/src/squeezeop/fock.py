"""Fock-basis primitives for (k, l)-order squeezing operators.

The operator ``A = xi (a^+)^k a^l + conj(xi) (a^+)^l a^k + f(a^+ a)`` acts on a
Fock state ``phi_n`` as::

    A phi_n = xi beta^{kl}_n phi_{n+Delta} + f(n) phi_n + conj(xi) beta^{lk}_n phi_{n-Delta}

with ``Delta = k - l`` and ``beta^{kl}_n = sqrt((n-l+1, l) (n-l+1, k))`` built
from rising Pochhammer symbols.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import FieldRangeError, ValidationError

# above this index beta is evaluated in floating point instead of exact integers
_EXACT_BETA_LIMIT = 10_000


def pochhammer(x: int, s: int) -> int:
    """Rising factorial ``(x, s) = x (x+1) ... (x+s-1)``.

    Zero whenever ``x`` is a negative integer (for every ``s``, including 0), so
    that ``(x, s+1) = (x, s) (x+s)`` holds on the whole integer range.
    """
    if s < 0:
        raise ValueError("s must be nonnegative")
    if x < 0:
        return 0
    out = 1
    for i in range(s):
        out *= x + i
    return out


def pochhammer_poly(shift: int, s: int) -> list[int]:
    """Integer coefficients (ascending in n) of the polynomial ``prod_{i<s} (n + shift + i)``."""
    coeffs = [1]
    for i in range(s):
        c = shift + i
        new = [0] * (len(coeffs) + 1)
        for j, a in enumerate(coeffs):
            new[j] += a * c
            new[j + 1] += a
        coeffs = new
    return coeffs


def _beta_factors(k: int, l: int, n: int) -> list[int]:
    # symmetric in (k, l) so that beta^{kl}_n and beta^{lk}_{n+Delta} agree bitwise
    base = n - l + 1
    out = []
    for i in range(max(k, l)):
        out.extend([base + i] * ((i < k) + (i < l)))
    return out


def beta(k: int, l: int, n: int) -> float:
    """Matrix-element weight ``beta^{kl}_n = sqrt((n-l+1, l) (n-l+1, k))``; zero iff ``n < l``."""
    if k < 0 or l < 0 or n < 0:
        raise ValueError("k, l, n must be nonnegative")
    if n < l:
        return 0.0
    factors = _beta_factors(k, l, n)
    # switch on the shared base n-l+1 so both orientations take the same path
    if n - l + 1 <= _EXACT_BETA_LIMIT:
        return math.sqrt(math.prod(factors))
    prod = math.prod(float(x) for x in factors)
    if math.isfinite(prod):
        return math.sqrt(prod)
    return math.exp(0.5 * math.fsum(math.log(x) for x in factors))


def beta_array(k: int, l: int, ns) -> np.ndarray:
    """Vectorised :func:`beta` over an integer array ``ns``."""
    ns = np.asarray(ns, dtype=np.int64)
    base = (ns - l + 1).astype(float)
    with np.errstate(over="ignore", invalid="ignore"):
        prod = np.ones_like(base)
        for i in range(max(k, l)):
            for _ in range((i < k) + (i < l)):
                prod *= base + i
        out = np.sqrt(prod)
    bad = ~np.isfinite(out)
    if np.any(bad):
        logs = np.zeros(int(bad.sum()))
        b = base[bad]
        for i in range(max(k, l)):
            logs += ((i < k) + (i < l)) * np.log(b + i)
        out[bad] = np.exp(0.5 * logs)
    out[ns < l] = 0.0
    return out


def beta_ratio(k: int, l: int, n_lo: int, n_hi: int) -> float:
    """``beta^{lk}_{n_lo} / beta^{lk}_{n_hi}`` as a product of factors close to one.

    Avoids forming the (possibly huge) individual weights, so it stays accurate
    for indices up to ~1e9.
    """
    if n_lo < k or n_hi < k:
        raise ValueError(f"beta^{{lk}} vanishes below n = k = {k}; got {n_lo}, {n_hi}")
    a = n_lo - k + 1
    b = n_hi - k + 1
    sq = 1.0
    for i in range(k):
        sq *= (a + i) / (b + i)
    for i in range(l):
        sq *= (a + i) / (b + i)
    return math.sqrt(sq)


def beta_ratio_array(k: int, l: int, n_lo, n_hi) -> np.ndarray:
    n_lo = np.asarray(n_lo, dtype=np.int64)
    n_hi = np.asarray(n_hi, dtype=np.int64)
    if np.any(n_lo < k) or np.any(n_hi < k):
        raise ValueError("beta^{lk} vanishes below n = k")
    a = (n_lo - k + 1).astype(float)
    b = (n_hi - k + 1).astype(float)
    sq = np.ones(np.broadcast(a, b).shape)
    for i in range(k):
        sq *= (a + i) / (b + i)
    for i in range(l):
        sq *= (a + i) / (b + i)
    return np.sqrt(sq)


# ---------------------------------------------------------------------------
# field terms f(n)
# ---------------------------------------------------------------------------


class FieldTerm:
    """Nonnegative diagonal term ``f(a^+ a)``; subclasses define ``f(n)``."""

    def __call__(self, n: int) -> float:
        raise NotImplementedError

    def values(self, ns) -> np.ndarray:
        return np.array([self(int(n)) for n in np.asarray(ns).ravel()], dtype=float)

    def exact_coeffs(self) -> Optional[list[Fraction]]:
        """Ascending polynomial coefficients in ``n`` as exact rationals, or None."""
        return None

    def poly_coeffs(self) -> Optional[list[float]]:
        c = self.exact_coeffs()
        return None if c is None else [float(x) for x in c]

    @property
    def degree(self) -> Optional[int]:
        c = self.exact_coeffs()
        if c is None:
            return None
        nz = [i for i, a in enumerate(c) if a != 0]
        return nz[-1] if nz else 0

    @property
    def leading(self) -> Optional[float]:
        c = self.exact_coeffs()
        if c is None:
            return None
        return float(c[self.degree])

    @property
    def is_polynomial(self) -> bool:
        return self.exact_coeffs() is not None

    def scaled(self, c: float) -> "FieldTerm":
        raise NotImplementedError

    def descriptor(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroField(FieldTerm):
    def __call__(self, n: int) -> float:
        return 0.0

    def values(self, ns) -> np.ndarray:
        return np.zeros(np.asarray(ns).shape)

    def exact_coeffs(self):
        return [Fraction(0)]

    def scaled(self, c):
        return self

    def descriptor(self):
        return "zero"


@dataclass(frozen=True)
class PolynomialField(FieldTerm):
    """``f(n) = a_0 + a_1 n + ... + a_h n^h`` with nonnegative coefficients."""

    coeffs: tuple

    def __post_init__(self):
        cs = tuple(float(a) for a in self.coeffs)
        if not cs:
            cs = (0.0,)
        if any(a < 0 or not math.isfinite(a) for a in cs):
            raise ValidationError(f"polynomial coefficients must be finite and >= 0, got {cs}")
        while len(cs) > 1 and cs[-1] == 0.0:
            cs = cs[:-1]
        object.__setattr__(self, "coeffs", cs)

    def __call__(self, n: int) -> float:
        out = 0.0
        for a in reversed(self.coeffs):
            out = out * n + a
        return out

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=float)
        out = np.zeros_like(ns)
        for a in reversed(self.coeffs):
            out = out * ns + a
        return out

    def exact_coeffs(self):
        return [Fraction(a) for a in self.coeffs]

    def scaled(self, c):
        return PolynomialField(tuple(a * c for a in self.coeffs))

    def descriptor(self):
        return "poly:" + ",".join(repr(a) for a in self.coeffs)


@dataclass(frozen=True)
class KerrField(FieldTerm):
    """Kerr term ``K (a^+)^h a^h``, i.e. ``f(n) = K (n-h+1, h)``."""

    K: float
    h: int

    def __post_init__(self):
        if not (self.K > 0 and math.isfinite(self.K)):
            raise ValidationError(f"Kerr strength must be positive, got {self.K}")
        if int(self.h) != self.h or self.h < 1:
            raise ValidationError(f"Kerr order must be a positive integer, got {self.h}")
        object.__setattr__(self, "K", float(self.K))
        object.__setattr__(self, "h", int(self.h))

    def __call__(self, n: int) -> float:
        return self.K * pochhammer(n - self.h + 1, self.h)

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=float)
        out = np.full_like(ns, self.K)
        for i in range(self.h):
            out = out * (ns - self.h + 1 + i)
        out[ns < self.h - 1] = 0.0
        return out

    def exact_coeffs(self):
        K = Fraction(self.K)
        return [K * c for c in pochhammer_poly(1 - self.h, self.h)]

    def scaled(self, c):
        return KerrField(self.K * c, self.h)

    def descriptor(self):
        return f"kerr:{self.K!r},{self.h}"


@dataclass(frozen=True)
class TabulatedField(FieldTerm):
    """``f(n)`` given by a table on ``0..n_max``.

    ``expansion`` optionally declares the coefficients ``[kappa, L1, L2, ...]`` of
    ``f(n) / beta^{kl}_n`` in powers of ``n^{-1/2}`` (unnormalised by ``|xi|``).
    """

    table: tuple
    expansion: Optional[tuple] = None
    source: Optional[str] = dc_field(default=None, compare=False)

    def __post_init__(self):
        vals = tuple(float(v) for v in self.table)
        if not vals:
            raise ValidationError("tabulated field needs at least one value")
        if any(v < 0 or not math.isfinite(v) for v in vals):
            raise ValidationError("tabulated field values must be finite and >= 0")
        object.__setattr__(self, "table", vals)
        if self.expansion is not None:
            object.__setattr__(self, "expansion", tuple(float(v) for v in self.expansion))

    @property
    def n_max(self) -> int:
        return len(self.table) - 1

    def __call__(self, n: int) -> float:
        if n < 0 or n > self.n_max:
            raise FieldRangeError(f"tabulated field defined on [0, {self.n_max}], asked for n = {n}")
        return self.table[n]

    def values(self, ns) -> np.ndarray:
        ns = np.asarray(ns, dtype=np.int64)
        if ns.size and (ns.min() < 0 or ns.max() > self.n_max):
            raise FieldRangeError(f"tabulated field defined on [0, {self.n_max}]")
        return np.asarray(self.table)[ns]

    def scaled(self, c):
        exp = None if self.expansion is None else tuple(v * c for v in self.expansion)
        return TabulatedField(tuple(v * c for v in self.table), exp, self.source)

    def descriptor(self):
        return f"table:@{self.source}" if self.source else f"table[{len(self.table)}]"


def field_eval(f: FieldTerm, n: int) -> float:
    return f(n)


# ---------------------------------------------------------------------------
# operator specification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorSpec:
    """Parameters of ``A_{k,l}(f)``; ``xi = xi_modulus * exp(i xi_phase)``."""

    k: int
    l: int = 0
    xi_modulus: float = 1.0
    xi_phase: float = 0.0
    field: FieldTerm = dc_field(default_factory=ZeroField)

    def __post_init__(self):
        if int(self.k) != self.k or int(self.l) != self.l:
            raise ValidationError("k and l must be integers")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "l", int(self.l))
        if not (self.k > self.l >= 0):
            raise ValidationError(f"need k > l >= 0, got k={self.k}, l={self.l}")
        if not (self.xi_modulus > 0 and math.isfinite(self.xi_modulus)):
            raise ValidationError(f"|xi| must be positive, got {self.xi_modulus}")
        object.__setattr__(self, "xi_modulus", float(self.xi_modulus))
        object.__setattr__(self, "xi_phase", float(self.xi_phase))

    @property
    def delta(self) -> int:
        return self.k - self.l

    @property
    def xi(self) -> complex:
        return self.xi_modulus * cmath.exp(1j * self.xi_phase)

    @property
    def theta(self) -> float:
        return self.xi_phase

    def normalized(self) -> "OperatorSpec":
        """Same operator divided by ``|xi|`` (unit squeezing modulus)."""
        if self.xi_modulus == 1.0:
            return self
        return OperatorSpec(self.k, self.l, 1.0, self.xi_phase, self.field.scaled(1.0 / self.xi_modulus))

    def scaled(self, c: float) -> "OperatorSpec":
        """``c * A``: both ``xi`` and ``f`` multiplied by ``c > 0``."""
        return OperatorSpec(self.k, self.l, self.xi_modulus * c, self.xi_phase, self.field.scaled(c))

    def f(self, n: int) -> float:
        return self.field(n)

    def beta_up(self, n: int) -> float:
        return beta(self.k, self.l, n)

    def beta_down(self, n: int) -> float:
        return beta(self.l, self.k, n)


def action_column(spec: OperatorSpec, n: int) -> list[tuple[int, complex]]:
    """Nonzero entries ``(row, value)`` of ``A phi_n``, ascending by row.

    Rows below zero carry a vanishing weight and are dropped.
    """
    d = spec.delta
    out = []
    lo = beta(spec.l, spec.k, n)
    if lo != 0.0 and n - d >= 0:
        out.append((n - d, spec.xi.conjugate() * lo))
    fn = spec.field(n)
    if fn != 0.0:
        out.append((n, complex(fn)))
    up = beta(spec.k, spec.l, n)
    if up != 0.0:
        out.append((n + d, spec.xi * up))
    return out
