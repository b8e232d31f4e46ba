"""Essential self-adjointness versus deficiency for ``A_{k,l}(f)``.

Rules, applied in order:

1. ``k + l < 3`` with a polynomial-class field: essentially self-adjoint.
2. ``f(n) >= kappa |xi| beta^{kl}_n`` eventually with ``kappa > 2``: essentially
   self-adjoint and bounded below by ``-2 |xi| beta^{kl}_{N-1} kappa / (kappa - 2)``.
   ``kappa = 2`` certified exactly: essentially self-adjoint, lower bound unknown.
3. ``k + l >= 3`` and ``f / (|xi| beta^{kl}) -> kappa < 2`` with a half-power
   expansion: deficiency indices ``n_+ = n_- = k - l``, unbounded below.
4. Anything else is undetermined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Optional

import numpy as np
import sympy

from .fock import OperatorSpec, TabulatedField, action_column, beta, beta_array, pochhammer_poly
from .errors import NotExpandableError
from .halfseries import DEFAULT_ORDER, HalfPowerSeries, poly_in_n, series_reciprocal, series_sqrt


class Verdict(str, Enum):
    ESA = "EssentiallySelfAdjoint"
    DEFICIENT = "Deficient"
    UNDETERMINED = "Undetermined"


class Rationale(str, Enum):
    SMALL_KL = "SmallKLowOrder"
    DOMINATING = "Dominating"
    POLY_TRICHOTOMY = "PolyTrichotomy"
    KAPPA_BELOW_2 = "KappaBelow2"
    CRITICAL = "Critical"
    NO_RULE = "NoRuleApplies"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    bounded_below: str  # "yes" | "no" | "unknown"
    rationale: Rationale
    lower_bound: Optional[float] = None
    deficiency_index: Optional[int] = None
    kappa: Optional[float] = None
    expansion: Optional[HalfPowerSeries] = field(default=None, compare=False)
    dominance_kappa: Optional[float] = None
    dominance_N: Optional[int] = None

    def to_dict(self) -> dict:
        out = {
            "verdict": self.verdict.value,
            "bounded_below": self.bounded_below,
            "rationale": self.rationale.value,
            "lower_bound": self.lower_bound,
            "deficiency_index": self.deficiency_index,
            "kappa": self.kappa,
            "dominance_kappa": self.dominance_kappa,
            "dominance_N": self.dominance_N,
        }
        if self.expansion is not None:
            e = self.expansion
            out["expansion"] = {
                "leading_exponent": e.leading_exponent,
                "coeffs": [float(c.real) for c in e.coeffs],
            }
        return out


def _beta_sq_poly(k: int, l: int) -> list[int]:
    """Coefficients in ``n`` of ``(beta^{kl}_n)^2 = (n-l+1, l)(n-l+1, k)``."""
    a = pochhammer_poly(1 - l, l)
    b = pochhammer_poly(1 - l, k)
    out = [0] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def kappa_expansion(spec: OperatorSpec, order: int = DEFAULT_ORDER) -> HalfPowerSeries:
    """Expansion of ``f(n) / (|xi| beta^{kl}_n)`` in ``y = n^{-1/2}`` through ``y^order``.

    The constant term is ``kappa``.
    """
    k, l = spec.k, spec.l
    kl = k + l
    fld = spec.field
    if fld.is_polynomial:
        h = fld.degree
        if 2 * h > kl:
            raise NotExpandableError(f"field of degree {h} outgrows beta ~ n^{kl / 2}")
        work = order + 2 * h + 2
        bsq = poly_in_n(_beta_sq_poly(k, l), top=work - 2 * kl).shift(2 * kl)
        inv_beta = series_reciprocal(series_sqrt(bsq)).shift(kl)
        fs = poly_in_n(fld.poly_coeffs(), top=work)
        s = (fs * inv_beta) * (1.0 / spec.xi_modulus)
    elif isinstance(fld, TabulatedField) and fld.expansion is not None:
        lam = np.asarray(fld.expansion, dtype=float) / spec.xi_modulus
        s = HalfPowerSeries(lam, 0)
    else:
        raise NotExpandableError("field has no declared half-power expansion")
    s = s.truncate(order)
    if s.leading_exponent > 0:
        s = s.extend_down(0)
    # the expansion of a real ratio is real
    return HalfPowerSeries(s.coeffs.real, s.leading_exponent)


def _kappa_of(series: HalfPowerSeries) -> float:
    return float(series.coeff(0).real)


# -- dominance ----------------------------------------------------------------


def _dominance_poly(spec: OperatorSpec, kappa_target) -> list[Fraction]:
    """Exact coefficients of ``f(n)^2 - kappa^2 |xi|^2 beta^{kl}_n^2``."""
    fc = spec.field.exact_coeffs()
    kap = Fraction(kappa_target)
    xi = Fraction(spec.xi_modulus)
    f2 = [Fraction(0)] * (2 * len(fc) - 1)
    for i, a in enumerate(fc):
        for j, b in enumerate(fc):
            f2[i + j] += a * b
    b2 = _beta_sq_poly(spec.k, spec.l)
    out = [Fraction(0)] * max(len(f2), len(b2))
    for i, a in enumerate(f2):
        out[i] += a
    c = kap * kap * xi * xi
    for i, b in enumerate(b2):
        out[i] -= c * b
    while len(out) > 1 and out[-1] == 0:
        out.pop()
    return out


def _peval(coeffs, n: int) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * n + c
    return acc


def _last_negative(coeffs: list[Fraction]) -> Optional[int]:
    """Largest integer ``n >= 0`` with ``p(n) < 0`` (``p`` eventually positive), or None."""
    if len(coeffs) == 1:
        return None
    x = sympy.Symbol("x")
    p = sympy.Poly([sympy.Rational(c.numerator, c.denominator) for c in reversed(coeffs)], x, domain="QQ")
    cands = set()
    for (a, b), _mult in p.intervals(eps=sympy.Rational(1, 4)):
        lo = math.floor(Fraction(int(a.p), int(a.q))) - 1
        hi = math.ceil(Fraction(int(b.p), int(b.q)))
        cands.update(range(max(lo, 0), max(hi, 0) + 1))
    # with no nonnegative real root the sign on [0, inf) is that of the leading coefficient
    neg = [n for n in cands if _peval(coeffs, n) < 0]
    if neg:
        return max(neg)
    return None if _peval(coeffs, 0) >= 0 else 0


def dominance_threshold(spec: OperatorSpec, kappa_target: float) -> Optional[int]:
    """Least ``N`` with ``f(n) >= kappa_target |xi| beta^{kl}_n`` for all ``n >= N``.

    Exact rational sign analysis for polynomial fields.  For tabulated fields the
    table is probed up to its last entry; ``None`` if domination fails there.
    """
    if kappa_target < 2:
        raise ValueError("kappa_target must be >= 2")
    fld = spec.field
    if isinstance(fld, TabulatedField):
        ns = np.arange(fld.n_max + 1)
        ok = fld.values(ns) >= kappa_target * spec.xi_modulus * beta_array(spec.k, spec.l, ns)
        if not ok[-1]:
            return None
        bad = np.nonzero(~ok)[0]
        return int(bad[-1]) + 1 if bad.size else 0
    if not fld.is_polynomial:
        return None
    p = _dominance_poly(spec, kappa_target)
    if all(c == 0 for c in p):
        return 0
    if p[-1] < 0:
        return None
    m = _last_negative(p)
    return 0 if m is None else m + 1


def lower_bound(spec: OperatorSpec, kappa: float, N: int) -> float:
    """``-2 |xi| beta^{kl}_{N-1} kappa / (kappa - 2)`` (the beta term vanishes for N = 0)."""
    b = beta(spec.k, spec.l, N - 1) if N >= 1 else 0.0
    return -2.0 * spec.xi_modulus * b * kappa / (kappa - 2.0)


def relative_bound_check(spec: OperatorSpec, psi, kappa: float, N: int) -> tuple[float, float]:
    """Both sides of ``||S psi|| <= (2/kappa) ||f psi|| + 2 |xi| beta^{kl}_{N-1} ||psi||``.

    ``S`` is the squeezing part of the operator; ``psi`` is a finite coefficient
    vector indexed by Fock number.
    """
    psi = np.asarray(psi, dtype=complex)
    out = {}
    fpsi = np.zeros(psi.size)
    for n, c in enumerate(psi):
        if c == 0:
            continue
        fpsi[n] = abs(spec.f(n) * c)
        for row, v in action_column(spec, n):
            if row != n:
                out[row] = out.get(row, 0j) + v * c
    lhs = math.sqrt(math.fsum(abs(v) ** 2 for v in out.values()))
    b = beta(spec.k, spec.l, N - 1) if N >= 1 else 0.0
    rhs = (2.0 / kappa) * float(np.linalg.norm(fpsi)) + 2.0 * spec.xi_modulus * b * float(np.linalg.norm(psi))
    return lhs, rhs


# -- classification -----------------------------------------------------------


def _dominating(spec: OperatorSpec, kappa_t: float, rationale: Rationale, verdict_if_none=None) -> Optional[Classification]:
    N = dominance_threshold(spec, kappa_t)
    if N is None:
        return verdict_if_none
    return Classification(
        Verdict.ESA,
        "yes",
        rationale,
        lower_bound=lower_bound(spec, kappa_t, N),
        dominance_kappa=kappa_t,
        dominance_N=N,
    )


def _with(c: Classification, **kw) -> Classification:
    d = dict(c.__dict__)
    d.update(kw)
    return Classification(**d)


def classify(spec: OperatorSpec) -> Classification:
    k, l = spec.k, spec.l
    kl = k + l
    fld = spec.field
    xi = spec.xi_modulus

    expansion = None
    kappa = None
    try:
        expansion = kappa_expansion(spec, DEFAULT_ORDER)
        kappa = _kappa_of(expansion)
    except NotExpandableError:
        pass

    if fld.is_polynomial:
        h = fld.degree
        if kl < 3:
            base = Classification(Verdict.ESA, "unknown", Rationale.SMALL_KL, kappa=kappa, expansion=expansion)
            if 2 * h > kl:
                dom = _dominating(spec, 3.0, Rationale.SMALL_KL)
                if dom is not None:
                    return _with(dom, kappa=kappa, expansion=expansion)
            return base
        if 2 * h > kl:
            dom = _dominating(spec, 3.0, Rationale.DOMINATING)
            if dom is not None:
                return dom
            return Classification(Verdict.UNDETERMINED, "unknown", Rationale.NO_RULE)
        # 2h <= k+l: compare kappa = a_h/|xi| (0 when 2h < k+l) against 2 exactly
        ratio = Fraction(fld.exact_coeffs()[h]) / Fraction(xi) if 2 * h == kl else Fraction(0)
        if ratio > 2:
            kt = float((ratio + 2) / 2)
            dom = _dominating(spec, kt, Rationale.DOMINATING)
            if dom is not None:
                return _with(dom, kappa=kappa, expansion=expansion)
            return Classification(Verdict.UNDETERMINED, "unknown", Rationale.NO_RULE, kappa=kappa, expansion=expansion)
        if ratio == 2:
            N = dominance_threshold(spec, 2.0)
            if N is not None:
                return Classification(
                    Verdict.ESA, "unknown", Rationale.CRITICAL,
                    kappa=kappa, expansion=expansion, dominance_kappa=2.0, dominance_N=N,
                )
            return Classification(Verdict.UNDETERMINED, "unknown", Rationale.CRITICAL, kappa=kappa, expansion=expansion)
        return Classification(
            Verdict.DEFICIENT, "no", Rationale.POLY_TRICHOTOMY,
            deficiency_index=spec.delta, kappa=kappa, expansion=expansion,
        )

    # tabulated fields: declared expansion or nothing
    if kappa is None:
        return Classification(Verdict.UNDETERMINED, "unknown", Rationale.NO_RULE)
    if kl < 3:
        return Classification(Verdict.ESA, "unknown", Rationale.SMALL_KL, kappa=kappa, expansion=expansion)
    if kappa < 2:
        return Classification(
            Verdict.DEFICIENT, "no", Rationale.KAPPA_BELOW_2,
            deficiency_index=spec.delta, kappa=kappa, expansion=expansion,
        )
    if kappa > 2:
        kt = (kappa + 2) / 2
        N = dominance_threshold(spec, kt)
        if N is None:
            # eventual domination is implied by the declared expansion but not located in the table
            return Classification(Verdict.ESA, "yes", Rationale.DOMINATING, kappa=kappa, expansion=expansion, dominance_kappa=kt)
        return Classification(
            Verdict.ESA, "yes", Rationale.DOMINATING,
            lower_bound=lower_bound(spec, kt, N), kappa=kappa, expansion=expansion,
            dominance_kappa=kt, dominance_N=N,
        )
    return Classification(Verdict.UNDETERMINED, "unknown", Rationale.CRITICAL, kappa=kappa, expansion=expansion)
