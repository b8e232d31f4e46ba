"""Deficiency vectors from the decoupled branch recurrences.

On the branch ``n = n0 + r Delta`` (``l <= n0 < k``) a vector in ``Ran(A + i)^perp``
has coefficients ``c_{n0+r Delta} = i^r e^{i r theta} d_r`` where

    beta^{kl}_{n0+r Delta} d_{r+1} - (1 + i f(n0+r Delta)) d_r - beta^{lk}_{n0+r Delta} d_{r-1} = 0

(for the normalised operator, ``|xi| = 1``).  The ``-`` space uses ``conj(d)`` and
``(-i)^r``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import birkhoff
from .errors import DegenerateRootsError, InconclusiveError, NotExpandableError, SqueezeError, ValidationError
from .fock import OperatorSpec, beta_array, beta_ratio_array

DEFAULT_R_MAX = 100_000
SLOPE_MARGIN = 0.1
TINY = 1e-300
_I_POW = (1, 1j, -1, -1j)


def max_workers() -> int:
    env = os.environ.get("SQUEEZE_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


# -- sparse vectors -------------------------------------------------------------


@dataclass(frozen=True)
class SparseVector:
    """Coefficients ``values[i]`` at Fock indices ``indices[i]`` (strictly ascending)."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=complex)
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same shape")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            order = np.argsort(idx, kind="stable")
            idx, val = idx[order], val[order]
            if np.any(np.diff(idx) == 0):
                raise ValueError("duplicate indices")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dense(cls, arr) -> "SparseVector":
        arr = np.asarray(arr, dtype=complex)
        nz = np.nonzero(arr)[0]
        return cls(nz, arr[nz])

    @classmethod
    def from_dict(cls, d: dict) -> "SparseVector":
        keys = sorted(d)
        return cls(np.array(keys, dtype=np.int64), np.array([d[n] for n in keys], dtype=complex))

    @property
    def n_top(self) -> int:
        return int(self.indices[-1]) if self.indices.size else -1

    def to_dense(self, size: Optional[int] = None) -> np.ndarray:
        size = self.n_top + 1 if size is None else size
        out = np.zeros(size, dtype=complex)
        keep = self.indices < size
        out[self.indices[keep]] = self.values[keep]
        return out

    def as_dict(self) -> dict:
        return {int(n): complex(v) for n, v in zip(self.indices, self.values)}

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def vdot(self, other: "SparseVector") -> complex:
        common, ia, ib = np.intersect1d(self.indices, other.indices, assume_unique=True, return_indices=True)
        return complex(np.vdot(self.values[ia], other.values[ib]))

    def combine(self, other: "SparseVector", a: complex = 1.0, b: complex = 1.0) -> "SparseVector":
        """``a * self + b * other``."""
        idx = np.union1d(self.indices, other.indices)
        val = np.zeros(idx.size, dtype=complex)
        val[np.searchsorted(idx, self.indices)] += a * self.values
        val[np.searchsorted(idx, other.indices)] += b * other.values
        return SparseVector(idx, val)

    def scaled(self, c: complex) -> "SparseVector":
        return SparseVector(self.indices, self.values * c)


# -- branch recurrence ------------------------------------------------------------


@dataclass(frozen=True)
class RecurrenceSolution:
    n0: int
    d: np.ndarray
    r_max: int
    decay_slope: float
    c0_fit: Optional[complex]
    partial_norm_sq: float
    tail_estimate: float
    max_residual: float
    seed: str = "canonical"
    k: int = 0
    l: int = 0
    delta: int = 1
    fit_coeffs: Optional[tuple] = None
    fit_spread: Optional[float] = None

    @property
    def d0(self) -> complex:
        return complex(self.d[0])


def _require_normalized(spec: OperatorSpec):
    if spec.xi_modulus != 1.0:
        raise ValidationError("recurrence routines expect a normalised spec (|xi| = 1); call spec.normalized()")


def _integrate(up, ratio, coef, d0: complex, d1: complex, start: int, r_max: int) -> np.ndarray:
    """``d_{r+1} = coef_r d_r + ratio_r d_{r-1}`` for ``r = start..r_max-1``."""
    d = [0j] * (r_max + 1)
    d[start - 1] = d0
    d[start] = d1
    c = coef.tolist()
    q = ratio.tolist()
    prev, cur = d0, d1
    for r in range(start, r_max):
        nxt = c[r] * cur + q[r] * prev
        d[r + 1] = nxt
        prev, cur = cur, nxt
    return np.array(d, dtype=complex)


def envelope_slope(d: np.ndarray, r_lo: int, r_hi: int) -> float:
    """Log-log least-squares slope of ``sqrt((|d_r|^2 + |d_{r+1}|^2)/2)`` on ``[r_lo, r_hi)``.

    Pairing neighbours smooths the oscillating phase factor so isolated near-zeros
    of ``|d_r|`` do not dominate the fit.
    """
    a = np.abs(d[r_lo : r_hi + 1])
    env = np.sqrt(0.5 * (a[:-1] ** 2 + a[1:] ** 2))
    rs = np.arange(r_lo, r_hi, dtype=float)
    ok = env > TINY
    if ok.sum() < 2:
        return -math.inf
    slope, _ = np.polyfit(np.log(rs[ok]), np.log(env[ok]), 1)
    return float(slope)


def solve_branch(
    spec: OperatorSpec,
    n0: int,
    r_max: int = DEFAULT_R_MAX,
    d0: complex = 1.0,
    seed: str = "canonical",
    fit_order: int = 4,
) -> RecurrenceSolution:
    """Forward-integrate the branch recurrence from ``d_0``.

    ``seed="canonical"`` starts from ``d_0`` with ``d_1`` fixed by the ``r = 0``
    relation; ``seed="shifted"`` starts at ``r = 1`` with ``(d_0, d_1) = (0, d0)``,
    giving the second independent solution of the order-two recurrence.
    """
    _require_normalized(spec)
    k, l, D = spec.k, spec.l, spec.delta
    if not (l <= n0 < k):
        raise ValueError(f"need l <= n0 < k, got n0={n0}")
    if r_max < 10:
        raise ValueError("r_max must be >= 10")
    rs = np.arange(r_max + 1)
    ns = n0 + rs * D
    up = beta_array(k, l, ns)
    assert np.all(up > 0), "beta^{kl} vanishes on a branch with n0 >= l"
    ratio = np.zeros(r_max + 1)
    ratio[1:] = beta_ratio_array(k, l, ns[1:], ns[1:] + D)  # beta^{lk}_n / beta^{kl}_n
    delta = spec.field.values(ns)
    coef = (1.0 + 1j * delta) / up
    if seed == "canonical":
        d = _integrate(up, ratio, coef, complex(d0), coef[0] * complex(d0), 1, r_max)
        r_check = 0
    elif seed == "shifted":
        d = _integrate(up, ratio, coef, 0j, complex(d0), 1, r_max)
        r_check = 1
    else:
        raise ValueError(f"unknown seed {seed!r}")

    # relative residual of the unnormalised relation
    down = beta_array(l, k, ns)
    t1 = up[:-1] * d[1:]
    t2 = (1.0 + 1j * delta[:-1]) * d[:-1]
    t3 = np.zeros_like(t1)
    t3[1:] = down[1:-1] * d[:-2]
    res = np.abs(t1 - t2 - t3)
    den = np.abs(t1) + np.abs(t2) + np.abs(t3)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(den > 0, res / np.where(den > 0, den, 1.0), 0.0)
    max_res = float(np.max(rel[r_check:])) if rel.size > r_check else 0.0

    r_lo = max(1, r_max // 10)
    slope = envelope_slope(d, r_lo, r_max)
    partial = float(np.sum(np.abs(d) ** 2))

    kl = k + l
    fit_coeffs = fit_spread = c0 = None
    amp = None
    try:
        if not np.any(d[max(r_max // 2, 1):]):
            raise ValueError("trivial solution")
        _, sols = birkhoff.asymptotics(spec, n0, fit_order)
        coef_fit, fit_spread = birkhoff.fit_combination(d, max(r_max // 2, 1), r_max, sols)
        fit_coeffs = tuple(complex(c) for c in coef_fit)
        c0 = fit_coeffs[0]
        amp = float(sum(abs(c) for c in fit_coeffs))
    except (NotExpandableError, DegenerateRootsError, SqueezeError, ValueError):
        pass
    if amp is None or not math.isfinite(amp):
        # envelope amplitude against r^{-(k+l)/4}
        tail_r = np.arange(r_lo, r_max + 1)
        amp = float(np.max(np.abs(d[r_lo:]) * tail_r ** (kl / 4), initial=0.0))
    if kl > 2:
        tail = amp**2 * r_max ** (1 - kl / 2) / (kl / 2 - 1)
    else:
        tail = math.inf
    return RecurrenceSolution(
        n0=n0, d=d, r_max=r_max, decay_slope=slope, c0_fit=c0,
        partial_norm_sq=partial, tail_estimate=float(tail), max_residual=max_res,
        seed=seed, k=k, l=l, delta=D, fit_coeffs=fit_coeffs, fit_spread=fit_spread,
    )


# -- deficiency vectors -------------------------------------------------------------


@dataclass(frozen=True)
class DeficiencyVector:
    sign: int
    n0: int
    coeffs: SparseVector
    norm: float
    partial_norm_sq: float
    tail_estimate: float
    decay_slope: float = math.nan
    c0_fit: Optional[complex] = None
    residual: Optional[float] = None

    def metadata(self) -> dict:
        cx = None if self.c0_fit is None else {"re": self.c0_fit.real, "im": self.c0_fit.imag}
        return {
            "n0": self.n0,
            "sign": "+" if self.sign > 0 else "-",
            "norm": self.norm,
            "partial_norm_sq": self.partial_norm_sq,
            "tail_estimate": self.tail_estimate,
            "decay_slope": self.decay_slope,
            "c0_fit": cx,
            "residual": self.residual,
        }


def _phases(r: np.ndarray, sign: int, theta: float) -> np.ndarray:
    ipow = np.array(_I_POW, dtype=complex)[r % 4]
    if sign < 0:
        ipow = ipow.conj()
    return ipow * np.exp(1j * r * theta)


def assemble_vector(solution: RecurrenceSolution, sign: int, theta: float) -> DeficiencyVector:
    """``c_{n0 + r Delta} = (+-i)^r e^{i r theta} d^{(+-)}_r``."""
    if sign not in (+1, -1):
        raise ValueError("sign must be +1 or -1")
    d = solution.d if sign > 0 else solution.d.conj()
    r = np.arange(d.size)
    vals = _phases(r, sign, theta) * d
    idx = solution.n0 + r * solution.delta
    norm_sq = solution.partial_norm_sq + (solution.tail_estimate if math.isfinite(solution.tail_estimate) else 0.0)
    return DeficiencyVector(
        sign=sign,
        n0=solution.n0,
        coeffs=SparseVector(idx, vals),
        norm=math.sqrt(norm_sq),
        partial_norm_sq=solution.partial_norm_sq,
        tail_estimate=solution.tail_estimate,
        decay_slope=solution.decay_slope,
        c0_fit=solution.c0_fit,
    )


def deficiency_residual(spec: OperatorSpec, vec, probe_n_max: int) -> float:
    """Largest relative residual of
    ``e^{-i theta} beta^{kl}_n c_{n+Delta} + e^{i theta} beta^{lk}_n c_{n-Delta} + (f(n) -+ i) c_n = 0``
    over ``n <= probe_n_max`` (``0/0`` counts as 0)."""
    _require_normalized(spec)
    coeffs = vec.coeffs if isinstance(vec, DeficiencyVector) else vec
    sign = vec.sign if isinstance(vec, DeficiencyVector) else +1
    D = spec.delta
    c = coeffs.to_dense(probe_n_max + D + 1)
    ns = np.arange(probe_n_max + 1)
    th = spec.theta
    up = beta_array(spec.k, spec.l, ns)
    down = beta_array(spec.l, spec.k, ns)
    t1 = np.exp(-1j * th) * up * c[ns + D]
    t2 = np.zeros(ns.size, dtype=complex)
    lo = ns >= D
    t2[lo] = np.exp(1j * th) * down[lo] * c[ns[lo] - D]
    t3 = (spec.field.values(ns) - sign * 1j) * c[ns]
    res = np.abs(t1 + t2 + t3)
    den = np.abs(t1) + np.abs(t2) + np.abs(t3)
    rel = np.divide(res, den, out=np.zeros_like(res), where=den > 0)
    return float(rel.max()) if rel.size else 0.0


# -- l^2 test -----------------------------------------------------------------------


def l2_branch_report(spec: OperatorSpec, r_max: int = DEFAULT_R_MAX, margin: float = SLOPE_MARGIN) -> list[dict]:
    """Decay slopes of both seed solutions on every branch, concurrently."""
    spec = spec.normalized()
    jobs = [(n0, seed) for n0 in range(spec.l, spec.k) for seed in ("canonical", "shifted")]
    with ThreadPoolExecutor(max_workers=max_workers()) as ex:
        sols = list(ex.map(lambda js: solve_branch(spec, js[0], r_max, seed=js[1]), jobs))
    rows = []
    for n0 in range(spec.l, spec.k):
        pair = [s for s in sols if s.n0 == n0]
        slopes = [s.decay_slope for s in pair]
        rows.append({
            "n0": n0,
            "slopes": slopes,
            "residuals": [s.max_residual for s in pair],
            "square_summable": all(sl < -0.5 - margin for sl in slopes),
            "inconclusive": any(abs(sl + 0.5) <= margin for sl in slopes),
        })
    return rows


def count_l2_branches(spec: OperatorSpec, r_max: int = DEFAULT_R_MAX, margin: float = SLOPE_MARGIN) -> int:
    """Number of branches whose whole two-dimensional solution space decays faster than ``r^{-1/2}``."""
    rows = l2_branch_report(spec, r_max, margin)
    bad = [r for r in rows if r["inconclusive"]]
    if bad:
        raise InconclusiveError(f"decay slope within {margin} of -1/2 on branch(es) {[r['n0'] for r in bad]}", {"branches": rows})
    return sum(1 for r in rows if r["square_summable"])


# -- extensions -------------------------------------------------------------------------


@dataclass(frozen=True)
class ExtensionDomainBasis:
    unitary: np.ndarray
    vectors: tuple
    plus: tuple
    minus: tuple

    def gram(self) -> np.ndarray:
        m = len(self.vectors)
        G = np.zeros((m, m), dtype=complex)
        for i in range(m):
            for j in range(m):
                G[i, j] = self.vectors[i].vdot(self.vectors[j])
        return G

    def normalized_gram(self) -> np.ndarray:
        G = self.gram()
        s = np.sqrt(np.real(np.diag(G)))
        return G / np.outer(s, s)


def check_unitary(U, tol: float = 1e-10) -> np.ndarray:
    U = np.atleast_2d(np.asarray(U, dtype=complex))
    if U.shape[0] != U.shape[1]:
        raise ValidationError(f"U must be square, got shape {U.shape}")
    err = float(np.linalg.norm(U @ U.conj().T - np.eye(U.shape[0])))
    if err > tol:
        raise ValidationError(f"U is not unitary: ||U U^dagger - I|| = {err:.3e}")
    return U


def deficiency_vectors(spec: OperatorSpec, r_max: int = DEFAULT_R_MAX):
    """``(plus, minus)`` tuples of deficiency vectors for ``n0 = l .. k-1`` (normalised spec)."""
    spec = spec.normalized()
    with ThreadPoolExecutor(max_workers=max_workers()) as ex:
        sols = list(ex.map(lambda n0: solve_branch(spec, n0, r_max), range(spec.l, spec.k)))
    plus = tuple(assemble_vector(s, +1, spec.theta) for s in sols)
    minus = tuple(assemble_vector(s, -1, spec.theta) for s in sols)
    return plus, minus, sols


def extension_basis(spec: OperatorSpec, U, r_max: int = DEFAULT_R_MAX, vectors=None) -> ExtensionDomainBasis:
    """Basis ``phi+_{l+j} - sum_i U_ji (|phi+_{l+j}| / |phi+_{l+i}|) phi-_{l+i}`` of ``D_U``."""
    D = spec.delta
    U = check_unitary(U)
    if U.shape != (D, D):
        raise ValidationError(f"U must be {D}x{D}, got {U.shape}")
    if vectors is None:
        plus, minus, _ = deficiency_vectors(spec, r_max)
    else:
        plus, minus = vectors
    out = []
    for j in range(D):
        v = plus[j].coeffs
        for i in range(D):
            if U[j, i] == 0:
                continue
            w = U[j, i] * plus[j].norm / plus[i].norm
            v = v.combine(minus[i].coeffs, 1.0, -w)
        out.append(v)
    return ExtensionDomainBasis(U, tuple(out), tuple(plus), tuple(minus))


def conjugation_apply(spec: OperatorSpec, coeffs):
    """Antilinear ``C``: ``c_n -> conj(c_n)`` for ``n < l`` and
    ``c_{n0 + r Delta} -> e^{2 i r theta} conj(c)`` on the branches."""
    th = spec.theta
    l, D = spec.l, spec.delta
    if isinstance(coeffs, SparseVector):
        n = coeffs.indices
        r = np.where(n >= l, (n - l) // D, 0)
        return SparseVector(n, np.exp(2j * r * th) * coeffs.values.conj())
    c = np.asarray(coeffs, dtype=complex)
    n = np.arange(c.size)
    r = np.where(n >= l, (n - l) // D, 0)
    return np.exp(2j * r * th) * c.conj()
