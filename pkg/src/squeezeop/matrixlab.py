"""Hard-truncated matrices of ``A_{k,l}(f)`` and their spectra.

The projection onto ``span(phi_0 .. phi_{N-1})`` is Hermitian with a single
off-diagonal band at distance ``Delta``; it is stored in LAPACK lower banded form.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .classifier import classify
from .deficiency import max_workers
from .errors import InconsistencyError, ResourceError
from .fock import OperatorSpec, beta_array

DENSE_LIMIT = 4000
DROP_MARGIN = 0.05  # required relative drop of lambda_min per doubling of N
CONV_TOL = 1e-6
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class TruncatedOperator:
    spec: OperatorSpec
    dim: int
    diag: np.ndarray  # f(0..N-1)
    off: np.ndarray  # entry (n + Delta, n) = xi beta^{kl}_n, n = 0..N-Delta-1

    @property
    def bandwidth(self) -> int:
        return self.spec.delta

    def entry(self, m: int, n: int) -> complex:
        D = self.bandwidth
        if not (0 <= m < self.dim and 0 <= n < self.dim):
            raise IndexError("entry outside the truncation")
        if m == n:
            return complex(self.diag[n])
        if m - n == D:
            return complex(self.off[n])
        if n - m == D:
            return complex(self.off[m]).conjugate()
        return 0j

    def banded(self) -> np.ndarray:
        """Lower banded storage ``a_band[i, j] = M[i + j, j]``."""
        D = self.bandwidth
        ab = np.zeros((D + 1, self.dim), dtype=complex)
        ab[0] = self.diag
        ab[D, : self.off.size] = self.off
        return ab

    def to_dense(self) -> np.ndarray:
        M = np.diag(self.diag.astype(complex))
        D = self.bandwidth
        if self.off.size:
            idx = np.arange(self.off.size)
            M[idx + D, idx] = self.off
            M[idx, idx + D] = self.off.conj()
        return M

    def matvec(self, v: np.ndarray) -> np.ndarray:
        """``M v`` for a vector or a matrix of column vectors."""
        v = np.asarray(v, dtype=complex)
        D = self.bandwidth
        diag = self.diag if v.ndim == 1 else self.diag[:, None]
        off = self.off if v.ndim == 1 else self.off[:, None]
        out = diag * v
        m = self.off.size
        if m:
            out[D:] += off * v[:m]
            out[:m] += off.conj() * v[D:]
        return out


def build_truncated(spec: OperatorSpec, N: int) -> TruncatedOperator:
    """``N x N`` projection; matrix elements leaving the truncation are discarded."""
    if N < 1:
        raise ValueError("N must be positive")
    D = spec.delta
    diag = spec.field.values(np.arange(N)).astype(float)
    m = max(N - D, 0)
    off = spec.xi * beta_array(spec.k, spec.l, np.arange(m)) if m else np.zeros(0, dtype=complex)
    return TruncatedOperator(spec, N, diag, np.asarray(off, dtype=complex))


def _eig(op: TruncatedOperator, vectors: bool, dense_limit: int):
    if op.dim > dense_limit:
        raise ResourceError(
            f"dimension {op.dim} exceeds the dense limit {dense_limit}; "
            "use a banded/iterative solver for a few extremal eigenvalues instead"
        )
    return linalg.eig_banded(op.banded(), lower=True, eigvals_only=not vectors)


def eigen_residual(op: TruncatedOperator, w: np.ndarray, V: np.ndarray) -> float:
    """``max_j ||M v_j - w_j v_j|| / ||M||`` with ``||M||`` estimated by ``max |w|``."""
    R = op.matvec(V) - V * w[None, :]
    scale = max(float(np.max(np.abs(w))), 1e-300)
    return float(np.max(np.linalg.norm(R, axis=0)) / scale)


def spectrum(op: TruncatedOperator, dense_limit: int = DENSE_LIMIT, check: bool = True) -> np.ndarray:
    """All eigenvalues, ascending."""
    if check:
        w, V = _eig(op, True, dense_limit)
        res = eigen_residual(op, w, V)
        if res > RESIDUAL_TOL:
            raise InconsistencyError(f"eigen-residual {res:.2e} exceeds {RESIDUAL_TOL}")
        return w
    return _eig(op, False, dense_limit)


@dataclass(frozen=True)
class SpectrumReport:
    dims: tuple
    lowest: tuple
    highest: tuple
    verdict: str  # diverging_below | converging | inconclusive
    parity_groups: dict = field(default_factory=dict)
    lower_bound: Optional[float] = None
    bound_respected: Optional[bool] = None
    max_residual: float = 0.0

    def to_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "lowest": list(self.lowest),
            "highest": list(self.highest),
            "verdict": self.verdict,
            "lower_bound": self.lower_bound,
            "bound_respected": self.bound_respected,
            "max_residual": self.max_residual,
            "parity_groups": {str(k): v for k, v in self.parity_groups.items()},
        }

    def rows(self, delta: int) -> list[tuple]:
        return [(N, lo, hi, N % delta) for N, lo, hi in zip(self.dims, self.lowest, self.highest)]


def sweep_verdict(dims: Sequence[int], lowest: Sequence[float], margin: float = DROP_MARGIN, tol: float = CONV_TOL) -> str:
    """``diverging_below`` if every step over the top half of ``dims`` drops by at least
    ``margin * |lambda| * log2(N'/N)``; ``converging`` if the top three agree to ``tol``."""
    lam = list(lowest)
    n = len(lam)
    if n >= 3:
        top = lam[-3:]
        if all(abs(b - a) <= tol * max(abs(a), abs(b)) for a, b in zip(top, top[1:])):
            return "converging"
    if n >= 2:
        start = min(n // 2, n - 2)
        ok = True
        for i in range(start, n - 1):
            need = margin * abs(lam[i]) * math.log2(dims[i + 1] / dims[i])
            if not (lam[i + 1] < lam[i] - need):
                ok = False
                break
        if ok:
            return "diverging_below"
    return "inconclusive"


def _solve_dim(spec: OperatorSpec, N: int, dense_limit: int, n_low: int):
    op = build_truncated(spec, N)
    w, V = _eig(op, True, dense_limit)
    return N, w, eigen_residual(op, w, V)


def _run(spec, dims, dense_limit, n_low=5):
    dims = [int(N) for N in dims]
    with ThreadPoolExecutor(max_workers=max_workers()) as ex:
        return list(ex.map(lambda N: _solve_dim(spec, N, dense_limit, n_low), dims))


def _groups(results, delta: int, n_low: int) -> dict:
    groups: dict = {}
    for N, w, _ in results:
        low = [float(x) for x in w[:n_low]]
        groups.setdefault(N % delta, []).append({"N": N, "lowest": low})
    for rows in groups.values():
        rows.sort(key=lambda r: r["N"])
    return dict(sorted(groups.items()))


def ground_energy_sweep(
    spec: OperatorSpec,
    dims: Sequence[int],
    margin: float = DROP_MARGIN,
    tol: float = CONV_TOL,
    dense_limit: int = DENSE_LIMIT,
    n_low: int = 5,
) -> SpectrumReport:
    dims = [int(N) for N in dims]
    if any(b <= a for a, b in zip(dims, dims[1:])):
        raise ValueError("dims must be strictly ascending")
    results = _run(spec, dims, dense_limit, n_low)
    max_res = max(r for _, _, r in results)
    if max_res > RESIDUAL_TOL:
        raise InconsistencyError(f"eigen-residual {max_res:.2e} exceeds {RESIDUAL_TOL}")
    lowest = tuple(float(w[0]) for _, w, _ in results)
    highest = tuple(float(w[-1]) for _, w, _ in results)
    verdict = sweep_verdict(dims, lowest, margin, tol)
    lb = classify(spec).lower_bound
    respected = None
    if lb is not None:
        respected = all(x >= lb for x in lowest)
        if not respected:
            raise InconsistencyError(f"lambda_min below the certified lower bound {lb}: {lowest}")
    return SpectrumReport(
        tuple(dims), lowest, highest, verdict,
        _groups(results, spec.delta, n_low), lb, respected, max_res,
    )


def parity_study(spec: OperatorSpec, dims: Sequence[int], n_low: int = 5, dense_limit: int = DENSE_LIMIT) -> dict:
    """Lowest ``n_low`` eigenvalues per dimension, grouped by ``N mod Delta`` (diagnostic only)."""
    results = _run(spec, sorted(int(N) for N in dims), dense_limit, n_low)
    groups = _groups(results, spec.delta, n_low)
    for key, rows in groups.items():
        mins = np.array([r["lowest"][0] for r in rows])
        groups[key] = {"rows": rows, "min_mean": float(mins.mean()), "min_spread": float(np.ptp(mins))}
    return groups


def variational_witness(spec: OperatorSpec, R: int, n: int, n0: Optional[int] = None) -> float:
    """``<psi, A psi>`` for ``psi = n^{-1/2} sum_{r=R}^{R+n-1} (-1)^r e^{i r theta} phi_{n0 + r Delta}``.

    Equals ``(1/n) sum delta_r - (2|xi|/n) sum_{r=R+1}^{R+n-1} gamma_r`` with
    ``delta_r = f(n0 + r Delta)`` and ``gamma_r = beta^{lk}_{n0 + r Delta}``.
    """
    if n < 1 or R < 0:
        raise ValueError("need n >= 1 and R >= 0")
    n0 = spec.l if n0 is None else n0
    D = spec.delta
    rs = np.arange(R, R + n)
    ns = n0 + rs * D
    fsum = math.fsum(spec.field.values(ns))
    gsum = math.fsum(beta_array(spec.l, spec.k, ns[1:]))
    return fsum / n - 2.0 * spec.xi_modulus * gsum / n


def witness_vector(spec: OperatorSpec, R: int, n: int, n0: Optional[int] = None, size: Optional[int] = None) -> np.ndarray:
    n0 = spec.l if n0 is None else n0
    D = spec.delta
    size = n0 + (R + n) * D + 1 if size is None else size
    psi = np.zeros(size, dtype=complex)
    for r in range(R, R + n):
        psi[n0 + r * D] = (-1) ** r * np.exp(1j * r * spec.theta) / math.sqrt(n)
    return psi
