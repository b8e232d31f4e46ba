import numpy as np
import pytest
import sympy


def ladder_matrices(N):
    """Dense truncated ``a`` and ``a^+`` on ``N+pad`` states (pad so products are exact on the first N)."""
    a = np.diag(np.sqrt(np.arange(1, N)), 1).astype(complex)
    return a, a.conj().T


def oracle_matrix(spec, N):
    """Projection of the operator built from explicit ladder matrices.

    Powers are formed on a larger space and then cut, so the hard truncation is
    reproduced independently of ``action_column``.
    """
    M = N + spec.k + spec.l + 2
    a, ad = ladder_matrices(M)
    k, l = spec.k, spec.l
    mp = np.linalg.matrix_power
    S = spec.xi * mp(ad, k) @ mp(a, l)
    A = S + S.conj().T + np.diag([spec.f(n) for n in range(M)])
    return A[:N, :N]


def sympy_beta(k, l, n):
    if n < l:
        return sympy.Integer(0)
    return sympy.sqrt(sympy.rf(n - l + 1, l) * sympy.rf(n - l + 1, k))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
