import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from squeezeop.errors import ResourceError
from squeezeop.fock import KerrField, OperatorSpec, PolynomialField, ZeroField, action_column, beta
from squeezeop.matrixlab import (
    build_truncated,
    eigen_residual,
    ground_energy_sweep,
    parity_study,
    spectrum,
    sweep_verdict,
    variational_witness,
    witness_vector,
)

from conftest import oracle_matrix

spec_st = st.builds(
    lambda k, lf, xm, xp, kind, K, h: OperatorSpec(
        k, int(lf * k) if int(lf * k) < k else k - 1, xm, xp,
        {"zero": ZeroField(), "kerr": KerrField(K, h), "poly": PolynomialField((K, 0.5))}[kind],
    ),
    st.integers(1, 6), st.floats(0, 0.99), st.floats(0.1, 3.0), st.floats(-3.2, 3.2),
    st.sampled_from(["zero", "kerr", "poly"]), st.floats(0.1, 4.0), st.integers(1, 4),
)


def test_small_examples():
    M = build_truncated(OperatorSpec(2), 3).to_dense()
    expected = np.zeros((3, 3))
    expected[2, 0] = expected[0, 2] = math.sqrt(2)
    np.testing.assert_allclose(M, expected, atol=0)
    op = build_truncated(OperatorSpec(1), 2)
    assert op.entry(1, 0) == 1.0
    np.testing.assert_allclose(spectrum(op), [-1.0, 1.0], atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(spec_st, st.integers(1, 40))
def test_hermitian_and_banded(spec, N):
    op = build_truncated(spec, N)
    M = op.to_dense()
    assert np.array_equal(M, M.conj().T)
    D = spec.delta
    mask = np.zeros_like(M, dtype=bool)
    i, j = np.indices(M.shape)
    mask[(i == j) | (np.abs(i - j) == D)] = True
    assert not np.any(M[~mask])
    assert np.all(np.diag(M).imag == 0) and np.all(np.diag(M).real >= 0)


@settings(max_examples=30, deadline=None)
@given(spec_st, st.integers(1, 25))
def test_matches_ladder_oracle(spec, N):
    op = build_truncated(spec, N)
    np.testing.assert_allclose(op.to_dense(), oracle_matrix(spec, N), rtol=1e-13, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(spec_st, st.integers(1, 25))
def test_matches_action_columns(spec, N):
    """Columns assembled from the Fock action, cut at N, reproduce the matrix exactly."""
    M = np.zeros((N, N), dtype=complex)
    for n in range(N):
        for row, v in action_column(spec, n):
            if row < N:
                M[row, n] = v
    assert np.array_equal(M, M.conj().T)
    np.testing.assert_allclose(build_truncated(spec, N).to_dense(), M, rtol=1e-15, atol=0)


def test_matvec_matches_dense(rng):
    spec = OperatorSpec(4, 1, 1.3, 0.2, KerrField(0.5, 2))
    op = build_truncated(spec, 50)
    v = rng.normal(size=50) + 1j * rng.normal(size=50)
    np.testing.assert_allclose(op.matvec(v), op.to_dense() @ v, rtol=1e-13)
    V = rng.normal(size=(50, 3))
    np.testing.assert_allclose(op.matvec(V), op.to_dense() @ V, rtol=1e-13)


def test_diagonal_only():
    spec = OperatorSpec(5, 0, field=PolynomialField((3.0, -0.0, 1.0)))
    w = spectrum(build_truncated(spec, 4))
    np.testing.assert_allclose(w, sorted(spec.f(n) for n in range(4)))


@settings(max_examples=20, deadline=None)
@given(spec_st, st.integers(5, 80))
def test_trace_and_residual(spec, N):
    op = build_truncated(spec, N)
    w = spectrum(op)
    tr = float(np.sum(op.diag))
    assert abs(np.sum(w) - tr) <= 1e-9 * max(1.0, np.sum(np.abs(w)))
    assert np.all(np.diff(w) >= 0)


def test_resource_limit():
    with pytest.raises(ResourceError):
        spectrum(build_truncated(OperatorSpec(3), 50), dense_limit=40)


def test_sweep_verdict_rules():
    assert sweep_verdict([100, 200, 400], [-1.0, -2.0, -4.0]) == "diverging_below"
    assert sweep_verdict([100, 200, 400], [-1.0, -1.0, -1.0]) == "converging"
    assert sweep_verdict([100, 200, 400], [-1.0, -1.5, -1.51]) == "inconclusive"


def test_sweep_deficient_diverges():
    rep = ground_energy_sweep(OperatorSpec(3), [100, 200, 400, 800, 1000])
    assert rep.verdict == "diverging_below"
    assert rep.max_residual <= 1e-8
    assert list(rep.dims) == [100, 200, 400, 800, 1000]


def test_sweep_dominated_converges():
    spec = OperatorSpec(4, 0, field=KerrField(3.0, 2))
    rep = ground_energy_sweep(spec, [100, 200, 400, 800, 1000])
    assert rep.verdict == "converging"
    assert rep.bound_respected and all(x >= rep.lower_bound for x in rep.lowest)


def test_witness_examples():
    assert variational_witness(OperatorSpec(3), 1, 2) == pytest.approx(-math.sqrt(120), rel=1e-15)
    spec = OperatorSpec(3, 0, field=KerrField(1.0, 1))
    assert variational_witness(spec, 4, 1) == spec.f(12)
    vals = [variational_witness(OperatorSpec(3), 1, n) for n in (4, 16, 64)]
    assert vals[2] < vals[1] < vals[0]


@pytest.mark.parametrize("spec", [
    OperatorSpec(3),
    OperatorSpec(3, 0, 1.4, 0.9),
    OperatorSpec(4, 0, 1.0, -0.3, KerrField(1.0, 2)),
    OperatorSpec(5, 2, 0.7, 2.2, PolynomialField((0.5, 0.1))),
])
def test_witness_equals_quadratic_form(spec):
    for R, n in [(0, 1), (1, 2), (2, 5), (3, 17)]:
        for n0 in range(spec.l, spec.k):
            psi = witness_vector(spec, R, n, n0)
            M = oracle_matrix(spec, psi.size)
            q = np.vdot(psi, M @ psi)
            w = variational_witness(spec, R, n, n0)
            assert abs(q.imag) <= 1e-9 * abs(w) + 1e-12
            assert w == pytest.approx(q.real, rel=1e-9, abs=1e-12)


def test_parity_study():
    dims = list(range(300, 331))
    g = parity_study(OperatorSpec(3), dims)
    assert sorted(g) == [0, 1, 2]
    assert sum(len(v["rows"]) for v in g.values()) == len(dims)
    g1 = parity_study(OperatorSpec(2, 1), [50, 60, 70])
    assert list(g1) == [0]
