import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import (
    l21_kkt_violation, l21_objective, nonneg_kkt_violation, nuclear_objective,
    pg_l21_rows, pg_soft_threshold, pg_svt, soft_kkt_violation, soft_objective,
    svt_kkt_violation,
)
from patchrank.errors import ParameterError
from patchrank.prox import l21_shrink, nonneg_project, nuclear_norm, soft_threshold, svt

finite = st.floats(-10, 10, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite))
taus = st.floats(0, 5, allow_nan=False)


def test_soft_threshold_examples():
    np.testing.assert_array_equal(soft_threshold([[1.2, -0.3]], 0.5), [[1.2 - 0.5, 0.0]])
    M = np.array([[1.0, -2.0], [0.0, 3.5]])
    np.testing.assert_array_equal(soft_threshold(M, 0), M)


def test_soft_threshold_matches_gradient_oracle(rng):
    M = rng.normal(size=(4, 4))
    U = soft_threshold(M, 0.2)
    ref = pg_soft_threshold(M, 0.2)
    assert abs(soft_objective(U, M, 0.2) - soft_objective(ref, M, 0.2)) <= 1e-6


def test_svt_examples():
    out = svt(np.diag([3.0, 1.0, 0.2]), 0.5)
    np.testing.assert_allclose(out, np.diag([2.5, 0.5, 0.0]), atol=1e-12)
    M = np.arange(6.0).reshape(2, 3)
    np.testing.assert_allclose(svt(M, 0), M, atol=1e-12)


def test_svt_beats_random_perturbations(rng):
    M = rng.normal(size=(5, 5))
    tau = 0.3
    B = svt(M, tau)
    base = nuclear_objective(B, M, tau)
    for _ in range(1000):
        D = rng.normal(size=B.shape) * rng.choice([1e-4, 1e-2, 1e-1])
        assert nuclear_objective(B + D, M, tau) >= base - 1e-12
    assert svt_kkt_violation(B, M, tau) <= 1e-6


def test_svt_matches_dual_oracle(rng):
    M = rng.normal(size=(5, 7))
    np.testing.assert_allclose(svt(M, 0.4), pg_svt(M, 0.4), atol=1e-9)


def test_l21_examples():
    np.testing.assert_allclose(l21_shrink([[1.2, 1.6]], 0.5), [[0.9, 1.2]])
    out = l21_shrink([[0.3, 0.4], [3.0, 4.0]], 0.5)
    np.testing.assert_array_equal(out[0], [0.0, 0.0])
    assert np.all(l21_shrink(np.zeros((2, 3)), 1.0) == 0)


def test_l21_matches_oracle(rng):
    M = rng.normal(size=(6, 4))
    E = l21_shrink(M, 0.4)
    ref = pg_l21_rows(M, 0.4)
    assert abs(l21_objective(E, M, 0.4) - l21_objective(ref, M, 0.4)) <= 1e-6
    np.testing.assert_allclose(E, ref, atol=1e-6)


def test_l21_column_axis_is_row_axis_of_transpose(rng):
    M = rng.normal(size=(5, 3))
    np.testing.assert_allclose(l21_shrink(M, 0.7, axis=0), l21_shrink(M.T, 0.7).T)


def test_nonneg_project():
    np.testing.assert_array_equal(nonneg_project([[-1.0, 2.0]]), [[0.0, 2.0]])
    M = np.abs(np.arange(6.0).reshape(2, 3))
    np.testing.assert_array_equal(nonneg_project(M), M)


def test_nonneg_project_is_elementwise_argmin(rng):
    M = rng.normal(size=(4, 5))
    A = nonneg_project(M)
    grid = np.linspace(0, 3, 3001)
    for i in range(4):
        for j in range(5):
            best = grid[np.argmin((grid - M[i, j]) ** 2)]
            assert abs(A[i, j] - best) <= 1e-3


@pytest.mark.parametrize("op", [soft_threshold, svt, l21_shrink])
def test_negative_threshold_rejected(op):
    with pytest.raises(ParameterError):
        op(np.ones((2, 2)), -0.1)


def test_inputs_not_mutated(rng):
    M = rng.normal(size=(3, 3))
    keep = M.copy()
    for op in (lambda a: soft_threshold(a, 0.3), lambda a: svt(a, 0.3),
               lambda a: l21_shrink(a, 0.3), nonneg_project):
        op(M)
    np.testing.assert_array_equal(M, keep)


@settings(max_examples=60, deadline=None)
@given(M=matrices, tau=taus)
@example(M=np.full((2, 2), 2.0), tau=5e-324)
def test_first_order_conditions(M, tau):
    assert soft_kkt_violation(soft_threshold(M, tau), M, tau) <= 1e-8
    assert l21_kkt_violation(l21_shrink(M, tau), M, tau) <= 1e-8
    assert nonneg_kkt_violation(nonneg_project(M), M) <= 1e-8
    assert svt_kkt_violation(svt(M, tau), M, tau) <= 1e-8 * max(1.0, np.abs(M).max())


@settings(max_examples=60, deadline=None)
@given(M=matrices, t1=taus, t2=taus)
def test_svt_nuclear_norm_monotone_in_tau(M, t1, t2):
    lo, hi = sorted((t1, t2))
    assert nuclear_norm(svt(M, lo)) >= nuclear_norm(svt(M, hi)) - 1e-9


@settings(max_examples=60, deadline=None)
@given(shape=st.tuples(st.integers(1, 6), st.integers(1, 6)), seed=st.integers(0, 2**32 - 1), tau=taus)
def test_operators_non_expansive(shape, seed, tau):
    r = np.random.default_rng(seed)
    M1, M2 = r.normal(size=shape) * 3, r.normal(size=shape) * 3
    dist = np.linalg.norm(M1 - M2)
    for op in (lambda a: soft_threshold(a, tau), lambda a: svt(a, tau),
               lambda a: l21_shrink(a, tau), lambda a: l21_shrink(a, tau, axis=0), nonneg_project):
        assert np.linalg.norm(op(M1) - op(M2)) <= dist + 1e-10
