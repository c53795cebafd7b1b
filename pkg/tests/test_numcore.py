import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from kernelquant.numcore import (
    EmptyMeasure,
    InvalidMatrix,
    MatrixMeasure,
    ModeError,
    TruncatedSeries,
    mat_min_eigenvalue,
    matrix_from_json,
    matrix_to_json,
    measure_from_json,
    measure_integrate,
    measure_to_json,
    psd_sqrt,
    series_exp,
    series_multiply,
)

from conftest import random_psd, seeds


def test_min_eigenvalue_examples():
    assert mat_min_eigenvalue(np.eye(2)) == pytest.approx(1.0)
    assert mat_min_eigenvalue(np.zeros((3, 3))) == 0.0
    assert mat_min_eigenvalue(np.diag([2.0, -1.0])) == pytest.approx(-1.0)


def test_min_eigenvalue_rejects_bad_input():
    with pytest.raises(InvalidMatrix):
        mat_min_eigenvalue(np.array([[1.0, np.nan], [np.nan, 1.0]]))
    with pytest.raises(InvalidMatrix):
        mat_min_eigenvalue(np.array([[1.0, 2.0], [0.0, 1.0]]))


@given(seeds, st.integers(1, 5))
def test_gram_matrices_are_psd(seed, d):
    rng = np.random.default_rng(seed)
    G = rng.normal(size=(d + 1, d)) + 1j * rng.normal(size=(d + 1, d))
    assert mat_min_eigenvalue(G.conj().T @ G) >= -1e-10 * max(1.0, np.linalg.norm(G) ** 2)


def test_psd_sqrt_roundtrip():
    rng = np.random.default_rng(3)
    A = random_psd(rng, 3)
    R = psd_sqrt(A)
    assert np.allclose(R @ R, A, atol=1e-12)
    assert np.allclose(psd_sqrt(A, inverse=True) @ R, np.eye(3), atol=1e-10)


def test_multiply_examples():
    p = series_multiply(TruncatedSeries([1, 1, 0]), TruncatedSeries([1, -1, 0]))
    assert np.allclose(p.coeffs, [1, 0, -1])
    e = TruncatedSeries([1, 1, 1 / 2, 1 / 6, 1 / 24])
    assert np.allclose(series_multiply(e, e).coeffs, [1, 2, 2, 4 / 3, 2 / 3])


def test_multiply_matrix_order():
    rng = np.random.default_rng(0)
    A, B = rng.normal(size=(2, 2)), rng.normal(size=(2, 2))
    I = np.eye(2)
    s = series_multiply(TruncatedSeries([I, A, 0 * I]), TruncatedSeries([I, B, 0 * I]))
    assert np.allclose(s.coeffs[1], A + B)
    assert np.allclose(s.coeffs[2], A @ B)
    assert not np.allclose(A @ B, B @ A)


def test_multiply_mode_mismatch():
    with pytest.raises(ModeError):
        series_multiply(TruncatedSeries([1, 2]), TruncatedSeries(np.ones((2, 2, 2))))


def test_truncates_at_shorter_series():
    s = series_multiply(TruncatedSeries([1, 1, 1, 1]), TruncatedSeries([1, 1]))
    assert s.max_index == 1


@given(seeds, st.integers(-2, 1), st.integers(-2, 1), st.integers(-2, 1))
def test_multiply_associative_commutative(seed, i, j, k):
    rng = np.random.default_rng(seed)
    mk = lambda lo: TruncatedSeries(rng.normal(size=6) + 1j * rng.normal(size=6), lo)
    A, B, C = mk(i), mk(j), mk(k)
    ab = series_multiply(A, B)
    assert np.allclose(ab.coeffs, series_multiply(B, A).coeffs, atol=1e-12)
    left = series_multiply(ab, C)
    right = series_multiply(A, series_multiply(B, C))
    assert left.min_index == right.min_index
    n = min(len(left.coeffs), len(right.coeffs))
    assert np.allclose(left.coeffs[:n], right.coeffs[:n], atol=1e-12)


def test_laurent_indexing_and_derivative():
    s = TruncatedSeries([2.0, 0.0, 3.0, 1.0], -1)  # 2/z + 3z + z^2
    assert s[-1] == 2 and s[5] == 0 and s.max_index == 2
    d = s.derivative()  # -2/z^2 + 3 + 2z
    assert d.min_index == -2
    assert np.allclose([d[-2], d[-1], d[0], d[1]], [-2, 0, 3, 2])
    assert s(2.0) == pytest.approx(1 + 6 + 4)


def test_series_exp_matches_exponential():
    g = series_exp(TruncatedSeries([0, 2.0, 0, 0, 0, 0]))
    assert np.allclose(g.coeffs, [2.0 ** n / np.prod(range(1, n + 1)) for n in range(6)])


def test_measure_integrate_examples():
    mu = MatrixMeasure.from_atoms([(0.0, np.eye(2))])
    assert np.allclose(measure_integrate(mu, lambda x: x), 0)
    mu = MatrixMeasure.from_atoms([(1.0, np.eye(2)), (2.0, np.eye(2))])
    assert np.allclose(measure_integrate(mu, lambda x: x), 3 * np.eye(2))
    W = np.array([[2.0, 1j], [-1j, 1.0]])
    assert np.allclose(measure_integrate(MatrixMeasure.from_atoms([(1.0, W)]), lambda x: 1.0), W)
    with pytest.raises(EmptyMeasure):
        measure_integrate(MatrixMeasure.from_atoms([]), lambda x: 1.0)


@given(seeds, st.floats(-2, 2), st.floats(-2, 2))
def test_measure_integrate_linear(seed, s, t):
    rng = np.random.default_rng(seed)
    mu = MatrixMeasure(np.sort(rng.uniform(-1, 1, 3)) + np.arange(3), [random_psd(rng, 2) for _ in range(3)])
    f, g = np.cos, lambda x: np.exp(1j * x)
    lhs = measure_integrate(mu, lambda x: s * f(x) + t * g(x))
    rhs = s * measure_integrate(mu, f) + t * measure_integrate(mu, g)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_measure_validation():
    mu = MatrixMeasure([1.0, -1.0], [2.0, 3.0])
    assert list(mu.lambdas) == [-1.0, 1.0]
    assert mu.weights[0, 0, 0] == 3.0
    with pytest.raises(ValueError):
        MatrixMeasure([1.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidMatrix):
        MatrixMeasure([0.0], [np.diag([1.0, -1.0])])


def test_json_roundtrip():
    rng = np.random.default_rng(1)
    mu = MatrixMeasure([0.5, 1.5], [random_psd(rng, 2), random_psd(rng, 2)])
    back = measure_from_json(json.loads(json.dumps(measure_to_json(mu))))
    assert np.allclose(back.weights, mu.weights) and np.allclose(back.lambdas, mu.lambdas)
    M = np.array([[1 + 2j, 3], [4j, 5]])
    assert np.allclose(matrix_from_json(matrix_to_json(M)), M)
    assert matrix_from_json(2.5).shape == (1, 1)


def test_laurent_truncation_is_exact():
    # (1/z + 1 + z)(1/z + 1 + z + z^2): degree 1 would need the unretained z^2 term of the first factor
    s = series_multiply(TruncatedSeries([1, 1, 1], -1), TruncatedSeries([1, 1, 1, 1], -1))
    assert s.min_index == -2 and s.max_index == 0
    assert np.allclose(s.coeffs, [1, 2, 3])
