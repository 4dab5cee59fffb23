import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from subalign.subspace import (
    DimensionError,
    Subspace,
    align,
    alignment_objective,
    apply_standardizer,
    fit_pca,
    fit_standardizer,
    project_source,
    project_target,
    standardize,
)


def random_orthonormal(rng, m, d):
    q, _ = np.linalg.qr(rng.normal(size=(m, d)))
    return q


def eig_oracle(X, D):
    cov = X.T @ X / (len(X) - 1)
    w = np.linalg.eigvalsh(cov)
    return np.sort(w)[::-1][:D]


def test_standardizer_basics():
    s = fit_standardizer(np.array([[2.0, 7.0], [4.0, 7.0]]))
    assert s.means.tolist() == [3.0, 7.0]
    assert s.stds.tolist() == [1.0, 0.0]
    assert s.constant.tolist() == [False, True]
    Z = apply_standardizer(s, np.array([[2.0, 7.0], [4.0, 7.0], [3.0, 7.0]]))
    assert Z.tolist() == [[-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]
    with pytest.raises(DimensionError):
        apply_standardizer(s, np.zeros((1, 3)))


def test_standardized_columns_have_unit_scale():
    X = np.random.default_rng(0).normal(3, 5, size=(30, 1068))
    s = fit_standardizer(X)
    assert s.means.shape == s.stds.shape == (1068,)
    Z = apply_standardizer(s, X)
    assert np.allclose(Z.mean(axis=0), 0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1, atol=1e-12)


def test_pca_single_direction():
    t = np.linspace(-1, 1, 9)
    X = np.column_stack([t, t])
    sub = fit_pca(X, 1)
    assert sub.components[:, 0] == pytest.approx([2**-0.5, 2**-0.5], abs=1e-12)


def test_pca_full_rank_square():
    X = standardize(np.random.default_rng(1).normal(size=(6, 6)))
    sub = fit_pca(X, 5)
    assert np.allclose(sub.components.T @ sub.components, np.eye(5), atol=1e-10)


def test_pca_matches_eig_oracle_10x6():
    X = standardize(np.random.default_rng(2).normal(size=(10, 6)))
    assert fit_pca(X, 3).explained_variances == pytest.approx(eig_oracle(X, 3), abs=1e-8)


def test_pca_dimension_errors():
    X = np.zeros((4, 3))
    for D in (0, 4):
        with pytest.raises(DimensionError):
            fit_pca(X, D)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(1, 12), st.integers(0, 2**31))
def test_pca_subspace_invariants(n, m, seed):
    X = standardize(np.random.default_rng(seed).normal(size=(n, m)))
    D = min(n, m)
    sub = fit_pca(X, D)
    C = sub.components
    assert np.abs(C.T @ C - np.eye(D)).max() < 1e-8
    assert np.all(np.diff(sub.explained_variances) <= 1e-12)
    pivots = C[np.argmax(np.abs(C), axis=0), np.arange(D)]
    assert np.all(pivots >= 0)
    again = fit_pca(X.copy(), D)
    assert np.array_equal(again.components, C)


def test_align_self_and_rotation():
    rng = np.random.default_rng(3)
    C = random_orthonormal(rng, 12, 4)
    S = Subspace(C, np.ones(4))
    assert np.abs(align(S, S).phi - np.eye(4)).max() < 1e-10
    R = random_orthonormal(rng, 4, 4)
    assert np.allclose(align(S, Subspace(C @ R, np.ones(4))).phi, R, atol=1e-12)
    with pytest.raises(DimensionError):
        align(S, Subspace(C[:, :3], np.ones(3)))


def test_closed_form_beats_random_candidates():
    rng = np.random.default_rng(4)
    Cs, Ct = random_orthonormal(rng, 20, 4), random_orthonormal(rng, 20, 4)
    phi = align(Subspace(Cs, np.ones(4)), Subspace(Ct, np.ones(4))).phi
    best = alignment_objective(Cs, Ct, phi)
    for _ in range(1000):
        assert best <= alignment_objective(Cs, Ct, rng.normal(size=(4, 4))) + 1e-12


def test_objective_gradient_by_finite_differences():
    rng = np.random.default_rng(5)
    Cs, Ct = random_orthonormal(rng, 15, 3), random_orthonormal(rng, 15, 3)
    phi = rng.normal(size=(3, 3))
    analytic = 2 * (phi - Cs.T @ Ct)
    h = 1e-6
    numeric = np.zeros_like(phi)
    for i in range(3):
        for j in range(3):
            e = np.zeros_like(phi)
            e[i, j] = h
            numeric[i, j] = (alignment_objective(Cs, Ct, phi + e) - alignment_objective(Cs, Ct, phi - e)) / (2 * h)
    assert np.abs(numeric - analytic).max() < 1e-5


def naive_matmul(A, B):
    out = np.zeros((A.shape[0], B.shape[1]))
    for i in range(A.shape[0]):
        for j in range(B.shape[1]):
            out[i, j] = sum(A[i, k] * B[k, j] for k in range(A.shape[1]))
    return out


def test_projections():
    rng = np.random.default_rng(6)
    Xs = rng.normal(size=(1, 7))
    Cs, Ct = random_orthonormal(rng, 7, 3), random_orthonormal(rng, 7, 3)
    S, T = Subspace(Cs, np.ones(3)), Subspace(Ct, np.ones(3))
    amap = align(S, T)
    assert np.allclose(project_source(Xs, S, amap), naive_matmul(naive_matmul(Xs, Cs), amap.phi), atol=1e-12)
    assert np.allclose(project_source(Xs, S, align(S, S)), Xs @ Cs, atol=1e-12)
    assert np.all(project_source(np.zeros((2, 7)), S, amap) == 0)
    assert np.allclose(project_target(Xs, T), naive_matmul(Xs, Ct), atol=1e-12)
    assert np.all(project_target(np.zeros((3, 7)), T) == 0)
    eye = Subspace(np.eye(7)[:, [1, 4]], np.ones(2))
    assert np.array_equal(project_target(Xs, eye), Xs[:, [1, 4]])
    with pytest.raises(DimensionError):
        project_target(np.zeros((1, 6)), T)
