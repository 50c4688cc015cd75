import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from featesn import core_math as cm
from featesn.exceptions import ParameterError, ShapeError, SingularMatrixError


def dense_radius(M):
    M = M.toarray() if sp.issparse(M) else np.asarray(M)
    return np.max(np.abs(np.linalg.eigvals(M)))


class TestErdosRenyi:
    def test_density_matches_p(self):
        b, p, seeds = 5, 0.99, 1000
        counts = np.array([cm.erdos_renyi(b, p, s).nnz for s in range(seeds)])
        total = seeds * b * b
        sigma = np.sqrt(p * (1 - p) / total)
        assert abs(counts.sum() / total - p) < 3 * sigma

    def test_single_node(self):
        M = cm.erdos_renyi(1, 0.5, 3)
        assert M.shape == (1, 1)
        assert M.nnz in (0, 1)

    def test_table_density(self):
        seeds = 200
        counts = np.array([cm.erdos_renyi(100, 0.01, s).nnz for s in range(seeds)])
        # Binomial(10000, 0.01) per draw: mean 100, std ~9.95.
        assert abs(counts.mean() - 100) < 3 * np.sqrt(100 * 0.99 / seeds)

    def test_values_in_open_interval(self):
        M = cm.erdos_renyi(60, 0.3, 1)
        assert np.all(np.abs(M.data) < 1) and np.all(M.data != 0)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_invalid_probability(self, p):
        with pytest.raises(ParameterError):
            cm.erdos_renyi(4, p, 0)

    def test_deterministic(self):
        a, b = cm.erdos_renyi(30, 0.2, 42), cm.erdos_renyi(30, 0.2, 42)
        assert (a != b).nnz == 0
        assert (a != cm.erdos_renyi(30, 0.2, 43)).nnz > 0


class TestSpectralRadius:
    def test_diagonal(self):
        assert cm.spectral_radius(np.diag([2.0, 1.0])) == pytest.approx(2.0)

    def test_zero(self):
        assert cm.spectral_radius(np.zeros((4, 4))) == 0.0
        assert cm.spectral_radius(sp.csr_matrix((300, 300))) == 0.0

    def test_random_dense_matches_oracle(self):
        M = np.random.default_rng(0).standard_normal((50, 50))
        assert cm.spectral_radius(M) == pytest.approx(dense_radius(M), rel=1e-8)

    def test_power_iteration_matches_oracle(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((50, 50))
        S = A @ A.T  # symmetric PSD: real, separated dominant eigenvalue
        est, ok = cm.power_iteration(S)
        assert ok
        assert est == pytest.approx(dense_radius(S), rel=1e-8)

    def test_large_sparse_path_matches_oracle(self):
        M = cm.erdos_renyi(400, 0.02, 7)
        rho, ok = cm.spectral_radius(M, return_info=True)
        assert ok
        assert rho == pytest.approx(dense_radius(M), rel=1e-8)

    def test_complex_pair_flags_nonconvergence(self):
        # eigenvalues 1 +- i sqrt(5), non-normal: the norm ratio keeps oscillating
        M = np.array([[1.0, -5.0], [1.0, 1.0]])
        est, ok = cm.power_iteration(M, maxiter=200)
        assert not ok
        assert np.isfinite(est)

    def test_non_square(self):
        with pytest.raises(ShapeError):
            cm.spectral_radius(np.ones((2, 3)))


class TestNormalize:
    def test_diagonal(self):
        out = cm.normalize_spectral(np.diag([2.0, 1.0]), 0.9)
        np.testing.assert_allclose(out, np.diag([0.9, 0.45]), atol=1e-15)

    def test_identity_case(self):
        M = np.random.default_rng(3).standard_normal((6, 6))
        out = cm.normalize_spectral(M, cm.spectral_radius(M))
        np.testing.assert_allclose(out, M, rtol=0, atol=1e-12)

    def test_erdos_renyi_radius(self):
        out = cm.normalize_spectral(cm.erdos_renyi(50, 0.1, 5), 0.9)
        assert abs(dense_radius(out) - 0.9) <= 1e-8
        assert sp.issparse(out)

    def test_zero_radius_errors(self):
        with pytest.raises(cm.ZeroSpectralRadiusError):
            cm.normalize_spectral(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.9)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), target=st.floats(0.1, 2.0))
    def test_idempotent(self, seed, target):
        M = np.random.default_rng(seed).standard_normal((8, 8))
        once = cm.normalize_spectral(M, target)
        twice = cm.normalize_spectral(once, target)
        np.testing.assert_allclose(twice, once, rtol=0, atol=1e-10)


class TestKronecker:
    def test_identity_scalar(self):
        np.testing.assert_array_equal(cm.kronecker(np.eye(2), [[3.0]]), np.diag([3.0, 3.0]))

    def test_hand_expansion(self):
        np.testing.assert_array_equal(cm.kronecker([[1, 1]], [[2], [3]]), [[2, 2], [3, 3]])

    def test_block_pattern(self):
        Wf = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 0], [1, 0, 1], [0, 1, 1], [1, 1, 1]])
        Wb = np.array([[0.1], [-0.2], [0.3]])
        K = cm.kronecker(Wf, Wb)
        assert K.shape == (21, 3)
        for i in range(7):
            for j in range(3):
                block = K[3 * i:3 * i + 3, j:j + 1]
                np.testing.assert_array_equal(block, Wb if Wf[i, j] else np.zeros((3, 1)))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), dims=st.tuples(*[st.integers(1, 3)] * 6))
    def test_mixed_product(self, seed, dims):
        a, b, c, d, e, f = dims
        rng = np.random.default_rng(seed)
        A, C = rng.standard_normal((a, b)), rng.standard_normal((b, c))
        B, D = rng.standard_normal((d, e)), rng.standard_normal((e, f))
        lhs = cm.kronecker(A, B) @ cm.kronecker(C, D)
        np.testing.assert_allclose(lhs, cm.kronecker(A @ C, B @ D), atol=1e-10)


def explicit_ridge(Y, R, beta):
    return Y @ R.T @ np.linalg.inv(R @ R.T + beta * np.eye(R.shape[0]))


class TestRidge:
    def test_identity(self):
        np.testing.assert_allclose(cm.ridge_solve(np.eye(3), np.eye(3), 0.0), np.eye(3))

    def test_identity_regularized(self):
        np.testing.assert_allclose(cm.ridge_solve(np.eye(3), np.eye(3), 1.0), 0.5 * np.eye(3))

    def test_matches_explicit_oracle(self):
        rng = np.random.default_rng(11)
        Y, R = rng.standard_normal((2, 200)), rng.standard_normal((10, 200))
        W = cm.ridge_solve(Y, R, 1e-6)
        ref = explicit_ridge(Y, R, 1e-6)
        assert np.linalg.norm(W - ref) / np.linalg.norm(ref) <= 1e-8

    def test_singular_without_regularization(self):
        R = np.ones((3, 10))
        with pytest.raises(SingularMatrixError):
            cm.ridge_solve(np.ones((1, 10)), R, 0.0)
        assert np.all(np.isfinite(cm.ridge_solve(np.ones((1, 10)), R, 1e-3)))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            cm.ridge_solve(np.ones((1, 5)), np.ones((2, 4)), 1.0)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), beta=st.sampled_from([1e-6, 1e-2, 1.0]))
    def test_local_minimum(self, seed, beta):
        rng = np.random.default_rng(seed)
        Y, R = rng.standard_normal((2, 30)), rng.standard_normal((4, 30))
        W = cm.ridge_solve(Y, R, beta)

        def loss(M):
            return np.sum((Y - M @ R) ** 2) + beta * np.sum(M ** 2)

        base = loss(W)
        for idx in np.ndindex(*W.shape):
            for h in (1e-3, -1e-3):
                P = W.copy()
                P[idx] += h
                assert loss(P) >= base - 1e-12


def test_derive_seed_distinct():
    seeds = {cm.derive_seed(0, i, j) for i in range(3) for j in range(50)}
    assert len(seeds) == 150
    assert cm.derive_seed(5, 1, 2) == cm.derive_seed(5, 1, 2)
