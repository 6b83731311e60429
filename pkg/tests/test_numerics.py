import numpy as np
import pytest

from asdkit.numerics import Matrix, SeededRng, cholesky, mat_mul, rng_shuffle, sym_eig


class TestMatMul:
    def test_identity(self):
        a = Matrix([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [7.0, 8.0, 9.0]])
        assert mat_mul(Matrix.identity(3), a) == a

    def test_hand_case(self):
        a = Matrix([[1, 2], [3, 4]])
        b = Matrix([[0], [1]])
        assert mat_mul(a, b) == Matrix([[2], [4]])

    def test_triple_loop_oracle(self):
        rng = SeededRng(4)
        a = rng.normal_array(20).reshape(5, 4)
        b = rng.normal_array(12).reshape(4, 3)
        expected = np.zeros((5, 3))
        for i in range(5):
            for j in range(3):
                for k in range(4):
                    expected[i, j] += a[i, k] * b[k, j]
        got = mat_mul(Matrix(a), Matrix(b)).a
        assert np.allclose(got, expected, rtol=1e-12, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            mat_mul(Matrix.zeros(2, 3), Matrix.zeros(2, 3))

    def test_associativity(self):
        rng = SeededRng(5)
        for _ in range(5):
            a = Matrix(rng.normal_array(12).reshape(3, 4))
            b = Matrix(rng.normal_array(20).reshape(4, 5))
            c = Matrix(rng.normal_array(10).reshape(5, 2))
            left = mat_mul(mat_mul(a, b), c).a
            right = mat_mul(a, mat_mul(b, c)).a
            scale = np.abs(left).max()
            assert np.abs(left - right).max() <= 1e-9 * max(scale, 1.0)


class TestSymEig:
    def test_diagonal(self):
        evals, evecs = sym_eig(Matrix(np.diag([1.0, 2.0, 3.0])))
        assert np.allclose(evals, [1, 2, 3])
        assert np.allclose(np.abs(evecs.a), np.eye(3), atol=1e-12)

    def test_hand_2x2(self):
        # characteristic polynomial of [[2,1],[1,2]]: (2-l)^2 - 1 = 0
        evals, _ = sym_eig(Matrix([[2.0, 1.0], [1.0, 2.0]]))
        assert np.allclose(evals, [1.0, 3.0], atol=1e-10)

    @pytest.mark.parametrize("method", ["jacobi", "lapack"])
    def test_reconstruction_6x6(self, method):
        rng = SeededRng(7)
        a = rng.normal_array(36).reshape(6, 6)
        a = 0.5 * (a + a.T)
        evals, evecs = sym_eig(Matrix(a), method=method)
        V = evecs.a
        assert np.abs(V @ np.diag(evals) @ V.T - a).max() < 1e-6
        # pairwise contract: A v = lambda v
        assert np.abs(a @ V - V * evals[None, :]).max() < 1e-7
        # orthonormal within 1e-7, ascending order
        assert np.abs(V.T @ V - np.eye(6)).max() < 1e-7
        assert np.all(np.diff(evals) >= -1e-12)

    def test_trace_equals_eigensum(self):
        rng = SeededRng(8)
        a = rng.normal_array(64).reshape(8, 8)
        a = 0.5 * (a + a.T)
        evals, _ = sym_eig(Matrix(a))
        assert abs(np.trace(a) - evals.sum()) < 1e-8

    def test_rejects_nonsymmetric(self):
        with pytest.raises(ValueError, match="symmetric"):
            sym_eig(Matrix([[1.0, 2.0], [0.0, 1.0]]))


class TestCholesky:
    def test_identity(self):
        assert cholesky(Matrix.identity(4)) == Matrix.identity(4)

    def test_hand_case(self):
        L = cholesky(Matrix([[4.0, 2.0], [2.0, 3.0]])).a
        expected = np.array([[2.0, 0.0], [1.0, np.sqrt(2.0)]])
        assert np.allclose(L, expected, atol=1e-12)

    def test_reconstruction_spd(self):
        rng = SeededRng(9)
        b = rng.normal_array(25).reshape(5, 5)
        a = b @ b.T + 5.0 * np.eye(5)
        L = cholesky(Matrix(a)).a
        assert np.abs(L @ L.T - a).max() < 1e-8
        assert np.allclose(np.triu(L, 1), 0.0)

    def test_non_positive_definite(self):
        with pytest.raises(ValueError, match="positive definite"):
            cholesky(Matrix([[1.0, 2.0], [2.0, 1.0]]))


class TestSeededRng:
    def test_shuffle_single(self):
        assert rng_shuffle(SeededRng(1), 1).tolist() == [0]

    def test_determinism(self):
        a = SeededRng(42).shuffle(10)
        b = SeededRng(42).shuffle(10)
        assert np.array_equal(a, b)

    def test_uniformity_chi_square(self):
        # frequency-count oracle over all 24 permutations of n=4
        from itertools import permutations

        index = {p: i for i, p in enumerate(permutations(range(4)))}
        counts = np.zeros(24)
        rng = SeededRng(123)
        trials = 10_000
        for _ in range(trials):
            counts[index[tuple(rng.shuffle(4))]] += 1
        expected = trials / 24.0
        chi2 = float(np.sum((counts - expected) ** 2 / expected))
        # chi-square critical value, 23 dof, alpha = 0.001
        assert chi2 < 49.728

    def test_split_streams_differ(self):
        rng = SeededRng(5)
        a = rng.split(0)
        b = rng.split(1)
        assert a.next_u64() != b.next_u64()
        # split is a pure function of (seed, index)
        assert SeededRng(5).split(0).next_u64() == SeededRng(5).split(0).next_u64()

    def test_bulk_matches_scalar_stream(self):
        r1 = SeededRng(77)
        r2 = SeededRng(77)
        bulk = r1.uniform_array(16)
        scalars = np.array([r2.uniform() for _ in range(16)])
        assert np.array_equal(bulk, scalars)

    def test_randint_bounds(self):
        rng = SeededRng(3)
        draws = [rng.randint(7) for _ in range(500)]
        assert min(draws) == 0 and max(draws) == 6
