import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lossyckpt import sparse
from lossyckpt.errors import (
    DimensionMismatchError,
    ParameterError,
    SingularPreconditionerError,
)


class TestSpmv:
    def test_identity(self):
        a = sparse.SparseMatrixCsr.identity(3)
        x = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(sparse.spmv(a, x), x)

    def test_zero_matrix_annihilates(self):
        a = sparse.SparseMatrixCsr(2, 2, np.array([0, 0, 0]), np.array([], dtype=np.int64),
                                   np.array([]))
        assert np.array_equal(sparse.spmv(a, np.array([5.0, 7.0])), np.zeros(2))

    def test_poisson1d_hand_multiplication(self):
        # tridiag(-1, 2, -1) @ (1, 1, 1) = (1, 0, 1)
        a = sparse.generate_poisson1d(3)
        assert np.array_equal(sparse.spmv(a, np.ones(3)), np.array([1.0, 0.0, 1.0]))

    def test_dimension_mismatch(self):
        a = sparse.SparseMatrixCsr.identity(3)
        with pytest.raises(DimensionMismatchError):
            sparse.spmv(a, np.ones(4))

    def test_linearity(self, rng):
        for _ in range(20):
            n = int(rng.integers(2, 12))
            dense = rng.normal(size=(n, n)) * (rng.random(size=(n, n)) < 0.5)
            a = sparse.SparseMatrixCsr.from_dense(dense)
            x, y = rng.normal(size=n), rng.normal(size=n)
            alpha, beta = float(rng.normal()), float(rng.normal())
            lhs = sparse.spmv(a, alpha * x + beta * y)
            rhs = alpha * sparse.spmv(a, x) + beta * sparse.spmv(a, y)
            scale = max(1.0, np.abs(lhs).max())
            assert np.abs(lhs - rhs).max() <= 1e-12 * scale


class TestPoisson2d:
    def test_m2_stencil(self):
        a, b = sparse.generate_poisson2d(2)
        dense = a.to_dense()
        assert dense.shape == (4, 4)
        assert np.all(np.diag(dense) == 4.0)
        off = dense - np.diag(np.diag(dense))
        assert np.sum(off == -1.0) == 8
        assert np.sum(off != 0.0) == 8
        assert np.array_equal(b, np.ones(4))

    def test_symmetry(self):
        a, _ = sparse.generate_poisson2d(2)
        dense = a.to_dense()
        assert np.array_equal(dense, dense.T)

    def test_m10_positive_definite(self):
        # dense eigensolve as the independent oracle
        a, _ = sparse.generate_poisson2d(10)
        assert np.linalg.eigvalsh(a.to_dense()).min() > 0

    def test_spd_quadratic_form(self, rng):
        for m in (3, 8, 16):
            a, _ = sparse.generate_poisson2d(m)
            for _ in range(100 if m == 16 else 10):
                x = rng.normal(size=a.n_rows)
                assert x @ sparse.spmv(a, x) > 0

    def test_rejects_small_grid(self):
        with pytest.raises(ParameterError):
            sparse.generate_poisson2d(1)


class TestJacobiPreconditioner:
    def test_reciprocal(self):
        a = sparse.SparseMatrixCsr.from_dense(np.diag([2.0, 4.0]))
        m = sparse.jacobi_preconditioner(a)
        assert np.array_equal(m.inverse_diagonal, [0.5, 0.25])

    def test_identity(self):
        m = sparse.jacobi_preconditioner(sparse.SparseMatrixCsr.identity(5))
        assert np.array_equal(m.inverse_diagonal, np.ones(5))

    def test_poisson2d_quarter(self):
        a, _ = sparse.generate_poisson2d(3)
        m = sparse.jacobi_preconditioner(a)
        assert np.all(m.inverse_diagonal == 0.25)

    def test_zero_diagonal_rejected(self):
        a = sparse.SparseMatrixCsr.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
        with pytest.raises(SingularPreconditionerError):
            sparse.jacobi_preconditioner(a)

    def test_missing_diagonal_rejected(self):
        a = sparse.SparseMatrixCsr(2, 2, np.array([0, 1, 2]), np.array([1, 0]),
                                   np.array([1.0, 1.0]))
        with pytest.raises(SingularPreconditionerError):
            sparse.jacobi_preconditioner(a)


class TestCsrInvariants:
    def test_unsorted_columns_rejected(self):
        with pytest.raises(ParameterError):
            sparse.SparseMatrixCsr(1, 3, np.array([0, 2]), np.array([2, 0]),
                                   np.array([1.0, 2.0]))

    def test_bad_offsets_rejected(self):
        with pytest.raises(ParameterError):
            sparse.SparseMatrixCsr(2, 2, np.array([0, 2, 1]), np.array([0, 1]),
                                   np.array([1.0, 1.0]))

    def test_column_out_of_range_rejected(self):
        with pytest.raises(ParameterError):
            sparse.SparseMatrixCsr(1, 2, np.array([0, 1]), np.array([5]), np.array([1.0]))

    def test_duplicate_triplets_rejected(self):
        with pytest.raises(ParameterError):
            sparse.SparseMatrixCsr.from_triplets(2, 2, [0, 0], [1, 1], [1.0, 2.0])

    def test_immutable_after_construction(self):
        a = sparse.SparseMatrixCsr.identity(3)
        with pytest.raises(ValueError):
            a.values[0] = 7.0


@st.composite
def triplet_matrices(draw):
    n_rows = draw(st.integers(1, 6))
    n_cols = draw(st.integers(1, 6))
    cells = draw(st.sets(st.tuples(st.integers(0, n_rows - 1), st.integers(0, n_cols - 1)),
                         max_size=n_rows * n_cols))
    vals = [draw(st.floats(-1e6, 1e6, allow_nan=False)) for _ in cells]
    rows = [c[0] for c in cells]
    cols = [c[1] for c in cells]
    return n_rows, n_cols, rows, cols, vals


@settings(deadline=None, max_examples=60)
@given(triplet_matrices())
def test_csr_triplet_round_trip(spec):
    n_rows, n_cols, rows, cols, vals = spec
    a = sparse.SparseMatrixCsr.from_triplets(n_rows, n_cols, rows, cols, vals)
    r2, c2, v2 = a.to_triplets()
    expected = sorted(zip(rows, cols, vals))
    assert list(zip(r2, c2, v2)) == expected


class TestVectorFiles:
    def test_round_trip(self, tmp_path, rng):
        x = rng.normal(size=257)
        path = tmp_path / "x.vec"
        sparse.write_vector(path, x)
        assert np.array_equal(sparse.read_vector(path), x)

    def test_rejects_nan(self, tmp_path):
        path = tmp_path / "bad.vec"
        blob = sparse.VECTOR_MAGIC + (3).to_bytes(8, "little")
        blob += np.array([1.0, np.nan, 2.0]).astype("<f8").tobytes()
        path.write_bytes(blob)
        with pytest.raises(ParameterError):
            sparse.read_vector(path)

    def test_rejects_bad_magic(self, tmp_path):
        path = tmp_path / "bad.vec"
        path.write_bytes(b"NOTMAGIC" + bytes(16))
        with pytest.raises(ParameterError):
            sparse.read_vector(path)

    def test_rejects_truncation(self, tmp_path, rng):
        path = tmp_path / "x.vec"
        sparse.write_vector(path, rng.normal(size=10))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ParameterError):
            sparse.read_vector(path)


class TestMatrixMarket:
    def test_general(self, tmp_path):
        path = tmp_path / "a.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real general\n"
                        "2 2 3\n1 1 2.0\n1 2 -1.0\n2 2 4.0\n")
        a = sparse.read_matrix_market(path)
        assert np.array_equal(a.to_dense(), [[2.0, -1.0], [0.0, 4.0]])

    def test_symmetric_expansion(self, tmp_path):
        path = tmp_path / "s.mtx"
        path.write_text("%%MatrixMarket matrix coordinate real symmetric\n"
                        "2 2 3\n1 1 2.0\n2 1 -1.0\n2 2 2.0\n")
        a = sparse.read_matrix_market(path)
        assert np.array_equal(a.to_dense(), [[2.0, -1.0], [-1.0, 2.0]])
