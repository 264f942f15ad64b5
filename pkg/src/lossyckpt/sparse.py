"""Sparse CSR primitives, reproducible test-problem generators, and vector file I/O.

Vectors are plain contiguous float64 numpy arrays throughout the package;
finiteness is enforced at the file-reading boundary.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numba import njit

from .errors import DimensionMismatchError, ParameterError, SingularPreconditionerError

VECTOR_MAGIC = b"CKPTVEC1"


@njit(cache=True)
def _spmv_kernel(row_offsets, col_indices, values, x, out):
    # Sequential accumulation in row order: bitwise reproducible across runs.
    for i in range(out.shape[0]):
        acc = 0.0
        for idx in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[idx] * x[col_indices[idx]]
        out[i] = acc


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SparseMatrixCsr:
    """Immutable CSR matrix with strictly increasing column indices per row."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", _readonly(np.asarray(self.row_offsets, dtype=np.int64)))
        object.__setattr__(self, "col_indices", _readonly(np.asarray(self.col_indices, dtype=np.int64)))
        object.__setattr__(self, "values", _readonly(np.asarray(self.values, dtype=np.float64)))
        ro, ci, vals = self.row_offsets, self.col_indices, self.values
        if self.n_rows < 0 or self.n_cols < 0:
            raise ParameterError("matrix dimensions must be non-negative")
        if ro.shape != (self.n_rows + 1,):
            raise ParameterError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or ro[-1] != len(vals) or len(vals) != len(ci):
            raise ParameterError("row_offsets endpoints inconsistent with stored entries")
        if np.any(np.diff(ro) < 0):
            raise ParameterError("row_offsets must be non-decreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ParameterError("column index out of range")
        for r in range(self.n_rows):
            cols = ci[ro[r]:ro[r + 1]]
            if cols.size > 1 and np.any(np.diff(cols) <= 0):
                raise ParameterError(f"columns in row {r} are not strictly increasing")

    @property
    def nnz(self) -> int:
        return len(self.values)

    @classmethod
    def from_triplets(cls, n_rows, n_cols, rows, cols, vals) -> "SparseMatrixCsr":
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if not (rows.shape == cols.shape == vals.shape):
            raise ParameterError("triplet arrays must have equal length")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if np.any(dup):
                raise ParameterError("duplicate (row, col) entry in triplets")
        row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_offsets, rows + 1, 1)
        np.cumsum(row_offsets, out=row_offsets)
        return cls(n_rows, n_cols, row_offsets, cols, vals)

    def to_triplets(self):
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64), np.diff(self.row_offsets))
        return rows, self.col_indices.copy(), self.values.copy()

    @classmethod
    def identity(cls, n: int) -> "SparseMatrixCsr":
        idx = np.arange(n, dtype=np.int64)
        return cls(n, n, np.arange(n + 1, dtype=np.int64), idx, np.ones(n))

    @classmethod
    def from_dense(cls, dense) -> "SparseMatrixCsr":
        dense = np.asarray(dense, dtype=np.float64)
        rows, cols = np.nonzero(dense)
        return cls.from_triplets(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    def to_dense(self) -> np.ndarray:
        out = np.zeros((self.n_rows, self.n_cols))
        rows, cols, vals = self.to_triplets()
        out[rows, cols] = vals
        return out

    def diagonal(self) -> np.ndarray:
        """Stored diagonal entries; NaN marks a structurally missing diagonal."""
        diag = np.full(min(self.n_rows, self.n_cols), np.nan)
        for r in range(len(diag)):
            seg = slice(self.row_offsets[r], self.row_offsets[r + 1])
            hit = np.searchsorted(self.col_indices[seg], r)
            if hit < seg.stop - seg.start and self.col_indices[seg][hit] == r:
                diag[r] = self.values[seg][hit]
        return diag

    def one_norm(self) -> float:
        """Max absolute column sum."""
        colsums = np.zeros(self.n_cols)
        np.add.at(colsums, self.col_indices, np.abs(self.values))
        return float(colsums.max()) if self.n_cols else 0.0


@dataclass(frozen=True)
class DiagonalPreconditioner:
    """Diagonal preconditioner stored as the elementwise inverse."""

    inverse_diagonal: np.ndarray

    def __post_init__(self):
        inv = np.asarray(self.inverse_diagonal, dtype=np.float64)
        if not np.all(np.isfinite(inv)) or np.any(inv == 0.0):
            raise SingularPreconditionerError("inverse diagonal entries must be finite and nonzero")
        object.__setattr__(self, "inverse_diagonal", _readonly(inv))

    @property
    def n(self) -> int:
        return len(self.inverse_diagonal)

    def apply(self, r: np.ndarray) -> np.ndarray:
        """Solve M z = r for diagonal M."""
        if len(r) != self.n:
            raise DimensionMismatchError("preconditioner size does not match vector")
        return self.inverse_diagonal * r


def spmv(a: SparseMatrixCsr, x: np.ndarray) -> np.ndarray:
    """y = A @ x with per-row sequential accumulation."""
    x = np.asarray(x, dtype=np.float64)
    if a.n_cols != len(x):
        raise DimensionMismatchError(f"matrix has {a.n_cols} columns, vector has {len(x)} entries")
    out = np.empty(a.n_rows)
    _spmv_kernel(a.row_offsets, a.col_indices, a.values, np.ascontiguousarray(x), out)
    return out


def jacobi_preconditioner(a: SparseMatrixCsr) -> DiagonalPreconditioner:
    """Inverse-diagonal preconditioner; every diagonal entry must be present and nonzero."""
    diag = a.diagonal()
    if len(diag) != a.n_rows or a.n_rows != a.n_cols:
        raise SingularPreconditionerError("matrix must be square")
    if np.any(np.isnan(diag)) or np.any(diag == 0.0):
        raise SingularPreconditionerError("matrix has a missing or zero diagonal entry")
    return DiagonalPreconditioner(1.0 / diag)


def generate_poisson1d(n: int) -> SparseMatrixCsr:
    """Tridiagonal (-1, 2, -1) stiffness matrix of size n."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    rows, cols, vals = [], [], []
    for i in range(n):
        if i > 0:
            rows.append(i), cols.append(i - 1), vals.append(-1.0)
        rows.append(i), cols.append(i), vals.append(2.0)
        if i < n - 1:
            rows.append(i), cols.append(i + 1), vals.append(-1.0)
    return SparseMatrixCsr.from_triplets(n, n, rows, cols, vals)


def generate_poisson2d(m: int):
    """5-point Laplacian on an m x m grid (diagonal 4, neighbors -1) and b = ones.

    Row-major grid ordering; the matrix is symmetric positive definite.
    """
    if m < 2:
        raise ParameterError("grid side length must be >= 2")
    n = m * m
    rows, cols, vals = [], [], []
    for i in range(m):
        for j in range(m):
            k = i * m + j
            if i > 0:
                rows.append(k), cols.append(k - m), vals.append(-1.0)
            if j > 0:
                rows.append(k), cols.append(k - 1), vals.append(-1.0)
            rows.append(k), cols.append(k), vals.append(4.0)
            if j < m - 1:
                rows.append(k), cols.append(k + 1), vals.append(-1.0)
            if i < m - 1:
                rows.append(k), cols.append(k + m), vals.append(-1.0)
    a = SparseMatrixCsr.from_triplets(n, n, rows, cols, vals)
    return a, np.ones(n)


def generate_random_sdd(n: int, seed: int, offdiag_per_row: int = 3) -> SparseMatrixCsr:
    """Random strictly diagonally dominant matrix (Jacobi iteration converges)."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = np.random.default_rng(seed)
    entries = {}
    for i in range(n):
        others = [j for j in range(n) if j != i]
        picks = rng.choice(others, size=min(offdiag_per_row, n - 1), replace=False)
        for j in picks:
            entries[(i, int(j))] = float(rng.uniform(-1.0, 1.0))
    for i in range(n):
        rowsum = sum(abs(v) for (r, _), v in entries.items() if r == i)
        entries[(i, i)] = rowsum + float(rng.uniform(0.5, 1.5))
    rows = [k[0] for k in entries]
    cols = [k[1] for k in entries]
    vals = [entries[k] for k in entries]
    return SparseMatrixCsr.from_triplets(n, n, rows, cols, vals)


def write_vector(path, x: np.ndarray) -> None:
    """Write a raw little-endian float64 vector file (magic + u64 length)."""
    x = np.asarray(x, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(VECTOR_MAGIC)
        fh.write(struct.pack("<Q", len(x)))
        fh.write(x.astype("<f8").tobytes())


def read_vector(path) -> np.ndarray:
    """Read a vector file; rejects bad magic, short payloads, and NaN/Inf entries."""
    blob = Path(path).read_bytes()
    if len(blob) < 16 or blob[:8] != VECTOR_MAGIC:
        raise ParameterError(f"{path}: not a vector file (bad magic)")
    (n,) = struct.unpack("<Q", blob[8:16])
    if len(blob) != 16 + 8 * n:
        raise ParameterError(f"{path}: length field says {n} entries, payload disagrees")
    x = np.frombuffer(blob[16:], dtype="<f8").astype(np.float64)
    if not np.all(np.isfinite(x)):
        raise ParameterError(f"{path}: vector contains NaN or Inf")
    return x


def read_matrix_market(path) -> SparseMatrixCsr:
    """Load a Matrix Market coordinate file (real, general or symmetric)."""
    from scipy.io import mmread

    mat = mmread(str(path))
    if np.iscomplexobj(mat):
        raise ParameterError(f"{path}: complex matrices are not supported")
    if hasattr(mat, "tocsr"):
        csr = mat.tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        return SparseMatrixCsr(
            csr.shape[0], csr.shape[1],
            csr.indptr.astype(np.int64), csr.indices.astype(np.int64),
            csr.data.astype(np.float64),
        )
    return SparseMatrixCsr.from_dense(np.asarray(mat))
