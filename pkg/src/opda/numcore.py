"""Vectors, sparse rows, datasets and the seeded random source.

Parameter vectors are plain 1-D ``float64`` numpy arrays; ``param_vector``
is the validating constructor.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import ArgumentError, DataError, DimensionError

RNG_ALGORITHM = "philox4x64-10"


def param_vector(values, dim=None):
    x = np.array(values, dtype=np.float64).reshape(-1)
    if dim is not None and x.shape[0] != dim:
        raise DimensionError(f"expected length {dim}, got {x.shape[0]}")
    if not np.all(np.isfinite(x)):
        raise DataError("parameter vector has non-finite entries")
    return x


def dot(u, v):
    """Sequential inner product; summation order is fixed left to right."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise DimensionError(f"dot of lengths {u.shape[0]} and {v.shape[0]}")
    return float(kernels.dot(u, v))


@dataclass(frozen=True)
class SparseRow:
    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        val = np.asarray(self.values, dtype=np.float64)
        if idx.shape != val.shape:
            raise DimensionError("indices and values differ in length")
        if idx.size and (np.any(np.diff(idx) <= 0) or idx[0] < 0):
            raise DataError("row indices must be strictly ascending and nonnegative")
        if not np.all(np.isfinite(val)) or np.any(val == 0.0):
            raise DataError("row entries must be nonzero and finite")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_dict(cls, mapping):
        keys = sorted(mapping)
        return cls(np.array(keys, dtype=np.int64), np.array([mapping[k] for k in keys], dtype=np.float64))


def sparse_dot(row, v):
    v = np.asarray(v, dtype=np.float64)
    if row.indices.size and row.indices[-1] >= v.shape[0]:
        raise DimensionError(f"row index {row.indices[-1]} out of range for length {v.shape[0]}")
    return float(kernels.dot(row.values, v[row.indices]))


class SparseDataset:
    """CSR design matrix with labels in {-1, +1}."""

    def __init__(self, indptr, indices, data, labels, dim):
        self.indptr = np.ascontiguousarray(indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(indices, dtype=np.int64)
        self.data = np.ascontiguousarray(data, dtype=np.float64)
        self.labels = np.ascontiguousarray(labels, dtype=np.float64)
        self.dim = int(dim)
        self._validate()

    def _validate(self):
        n = self.labels.shape[0]
        if n < 1:
            raise DataError("dataset needs at least one row")
        if self.indptr.shape[0] != n + 1 or self.indptr[0] != 0:
            raise DataError("indptr does not match the number of labels")
        if np.any(np.diff(self.indptr) < 0) or self.indptr[-1] != self.indices.shape[0]:
            raise DataError("indptr is not a valid CSR offset array")
        if self.indices.shape != self.data.shape:
            raise DataError("indices and data differ in length")
        if not np.all(np.isin(self.labels, (-1.0, 1.0))):
            raise DataError("labels must be -1 or +1")
        if self.indices.size:
            if self.indices.min() < 0 or self.indices.max() >= self.dim:
                raise DimensionError(f"feature index outside [0, {self.dim})")
            nnz = self.indices.shape[0]
            row_start = np.zeros(nnz, dtype=bool)
            starts = self.indptr[:-1]
            row_start[starts[starts < nnz]] = True
            if np.any((np.diff(self.indices) <= 0) & ~row_start[1:]):
                raise DataError("row indices must be strictly ascending")
        if not np.all(np.isfinite(self.data)) or np.any(self.data == 0.0):
            raise DataError("stored entries must be nonzero and finite")

    @classmethod
    def from_rows(cls, rows, labels, dim):
        indptr = np.zeros(len(rows) + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([r.indices.shape[0] for r in rows])
        indices = np.concatenate([r.indices for r in rows]) if rows else np.zeros(0, np.int64)
        data = np.concatenate([r.values for r in rows]) if rows else np.zeros(0)
        return cls(indptr, indices, data, labels, dim)

    @classmethod
    def from_dense(cls, a, labels):
        a = np.asarray(a, dtype=np.float64)
        rows = [SparseRow(np.flatnonzero(r), r[r != 0.0]) for r in a]
        return cls.from_rows(rows, labels, a.shape[1])

    @property
    def n_samples(self):
        return self.labels.shape[0]

    def row(self, n):
        lo, hi = self.indptr[n], self.indptr[n + 1]
        return SparseRow(self.indices[lo:hi], self.data[lo:hi])

    def to_dense(self):
        out = np.zeros((self.n_samples, self.dim))
        for n in range(self.n_samples):
            lo, hi = self.indptr[n], self.indptr[n + 1]
            out[n, self.indices[lo:hi]] = self.data[lo:hi]
        return out

    def __repr__(self):
        return f"SparseDataset(n={self.n_samples}, dim={self.dim}, nnz={self.data.shape[0]})"


class RandomSource:
    """Seeded counter-based generator (Philox 4x64-10).

    Single-owner; hand independent instances to concurrent solvers.
    """

    algorithm = RNG_ALGORITHM

    def __init__(self, seed):
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ArgumentError("seed must fit in 64 unsigned bits")
        self.seed = seed
        self.generator = np.random.Generator(np.random.Philox(seed))

    def integers(self, low, high):
        return self.generator.integers(low, high)

    def __repr__(self):
        return f"RandomSource(seed={self.seed}, algorithm={self.algorithm!r})"


def sample_minibatch(rng, n, batch):
    """Draw ``batch`` distinct indices from ``range(n)``, returned sorted.

    Partial Fisher-Yates over a fresh index buffer, so the result depends
    only on the generator state.
    """
    n = int(n)
    batch = int(batch)
    if batch < 1 or batch > n:
        raise ArgumentError(f"batch must lie in [1, {n}], got {batch}")
    draws = rng.generator.integers(np.arange(batch), n)
    picked = kernels.partial_fisher_yates(n, draws.astype(np.int64))
    picked.sort()
    return picked


def gaussian_matrix(rng, d, r):
    if r < 1 or r > d:
        raise ArgumentError(f"need 1 <= r <= d, got d={d}, r={r}")
    return rng.generator.standard_normal((d, r))
