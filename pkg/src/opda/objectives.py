"""Smooth loss parts F(x): logistic, least squares and 2-D polynomials.

Every objective exposes value, full and minibatch gradients, and
matrix-free Hessian products over a minibatch.  The ridge term
``l2 * ||x||^2`` is part of F, never of the L1 regularizer.
"""
from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .errors import ArgumentError, DimensionError, UnsupportedError


@dataclass(frozen=True)
class SmoothnessEstimate:
    l_upper: float
    mu_lower: float


class Objective:
    kind = None
    dim = None
    n_samples = None
    l2 = 0.0

    def _check_x(self, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.dim:
            raise DimensionError(f"expected a vector of length {self.dim}, got shape {x.shape}")
        return x

    def _check_rows(self, s):
        s = np.ascontiguousarray(s, dtype=np.int64).reshape(-1)
        if s.shape[0] == 0:
            raise ArgumentError("index set is empty")
        if s.min() < 0 or s.max() >= self.n_samples:
            raise ArgumentError(f"index set has entries outside [0, {self.n_samples})")
        return s

    @property
    def all_rows(self):
        rows = getattr(self, "_all_rows", None)
        if rows is None:
            rows = np.arange(self.n_samples, dtype=np.int64)
            self._all_rows = rows
        return rows

    def ridge_value(self, x):
        return self.l2 * kernels.dot(x, x) if self.l2 else 0.0

    def value(self, x):
        raise NotImplementedError

    def grad_full(self, x):
        return self.grad_minibatch(x, self.all_rows)

    def grad_minibatch(self, x, s):
        raise NotImplementedError

    def hvp_minibatch(self, x, s, m):
        raise NotImplementedError

    def estimate_smoothness(self):
        raise UnsupportedError(f"no smoothness estimate for {self.kind}")

    def _check_block(self, m):
        m = np.asarray(m, dtype=np.float64)
        squeeze = m.ndim == 1
        if squeeze:
            m = m[:, None]
        if m.ndim != 2 or m.shape[0] != self.dim:
            raise DimensionError(f"block must have {self.dim} rows, got shape {m.shape}")
        return np.ascontiguousarray(m), squeeze


class _LinearModel(Objective):
    def __init__(self, data, l2=0.0):
        if l2 < 0:
            raise ArgumentError("l2 must be nonnegative")
        self.data = data
        self.l2 = float(l2)
        self.dim = data.dim
        self.n_samples = data.n_samples

    def _margins(self, x, rows):
        d = self.data
        return kernels.csr_margins(d.indptr, d.indices, d.data, rows, x)

    def _accumulate(self, rows, w):
        d = self.data
        return kernels.csr_accumulate(d.indptr, d.indices, d.data, rows, w, d.dim)

    def _hvp(self, rows, w, m):
        d = self.data
        return kernels.csr_hvp(d.indptr, d.indices, d.data, rows, w, m)

    def _max_row_norm2(self):
        d = self.data
        row_id = np.repeat(np.arange(d.n_samples), np.diff(d.indptr))
        norms = np.bincount(row_id, weights=d.data**2, minlength=d.n_samples)
        return float(norms.max())

    def _finish_grad(self, g, x):
        if self.l2:
            g = g + (2.0 * self.l2) * x
        return g

    def hvp_minibatch(self, x, s, m):
        x = self._check_x(x)
        rows = self._check_rows(s)
        m, squeeze = self._check_block(m)
        w = self._curvature_weights(x, rows) / rows.shape[0]
        y = self._hvp(rows, w, m)
        if self.l2:
            y = y + (2.0 * self.l2) * m
        return y[:, 0] if squeeze else y


class LogisticObjective(_LinearModel):
    """Mean of ``log(1 + exp(-b_n a_n.x))`` plus ridge."""

    kind = "logistic"

    def value(self, x):
        x = self._check_x(x)
        z = self.data.labels * self._margins(x, self.all_rows)
        loss = kernels.seq_sum(kernels.log1pexp(-z)) / self.n_samples
        return float(loss + self.ridge_value(x))

    def grad_minibatch(self, x, s):
        x = self._check_x(x)
        rows = self._check_rows(s)
        b = self.data.labels[rows]
        z = b * self._margins(x, rows)
        w = (-b * kernels.sigmoid(-z)) / rows.shape[0]
        return self._finish_grad(self._accumulate(rows, w), x)

    def _curvature_weights(self, x, rows):
        sig = kernels.sigmoid(self.data.labels[rows] * self._margins(x, rows))
        return sig * (1.0 - sig)

    def estimate_smoothness(self):
        ridge = 2.0 * self.l2
        return SmoothnessEstimate(self._max_row_norm2() / 4.0 + ridge, ridge)


class LeastSquaresObjective(_LinearModel):
    """``(1/2N) sum (a_n.x - b_n)^2`` plus ridge."""

    kind = "least_squares"

    def value(self, x):
        x = self._check_x(x)
        r = self._margins(x, self.all_rows) - self.data.labels
        return float(0.5 * kernels.seq_sum(r * r) / self.n_samples + self.ridge_value(x))

    def grad_minibatch(self, x, s):
        x = self._check_x(x)
        rows = self._check_rows(s)
        r = self._margins(x, rows) - self.data.labels[rows]
        return self._finish_grad(self._accumulate(rows, r / rows.shape[0]), x)

    def _curvature_weights(self, x, rows):
        return np.ones(rows.shape[0])

    def estimate_smoothness(self):
        ridge = 2.0 * self.l2
        return SmoothnessEstimate(self._max_row_norm2() + ridge, ridge)


@dataclass(frozen=True)
class PolyTerm:
    """``coef * (x[index] + shift) ** power``."""

    coef: float
    index: int
    shift: float
    power: int


class Poly2DObjective(Objective):
    """Sum of shifted power terms plus a ``cross * x0 * x1`` coupling.

    There is no dataset; the only valid index set is ``{0}``.
    """

    kind = "poly2d"

    def __init__(self, terms, cross=0.0, l2=0.0):
        self.terms = tuple(PolyTerm(float(c), int(i), float(s), int(p)) for c, i, s, p in terms)
        for t in self.terms:
            if t.index not in (0, 1) or t.power < 1:
                raise ArgumentError(f"bad polynomial term {t}")
        if l2 < 0:
            raise ArgumentError("l2 must be nonnegative")
        self.cross = float(cross)
        self.l2 = float(l2)
        self.dim = 2
        self.n_samples = 1

    def value(self, x):
        x = self._check_x(x)
        acc = 0.0
        for t in self.terms:
            acc += t.coef * (x[t.index] + t.shift) ** t.power
        acc += self.cross * x[0] * x[1]
        return float(acc + self.ridge_value(x))

    def grad_minibatch(self, x, s):
        x = self._check_x(x)
        self._check_rows(s)
        g = np.zeros(2)
        for t in self.terms:
            g[t.index] += t.coef * t.power * (x[t.index] + t.shift) ** (t.power - 1)
        g[0] += self.cross * x[1]
        g[1] += self.cross * x[0]
        return g + (2.0 * self.l2) * x

    def hessian(self, x):
        x = self._check_x(x)
        h = np.zeros((2, 2))
        for t in self.terms:
            if t.power >= 2:
                h[t.index, t.index] += (
                    t.coef * t.power * (t.power - 1) * (x[t.index] + t.shift) ** (t.power - 2)
                )
        h[0, 1] += self.cross
        h[1, 0] += self.cross
        return h + 2.0 * self.l2 * np.eye(2)

    def hvp_minibatch(self, x, s, m):
        self._check_rows(s)
        m, squeeze = self._check_block(m)
        y = self.hessian(x) @ m
        return y[:, 0] if squeeze else y


# Smooth parts of the two plotted toy problems, with their L1 weights.
CONVEX_POLY_TERMS = ((1.0, 0, 4.0, 2), (1.0, 0, 2.0, 2))
CONVEX_POLY_LAMBDA = 10.0
NONCONVEX_POLY_TERMS = ((1.0, 0, 4.0, 2), (1.0, 0, 2.0, 2), (0.02, 0, 0.0, 3), (0.02, 1, 12.0, 3))
NONCONVEX_POLY_CROSS = 0.1
NONCONVEX_POLY_LAMBDA = 100.0

POLY_PRESETS = {
    "fig1": (CONVEX_POLY_TERMS, 0.0, CONVEX_POLY_LAMBDA),
    "fig2": (NONCONVEX_POLY_TERMS, NONCONVEX_POLY_CROSS, NONCONVEX_POLY_LAMBDA),
}


def poly_preset(name, l2=0.0):
    terms, cross, _ = POLY_PRESETS[name]
    return Poly2DObjective(terms, cross, l2)


def make_objective(kind, data=None, l2=0.0, terms=None, cross=0.0):
    if kind == "logistic":
        return LogisticObjective(data, l2)
    if kind == "least_squares":
        return LeastSquaresObjective(data, l2)
    if kind == "poly2d":
        return Poly2DObjective(terms if terms is not None else CONVEX_POLY_TERMS, cross, l2)
    raise ArgumentError(f"unknown objective kind {kind!r}")


def l1_objective(obj, x, lam):
    """P(x) = F(x) + lam * ||x||_1."""
    x = np.asarray(x, dtype=np.float64)
    return obj.value(x) + lam * kernels.seq_sum(np.abs(x))
