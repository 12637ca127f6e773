"""Descent-direction engines: SVRG, L-BFGS and sketched block BFGS."""
from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from ._backend import kernels
from .errors import ArgumentError, DimensionError
from .numcore import gaussian_matrix

CURVATURE_FLOOR = 1e-8


@dataclass
class SvrgAnchor:
    x_tilde: np.ndarray
    full_grad: np.ndarray
    epoch: int = 0

    @classmethod
    def at(cls, obj, x, epoch=0, full_grad=None):
        x = np.array(x, dtype=np.float64)
        g = obj.grad_full(x) if full_grad is None else full_grad
        return cls(x, g, epoch)


def combine_svrg(g, g_ref, full_ref):
    """``g - g_ref + full_ref``, exact whenever two of the terms cancel.

    A coordinate with ``g == g_ref`` returns ``full_ref`` and one with
    ``g_ref == full_ref`` returns ``g``; the general case is evaluated as
    ``(g - g_ref) + full_ref``.
    """
    out = (g - g_ref) + full_ref
    out = np.where(g_ref == full_ref, g, out)
    return np.where(g == g_ref, full_ref, out)


def svrg_direction(obj, x, anchor, s):
    """Variance-reduced gradient with both minibatch terms on the same ``s``."""
    g = obj.grad_minibatch(x, s)
    g_ref = obj.grad_minibatch(anchor.x_tilde, s)
    return combine_svrg(g, g_ref, anchor.full_grad)


class LbfgsHistory:
    """Bounded store of curvature pairs with the two-loop product."""

    def __init__(self, memory, curvature_floor=CURVATURE_FLOOR):
        if memory < 1:
            raise ArgumentError("memory must be at least 1")
        self.memory = int(memory)
        self.curvature_floor = curvature_floor
        self.pairs = deque(maxlen=self.memory)
        self.accepted = 0
        self.rejected = 0

    def __len__(self):
        return len(self.pairs)

    def push(self, s, y):
        """Store ``(s, y)`` if ``s.y`` clears the relative curvature floor."""
        s = np.array(s, dtype=np.float64)
        y = np.array(y, dtype=np.float64)
        if s.shape != y.shape:
            raise DimensionError("s and y differ in length")
        sy = kernels.dot(s, y)
        floor = self.curvature_floor * np.sqrt(kernels.dot(s, s) * kernels.dot(y, y))
        if not sy > floor:
            self.rejected += 1
            return False
        self.pairs.append((s, y, 1.0 / sy))
        self.accepted += 1
        return True

    def apply(self, v):
        v = np.array(v, dtype=np.float64)
        if not self.pairs:
            return v
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * kernels.dot(s, v)
            v -= a * y
            alphas.append(a)
        s, y, _ = self.pairs[-1]
        v *= kernels.dot(s, y) / kernels.dot(y, y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * kernels.dot(y, v)
            v += (a - b) * s
        return v


class BlockHistory:
    """Bounded store of sketched curvature triples ``(Xi, Y, Delta)``.

    ``Delta`` is ``(Xi^T Y)^{-1}``.  The implied inverse-Hessian estimate
    starts from the identity.
    """

    def __init__(self, memory, rank):
        if memory < 1 or rank < 1:
            raise ArgumentError("memory and rank must be at least 1")
        self.memory = int(memory)
        self.rank = int(rank)
        self.triples = deque(maxlen=self.memory)
        self.accepted = 0
        self.rejected = 0

    def __len__(self):
        return len(self.triples)

    def try_add(self, xi, y):
        xi = np.ascontiguousarray(xi, dtype=np.float64)
        y = np.ascontiguousarray(y, dtype=np.float64)
        if xi.shape != y.shape or xi.ndim != 2:
            raise DimensionError("Xi and Y must be matching D x r matrices")
        ok = np.linalg.matrix_rank(xi) == xi.shape[1]
        if ok:
            gram = xi.T @ y
            gram = 0.5 * (gram + gram.T)
            try:
                factor = cho_factor(gram)
            except LinAlgError:
                ok = False
        if not ok:
            self.rejected += 1
            return False
        delta = cho_solve(factor, np.eye(xi.shape[1]))
        delta = 0.5 * (delta + delta.T)
        self.triples.append((xi, y, delta))
        self.accepted += 1
        return True

    def apply(self, v):
        v = np.array(v, dtype=np.float64)
        if not self.triples:
            return v
        alphas = []
        for xi, y, delta in reversed(self.triples):
            a = kernels.matvec(delta, kernels.matvec_t(xi, v))
            v -= kernels.matvec(y, a)
            alphas.append(a)
        for (xi, y, delta), a in zip(self.triples, reversed(alphas)):
            b = kernels.matvec(delta, kernels.matvec_t(y, v))
            v += kernels.matvec(xi, a - b)
        return v


SKETCH_VARIANTS = ("identity_cols", "gaussian", "prev_directions")


def orthonormalize(m, tol=1e-10):
    """Modified Gram-Schmidt; dependent columns come back as zeros."""
    q = np.array(m, dtype=np.float64)
    for j in range(q.shape[1]):
        norm0 = np.linalg.norm(q[:, j])
        for i in range(j):
            q[:, j] -= kernels.dot(q[:, i], q[:, j]) * q[:, i]
        norm = np.linalg.norm(q[:, j])
        if norm <= tol * max(norm0, 1.0):
            q[:, j] = 0.0
        else:
            q[:, j] /= norm
    return q


class SketchStrategy:
    """Source of ``D x r`` sketch matrices.

    ``identity_cols`` walks through standard basis columns in a fixed
    rotation, ``gaussian`` draws i.i.d. normals, ``prev_directions`` stacks
    the most recent unaligned directions (padded with leading basis
    columns) and orthonormalizes them.
    """

    def __init__(self, variant="gaussian", memory=5):
        if variant not in SKETCH_VARIANTS:
            raise ArgumentError(f"unknown sketch {variant!r}")
        self.variant = variant
        self.calls = 0
        self.directions = deque(maxlen=int(memory))

    def record_direction(self, d):
        if self.variant == "prev_directions":
            self.directions.append(np.array(d, dtype=np.float64))

    def next(self, d, r, rng):
        if r < 1 or r > d:
            raise ArgumentError(f"need 1 <= r <= d, got d={d}, r={r}")
        if self.variant == "identity_cols":
            cols = (self.calls * r + np.arange(r)) % d
            xi = np.zeros((d, r))
            xi[cols, np.arange(r)] = 1.0
        elif self.variant == "gaussian":
            xi = gaussian_matrix(rng, d, r)
        else:
            recent = list(self.directions)[-r:]
            pad = r - len(recent)
            xi = np.zeros((d, r))
            xi[np.arange(pad), np.arange(pad)] = 1.0
            for c, vec in enumerate(recent):
                xi[:, pad + c] = vec
            xi = orthonormalize(xi)
        self.calls += 1
        return xi


def sketch_next(sketch, d, r, rng):
    return sketch.next(d, r, rng)


def block_update(obj, x, s, sketch, history, rng):
    """Sketch, multiply by the minibatch Hessian and try to store the triple."""
    xi = sketch.next(obj.dim, history.rank, rng)
    y = obj.hvp_minibatch(x, s, xi)
    return history.try_add(xi, y)


def lbfgs_push(history, s, y):
    return history.push(s, y)


def lbfgs_apply(history, v):
    return history.apply(v)


def block_apply(history, v):
    return history.apply(v)
