"""JIT-compiled inner loops.

Every function here has a twin with the same signature in
``_kernels_numpy``.  Reductions run sequentially in index order so both
backends accumulate in the same order.
"""
import math

import numpy as np
from numba import njit

BACKEND = "numba"


@njit(cache=True)
def dot(u, v):
    acc = 0.0
    for i in range(u.shape[0]):
        acc += u[i] * v[i]
    return acc


@njit(cache=True)
def seq_sum(u):
    acc = 0.0
    for i in range(u.shape[0]):
        acc += u[i]
    return acc


@njit(cache=True)
def csr_margins(indptr, indices, data, rows, x):
    out = np.empty(rows.shape[0])
    for k in range(rows.shape[0]):
        n = rows[k]
        acc = 0.0
        for p in range(indptr[n], indptr[n + 1]):
            acc += data[p] * x[indices[p]]
        out[k] = acc
    return out


@njit(cache=True)
def csr_accumulate(indptr, indices, data, rows, w, dim):
    out = np.zeros(dim)
    for k in range(rows.shape[0]):
        n = rows[k]
        wk = w[k]
        for p in range(indptr[n], indptr[n + 1]):
            out[indices[p]] += wk * data[p]
    return out


@njit(cache=True)
def csr_hvp(indptr, indices, data, rows, w, m):
    dim, r = m.shape
    out = np.zeros((dim, r))
    for c in range(r):
        for k in range(rows.shape[0]):
            n = rows[k]
            acc = 0.0
            for p in range(indptr[n], indptr[n + 1]):
                acc += data[p] * m[indices[p], c]
            coef = w[k] * acc
            for p in range(indptr[n], indptr[n + 1]):
                out[indices[p], c] += coef * data[p]
    return out


@njit(cache=True)
def log1pexp(z):
    # log(1 + exp(z)) without overflow
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        t = z[i]
        if t > 0.0:
            out[i] = t + math.log1p(math.exp(-t))
        else:
            out[i] = math.log1p(math.exp(t))
    return out


@njit(cache=True)
def sigmoid(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        t = z[i]
        if t >= 0.0:
            out[i] = 1.0 / (1.0 + math.exp(-t))
        else:
            e = math.exp(t)
            out[i] = e / (1.0 + e)
    return out


@njit(cache=True)
def prox_l1(y, t):
    out = np.empty(y.shape[0])
    for i in range(y.shape[0]):
        a = abs(y[i]) - t
        if a > 0.0:
            out[i] = a if y[i] > 0.0 else -a
        else:
            out[i] = 0.0
    return out


@njit(cache=True)
def _sgn(t):
    if t > 0.0:
        return 1
    if t < 0.0:
        return -1
    return 0


@njit(cache=True)
def align_pi(x, ref):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        if _sgn(x[i]) == _sgn(ref[i]):
            out[i] = x[i] + 0.0
        else:
            out[i] = 0.0
    return out


@njit(cache=True)
def pseudo_grad(v, x, lam):
    out = np.empty(v.shape[0])
    for i in range(v.shape[0]):
        xi = x[i]
        vi = v[i]
        if xi > 0.0:
            out[i] = vi + lam
        elif xi < 0.0:
            out[i] = vi - lam
        elif vi + lam < 0.0:
            out[i] = vi + lam
        elif vi - lam > 0.0:
            out[i] = vi - lam
        else:
            out[i] = 0.0
    return out


@njit(cache=True)
def align_phi(x, ref, rho):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        sx = _sgn(x[i])
        if sx * _sgn(ref[i]) == -1 or abs(x[i]) < rho:
            out[i] = 0.0
        else:
            out[i] = (x[i] - rho * sx) + 0.0
    return out


@njit(cache=True)
def partial_fisher_yates(n, draws):
    buf = np.arange(n)
    for i in range(draws.shape[0]):
        j = draws[i]
        tmp = buf[i]
        buf[i] = buf[j]
        buf[j] = tmp
    return buf[: draws.shape[0]].copy()


@njit(cache=True)
def matvec_t(m, v):
    dim, r = m.shape
    out = np.zeros(r)
    for c in range(r):
        acc = 0.0
        for i in range(dim):
            acc += m[i, c] * v[i]
        out[c] = acc
    return out


@njit(cache=True)
def matvec(m, a):
    dim, r = m.shape
    out = np.empty(dim)
    for i in range(dim):
        acc = 0.0
        for c in range(r):
            acc += m[i, c] * a[c]
        out[i] = acc
    return out
