"""Pure-numpy fallback for ``_kernels_numba``.

Sums go through ``np.cumsum`` / ``np.bincount`` rather than ``np.sum`` or
BLAS because those two accumulate strictly left to right.
"""
import numpy as np

BACKEND = "numpy"


def dot(u, v):
    if u.shape[0] == 0:
        return 0.0
    return float(np.cumsum(u * v)[-1])


def seq_sum(u):
    if u.shape[0] == 0:
        return 0.0
    return float(np.cumsum(u)[-1])


def _gather(indptr, rows):
    starts = indptr[rows]
    lengths = indptr[rows + 1] - starts
    total = int(lengths.sum())
    row_id = np.repeat(np.arange(rows.shape[0]), lengths)
    offsets = np.repeat(starts - np.concatenate(([0], np.cumsum(lengths)[:-1])), lengths)
    pos = offsets + np.arange(total)
    return pos, row_id


def csr_margins(indptr, indices, data, rows, x):
    pos, row_id = _gather(indptr, rows)
    prod = data[pos] * x[indices[pos]]
    return np.bincount(row_id, weights=prod, minlength=rows.shape[0]).astype(np.float64)


def csr_accumulate(indptr, indices, data, rows, w, dim):
    pos, row_id = _gather(indptr, rows)
    return np.bincount(indices[pos], weights=w[row_id] * data[pos], minlength=dim).astype(
        np.float64
    )


def csr_hvp(indptr, indices, data, rows, w, m):
    dim, r = m.shape
    pos, row_id = _gather(indptr, rows)
    vals = data[pos]
    cols = indices[pos]
    out = np.zeros((dim, r))
    for c in range(r):
        t = np.bincount(row_id, weights=vals * m[cols, c], minlength=rows.shape[0])
        coef = w * t
        out[:, c] = np.bincount(cols, weights=coef[row_id] * vals, minlength=dim)
    return out


def log1pexp(z):
    out = np.empty_like(z)
    pos = z > 0.0
    out[pos] = z[pos] + np.log1p(np.exp(-z[pos]))
    out[~pos] = np.log1p(np.exp(z[~pos]))
    return out


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    e = np.exp(z[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def prox_l1(y, t):
    a = np.abs(y) - t
    return np.where(a > 0.0, np.where(y > 0.0, a, -a), 0.0)


def align_pi(x, ref):
    keep = np.sign(x) == np.sign(ref)
    return np.where(keep, x + 0.0, 0.0)


def pseudo_grad(v, x, lam):
    up = v + lam
    down = v - lam
    return np.select(
        [x > 0.0, x < 0.0, up < 0.0, down > 0.0],
        [up, down, up, down],
        default=0.0,
    )


def align_phi(x, ref, rho):
    sx = np.sign(x)
    zero = (sx * np.sign(ref) == -1.0) | (np.abs(x) < rho)
    return np.where(zero, 0.0, (x - rho * sx) + 0.0)


def partial_fisher_yates(n, draws):
    buf = np.arange(n)
    for i, j in enumerate(draws):
        buf[i], buf[j] = buf[j], buf[i]
    return buf[: len(draws)].copy()


def matvec_t(m, v):
    if m.shape[0] == 0:
        return np.zeros(m.shape[1])
    return np.cumsum(m * v[:, None], axis=0)[-1]


def matvec(m, a):
    if m.shape[1] == 0:
        return np.zeros(m.shape[0])
    return np.cumsum(m * a[None, :], axis=1)[:, -1]
