"""Synthetic sparse classification problems."""
import numpy as np

from .errors import ArgumentError
from .numcore import RandomSource, SparseDataset

TRUTH_DENSITY = 0.1


def make_synthetic(n, d, density, seed, model="logistic"):
    """Random sparse design with labels from a sparse ground-truth model.

    Entries are standard normal, each present with probability
    ``density``; rows that come out empty get one random feature.  The
    ground truth has ``max(1, round(0.1 d))`` nonzero standard-normal
    weights.  ``logistic`` samples labels from the model probabilities,
    ``linear`` takes the sign of a noisy linear response.

    Returns ``(dataset, truth)``.
    """
    if not 0.0 < density <= 1.0:
        raise ArgumentError(f"density must lie in (0, 1], got {density}")
    if n < 1 or d < 1:
        raise ArgumentError("n and d must be positive")
    if model not in ("logistic", "linear"):
        raise ArgumentError(f"unknown model {model!r}")
    gen = RandomSource(seed).generator
    mask = gen.random((n, d)) < density
    empty = ~mask.any(axis=1)
    mask[np.flatnonzero(empty), gen.integers(0, d, size=int(empty.sum()))] = True
    values = gen.standard_normal((n, d))
    a = np.where(mask, values, 0.0)
    truth = np.zeros(d)
    support = gen.choice(d, size=max(1, int(round(TRUTH_DENSITY * d))), replace=False)
    truth[np.sort(support)] = gen.standard_normal(support.shape[0])
    z = a @ truth
    if model == "logistic":
        prob = 1.0 / (1.0 + np.exp(-z))
        labels = np.where(gen.random(n) < prob, 1.0, -1.0)
    else:
        noisy = z + 0.1 * gen.standard_normal(n)
        labels = np.where(noisy >= 0.0, 1.0, -1.0)
    return SparseDataset.from_dense(a, labels), truth
