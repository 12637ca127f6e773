"""Element-wise sign, soft-thresholding and orthant alignment maps.

All maps return fresh arrays and never write into their inputs.  Signed
zeros count as zero, so ``-0.0`` belongs to no orthant.
"""
import numpy as np

from ._backend import kernels
from .errors import ArgumentError, DimensionError


def sign(t):
    """Return +1, -1 or 0; ``-0.0`` maps to 0."""
    if t > 0:
        return 1
    if t < 0:
        return -1
    return 0


def _vec(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def _pair(x, ref):
    x, ref = _vec(x), _vec(ref)
    if x.shape != ref.shape:
        raise DimensionError(f"length mismatch: {x.shape[0]} vs {ref.shape[0]}")
    return x, ref


def _threshold(t):
    t = float(t)
    if not t >= 0.0:
        raise ArgumentError(f"threshold must be nonnegative, got {t}")
    return t


def prox_l1(y, t):
    """Soft-thresholding ``sign(y) * max(|y| - t, 0)``."""
    return kernels.prox_l1(_vec(y), _threshold(t))


def align_pi(x, ref):
    """Keep ``x_i`` where its sign matches ``ref_i``; zero elsewhere."""
    x, ref = _pair(x, ref)
    return kernels.align_pi(x, ref)


def pseudo_grad(v, x, lam):
    """Minimum-norm subgradient of ``v . x + lam * |x|_1`` per coordinate.

    Off zero the L1 slope is added with the sign of ``x_i``.  At zero the
    side giving a strictly negative (or positive) directional slope is
    taken, and 0 is returned when ``|v_i| <= lam``.
    """
    v, x = _pair(v, x)
    return kernels.pseudo_grad(v, x, _threshold(lam))


def align_phi(x, ref, rho):
    """Zero coordinates that leave the orthant of ``ref`` or fall below
    ``rho`` in magnitude; shrink the rest towards zero by ``rho``."""
    x, ref = _pair(x, ref)
    return kernels.align_phi(x, ref, _threshold(rho))
