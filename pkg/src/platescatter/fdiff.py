"""Central finite differences used to cross-check analytical gradients."""

from __future__ import annotations

import numpy as np


def central_difference(func, x, step=1e-5):
    """Central-difference gradient of a scalar (or complex) function.

    ``func`` takes an array shaped like ``x``; the result has the same shape
    (complex when the function is complex-valued).
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    probe = func(x)
    out = np.zeros(flat.shape, dtype=complex if np.iscomplexobj(probe) else float)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += step
        hi = func(bumped.reshape(x.shape))
        bumped[i] -= 2 * step
        lo = func(bumped.reshape(x.shape))
        out[i] = (hi - lo) / (2.0 * step)
    return out.reshape(x.shape)


def central_difference_map(func, x, step=1e-5):
    """Like :func:`central_difference` for array-valued functions.

    Returns an array of shape ``func(x).shape + x.shape``.
    """
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    probe = np.asarray(func(x))
    out = np.zeros(probe.shape + (flat.size,),
                   dtype=complex if np.iscomplexobj(probe) else float)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] += step
        hi = np.asarray(func(bumped.reshape(x.shape)))
        bumped[i] -= 2 * step
        lo = np.asarray(func(bumped.reshape(x.shape)))
        out[..., i] = (hi - lo) / (2.0 * step)
    return out.reshape(probe.shape + x.shape)


def relative_error(analytic, reference, floor=1e-30) -> float:
    """Norm-wise relative deviation ||a - r|| / max(||r||, floor)."""
    a = np.asarray(analytic)
    r = np.asarray(reference)
    denom = max(float(np.linalg.norm(r.ravel())), floor)
    return float(np.linalg.norm((a - r).ravel()) / denom)
