"""Radial kernel of the thin-plate Green's function and its derivative.

The harmonic point-load response of an infinite Kirchhoff-Love plate is built
from one dimensionless radial kernel,

    g(r) = i*H0(r) - i*H0(i*r)
         = [-Y0(r) - (2/pi)*K0(r)] + i*J0(r),

a propagating cylindrical wave plus an evanescent correction.  The identity
H0(i*x) = -(2i/pi)*K0(x) keeps every evaluation on the real axis where the
classical Bessel routines are accurate and fast.  Both the kernel and its
radial derivative are finite at r = 0: the log singularity of Y0 cancels
against K0, and the 1/r poles of Y1 and K1 cancel likewise.
"""

from __future__ import annotations

import numpy as np
from scipy import special as _sp

TWO_OVER_PI = 2.0 / np.pi


def _as_positive(x, name, strict=True):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if strict:
        if np.any(arr <= 0.0):
            raise ValueError(f"{name} must be > 0")
    elif np.any(arr < 0.0):
        raise ValueError(f"{name} must be >= 0")
    return arr


def _scalar_like(out, x):
    return out[()] if np.ndim(x) == 0 else out


def hankel1_0(x):
    """H0^(1)(x) = J0(x) + i*Y0(x) for real x > 0. Accepts scalars or arrays."""
    arr = _as_positive(x, "x")
    return _scalar_like(_sp.j0(arr) + 1j * _sp.y0(arr), x)


def hankel1_1(x):
    """H1^(1)(x) = J1(x) + i*Y1(x) for real x > 0."""
    arr = _as_positive(x, "x")
    return _scalar_like(_sp.j1(arr) + 1j * _sp.y1(arr), x)


def mod_bessel_k(order: int, x):
    """Modified Bessel function K0 or K1 on the positive real axis."""
    if order not in (0, 1):
        raise ValueError("order must be 0 or 1")
    arr = _as_positive(x, "x")
    out = _sp.k0(arr) if order == 0 else _sp.k1(arr)
    return _scalar_like(out, x)


def greens_kernel(r):
    """Dimensionless plate kernel g(r) = i*H0(r) - i*H0(i*r) for r >= 0.

    Evaluated through real-argument Bessel functions as
    g(r) = [-Y0(r) - (2/pi)*K0(r)] + i*J0(r).  At r = 0 the log terms cancel
    and the kernel equals exactly i, which is the value required on the
    diagonal of the scatterer interaction matrix.
    """
    arr = _as_positive(r, "r", strict=False)
    flat = np.atleast_1d(arr)
    out = np.empty(flat.shape, dtype=complex)
    pos = flat > 0.0
    rp = flat[pos]
    out[pos] = (-_sp.y0(rp) - TWO_OVER_PI * _sp.k0(rp)) + 1j * _sp.j0(rp)
    out[~pos] = 1j
    out = out.reshape(arr.shape)
    return _scalar_like(out, r)


def greens_kernel_deriv(r):
    """Radial derivative dg/dr = -i*H1(r) - H1(i*r) for r > 0.

    Real-axis form: [Y1(r) + (2/pi)*K1(r)] - i*J1(r).  The 1/r poles of Y1
    and K1 cancel, so the kernel derivative tends to 0 as r -> 0+, but r = 0
    itself is rejected (the decomposition below is 0/0 there).
    """
    arr = _as_positive(r, "r")
    out = (_sp.y1(arr) + TWO_OVER_PI * _sp.k1(arr)) - 1j * _sp.j1(arr)
    return _scalar_like(out, r)
