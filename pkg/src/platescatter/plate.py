"""Plate material model, wavenumber relation, and the point-load Green's function.

The Green's function is G(x_a, x_b) = g(k*||x_a - x_b||) / (8 k^2) with the
radial kernel from :mod:`platescatter.specfun`.  Two dispersion conventions
are supported because the source formulation is not unit-consistent:

* ``printed``    k = [rho' H w^2 / D]^(1/4)   (default, matches the model as written)
* ``consistent`` k = [rho' w^2 / D]^(1/4)     (annihilates D*lap^2 - rho'*w^2)

Spline-accelerated kernel evaluation is provided for the two distance
populations a scattering problem produces: point-force-to-anything
("incident") and scatterer-to-anything ("scattering").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import InvalidGeometryError, OutOfDomainError
from .specfun import greens_kernel, greens_kernel_deriv

DISPERSION_PRINTED = "printed"
DISPERSION_CONSISTENT = "consistent"

# fit-domain stretch: tolerance band beyond the geometrically required radii
SPLINE_MARGIN = 1.5
SPLINE_BASE_KNOTS = 5000
SPLINE_LOG_KNOTS = 1500
SPLINE_TOL = 1e-6


@dataclass(frozen=True)
class PlateSpec:
    """Material and section constants of the infinite plate."""

    youngs_modulus: float = 200e9   # Pa
    poisson: float = 0.3
    thickness: float = 0.01         # m
    areal_density: float = 78.5     # kg/m^2

    def __post_init__(self):
        if self.youngs_modulus <= 0 or self.thickness <= 0 or self.areal_density <= 0:
            raise ValueError("material constants must be positive")
        if not 0.0 <= self.poisson < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")

    @property
    def rigidity(self) -> float:
        """Bending rigidity D = E H^3 / (12 (1 - nu^2)) in N*m."""
        return self.youngs_modulus * self.thickness**3 / (12.0 * (1.0 - self.poisson**2))


def _dispersion_coeff(plate: PlateSpec, dispersion: str) -> float:
    if dispersion == DISPERSION_PRINTED:
        return plate.areal_density * plate.thickness / plate.rigidity
    if dispersion == DISPERSION_CONSISTENT:
        return plate.areal_density / plate.rigidity
    raise ValueError(f"unknown dispersion mode {dispersion!r}")


def wavenumber_from_omega(plate: PlateSpec, omega: float, dispersion: str = DISPERSION_PRINTED) -> float:
    """k(w) = [c * w^2]^(1/4) with c set by the dispersion convention."""
    if omega <= 0:
        raise ValueError("omega must be > 0")
    return (_dispersion_coeff(plate, dispersion) * omega**2) ** 0.25


def omega_from_wavenumber(plate: PlateSpec, k: float, dispersion: str = DISPERSION_PRINTED) -> float:
    if k <= 0:
        raise ValueError("k must be > 0")
    return k**2 / math.sqrt(_dispersion_coeff(plate, dispersion))


@dataclass(frozen=True)
class WaveContext:
    """A plate plus a mutually consistent (k, omega) pair."""

    plate: PlateSpec
    wavenumber: float
    angular_frequency: float
    dispersion: str = DISPERSION_PRINTED

    @classmethod
    def from_wavenumber(cls, plate: PlateSpec, k: float, dispersion: str = DISPERSION_PRINTED):
        return cls(plate, k, omega_from_wavenumber(plate, k, dispersion), dispersion)

    @classmethod
    def from_omega(cls, plate: PlateSpec, omega: float, dispersion: str = DISPERSION_PRINTED):
        return cls(plate, wavenumber_from_omega(plate, omega, dispersion), omega, dispersion)

    @property
    def prefactor(self) -> float:
        """Green's function amplitude 1/(8 k^2)."""
        return 1.0 / (8.0 * self.wavenumber**2)


def _distance(x_a, x_b):
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("points must be finite")
    return np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])


def greens(ctx: WaveContext, x_a, x_b):
    """Point-load response G(x_a, x_b); equals i/(8 k^2) at coincident points."""
    r = _distance(x_a, x_b)
    return ctx.prefactor * greens_kernel(ctx.wavenumber * r)


def greens_grad(ctx: WaveContext, x_a, x_b):
    """Derivative of G with respect to the coordinates of x_a.

    Returns a complex 2-vector (or (..., 2) array).  Coincident points have
    no defined direction and are rejected.
    """
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    r = _distance(a, b)
    if np.any(r == 0.0):
        raise InvalidGeometryError("gradient undefined at coincident points")
    radial = ctx.prefactor * ctx.wavenumber * greens_kernel_deriv(ctx.wavenumber * r)
    direction = (a - b) / r[..., np.newaxis]
    return np.asarray(radial)[..., np.newaxis] * direction


@dataclass
class GreensSpline:
    """Natural cubic splines of the radial kernel and its derivative.

    Both are fitted over a scaled-radius (k*r) interval chosen from the
    problem geometry; evaluation outside that interval raises OutOfDomainError.
    """

    value_real: CubicSpline
    value_imag: CubicSpline
    deriv_real: CubicSpline
    deriv_imag: CubicSpline
    fit_domain: tuple
    kind: str
    margin: float = SPLINE_MARGIN
    knot_count: int = 0
    max_rel_error: float = field(default=np.nan)

    def _check(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.fit_domain
        if np.any(u < lo - 1e-12) or np.any(u > hi + 1e-12):
            raise OutOfDomainError(
                f"radius argument outside fitted domain [{lo:.6g}, {hi:.6g}]"
            )
        return np.clip(u, lo, hi)

    def kernel(self, u):
        u = self._check(u)
        return self.value_real(u) + 1j * self.value_imag(u)

    def kernel_deriv(self, u):
        u = self._check(u)
        return self.deriv_real(u) + 1j * self.deriv_imag(u)


def _box_min_distance(point, box):
    """Euclidean distance from a point to an axis-aligned box (0 inside)."""
    x_min, x_max, y_min, y_max = box
    dx = max(x_min - point[0], 0.0, point[0] - x_max)
    dy = max(y_min - point[1], 0.0, point[1] - y_max)
    return math.hypot(dx, dy)


def _box_corners(box):
    x_min, x_max, y_min, y_max = box
    return [(x_min, y_min), (x_min, y_max), (x_max, y_min), (x_max, y_max)]


def _box_max_distance(point, box):
    return max(math.hypot(cx - point[0], cy - point[1]) for cx, cy in _box_corners(box))


def _box_box_max_distance(box_a, box_b):
    # convex sets: the maximum separation is attained at a corner pair
    return max(
        math.hypot(ax - bx, ay - by)
        for ax, ay in _box_corners(box_a)
        for bx, by in _box_corners(box_b)
    )


def _fit_kernel_splines(lo, hi, kind, margin, base_knots, log_knots, tol, max_doublings):
    if not hi > lo:
        raise InvalidGeometryError(f"spline fit domain collapsed: [{lo:.6g}, {hi:.6g}]")
    n_uniform = base_knots
    for _ in range(max_doublings + 1):
        knots = np.linspace(lo, hi, n_uniform)
        if lo < 1.0:
            # enrich near the origin where the kernel curvature diverges
            log_lo, log_hi = max(lo, 1e-5), min(1.0, hi)
            if log_hi > log_lo:
                knots = np.concatenate([knots, np.geomspace(log_lo, log_hi, log_knots)])
        knots = np.unique(knots)

        values = greens_kernel(knots)
        derivs = np.empty(knots.shape, dtype=complex)
        positive = knots > 0.0
        derivs[positive] = greens_kernel_deriv(knots[positive])
        derivs[~positive] = 0.0  # pole cancellation limit at r = 0

        spline = GreensSpline(
            value_real=CubicSpline(knots, values.real, bc_type="natural"),
            value_imag=CubicSpline(knots, values.imag, bc_type="natural"),
            deriv_real=CubicSpline(knots, derivs.real, bc_type="natural"),
            deriv_imag=CubicSpline(knots, derivs.imag, bc_type="natural"),
            fit_domain=(lo, hi),
            kind=kind,
            margin=margin,
            knot_count=knots.size,
        )

        probe_lo = max(lo, 1e-5)
        probes = np.linspace(probe_lo, hi, 6000)
        if probe_lo < hi:
            probes = np.unique(np.concatenate([probes, np.geomspace(probe_lo, hi, 4000)]))
        exact = greens_kernel(probes)
        rel = np.abs(spline.kernel(probes) - exact) / np.abs(exact)
        spline.max_rel_error = float(rel.max())
        if spline.max_rel_error <= tol:
            return spline
        n_uniform *= 2
    raise InvalidGeometryError(
        f"{kind} spline did not reach {tol:.0e} relative accuracy "
        f"(best {spline.max_rel_error:.3e} with {spline.knot_count} knots)"
    )


def fit_greens_splines(
    ctx: WaveContext,
    window,
    scatter_bounds,
    x0,
    margin: float = SPLINE_MARGIN,
    base_knots: int = SPLINE_BASE_KNOTS,
    log_knots: int = SPLINE_LOG_KNOTS,
    tol: float = SPLINE_TOL,
    max_doublings: int = 8,
):
    """Fit the incident and scattering kernel splines for one problem geometry.

    ``window`` and ``scatter_bounds`` are (x_min, x_max, y_min, y_max) boxes
    for the observation window and the scatterer region; ``x0`` is the
    forcing location.  Fit intervals in k*r units:

    * incident:   [k * d_min / margin, k * margin * d_max] where d_min is the
      smaller of the distances from x0 to the two boxes (zero if inside) and
      d_max the farthest window point from x0;
    * scattering: [0, k * margin * d_max_s] where d_max_s bounds every
      scatterer-to-scatterer and scatterer-to-window distance.

    The base knot layout (uniform plus log-spaced enrichment near the origin)
    is doubled until the kernel is reproduced to ``tol`` relative accuracy.
    """
    k = ctx.wavenumber
    x0 = np.asarray(x0, dtype=float)

    d_min = max(0.0, min(_box_min_distance(x0, window), _box_min_distance(x0, scatter_bounds)))
    d_max = _box_max_distance(x0, window)
    incident = _fit_kernel_splines(
        k * d_min / margin, k * margin * d_max, "incident",
        margin, base_knots, log_knots, tol, max_doublings,
    )

    d_max_s = max(
        _box_box_max_distance(scatter_bounds, window),
        _box_box_max_distance(scatter_bounds, scatter_bounds),
    )
    scattering = _fit_kernel_splines(
        0.0, k * margin * d_max_s, "scattering",
        margin, base_knots, log_knots, tol, max_doublings,
    )
    return incident, scattering


def greens_spline_eval(spline: GreensSpline, ctx: WaveContext, x_a, x_b):
    """Spline-route Green's function (S_r + i*S_i)/(8 k^2)."""
    r = _distance(x_a, x_b)
    return ctx.prefactor * spline.kernel(ctx.wavenumber * r)


def greens_spline_grad(spline: GreensSpline, ctx: WaveContext, x_a, x_b):
    """Spline-route derivative of G with respect to x_a."""
    a = np.asarray(x_a, dtype=float)
    b = np.asarray(x_b, dtype=float)
    r = _distance(a, b)
    if np.any(r == 0.0):
        raise InvalidGeometryError("gradient undefined at coincident points")
    radial = ctx.prefactor * ctx.wavenumber * spline.kernel_deriv(ctx.wavenumber * r)
    direction = (a - b) / r[..., np.newaxis]
    return np.asarray(radial)[..., np.newaxis] * direction
