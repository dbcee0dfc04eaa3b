"""Oscillator clusters, the coupled force system, fields, and position gradients.

A cluster of point oscillators on the plate exerts unknown steady-state
forces f on the continuum.  Evaluating the total field at every oscillator
location closes the system

    A f = b,    A = diag(1/mu) - G,    b_a = f0 * G(x_a, x0),

where G is the pairwise Green's matrix (diagonal i/(8 k^2)) and mu the
base-motion transmission coefficients.  Everything downstream (fields,
interaction energy, analytical position derivatives) is built from this
solve; derivatives come from implicit differentiation of the system.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import linalg
from .errors import InvalidGeometryError, ResonantSingularError
from .grids import (
    FieldGrid,
    KIND_ABS_TOTAL,
    KIND_RE_INCIDENT,
    cell_centres,
)
from .plate import WaveContext
from .specfun import greens_kernel, greens_kernel_deriv

MIN_SEPARATION = 1e-9           # m; kernel derivative is singular at coincidence
RESONANCE_RTOL = 1e-12
ABS_GRAD_FLOOR = 1e-12          # |psi| below this treats d|psi| as 0 (subgradient)


@dataclass(frozen=True)
class Scatterer:
    """Single surface oscillator: position plus spring-mass-damper constants."""

    position: tuple
    mass: float = 1.0           # kg
    damping: float = 0.0        # N*s/m
    stiffness: float = 1.0      # N/m

    def __post_init__(self):
        if self.mass <= 0 or self.stiffness <= 0 or self.damping < 0:
            raise ValueError("require mass > 0, stiffness > 0, damping >= 0")


@dataclass(frozen=True)
class IncidentForce:
    """Harmonic point force of real amplitude f0 applied at ``location``."""

    location: tuple
    amplitude: float = 100.0    # N

    def __post_init__(self):
        if self.amplitude == 0.0:
            raise ValueError("force amplitude must be nonzero")
        object.__setattr__(self, "location", tuple(float(v) for v in self.location))

    @property
    def xy(self):
        return np.asarray(self.location, dtype=float)


class Cluster:
    """Ordered set of scatterers.

    Either oscillator constants (mass, damping, stiffness per scatterer) or
    precomputed transmission coefficients ``mu`` must be supplied, except for
    the empty cluster.  Positions must be pairwise separated by more than
    MIN_SEPARATION.
    """

    def __init__(self, positions, masses=None, dampings=None, stiffnesses=None, mu=None):
        self.positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if self.positions.size == 0:
            self.positions = self.positions.reshape(0, 2)
        if self.positions.shape[1] != 2:
            raise ValueError("positions must be (n, 2)")
        if not np.all(np.isfinite(self.positions)):
            raise ValueError("positions must be finite")
        n = len(self.positions)
        if n > 1:
            deltas = self.positions[:, None, :] - self.positions[None, :, :]
            dist = np.hypot(deltas[..., 0], deltas[..., 1])
            np.fill_diagonal(dist, np.inf)
            if dist.min() <= MIN_SEPARATION:
                raise InvalidGeometryError(
                    f"scatterers closer than {MIN_SEPARATION:g} m"
                )

        def _param(v, name):
            if v is None:
                return None
            arr = np.broadcast_to(np.asarray(v, dtype=float), (n,)).copy()
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            return arr

        self.masses = _param(masses, "masses")
        self.dampings = _param(dampings, "dampings")
        self.stiffnesses = _param(stiffnesses, "stiffnesses")
        self._mu = None if mu is None else np.broadcast_to(np.asarray(mu, dtype=complex), (n,)).copy()

        if n > 0 and self._mu is None:
            if self.masses is None or self.dampings is None or self.stiffnesses is None:
                raise ValueError("need oscillator constants or precomputed mu")
            if np.any(self.masses <= 0) or np.any(self.stiffnesses <= 0) or np.any(self.dampings < 0):
                raise ValueError("require mass > 0, stiffness > 0, damping >= 0")

    @classmethod
    def empty(cls):
        return cls(np.zeros((0, 2)))

    @classmethod
    def from_scatterers(cls, scatterers):
        items = list(scatterers)
        return cls(
            np.array([s.position for s in items], dtype=float).reshape(len(items), 2),
            masses=[s.mass for s in items] if items else None,
            dampings=[s.damping for s in items] if items else None,
            stiffnesses=[s.stiffness for s in items] if items else None,
        )

    def __len__(self):
        return len(self.positions)

    def with_positions(self, positions) -> "Cluster":
        """Same oscillators at new positions (used by optimizers and gradients)."""
        return Cluster(positions, self.masses, self.dampings, self.stiffnesses, self._mu)

    def transmission(self, omega: float) -> np.ndarray:
        """Per-scatterer transmission coefficients mu at drive frequency omega."""
        if self._mu is not None:
            return self._mu
        if len(self) == 0:
            return np.zeros(0, dtype=complex)
        return _transmission_array(self.masses, self.dampings, self.stiffnesses, omega)


def transmission_mu(mass: float, damping: float, stiffness: float, omega: float) -> complex:
    """Base-motion transmission coefficient of one spring-mass-damper.

    mu = m w^2 (m w_a^2 + i w c) / (m (w_a^2 - w^2) + i w c) with
    w_a^2 = stiffness / mass.  Driving an undamped oscillator at w_a is
    singular and raises ResonantSingularError.
    """
    if omega <= 0:
        raise ValueError("omega must be > 0")
    out = _transmission_array(
        np.asarray([mass], dtype=float),
        np.asarray([damping], dtype=float),
        np.asarray([stiffness], dtype=float),
        omega,
    )
    return complex(out[0])


def _transmission_array(masses, dampings, stiffnesses, omega):
    omega_a = np.sqrt(stiffnesses / masses)
    undamped = dampings == 0.0
    if np.any(undamped & (np.abs(omega - omega_a) < RESONANCE_RTOL * omega_a)):
        raise ResonantSingularError("undamped oscillator driven at resonance")
    num = masses * omega**2 * (masses * omega_a**2 + 1j * omega * dampings)
    den = masses * (omega_a**2 - omega**2) + 1j * omega * dampings
    return num / den


# ---------------------------------------------------------------------------
# kernel routing: analytic by default, fitted splines when supplied
# ---------------------------------------------------------------------------

def _kernel_incident(ctx, r, splines):
    u = ctx.wavenumber * np.asarray(r, dtype=float)
    return greens_kernel(u) if splines is None else splines[0].kernel(u)


def _kernel_scatter(ctx, r, splines):
    u = ctx.wavenumber * np.asarray(r, dtype=float)
    return greens_kernel(u) if splines is None else splines[1].kernel(u)


def _kernel_incident_deriv(ctx, r, splines):
    u = ctx.wavenumber * np.asarray(r, dtype=float)
    return greens_kernel_deriv(u) if splines is None else splines[0].kernel_deriv(u)


def _kernel_scatter_deriv(ctx, r, splines):
    u = ctx.wavenumber * np.asarray(r, dtype=float)
    return greens_kernel_deriv(u) if splines is None else splines[1].kernel_deriv(u)


def _pair_distances(pts_a, pts_b):
    d = pts_a[:, None, :] - pts_b[None, :, :]
    return np.hypot(d[..., 0], d[..., 1])


@dataclass
class ScatterSolution:
    """Solved scattering forces plus the system they came from."""

    forces: np.ndarray
    matrix: np.ndarray
    rhs: np.ndarray
    residual: float
    cluster: Cluster
    ctx: WaveContext
    force: IncidentForce
    splines: Optional[tuple] = field(default=None, repr=False)


def assemble_system(ctx: WaveContext, cluster: Cluster, force: IncidentForce, splines=None):
    """Interaction matrix A = diag(1/mu) - G and incident vector b = f0 * G0."""
    n = len(cluster)
    mu = cluster.transmission(ctx.angular_frequency)
    if np.any(mu == 0.0):
        raise ResonantSingularError("vanishing transmission coefficient")
    pref = ctx.prefactor
    r_pair = _pair_distances(cluster.positions, cluster.positions)
    g_pair = pref * _kernel_scatter(ctx, r_pair, splines) if n else np.zeros((0, 0), dtype=complex)
    a = np.diag(1.0 / mu) - g_pair
    r0 = np.hypot(*(cluster.positions - force.xy).T) if n else np.zeros(0)
    b = force.amplitude * pref * _kernel_incident(ctx, r0, splines) if n else np.zeros(0, dtype=complex)
    return a, np.asarray(b, dtype=complex)


def solve_forces(ctx: WaveContext, cluster: Cluster, force: IncidentForce, splines=None) -> ScatterSolution:
    a, b = assemble_system(ctx, cluster, force, splines)
    if len(cluster) == 0:
        return ScatterSolution(np.zeros(0, dtype=complex), a, b, 0.0, cluster, ctx, force, splines)
    f = linalg.lu_solve(a, b)
    residual = float(np.linalg.norm(a @ f - b) / np.linalg.norm(b))
    return ScatterSolution(f, a, b, residual, cluster, ctx, force, splines)


def eval_field_parts(ctx, cluster, force, solution: ScatterSolution, points, splines=None):
    """Incident and scattered complex fields at the given (m, 2) points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    pref = ctx.prefactor
    r0 = np.hypot(pts[:, 0] - force.xy[0], pts[:, 1] - force.xy[1])
    psi_0 = force.amplitude * pref * _kernel_incident(ctx, r0, splines)
    if len(cluster) == 0:
        return psi_0, np.zeros(len(pts), dtype=complex)
    r = _pair_distances(pts, cluster.positions)
    g_obs = pref * _kernel_scatter(ctx, r, splines)
    return psi_0, g_obs @ solution.forces


def eval_field(ctx, cluster, force, solution: ScatterSolution, points, splines=None):
    """Total complex field psi = psi_0 + psi_s at the given points."""
    psi_0, psi_s = eval_field_parts(ctx, cluster, force, solution, points, splines)
    return psi_0 + psi_s


def eval_field_grid(ctx, cluster, force, window, resolution=(64, 64), splines=None, solution=None):
    """The two observable channels over a cell-centred raster.

    Returns (FieldGrid of Re psi_0, FieldGrid of |psi|) with ``resolution``
    given as (W, H).
    """
    if solution is None:
        solution = solve_forces(ctx, cluster, force, splines)
    pts = cell_centres(window, resolution)
    psi_0, psi_s = eval_field_parts(ctx, cluster, force, solution, pts, splines)
    w, h = int(resolution[0]), int(resolution[1])
    incident = FieldGrid(psi_0.real.reshape(h, w), tuple(window), KIND_RE_INCIDENT)
    amplitude = FieldGrid(np.abs(psi_0 + psi_s).reshape(h, w), tuple(window), KIND_ABS_TOTAL)
    return incident, amplitude


def self_consistency_error(solution: ScatterSolution) -> float:
    """Max relative violation of psi(x_a) = f_a / mu_a over the cluster."""
    cluster, ctx, force = solution.cluster, solution.ctx, solution.force
    if len(cluster) == 0:
        return 0.0
    psi_at = eval_field(ctx, cluster, force, solution, cluster.positions, solution.splines)
    mu = cluster.transmission(ctx.angular_frequency)
    lhs = psi_at
    rhs = solution.forces / mu
    scale = np.maximum(np.abs(lhs), np.abs(rhs))
    return float(np.max(np.abs(lhs - rhs) / np.where(scale > 0, scale, 1.0)))


def interaction_energy(ctx, cluster, force, splines=None, solution=None) -> complex:
    """Scalar point-load interaction energy b^H A^-1 b = b^H f."""
    if solution is None:
        solution = solve_forces(ctx, cluster, force, splines)
    if len(cluster) == 0:
        return 0j
    return complex(np.vdot(solution.rhs, solution.forces))


def _system_position_sensitivities(solution: ScatterSolution):
    """Per-coordinate right-hand sides db - dA*f of the differentiated system.

    Returns (rhs, db) with shape (n, n, 2): entry [:, a, c] differentiates
    with respect to coordinate c of scatterer a.
    """
    cluster, ctx, force = solution.cluster, solution.ctx, solution.force
    splines = solution.splines
    n = len(cluster)
    pos = cluster.positions
    pref = ctx.prefactor
    k = ctx.wavenumber
    f = solution.forces

    # incident vector sensitivity: d b_a / d x_a = f0 * dG(x_a, x0)/dx_a
    delta0 = pos - force.xy
    r0 = np.hypot(delta0[:, 0], delta0[:, 1])
    if np.any(r0 == 0.0):
        # scatterer exactly on the forcing point: radial direction undefined
        raise InvalidGeometryError("scatterer coincides with the forcing location")
    radial0 = force.amplitude * pref * k * _kernel_incident_deriv(ctx, r0, splines)
    db_own = radial0[:, None] * (delta0 / r0[:, None])  # (n, 2)

    rhs = np.zeros((n, n, 2), dtype=complex)
    db = np.zeros((n, n, 2), dtype=complex)
    idx = np.arange(n)
    db[idx, idx, :] = db_own
    rhs[idx, idx, :] = db_own

    if n > 1:
        delta = pos[:, None, :] - pos[None, :, :]
        r = np.hypot(delta[..., 0], delta[..., 1])
        np.fill_diagonal(r, 1.0)  # placeholder, masked below
        radial = pref * k * _kernel_scatter_deriv(ctx, r, splines)
        pair_grad = radial[..., None] * (delta / r[..., None])  # dG(x_a,x_b)/dx_a
        pair_grad[idx, idx, :] = 0.0
        # moving x_a perturbs row a and column a of A symmetrically:
        #   (db - dA f)[a]      += sum_b pair_grad[a, b] * f_b
        #   (db - dA f)[g != a] += pair_grad[a, g] * f_a
        rhs[idx, idx, :] += np.einsum("abc,b->ac", pair_grad, f)
        off = np.swapaxes(pair_grad * f[:, None, None], 0, 1).copy()  # [g, a, c]
        off[idx, idx, :] = 0.0
        rhs += off
    return rhs, db


def field_position_jacobian(ctx, cluster, force, eval_points, splines=None, solution=None):
    """d psi(x_*) / d x_a for every evaluation point and scatterer coordinate.

    Returns a complex array of shape (P, n, 2).  Evaluation points must not
    coincide with scatterer positions.
    """
    if solution is None:
        solution = solve_forces(ctx, cluster, force, splines)
    pts = np.atleast_2d(np.asarray(eval_points, dtype=float))
    n = len(cluster)
    if n == 0:
        return np.zeros((len(pts), 0, 2), dtype=complex)

    rhs, _ = _system_position_sensitivities(solution)
    df = linalg.lu_solve(solution.matrix, rhs.reshape(n, 2 * n))  # (n, 2n)

    pref = ctx.prefactor
    k = ctx.wavenumber
    delta = cluster.positions[None, :, :] - pts[:, None, :]  # x_a - x_*
    r = np.hypot(delta[..., 0], delta[..., 1])
    if np.any(r == 0.0):
        raise InvalidGeometryError("evaluation point coincides with a scatterer")
    radial = pref * k * _kernel_scatter_deriv(ctx, r, splines)
    # dG(x_*, x_a)/dx_a: the kernel depends only on distance, so this equals
    # the gradient with respect to x_a of g(k|x_a - x_*|)
    direct = radial[..., None] * (delta / r[..., None]) * solution.forces[None, :, None]

    g_obs = pref * _kernel_scatter(ctx, r, splines)  # (P, n)
    indirect = (g_obs @ df).reshape(len(pts), n, 2)
    return direct + indirect


def energy_position_gradient(ctx, cluster, force, splines=None, solution=None):
    """d E* / d x_a via one adjoint solve; complex array of shape (n, 2)."""
    if solution is None:
        solution = solve_forces(ctx, cluster, force, splines)
    n = len(cluster)
    if n == 0:
        return np.zeros((0, 2), dtype=complex)
    rhs, db = _system_position_sensitivities(solution)
    h = linalg.adjoint_solve(solution.matrix, solution.rhs)
    # dE* = (db)^H f + h^H (db - dA f)
    term_db = np.einsum("gac,g->ac", np.conj(db), solution.forces)
    term_adj = np.einsum("g,gac->ac", np.conj(h), rhs)
    return term_db + term_adj
