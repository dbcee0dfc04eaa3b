"""Dispersion relation, Green's function, and spline kernel fidelity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platescatter.errors import InvalidGeometryError, OutOfDomainError
from platescatter.plate import (
    DISPERSION_CONSISTENT,
    DISPERSION_PRINTED,
    PlateSpec,
    WaveContext,
    fit_greens_splines,
    greens,
    greens_grad,
    greens_spline_eval,
    greens_spline_grad,
    omega_from_wavenumber,
    wavenumber_from_omega,
)
from platescatter.specfun import greens_kernel


def test_rigidity_formula():
    plate = PlateSpec(200e9, 0.3, 0.01, 78.5)
    assert plate.rigidity == pytest.approx(200e9 * 0.01**3 / (12 * (1 - 0.09)), rel=1e-15)


def test_plate_validation():
    with pytest.raises(ValueError):
        PlateSpec(youngs_modulus=-1.0)
    with pytest.raises(ValueError):
        PlateSpec(poisson=0.5)
    with pytest.raises(ValueError):
        PlateSpec(thickness=0.0)


def test_wavenumber_unit_inputs():
    # rho' H / D = 1 and omega = 1 gives k = 1 exactly
    plate = PlateSpec(youngs_modulus=12.0, poisson=0.0, thickness=1.0, areal_density=1.0)
    assert plate.rigidity == pytest.approx(1.0)
    assert wavenumber_from_omega(plate, 1.0) == pytest.approx(1.0, rel=1e-14)


def test_wavenumber_scaling_law():
    plate = PlateSpec()
    k1 = wavenumber_from_omega(plate, 3.0)
    k2 = wavenumber_from_omega(plate, 12.0)
    assert k2 == pytest.approx(2.0 * k1, rel=1e-13)


@pytest.mark.parametrize("mode", [DISPERSION_PRINTED, DISPERSION_CONSISTENT])
def test_wavenumber_round_trip(mode):
    plate = PlateSpec()
    k = np.pi / 10
    omega = omega_from_wavenumber(plate, k, mode)
    assert wavenumber_from_omega(plate, omega, mode) == pytest.approx(k, rel=1e-12)


def test_dispersion_modes_differ():
    plate = PlateSpec()
    omega = 5.0
    printed = wavenumber_from_omega(plate, omega, DISPERSION_PRINTED)
    consistent = wavenumber_from_omega(plate, omega, DISPERSION_CONSISTENT)
    assert printed != consistent
    assert consistent / printed == pytest.approx(plate.thickness**-0.25, rel=1e-12)


@pytest.fixture(scope="module")
def ctx():
    return WaveContext.from_wavenumber(PlateSpec(), np.pi / 10)


def test_greens_coincident_points(ctx):
    value = greens(ctx, (3.0, 4.0), (3.0, 4.0))
    expected = 1j / (8 * ctx.wavenumber**2)
    assert value == expected
    assert value.imag == pytest.approx(1.26651, abs=5e-6)


def test_greens_reciprocity_bit_exact(ctx):
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.uniform(-50, 50, size=(2, 2))
        assert greens(ctx, a, b) == greens(ctx, b, a)


def test_greens_decay(ctx):
    x0 = np.zeros(2)
    values = [abs(greens(ctx, (r, 0.0), x0)) for r in (10.0, 100.0, 1000.0)]
    assert values[0] > values[1] > values[2]


def test_greens_grad_radial_symmetry(ctx):
    g = greens_grad(ctx, (7.0, 0.0), (2.0, 0.0))
    assert g[1] == 0.0
    assert abs(g[0]) > 0


def test_greens_grad_antisymmetry(ctx):
    a, b = np.array([3.0, -1.0]), np.array([-2.0, 4.0])
    assert np.allclose(greens_grad(ctx, a, b), -greens_grad(ctx, b, a), rtol=0, atol=0)


def test_greens_grad_finite_difference(ctx):
    rng = np.random.default_rng(8)
    a, b = rng.uniform(-40, 40, size=(2, 2))
    step = 1e-6
    g = greens_grad(ctx, a, b)
    for c in range(2):
        hi, lo = a.copy(), a.copy()
        hi[c] += step
        lo[c] -= step
        fd = (greens(ctx, hi, b) - greens(ctx, lo, b)) / (2 * step)
        assert abs(g[c] - fd) <= 1e-6 * abs(fd)


def test_greens_grad_rejects_coincident(ctx):
    with pytest.raises(InvalidGeometryError):
        greens_grad(ctx, (1.0, 1.0), (1.0, 1.0))


# ---------------------------------------------------------------------------
# splines
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def nearfar_splines(ctx):
    return fit_greens_splines(ctx, (-60, 60, -60, 60), (-30, 30, -30, 30), (0.0, 0.0))


def test_spline_domains_nearfar(nearfar_splines):
    incident, scattering = nearfar_splines
    assert incident.fit_domain[0] == 0.0  # forcing sits inside the scatter region
    assert scattering.fit_domain[0] == 0.0
    # margin stretches the far end beyond the largest in-window distance
    assert incident.fit_domain[1] >= 1.5 * np.hypot(60, 60) * np.pi / 10 * 0.999


def test_spline_kernel_accuracy(nearfar_splines):
    for spline in nearfar_splines:
        lo = max(spline.fit_domain[0], 1e-5)
        probe = np.linspace(lo, spline.fit_domain[1], 10007)
        exact = greens_kernel(probe)
        rel = np.abs(spline.kernel(probe) - exact) / np.abs(exact)
        assert rel.max() <= 1e-6
        assert spline.max_rel_error <= 1e-6


def test_spline_value_at_origin(nearfar_splines, ctx):
    _, scattering = nearfar_splines
    value = greens_spline_eval(scattering, ctx, (1.0, 2.0), (1.0, 2.0))
    assert abs(value - 1j / (8 * ctx.wavenumber**2)) <= 1e-8


def test_spline_out_of_domain(nearfar_splines, ctx):
    incident, _ = nearfar_splines
    with pytest.raises(OutOfDomainError):
        incident.kernel(incident.fit_domain[1] * 1.5)


def test_spline_reciprocity(nearfar_splines, ctx):
    _, scattering = nearfar_splines
    a, b = (3.0, 4.0), (-11.0, 7.0)
    assert greens_spline_eval(scattering, ctx, a, b) == greens_spline_eval(scattering, ctx, b, a)


def test_spline_gradient_matches_analytic(nearfar_splines, ctx):
    _, scattering = nearfar_splines
    rng = np.random.default_rng(3)
    for _ in range(10):
        a, b = rng.uniform(-30, 30, size=(2, 2))
        ref = greens_grad(ctx, a, b)
        spl = greens_spline_grad(scattering, ctx, a, b)
        assert np.linalg.norm(spl - ref) <= 1e-5 * np.linalg.norm(ref)


def test_spline_collapsed_domain_rejected(ctx):
    with pytest.raises(InvalidGeometryError):
        # forcing far away from a pointlike window: r_min/margin > margin*r_max
        fit_greens_splines(ctx, (0.0, 1e-6, 0.0, 1e-6), (0.0, 1e-6, 0.0, 1e-6), (1e9, 0.0),
                           base_knots=50, log_knots=10)


def test_incident_far_source_spline_accuracy():
    # the plane-wave-like source 1e5 m out forces a huge fit interval; the
    # knot count must escalate until the kernel tolerance is met
    ctx = WaveContext.from_wavenumber(PlateSpec(), np.pi / 10)
    incident, _ = fit_greens_splines(ctx, (-30, 30, -30, 30), (-17.5, 17.5, -17.5, 17.5),
                                     (-1e5, 0.0))
    lo, hi = incident.fit_domain
    probe = np.linspace(lo, hi, 20011)
    exact = greens_kernel(probe)
    rel = np.abs(incident.kernel(probe) - exact) / np.abs(exact)
    assert rel.max() <= 2e-6  # probe grid is denser than the fit check
    assert incident.knot_count > 5000


# ---------------------------------------------------------------------------
# plate equation residual
# ---------------------------------------------------------------------------

def biharmonic_residual(plate, k, patch_center, h, size=9):
    """Residual D*lap^2(psi0) - rho' w^2 psi0 on a source-free patch.

    Second-order 13-point stencil built from two applications of the 5-point
    Laplacian; the consistent dispersion mode ties k and omega so the true
    residual is zero.
    """
    ctx = WaveContext.from_wavenumber(plate, k, DISPERSION_CONSISTENT)
    f0 = 100.0
    x0 = np.zeros(2)
    xs = patch_center[0] + (np.arange(size) - size // 2) * h
    ys = patch_center[1] + (np.arange(size) - size // 2) * h
    gx, gy = np.meshgrid(xs, ys)
    pts = np.column_stack([gx.ravel(), gy.ravel()])
    psi = np.array([greens(ctx, p, x0) for p in pts]).reshape(size, size) * f0

    def laplacian(f):
        out = np.full_like(f, np.nan)
        out[1:-1, 1:-1] = (
            f[2:, 1:-1] + f[:-2, 1:-1] + f[1:-1, 2:] + f[1:-1, :-2] - 4 * f[1:-1, 1:-1]
        ) / h**2
        return out

    lap2 = laplacian(laplacian(psi))
    interior = lap2[2:-2, 2:-2]
    resid = plate.rigidity * interior - plate.areal_density * ctx.angular_frequency**2 * psi[2:-2, 2:-2]
    scale = plate.areal_density * ctx.angular_frequency**2 * np.abs(psi[2:-2, 2:-2]).max()
    return np.abs(resid).max() / scale


def test_pde_residual_second_order():
    plate = PlateSpec()
    k = np.pi / 10          # wavelength 20 m; the patch sits 60 m out
    residuals = [biharmonic_residual(plate, k, (60.0, 0.0), h) for h in (0.8, 0.4, 0.2)]
    orders = [np.log2(residuals[i] / residuals[i + 1]) for i in range(2)]
    assert residuals[0] < 0.05
    assert all(order >= 1.7 for order in orders)


@given(st.floats(min_value=0.05, max_value=2.0))
@settings(max_examples=20, deadline=None)
def test_context_prefactor(k):
    ctx = WaveContext.from_wavenumber(PlateSpec(), k)
    assert ctx.prefactor == pytest.approx(1.0 / (8 * k * k), rel=1e-15)
