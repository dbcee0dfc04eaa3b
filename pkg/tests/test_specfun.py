"""Kernel and special-function accuracy against an arbitrary-precision oracle."""

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from platescatter.specfun import (
    TWO_OVER_PI,
    greens_kernel,
    greens_kernel_deriv,
    hankel1_0,
    hankel1_1,
    mod_bessel_k,
)

mp.mp.dps = 30


def oracle_hankel(order, x):
    return complex(mp.besselj(order, x) + 1j * mp.bessely(order, x))


def oracle_kernel(x):
    return complex(-mp.bessely(0, x) - TWO_OVER_PI * mp.besselk(0, x) + 1j * mp.besselj(0, x))


@pytest.fixture(scope="module")
def log_args():
    return np.logspace(-6, np.log10(300.0), 60)


def test_hankel_spot_values():
    # classical tabulated points, re-derived from the oracle
    for x in (1.0, 10.0):
        assert abs(hankel1_0(x) - oracle_hankel(0, x)) <= 1e-12 * abs(oracle_hankel(0, x))
        assert abs(hankel1_1(x) - oracle_hankel(1, x)) <= 1e-12 * abs(oracle_hankel(1, x))
    assert hankel1_0(1.0) == pytest.approx(0.76519768655796655 + 0.08825696421567696j, abs=1e-12)
    assert hankel1_1(1.0) == pytest.approx(0.44005058574493355 - 0.78121282130028868j, abs=1e-12)


def test_hankel_small_argument_limits():
    h = hankel1_0(1e-8)
    assert h.real == pytest.approx(1.0, abs=1e-10)      # J0 -> 1
    assert h.imag < -10.0                                # Y0 log singularity
    h1 = hankel1_1(1e-6)
    assert h1.imag == pytest.approx(-2.0 / (np.pi * 1e-6), rel=1e-6)


def test_hankel_oracle_sweep(log_args):
    for x in log_args:
        for order, fn in ((0, hankel1_0), (1, hankel1_1)):
            ref = oracle_hankel(order, x)
            assert abs(fn(x) - ref) <= 1e-10 * abs(ref)


def test_hankel_rejects_bad_arguments():
    for bad in (0.0, -1.0, np.nan, np.inf):
        with pytest.raises(ValueError):
            hankel1_0(bad)
        with pytest.raises(ValueError):
            hankel1_1(bad)


def test_mod_bessel_k_values(log_args):
    assert mod_bessel_k(0, 1.0) == pytest.approx(0.42102443824070834, rel=1e-12)
    assert mod_bessel_k(0, 10.0) == pytest.approx(1.7780062316167652e-05, rel=1e-10)
    for x in log_args:
        for order in (0, 1):
            ref = float(mp.besselk(order, x))
            assert abs(mod_bessel_k(order, x) - ref) <= 1e-10 * ref
    # 1/x pole of K1 near zero
    assert mod_bessel_k(1, 1e-7) == pytest.approx(1e7, rel=1e-6)
    with pytest.raises(ValueError):
        mod_bessel_k(0, -1.0)
    with pytest.raises(ValueError):
        mod_bessel_k(2, 1.0)


def test_kernel_at_zero_is_exactly_i():
    assert greens_kernel(0.0) == 1j
    # log singularities cancel: approach the limit from above
    assert abs(greens_kernel(1e-8) - 1j) <= 1e-6


def test_kernel_composition(log_args):
    for x in log_args:
        ref = oracle_kernel(x)
        assert abs(greens_kernel(x) - ref) <= 1e-10 * abs(ref)


def test_kernel_two_routes_agree():
    # complex-arithmetic route i*H0(r) - i*H0(ir) with H0(ir) = -(2i/pi)K0(r)
    r = np.logspace(-6, np.log10(300.0), 200)
    direct = greens_kernel(r)
    via_hankel = 1j * hankel1_0(r) - 1j * (-2j / np.pi * np.array([mod_bessel_k(0, x) for x in r]))
    assert np.max(np.abs(direct - via_hankel) / np.abs(direct)) <= 1e-12


def test_kernel_imag_is_j0():
    r = np.logspace(-6, 2, 50)
    for x in r:
        assert greens_kernel(x).imag == pytest.approx(float(mp.besselj(0, x)), abs=1e-10)


def test_kernel_decays_at_infinity():
    assert abs(greens_kernel(500.0)) < abs(greens_kernel(50.0)) < abs(greens_kernel(5.0))
    assert abs(greens_kernel(500.0)) < 0.05


def test_kernel_deriv_matches_finite_differences():
    radii = np.logspace(-3, 2, 100)
    for r in radii:
        # curvature grows like 1/r near the origin; scale the step to keep
        # the difference quotient itself accurate beyond the 1e-6 target
        h = 1e-3 * r if r < 1.0 else 1e-5 * r
        fd = (greens_kernel(r + h) - greens_kernel(r - h)) / (2 * h)
        ref = greens_kernel_deriv(r)
        assert abs(ref - fd) <= 1e-6 * abs(fd)


def test_kernel_deriv_pole_cancellation():
    # Y1 and K1 poles cancel; J1(0) = 0, so the limit is 0
    d = greens_kernel_deriv(1e-7)
    assert abs(d) < 1e-4
    with pytest.raises(ValueError):
        greens_kernel_deriv(0.0)
    with pytest.raises(ValueError):
        greens_kernel_deriv(-1.0)


def test_kernel_deriv_composition():
    r = 1.0
    expected = (float(mp.bessely(1, r)) + TWO_OVER_PI * float(mp.besselk(1, r))
                - 1j * float(mp.besselj(1, r)))
    assert greens_kernel_deriv(r) == pytest.approx(expected, abs=1e-12)


@given(st.floats(min_value=1e-6, max_value=300.0))
@settings(max_examples=60, deadline=None)
def test_kernel_outputs_finite(r):
    value = greens_kernel(r)
    deriv = greens_kernel_deriv(r)
    assert np.isfinite(value.real) and np.isfinite(value.imag)
    assert np.isfinite(deriv.real) and np.isfinite(deriv.imag)


def test_vectorized_matches_scalar():
    r = np.array([0.0, 0.5, 3.0, 40.0])
    vec = greens_kernel(r)
    for i, x in enumerate(r):
        assert vec[i] == greens_kernel(float(x))
