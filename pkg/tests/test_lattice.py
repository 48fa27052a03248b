import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latticewh.lattice import (
    BranchCutError,
    BulkIncidence,
    Frequency,
    LatticeError,
    SpectralContext,
    branch_points,
    continue_lambda,
    delta_minus,
    delta_plus,
    dispersion_residual,
    incident_bulk,
    incident_halfplane,
    lambda_eval,
    q_symbol,
    reflection_coefficient,
)

from .conftest import bulk, ctx_for

CASES = {"H1": (0.0, 0.0), "H2": (0.0, -1.0), "H3": (0.0, 1.0), "H4": (1.0, 0.0)}

omega1s = st.floats(0.05, 2.8).filter(lambda w: min(abs(w - 2.0), abs(w - np.sqrt(8.0))) > 1e-3)
omega2s = st.floats(1e-3, 0.2)


def test_dispersion_band_corners():
    assert abs(dispersion_residual(np.pi, np.pi, np.sqrt(8.0))) < 1e-14
    assert abs(dispersion_residual(np.pi, 0.0, 2.0)) < 1e-14


def test_dispersion_solved_frequency():
    kx, ky = 0.9 + 0.05j, 0.4 + 0.02j
    w = np.sqrt(4.0 * (np.sin(kx / 2) ** 2 + np.sin(ky / 2) ** 2))
    assert abs(dispersion_residual(kx, ky, w)) < 1e-14


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 1.99), omega2s, st.floats(0.05, np.pi - 0.05))
def test_incident_wavenumber_on_dispersion_surface(w1, w2, theta):
    inc = BulkIncidence(Frequency(complex(w1, w2)), theta)
    assert abs(dispersion_residual(inc.kappa_x, inc.kappa_y, inc.frequency.omega)) < 1e-12
    assert inc.kappa.imag > 0
    if np.cos(theta) > 0:
        assert abs(inc.z_P) < 1.0


def test_upper_band_only_near_diagonal():
    # above omega1 = 2 the slowness contour surrounds (pi, pi)
    inc = BulkIncidence(Frequency(2.75 + 0.01j), np.pi / 4)
    assert abs(dispersion_residual(inc.kappa_x, inc.kappa_y, inc.frequency.omega)) < 1e-12
    with pytest.raises(LatticeError):
        BulkIncidence(Frequency(2.75 + 0.01j), 0.2)


def test_q_symbol_examples():
    w = 1.3 + 0.02j
    assert abs(q_symbol(1.0, w) - (2 - w * w)) < 1e-15
    assert abs(q_symbol(-1.0, w) - (6 - w * w)) < 1e-15
    zq = ctx_for(w).z_q
    assert abs(q_symbol(zq, w)) < 1e-14
    with pytest.raises((ZeroDivisionError, LatticeError, ValueError)):
        q_symbol(0.0, w)


def test_branch_points_unit_frequency():
    # omega^2 = 1 exactly is excluded (omega2 = 0); use the tiny-damping limit
    (zh, zh2), (zr, zr2), zq = branch_points(Frequency(np.sqrt(1.0 + 1e-12j)))
    assert abs(zq - (3 - np.sqrt(5)) / 2) < 1e-9
    assert abs(zh * zh2 - 1) < 1e-14 and abs(zr * zr2 - 1) < 1e-14


def test_branch_points_inside_unit_disk():
    ctx = ctx_for(1.5 + 0.01j)
    assert abs(ctx.z_h) < 1 and abs(ctx.z_r) < 1 and ctx.R_L < 1


def test_lambda_at_branch_points():
    ctx = ctx_for(1.5 + 0.01j)
    assert abs(lambda_eval(ctx.z_h, ctx) - 1) < 1e-6
    assert abs(lambda_eval(ctx.z_r, ctx) + 1) < 1e-6


@settings(max_examples=25, deadline=None)
@given(omega1s, omega2s, st.floats(0.0, 1.0))
def test_lambda_modulus_and_quadratic(w1, w2, t):
    ctx = ctx_for(complex(w1, w2))
    rho = ctx.R_L ** (1 - 2 * t) if t not in (0.0, 1.0) else 1.0
    z = rho * np.exp(2j * np.pi * np.arange(4096) / 4096)
    lam = lambda_eval(z, ctx)
    q = q_symbol(z, ctx.omega)
    assert np.max(np.abs(lam)) <= 1 + 1e-12
    assert np.max(np.abs(lam + 1 / lam - q) / (1 + np.abs(q))) < 1e-12
    zq = ctx.z_q
    fact = (1 - zq * z) * (1 - zq / z) / zq
    assert np.max(np.abs(q - fact) / (1 + np.abs(q))) < 1e-13


def test_lambda_dense_unit_circle():
    ctx = ctx_for(1.0 + 0.01j)
    z = np.exp(2j * np.pi * np.arange(4096) / 4096)
    assert np.max(np.abs(lambda_eval(z, ctx))) <= 1.0


def test_lambda_continuation_returns_to_start():
    ctx = ctx_for(1.2 + 0.01j)
    t = np.linspace(0.0, 1.0, 8193)
    z = np.exp(2j * np.pi * t)
    lam = [complex(lambda_eval(z[0], ctx))]
    for zz in z[1:]:
        q = complex(q_symbol(zz, ctx.omega))
        d = np.sqrt(q * q - 4)
        c1, c2 = (q + d) / 2, (q - d) / 2
        lam.append(c1 if abs(c1 - lam[-1]) <= abs(c2 - lam[-1]) else c2)
    assert abs(lam[-1] - lam[0]) < 1e-10
    # and it agrees with the pointwise branch everywhere on the circle
    assert np.max(np.abs(np.array(lam) - lambda_eval(z, ctx))) < 1e-10


def test_strict_lambda_rejects_cut():
    ctx = ctx_for(1.2 + 0.01j)
    # z with Q(z) = 0.5 exactly: z + 1/z = 4 - omega^2 - 0.5
    s = 4 - ctx.omega**2 - 0.5
    z = (s + np.sqrt(s * s - 4)) / 2
    assert abs(q_symbol(z, ctx.omega) - 0.5) < 1e-14
    with pytest.raises(BranchCutError):
        lambda_eval(np.array([z]), ctx, strict=True)
    lambda_eval(np.array([1.0]), ctx, strict=True)


def test_continue_lambda_matches_unit_circle():
    ctx = ctx_for(1.2 + 0.01j)
    z = np.exp(1j * np.linspace(0.1, 6.0, 7))
    assert np.allclose(continue_lambda(z, ctx), lambda_eval(z, ctx), atol=1e-12)


def test_frequency_exclusions():
    for bad in (0.0 + 0.01j, 2.0 + 0.01j, np.sqrt(8.0) + 0.01j, 1.0 + 0.0j, 3.0 + 0.01j):
        with pytest.raises(LatticeError):
            Frequency(bad)


def test_delta_conventions():
    z = 1.7 * np.exp(0.3j)
    assert abs(delta_plus(z) - 1 / (1 - 1 / z)) < 1e-15
    w = 0.4 * np.exp(-1.1j)
    assert abs(delta_minus(w) - w / (1 - w)) < 1e-15
    # truncated sums
    assert abs(delta_plus(z) - sum(z ** (-x) for x in range(200))) < 1e-12
    assert abs(delta_minus(w) - sum(w**x for x in range(1, 200))) < 1e-12


def test_incident_bulk_examples():
    inc = bulk(amplitude=0.7 - 0.2j)
    assert abs(incident_bulk(0, 0, inc) - inc.amplitude) < 1e-15
    assert abs(incident_bulk(1, 0, inc) - inc.amplitude * np.exp(1j * inc.kappa_x)) < 1e-15
    x, y = 7, -3
    mod = abs(inc.amplitude) * np.exp(-inc.kappa_x.imag * x - inc.kappa_y.imag * y)
    assert abs(abs(incident_bulk(x, y, inc)) - mod) < 1e-13


def test_reflection_coefficients():
    inc = bulk()
    ky = inc.kappa_y
    assert abs(reflection_coefficient(inc, 0, 0) + np.exp(-2j * ky)) < 1e-14
    assert abs(reflection_coefficient(inc, 0, -1) - np.exp(-1j * ky)) < 1e-14
    assert abs(reflection_coefficient(inc, 1, 0) - 1) < 1e-14


@pytest.mark.parametrize("case", list(CASES))
def test_incident_halfplane_boundary_row(case, rng):
    beta, gamma = CASES[case]
    inc = bulk(1.7 + 0.02j, 35.0)
    w2 = inc.frequency.omega ** 2
    x = rng.integers(-50, 50, 100)
    u = lambda xx, yy: incident_halfplane(xx, yy, inc, beta, gamma)  # noqa: E731
    res = u(x + 1, 0) + u(x - 1, 0) + (1 + beta) * u(x, 1) + (w2 - 4 - gamma) * u(x, 0)
    assert np.max(np.abs(res) / np.maximum(1, np.abs(u(x, 0)))) < 1e-12


def test_incident_halfplane_rejects_lower_rows():
    with pytest.raises(LatticeError):
        incident_halfplane(0, -1, bulk(), 0, 0)
