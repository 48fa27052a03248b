from dataclasses import dataclass

import numpy as np
import pytest

from latticewh.factorization import (
    FactorizationError,
    additive_split_constraint_bulk,
    additive_split_constraint_waveguide,
    additive_split_crack_bulk,
    additive_split_crack_waveguide,
    config_hash,
    factorize,
    load_coefficients,
    locate_plus_zeros,
    save_coefficients,
)
from latticewh.kernel import KernelFunction, ProblemConfig
from latticewh.modes import waveguide_modes

from .conftest import CASE_IDS, DEFECTS, bulk, ctx_for


@dataclass(frozen=True)
class Rational:
    """Test kernel with a known split."""

    a: float
    ctx: object

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return (1 - self.a * z) * (1 - self.a / z)


@dataclass(frozen=True)
class Unit:
    ctx: object

    def __call__(self, z):
        return np.ones(np.shape(z), dtype=complex)


def kernel(defect="crack", N=3, case="H2", omega=1.5 + 0.02j):
    return KernelFunction(ProblemConfig(defect, N, case), ctx_for(omega))


def test_unit_kernel():
    s = factorize(Unit(ctx_for(1.2 + 0.01j)), M=64)
    z = np.array([2.0, 3j, -1.5])
    assert np.allclose(s.L_plus(z), 1) and np.allclose(s.L_minus(z / 4), 1)


def test_rational_kernel_split():
    s = factorize(Rational(0.3, ctx_for(1.2 + 0.01j)), M=256)
    zo = 1.3 * np.exp(1j * np.linspace(0, 6, 11))
    zi = 0.7 * np.exp(1j * np.linspace(0, 6, 11))
    assert np.max(np.abs(s.L_plus(zo) - (1 - 0.3 / zo))) < 1e-14
    assert np.max(np.abs(s.L_minus(zi) - (1 - 0.3 * zi))) < 1e-14
    assert abs(s.l_plus0 - 1) < 1e-15 and abs(s.l_minus0_inv - 1) < 1e-14


def test_lattice_kernel_residual():
    s = factorize(kernel())
    assert s.multiplicative_residual() < 1e-10
    off = np.exp(2j * np.pi * (np.arange(1000) + 0.5) / 1000)
    assert s.multiplicative_residual(off) < 1e-10
    assert s.tail() < 1e-13


def test_analyticity_against_shifted_contours():
    L = kernel("constraint", 3, "H4", 1.2 + 0.05j)
    s = factorize(L)
    ctx = L.ctx
    assert ctx.R_L < 0.96
    big = factorize(L, rho=1.03)
    small = factorize(L, rho=0.97)
    zo = 1.06 * np.exp(1j * np.linspace(0, 6, 50))
    zi = 0.95 * np.exp(1j * np.linspace(0, 6, 50))
    assert np.max(np.abs(s.L_plus(zo) - big.L_plus(zo))) < 1e-9
    # L_- is fixed up to the constant gauge; compare after matching at z = 0
    ratio = small.L_minus(zi) / s.L_minus(zi)
    assert np.max(np.abs(ratio - ratio[0])) < 1e-9


def test_gauge_rescaling():
    s = factorize(kernel())
    g = s.regauged(2.0)
    z = np.array([1.3, -2.0j])
    assert np.allclose(g.L_plus(z), 2 * s.L_plus(z))
    assert np.allclose(g.L_minus(z / 3), s.L_minus(z / 3) / 2)
    assert abs(g.l_plus0 - 2) < 1e-15


def test_contour_outside_annulus():
    with pytest.raises(FactorizationError):
        factorize(kernel(), rho=0.2)


def test_refinement_raises_node_count():
    L = kernel("crack", 3, "H1", 1.2 + 0.002j)
    s = factorize(L, M=256)
    assert s.M > 256 and s.tail() < 1e-13


def test_coefficient_cache(tmp_path):
    L = kernel()
    s = factorize(L, M=512, tol=1e-8)
    path = tmp_path / "c.lwhf"
    save_coefficients(path, s.coeffs, s.rho, s.gauge)
    coeffs, rho, gauge = load_coefficients(path)
    assert np.array_equal(coeffs, s.coeffs) and rho == s.rho and gauge == s.gauge
    a = factorize(L, M=512, tol=1e-8, cache_dir=tmp_path)
    b = factorize(L, M=512, tol=1e-8, cache_dir=tmp_path)
    assert np.array_equal(a.coeffs, b.coeffs)
    assert config_hash(L, 1.0, 512, 1e-8) != config_hash(kernel(N=4), 1.0, 512, 1e-8)


# ---------------------------------------------------------------- additive splits


def _nodes(n=1000):
    return np.exp(2j * np.pi * (np.arange(n) + 0.25) / n)


@pytest.mark.parametrize("case", CASE_IDS)
def test_crack_bulk_split(case):
    inc = bulk(1.5 + 0.02j, 40)
    s = factorize(kernel("crack", 3, case))
    sp = additive_split_crack_bulk(s, inc.z_P, 0.7 - 0.1j)
    assert sp.residual(_nodes()) < 1e-10
    # z_P lies inside the contour, where C_- must stay analytic
    zp = inc.z_P
    near = zp * (1 + 1e-6 * np.exp(1j * np.linspace(0, 6, 8)))
    assert np.max(np.abs(sp.minus(near))) < 10
    far = sp.plus(np.array([1e9]))[0]
    lim = 0.7 - 0.1j
    expect = lim * (1 / s.L_minus(np.asarray(zp)) - s.l_plus0)
    assert abs(far - expect) < 1e-6


@pytest.mark.parametrize("case", CASE_IDS)
def test_crack_waveguide_split(case):
    ctx = ctx_for(1.2 + 0.01j)
    s = factorize(KernelFunction(ProblemConfig("crack", 3, case), ctx))
    mode = [m for m in waveguide_modes(ProblemConfig("crack", 3, case), ctx) if m.propagating][0]
    zp = mode.z_outside
    sp = additive_split_crack_waveguide(s, zp, -1.0)
    assert sp.residual(_nodes()) < 1e-10
    # z_P lies outside the contour, where C_+ must stay analytic
    near = zp * (1 + 1e-6 * np.exp(1j * np.linspace(0, 6, 8)))
    assert np.max(np.abs(sp.plus(near))) < 1e3
    # delta_{D-}(z/z_P) -> 0 as z -> 0
    assert abs(sp.minus(np.array([1e-9]))[0]) < 1e-6


@pytest.mark.parametrize("case", CASE_IDS)
def test_constraint_bulk_split(case):
    inc = bulk(1.5 + 0.02j, 40)
    s = factorize(kernel("constraint", 3, case))
    sp = additive_split_constraint_bulk(s, inc.z_P, 0.4 + 0.3j, -0.2 + 0.5j)
    assert sp.residual(_nodes()) < 1e-10
    # growth compensated at both ends
    big = np.abs(sp.plus(np.array([1e4, 1e6, 1e8])))
    assert big.max() < 10 * big.min() + 1
    small = np.abs(sp.minus(np.array([1e-4, 1e-6, 1e-8])))
    assert small.max() < 10 * small.min() + 1


@pytest.mark.parametrize("case", CASE_IDS)
def test_constraint_waveguide_split(case):
    ctx = ctx_for(1.2 + 0.01j)
    cfg = ProblemConfig("constraint", 3, case)
    s = factorize(KernelFunction(cfg, ctx))
    zp = [m for m in waveguide_modes(cfg, ctx) if m.propagating][0].z_outside
    sp = additive_split_constraint_waveguide(s, zp, 1.0, 0.3 - 0.2j)
    assert sp.residual(_nodes()) < 1e-10
    near = zp * (1 + 1e-6 * np.exp(1j * np.linspace(0, 6, 8)))
    assert np.max(np.abs(sp.plus(near))) < 1e3
    assert np.isfinite(sp.minus(np.array([1e-9]))[0])


# ---------------------------------------------------------------- zeros of L_+


@pytest.mark.parametrize("defect", DEFECTS)
@pytest.mark.parametrize("case", CASE_IDS)
@pytest.mark.parametrize("w1", [1.2, 2.2])
def test_plus_zeros_are_guide_roots(defect, case, w1):
    ctx = ctx_for(complex(w1, 0.01))
    cfg = ProblemConfig(defect, 3, case)
    s = factorize(KernelFunction(cfg, ctx))
    zeros = locate_plus_zeros(s)
    roots = [m.z_inside for m in waveguide_modes(cfg, ctx)]
    if defect == "constraint":
        roots.append(ctx.z_q)
    found = []
    for p in zeros:
        found += [p.z] * p.multiplicity
    assert len(found) == len(roots)
    for r in roots:
        assert min(abs(r - f) for f in found) < 1e-9
    for p in zeros:
        if p.multiplicity == 1:
            assert abs(s.L_plus(np.array([p.z]), continued=True)[0]) < 1e-10
            assert abs(p.derivative) > 0


def test_empty_zero_list():
    # a one-row free-free guide: its only mode sits at a branch point
    ctx = ctx_for(1.2 + 0.01j)
    cfg = ProblemConfig("crack", 1, "H2")
    s = factorize(KernelFunction(cfg, ctx))
    assert locate_plus_zeros(s) == []
    assert waveguide_modes(cfg, ctx) == []
