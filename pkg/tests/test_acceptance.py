"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

import time

import numpy as np
import pytest

from latticewh.cli import RunConfig, load_preset
from latticewh.factorization import (
    additive_split_constraint_bulk,
    additive_split_constraint_waveguide,
    additive_split_crack_bulk,
    additive_split_crack_waveguide,
    factorize,
    locate_plus_zeros,
)
from latticewh.farfield import EXCLUSION_BAND, PolarPoint, farfield_bulk, farfield_waveguide, reflected_wave, shadow_angle
from latticewh.kernel import KernelFunction, ProblemConfig
from latticewh.modes import propagating_modes, waveguide_modes
from latticewh.reference_grid import layer_convergence
from latticewh.solver import solve, u_m1N_quadrature
from latticewh.stencil import stencil_residual
from latticewh.superposition import PairConfig, assemble_pair

from .conftest import CASE_IDS, DEFECTS, bulk, cached_solution, ctx_for, halfplane_audit, worst


@pytest.fixture
def announce(capsys):
    def say(n: int, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}")

    return say


def contour(n=4096):
    return np.exp(2j * np.pi * (np.arange(n) + 0.5) / n)


def test_criterion_1_factorization_suite(announce):
    t0 = time.perf_counter()
    worst_mult = worst_add = 0.0
    z = contour()
    for w in (1.0 + 0.01j, 1.5 + 0.02j, 2.5 + 0.02j):
        ctx = ctx_for(w)
        inc = bulk(w, 45.0)
        for defect in DEFECTS:
            for case in CASE_IDS:
                for N in (2, 3, 5):
                    cfg = ProblemConfig(defect, N, case)
                    s = factorize(KernelFunction(cfg, ctx))
                    worst_mult = max(worst_mult, s.multiplicative_residual(), s.multiplicative_residual(z))
                    if defect == "crack":
                        splits = [additive_split_crack_bulk(s, inc.z_P, 0.7 - 0.2j)]
                    else:
                        splits = [additive_split_constraint_bulk(s, inc.z_P, 0.7 - 0.2j, 0.1 + 0.3j)]
                    for m in propagating_modes(cfg, ctx)[:1]:
                        if defect == "crack":
                            splits.append(additive_split_crack_waveguide(s, m.z_outside, 1.0))
                        else:
                            splits.append(additive_split_constraint_waveguide(s, m.z_outside, 1.0, 0.2j))
                    worst_add = max([worst_add] + [sp.residual(z) for sp in splits])
    dt = time.perf_counter() - t0
    ok = worst_mult <= 1e-10 and worst_add <= 1e-10 and dt <= 60
    announce(1, ok, f"multiplicative {worst_mult:.1e}, additive {worst_add:.1e}, {dt:.1f} s")
    assert ok


def test_criterion_2_wh_residuals(announce):
    res = {}
    for source in ("bulk", "waveguide"):
        for defect in DEFECTS:
            for case in CASE_IDS:
                sol = cached_solution(defect, 3, case, source=source)
                assert sol.sampling.M >= 4096
                res[(source, defect, case)] = sol.wh_residual()
    w = max(res.values())
    announce(2, w <= 1e-10, f"worst WH residual {w:.1e} over {len(res)} problems")
    assert w <= 1e-10


def test_criterion_3_physical_equation_audit(announce):
    worst_all = 0.0
    for defect in DEFECTS:
        for case in CASE_IDS:
            kinds = halfplane_audit(cached_solution(defect, 3, case), -30, 29, 59)
            worst_all = max(worst_all, worst(kinds))
    announce(3, worst_all <= 1e-8, f"worst stencil residual {worst_all:.1e} on 60x60 windows, H1-H4")
    assert worst_all <= 1e-8


def test_criterion_4_reference_grid(announce):
    t0 = time.perf_counter()
    cfg = RunConfig.from_mapping(load_preset("fig6"))
    inc = cfg.incidence()
    ok = True
    parts = []
    for defect in cfg.defects:
        pair = PairConfig(defect, cfg.N, cfg.parity, inc)
        ps = assemble_pair(pair)
        med = layer_convergence(pair, ps, cfg.N_grid, (33, 49, 65), cfg.R)
        vals = [med[k] for k in (33, 49, 65)]
        mono = vals[0] > vals[1] > vals[2]
        ok &= vals[2] <= 0.05 and mono
        parts.append(f"{defect} " + "/".join(f"{v:.1e}" for v in vals))
    dt = time.perf_counter() - t0
    ok &= dt <= 300
    announce(4, ok, f"median numeric vs exact for N_pml 33/49/65: {'; '.join(parts)}; {dt:.0f} s")
    assert ok


def test_criterion_5_farfield_scaling(announce):
    Rs = (20, 40, 80)
    bounded = diverges = True
    rows = []
    for defect in DEFECTS:
        sol = solve(ProblemConfig(defect, 3, "H1"), bulk(1.2 + 0.001j, 50.0))
        th_ref = shadow_angle(sol.incidence)
        for theta in (0.45, 1.4, 2.3):
            assert abs(theta - th_ref) > EXCLUSION_BAND
            err = []
            for R in Rs:
                x, y = PolarPoint(R, theta).site()
                err.append(abs(sol.field_value(x, y) - farfield_bulk(sol, x, y).value))
            half = [e * R**0.5 for e, R in zip(err, Rs)]
            three = [e * R**1.5 for e, R in zip(err, Rs)]
            bounded &= max(half) <= 1.05 * half[0]
            diverges &= three[-1] >= 2 * three[0]
            rows.append(f"{defect} {theta:.2f}: R^1/2 {half[0]:.2f}->{half[-1]:.2f}, R^3/2 {three[0]:.1f}->{three[-1]:.1f}")
    refl = 0.0
    for defect in DEFECTS:
        for case in CASE_IDS:
            sol = cached_solution(defect, 3, case)
            x = np.arange(-10, 11)
            for y in (3, 10, 40):
                a = reflected_wave(sol, x, y, "pole")
                b = reflected_wave(sol, x, y, "simplified")
                refl = max(refl, np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a))))
    ok = bounded and diverges and refl <= 1e-10
    detail = f"R^1/2-bounded {bounded}, R^3/2-divergent {diverges}, reflected forms {refl:.1e}; " + "; ".join(rows)
    announce(5, ok, detail)
    assert bounded and refl <= 1e-10
    # the error decays as R^-3/2, so R^3/2 * error stays bounded; the divergence half cannot hold
    assert diverges, "R^3/2-scaled far-field error does not diverge (error is O(R^-3/2))"


def test_criterion_6_near_tip_scalars(announce):
    tip = quad = literal = corrected = 0.0
    for source in ("bulk", "waveguide"):
        for case in CASE_IDS:
            c = cached_solution("crack", 3, case, source=source)
            a, b = c.tip_opening(), c.tip_opening_limit()
            tip = max(tip, abs(a - b) / max(1.0, abs(a)))
            s = cached_solution("constraint", 3, case, source=source)
            u_tot = s.u_m1N_total()
            inc_m1 = s.strength / s.z_P if s.from_bulk else 0.0
            quad = max(quad, abs(u_tot - (u_m1N_quadrature(s) + inc_m1)))
            lbar = s.sampling.l_minus0_inv
            scale = max(1.0, abs(s.AC0))
            literal = max(literal, abs(s.AC0 + u_tot * lbar) / scale)
            corrected = max(corrected, abs(s.AC0 + s.z_P * u_tot * lbar) / scale)
    ok = tip <= 1e-10 and quad <= 1e-9 and literal <= 1e-11
    announce(
        6,
        ok,
        f"tip opening {tip:.1e}, u_-1N quadrature {quad:.1e}, "
        f"A C0 = -u l0bar {literal:.1e}, A C0 = -z_P u l0bar {corrected:.1e}",
    )
    assert tip <= 1e-10 and quad <= 1e-9 and corrected <= 1e-11
    assert literal <= 1e-11, "A C0 equals -z_P u^tot_{-1,N} l0bar, not -u^tot_{-1,N} l0bar"


def test_criterion_7_wide_guide_approaches_lone_defect(announce):
    inc = bulk(1.5 + 0.05j, 50.0)
    ok = True
    rows = []
    for defect in DEFECTS:
        for case in CASE_IDS:
            d = []
            for N in (6, 8, 10, 12):
                cfg = ProblemConfig(defect, N, case)
                pair = solve(cfg, inc)
                lone = solve(cfg.replace(isolated=True), inc)
                pts = [(x, N + dy) for x in range(-8, 9) for dy in range(-8, 9) if x * x + dy * dy <= 64 and N + dy >= 0]
                a = np.array([pair.field_value(x, y) for x, y in pts])
                b = np.array([lone.field_value(x, y) for x, y in pts])
                d.append(np.linalg.norm(a - b) / np.linalg.norm(b))
            ok &= all(q < p for p, q in zip(d, d[1:]))
            rows.append(f"{defect} {case} " + "/".join(f"{v:.3f}" for v in d))
    announce(7, ok, "; ".join(rows))
    assert ok


def test_criterion_8_waveguide_series(announce):
    sol = cached_solution("crack", 3, "H1")
    assert len(propagating_modes(sol.cfg, sol.ctx)) >= 1
    rel = 0.0
    for y in range(3):
        g = farfield_waveguide(sol, 60, y)
        exact = sol.field_value(60, y, total=True)
        rel = max(rel, abs(g.value - exact) / abs(exact))
    roots = 0.0
    for defect in DEFECTS:
        for case in CASE_IDS:
            cfg = ProblemConfig(defect, 3, case)
            ctx = ctx_for(1.2 + 0.01j)
            s = factorize(KernelFunction(cfg, ctx))
            found = [p.z for p in locate_plus_zeros(s) for _ in range(p.multiplicity)]
            for m in waveguide_modes(cfg, ctx):
                roots = max(roots, min(abs(m.z_inside - f) for f in found))
    ok = rel <= 1e-3 and roots <= 1e-9
    announce(8, ok, f"series vs field at x = 60: {rel:.1e}; mode roots vs L+ zeros {roots:.1e}")
    assert ok


def test_criterion_9_superposition(announce):
    res = {}
    for defect in DEFECTS:
        for parity in (0, 1):
            ps = assemble_pair(PairConfig(defect, 3, parity, bulk(1.2 + 0.01j, 50.0)))
            g = ps.window(-30, 29, -30, 29)
            res[(defect, parity)] = worst(stencil_residual(g.total, g.xs, g.ys, ps.pair.geometry, ps.pair.incidence.frequency.omega).by_kind)
    cfg = RunConfig.from_mapping(load_preset("fig2"))
    for defect in cfg.defects:
        ps = assemble_pair(PairConfig(defect, cfg.N, cfg.parity, cfg.incidence()))
        g = ps.window(*cfg.window)
        res[(defect, "fig2")] = worst(stencil_residual(g.total, g.xs, g.ys, ps.pair.geometry, ps.pair.incidence.frequency.omega).by_kind)
    w = max(res.values())
    announce(9, w <= 1e-8, f"worst pair stencil residual {w:.1e} (both defects, both parities, fig2 preset)")
    assert w <= 1e-8
