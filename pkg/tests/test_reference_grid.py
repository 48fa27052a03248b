from dataclasses import dataclass

import numpy as np
import pytest

from latticewh.lattice import LatticeError
from latticewh.reference_grid import (
    GridSpec,
    assemble_and_solve,
    assemble_system,
    circle_sites,
    compare_on_circle,
    grid_residual,
)
from latticewh.superposition import PairConfig, assemble_pair

from .conftest import bulk, worst


@dataclass(frozen=True)
class SingleBond:
    """One broken vertical bond between (x0, y0 - 1) and (x0, y0); ``active=False`` leaves the lattice intact."""

    x0: int = 0
    y0: int = 1
    active: bool = True

    def bond_broken(self, x, upper):
        return self.active & (np.asarray(x) == self.x0) & (np.asarray(upper) == self.y0)

    def pinned(self, x, y):
        return np.zeros(np.shape(x), dtype=bool)


def loop_system(n_grid, omega, inc, bond):
    """Plain lattice equations on |x|, |y| <= n_grid with zero scattered field outside, site by site."""
    c = range(-n_grid, n_grid + 1)
    sites = [(x, y) for y in c for x in c]
    index = {s: i for i, s in enumerate(sites)}
    A = np.zeros((len(sites), len(sites)), dtype=complex)
    b = np.zeros(len(sites), dtype=complex)

    def u_inc(x, y):
        return inc.amplitude * np.exp(1j * (inc.kappa_x * x + inc.kappa_y * y))

    for (x, y), i in index.items():
        A[i, i] = omega**2
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            n = (x + dx, y + dy)
            broken = bond.active and dx == 0 and x == bond.x0 and max(y, n[1]) == bond.y0
            if broken:
                b[i] += u_inc(*n) - u_inc(x, y)
                continue
            A[i, i] -= 1
            if n in index:
                A[i, index[n]] += 1
    return np.linalg.solve(A, b).reshape(2 * n_grid + 1, 2 * n_grid + 1)


def spec_for(bond, N_grid=5, N_pml=0):
    pair = PairConfig("crack", 2, 0, bulk(1.3 + 0.02j, 40.0, 0.7 + 0.2j))
    return GridSpec(pair, N_grid, N_pml, geometry=bond)


def test_no_defect_gives_zero():
    g = assemble_and_solve(spec_for(SingleBond(active=False), 8, 3))
    assert np.max(np.abs(g.scattered)) == 0.0


def test_single_broken_bond_against_loop_oracle():
    spec = spec_for(SingleBond())
    inc = spec.pair.incidence
    ref = loop_system(5, inc.frequency.omega, inc, SingleBond())
    sparse = assemble_and_solve(spec)
    dense = assemble_and_solve(spec, dense=True)
    assert sparse.scattered.shape == (11, 11)
    assert np.max(np.abs(sparse.scattered - ref)) < 1e-12
    assert np.max(np.abs(dense.scattered - sparse.scattered)) < 1e-12
    assert np.max(np.abs(ref)) > 1e-3


@pytest.mark.parametrize("N_pml", [1, 3])
def test_dense_and_sparse_agree_with_layer(N_pml):
    spec = spec_for(SingleBond(), 5, N_pml)
    a = assemble_and_solve(spec)
    b = assemble_and_solve(spec, dense=True)
    assert np.max(np.abs(a.scattered - b.scattered)) < 1e-12


def test_system_symmetric_without_layer():
    A, _ = assemble_system(spec_for(SingleBond()))
    assert abs(A - A.T).max() < 1e-15


@pytest.mark.parametrize("defect", ["crack", "constraint"])
@pytest.mark.parametrize("parity", [0, 1])
def test_pair_grid_residual(defect, parity):
    pair = PairConfig(defect, 3, parity, bulk(1.2 + 0.05j, 50.0))
    spec = GridSpec(pair, 15, 6)
    g = assemble_and_solve(spec)
    kinds = grid_residual(g, spec)
    assert worst(kinds) <= 1e-10, kinds
    if defect == "constraint":
        for y in pair.geometry.pinned_rows:
            xs = g.xs[g.xs >= 0]
            assert np.max(np.abs([g.at(int(x), y, "total") for x in xs])) < 1e-12


def test_heavily_damped_grid_matches_exact():
    # strong damping makes the truncation invisible at the centre
    pair = PairConfig("crack", 3, 0, bulk(1.2 + 0.3j, 50.0))
    g = assemble_and_solve(GridSpec(pair, 20, 8))
    ps = assemble_pair(pair)
    for x, y in [(0, 0), (3, 5), (-4, -6), (2, 3)]:
        assert abs(g.at(x, y) - ps.value(x, y)) < 1e-6


def test_self_comparison_is_zero():
    pair = PairConfig("crack", 3, 1, bulk())
    ps = assemble_pair(pair)
    w = ps.window(-12, 12, -12, 12)
    rep = compare_on_circle(w, ps, 10.0, n_theta=90)
    assert rep.max() < 1e-13  # same field, two evaluation paths
    text = rep.to_csv(header="self")
    assert text.splitlines()[1].startswith("theta,x,y,method")
    assert len(text.splitlines()) == 2 + 3 * len(rep.rows)


def test_circle_leaving_window_raises():
    pair = PairConfig("crack", 3, 1, bulk())
    ps = assemble_pair(pair)
    with pytest.raises(LatticeError):
        compare_on_circle(ps.window(-5, 5, -5, 5), ps, 10.0)


def test_circle_sites_unique_and_sorted():
    sites = circle_sites(20.0, 0)
    assert len({(x, y) for _, x, y in sites}) == len(sites)
    th = [s[0] for s in sites]
    assert th == sorted(th)


def test_spec_validation():
    pair = PairConfig("crack", 3, 0, bulk())
    with pytest.raises(LatticeError):
        GridSpec(pair, 10, 10)
    with pytest.raises(LatticeError):
        GridSpec(pair, 3, 1)
    with pytest.raises(LatticeError):
        GridSpec(pair, 10, -1)
