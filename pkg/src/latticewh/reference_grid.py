"""Finite-lattice reference solution with absorbing layers.

The unknowns are scattered displacements on the square window |x|, |y| <=
N_grid + N_pml.  An absorbing ring of N_pml sites surrounds the physical
region |x|, |y| <= N_grid.  Inside the ring the lattice coordinates are
stretched, x -> x + i sgn(x) a d^3/3 with d the depth into the ring, so
s(x) = 1 + i a d^2 and the equation of site (i, j) multiplied by s_x s_y reads

    sum_x-bonds s_y/s_x(mid) (u_n - u) + sum_y-bonds s_x/s_y(mid) (u_n - u)
        + omega^2 s_x s_y u = forcing.

Broken bonds are driven by the incident bond stretch and pinned sites carry
sc = -u^inc, both with the incident wave continued to the stretched
coordinates.  Outside the window the scattered field is zero.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .farfield import EXCLUSION_BAND, PolarPoint, SaddleError, farfield_bulk, farfield_waveguide, shadow_angle
from .lattice import LatticeError, incident_halfplane
from .solver import FieldGrid
from .stencil import Geometry, stencil_residual
from .superposition import PairConfig, PairSolution, mirror_row

logger = logging.getLogger(__name__)

DEFAULT_STRENGTH = 0.05


class GridSolveError(ArithmeticError):
    """The truncated lattice system could not be solved."""


@dataclass(frozen=True)
class GridSpec:
    pair: PairConfig
    N_grid: int = 81
    N_pml: int = 65
    strength: float = DEFAULT_STRENGTH  # sigma(d) = strength d^2 / N_pml
    geometry: object | None = None  # overrides the pair geometry (bond_broken, pinned)

    def __post_init__(self):
        if self.N_pml < 0 or self.N_grid < 1:
            raise LatticeError("grid sizes must be positive")
        if self.N_pml >= self.N_grid:
            raise LatticeError("N_pml must be smaller than N_grid")
        if self.geometry is None and self.pair.N + 1 > self.N_grid:
            raise LatticeError("defect rows must lie inside the physical region")

    @property
    def half_width(self) -> int:
        return self.N_grid + self.N_pml

    @property
    def coords(self) -> np.ndarray:
        h = self.half_width
        return np.arange(-h, h + 1)

    @property
    def geom(self):
        return self.geometry if self.geometry is not None else self.pair.geometry

    def sigma(self, t):
        """Absorption at (possibly half-integer) coordinate t."""
        d = np.maximum(np.abs(np.asarray(t, dtype=float)) - self.N_grid, 0.0)
        if self.N_pml == 0:
            return np.zeros_like(d)
        return self.strength * d * d / self.N_pml

    def stretch(self, t):
        return 1.0 + 1j * self.sigma(t)

    def stretched(self, t):
        """Complex coordinate t + i sgn(t) integral of sigma."""
        t = np.asarray(t, dtype=float)
        d = np.maximum(np.abs(t) - self.N_grid, 0.0)
        integral = 0.0 if self.N_pml == 0 else self.strength * d**3 / (3.0 * self.N_pml)
        return t + 1j * np.sign(t) * integral


def _incident(spec: GridSpec, x, y):
    inc = spec.pair.incidence
    return inc.amplitude * np.exp(1j * (inc.kappa_x * spec.stretched(x) + inc.kappa_y * spec.stretched(y)))


def assemble_system(spec: GridSpec):
    """Sparse matrix and right-hand side of the scattered-field system (row-major over y, x)."""
    c = spec.coords
    n = c.size
    X, Y = np.meshgrid(c, c)
    omega = spec.pair.incidence.frequency.omega
    geom = spec.geom
    sx = spec.stretch(X)
    sy = spec.stretch(Y)
    idx = np.arange(n * n).reshape(n, n)
    pinned = np.asarray(geom.pinned(X, Y), dtype=bool)
    inc = _incident(spec, X, Y)

    rows, cols, vals = [], [], []
    diag = omega * omega * sx * sy
    rhs = np.zeros((n, n), dtype=complex)

    def bonds(dx, dy):
        """Weight of the bond from each site to its (dx, dy) neighbour and validity mask."""
        if dx:
            w = sy / spec.stretch(X + 0.5 * dx)
            broken = np.zeros(X.shape, dtype=bool)
        else:
            w = sx / spec.stretch(Y + 0.5 * dy)
            upper = Y + (1 if dy > 0 else 0)
            broken = np.asarray(geom.bond_broken(X, upper), dtype=bool)
        return w, broken

    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        w, broken = bonds(dx, dy)
        inside = np.ones(X.shape, dtype=bool)
        if dx == 1:
            inside[:, -1] = False
        if dx == -1:
            inside[:, 0] = False
        if dy == 1:
            inside[-1, :] = False
        if dy == -1:
            inside[0, :] = False
        intact = ~broken
        diag = diag - np.where(intact, w, 0.0)
        nb = np.roll(np.roll(idx, -dy, axis=0), -dx, axis=1)
        nb_pinned = np.roll(np.roll(pinned, -dy, axis=0), -dx, axis=1)
        nb_inc = _incident(spec, X + dx, Y + dy)
        free = intact & inside & ~pinned
        link = free & ~nb_pinned
        rows.append(idx[link])
        cols.append(nb[link])
        vals.append(w[link])
        # pinned neighbour: its scattered value -u^inc is known
        known = free & nb_pinned
        rhs[known] += w[known] * nb_inc[known]
        # broken bond: forcing by the incident bond stretch
        drive = broken & ~pinned
        rhs[drive] += w[drive] * (nb_inc[drive] - inc[drive])
    diag = np.where(pinned, 1.0, diag)
    rhs[pinned] = -inc[pinned]
    rows.append(idx.ravel())
    cols.append(idx.ravel())
    vals.append(diag.ravel())
    A = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n * n, n * n), dtype=complex
    )
    return A, rhs.ravel()


def assemble_and_solve(spec: GridSpec, dense: bool = False) -> FieldGrid:
    """Scattered field on the physical window |x|, |y| <= N_grid."""
    A, b = assemble_system(spec)
    n = spec.coords.size
    try:
        if dense:
            u = np.linalg.solve(A.toarray(), b)
        else:
            u = spla.splu(A).solve(b)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        raise GridSolveError(f"lattice system is singular: {exc}") from None
    if not np.all(np.isfinite(u)):
        raise GridSolveError("lattice solve produced non-finite values")
    U = u.reshape(n, n)
    k = spec.N_pml
    sl = slice(k, n - k)
    xs = spec.coords[sl]
    inc = spec.pair.incidence
    X, Y = np.meshgrid(xs, xs)
    incident = inc.amplitude * np.exp(1j * (inc.kappa_x * X + inc.kappa_y * Y))
    meta = {"N_grid": spec.N_grid, "N_pml": spec.N_pml, "strength": spec.strength}
    return FieldGrid(xs, xs.copy(), U[sl, sl], incident, tag="total", meta=meta)


def grid_residual(grid: FieldGrid, spec: GridSpec) -> dict:
    """Stencil residual of the numeric total field on the physical window."""
    geom = spec.geom
    if not isinstance(geom, Geometry):
        geom = Geometry(pinned_rows=(), crack_rows=())
    rep = stencil_residual(grid.total, grid.xs, grid.ys, geom, spec.pair.incidence.frequency.omega)
    return rep.by_kind


# ----------------------------------------------------------------------------
# Circle comparison
# ----------------------------------------------------------------------------


@dataclass
class CircleRow:
    theta: float
    x: int
    y: int
    numeric: complex
    exact: complex
    asymptotic: complex
    excluded: bool
    incident: complex = 0.0j


@dataclass
class ComparisonReport:
    R: float
    rows: list
    meta: dict = field(default_factory=dict)

    def _rel(self, a: str, b: str, skip_excluded: bool = True) -> np.ndarray:
        out = []
        for r in self.rows:
            if skip_excluded and r.excluded:
                continue
            va, vb = getattr(r, a), getattr(r, b)
            if not (np.isfinite(va) and np.isfinite(vb)):
                continue
            out.append(abs(va - vb) / max(abs(vb), 1e-300))
        return np.array(out)

    def median(self, a: str = "numeric", b: str = "exact") -> float:
        d = self._rel(a, b)
        return float(np.median(d)) if d.size else float("nan")

    def max(self, a: str = "numeric", b: str = "exact") -> float:
        d = self._rel(a, b)
        return float(np.max(d)) if d.size else float("nan")

    def to_csv(self, path=None, header: str | None = None) -> str:
        """Long format: one line per site and method, scattered and total field."""
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "x", "y", "method", "abs_scattered", "arg_scattered", "abs_total", "arg_total", "excluded"])
        for r in self.rows:
            for m in ("numeric", "exact", "asymptotic"):
                v = getattr(r, m)
                tot = v + r.incident
                w.writerow(
                    [f"{r.theta:.15g}", r.x, r.y, m]
                    + [f"{a:.15g}" for a in (abs(v), np.angle(v), abs(tot), np.angle(tot))]
                    + [int(r.excluded)]
                )
        text = buf.getvalue()
        if path is not None:
            tmp = Path(str(path) + ".tmp")
            tmp.write_text(text)
            tmp.replace(path)
        return text


def circle_sites(R: float, parity: int, n_theta: int = 720) -> list[tuple[float, int, int]]:
    seen = set()
    out = []
    for th in np.linspace(-np.pi, np.pi, n_theta, endpoint=False):
        x, y = PolarPoint(R, float(th)).site(parity)
        if (x, y) in seen:
            continue
        seen.add((x, y))
        out.append((float(PolarPoint.from_site(x, y, parity).theta), x, y))
    out.sort()
    return out


def pair_asymptotic(ps: PairSolution, x: int, y: int) -> tuple[complex, bool]:
    """Far-field approximation of the pair scattered field and a shadow-band flag.

    Returns nan where no far-field form applies: the strip |y| < N on the open
    side, grazing directions without a saddle, and guides with a branch-point mode.
    """
    parity = ps.pair.parity
    yy = y
    if y < 0:
        yy = int(mirror_row(y, parity))
    total = 0.0j
    near = False
    for sym, (call, sol) in ps.parts.items():
        s = -1.0 if (y < 0 and sym == "odd") else 1.0
        yh = yy - call.row_shift
        if yh < 0:
            continue
        Nh = sol.cfg.N
        if yh >= Nh:
            try:
                f = farfield_bulk(sol, x, yh)
            except SaddleError:
                return complex(np.nan), near
            total += s * f.value
            near |= f.near_shadow
        elif x > 0:
            g = farfield_waveguide(sol, x, yh)
            if g.n_edge:
                return complex(np.nan), near
            inc = complex(incident_halfplane(x, yh, sol.incidence, call.beta, call.gamma))
            total += s * (g.value - inc)
        else:
            return complex(np.nan), near
    return complex(total), near


def compare_on_circle(numeric: FieldGrid, ps: PairSolution, R: float, n_theta: int = 720, band: float = EXCLUSION_BAND) -> ComparisonReport:
    """Numeric, exact and asymptotic scattered fields at the nearest sites of a circle."""
    xs, ys = numeric.xs, numeric.ys
    parity = ps.pair.parity
    sites = circle_sites(R, parity, n_theta)
    if any(not (xs[0] <= x <= xs[-1] and ys[0] <= y <= ys[-1]) for _, x, y in sites):
        raise LatticeError(f"circle of radius {R} leaves the physical window")
    th_ref = shadow_angle(ps.pair.incidence)
    rows = []
    for th, x, y in sites:
        num = complex(numeric.at(x, y))
        ex = ps.value(x, y)
        asym, near = pair_asymptotic(ps, x, y)
        near |= min(abs(th - th_ref), abs(th + th_ref)) < band
        inc = complex(numeric.at(x, y, "incident"))
        rows.append(CircleRow(th, x, y, num, ex, asym, bool(near), inc))
    meta = dict(ps.meta)
    meta.update(numeric.meta)
    meta["R"] = R
    return ComparisonReport(R, rows, meta)


def layer_convergence(pair: PairConfig, ps: PairSolution, N_grid: int, layers=(33, 49, 65), R: float = 39.0, **kw) -> dict:
    """Median numeric-vs-exact discrepancy on the circle for several layer thicknesses."""
    out = {}
    for k in layers:
        grid = assemble_and_solve(GridSpec(pair, N_grid, k, **kw))
        out[k] = compare_on_circle(grid, ps, R).median()
    return out
