"""Far-field asymptotics of the half-plane solutions.

Bulk (y >= N): with z = exp(-i xi) and lambda = exp(i eta), the row transform
times z^x becomes exp(i R phi(xi)) with phi = eta sin(theta) - xi cos(theta).
The field is a saddle contribution plus the z_P pole term, which is present
only on the lit side of the shadow boundary theta_ref.

Guide (0 <= y <= N-1): residue series over the zeros of L_+ inside the unit
circle; the incident pole cancels against the incident wave there.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .factorization import PlusZero, locate_plus_zeros
from .kernel import Defect
from .lattice import BulkIncidence, Frequency, LatticeError, SpectralContext, continue_lambda, lambda_eval
from .modes import WaveguideMode, waveguide_modes  # noqa: F401  (re-exported)
from .solver import WHSolution, row_transfer

logger = logging.getLogger(__name__)

EXCLUSION_BAND = 0.15


class SaddleError(ArithmeticError):
    """Saddle point search failed."""


@dataclass(frozen=True)
class PolarPoint:
    R: float
    theta: float

    def site(self, parity: int = 0) -> tuple[int, int]:
        """Nearest lattice site of x = R cos(theta), y = -(1 - parity)/2 + R sin(theta)."""
        x = self.R * np.cos(self.theta)
        y = -0.5 * (1 - parity) + self.R * np.sin(self.theta)
        return int(np.rint(x)), int(np.rint(y))

    @classmethod
    def from_site(cls, x: int, y: int, parity: int = 0) -> "PolarPoint":
        yy = y + 0.5 * (1 - parity)
        return cls(float(np.hypot(x, yy)), float(np.arctan2(yy, x)))


@dataclass(frozen=True)
class SaddleData:
    theta: float
    xi_S: complex
    eta: complex
    eta2: complex  # eta''(xi_S)
    phase: complex  # phi(xi_S)

    @property
    def z_S(self) -> complex:
        return complex(np.exp(-1j * self.xi_S))

    @property
    def sign(self) -> float:
        return float(np.sign(self.eta2.real))


# ----------------------------------------------------------------------------
# Phase function
# ----------------------------------------------------------------------------


def _eta_derivatives(xi, ctx: SpectralContext):
    """eta, eta', eta'' at xi, with lambda continued off the unit circle.

    The inversion contour is deformed from |z| = 1, so lambda must be the
    analytic continuation of its unit-circle values, which may cross |lambda| = 1.
    """
    xi = np.asarray(xi, dtype=complex)
    z = np.exp(-1j * xi)
    if np.all(xi.imag == 0):
        lam = lambda_eval(z, ctx)  # on |z| = 1 the continuation starts from these values
    else:
        lam = continue_lambda(z, ctx, steps=64).reshape(xi.shape)
    eta = -1j * np.log(lam)
    s_eta = (lam - 1.0 / lam) / 2j
    c_eta = (lam + 1.0 / lam) / 2.0
    s_xi = np.sin(xi)
    c_xi = np.cos(xi)
    d1 = -s_xi / s_eta
    d2 = -c_xi / s_eta + s_xi * c_eta * d1 / s_eta**2
    return eta, d1, d2


def _strip_center(ctx: SpectralContext) -> float:
    w = ctx.omega.real
    return np.pi if 2.0 < w < 2.0 * np.sqrt(2.0) else 0.0


@lru_cache(maxsize=32)
def _seed_grid(omega: complex, width: float) -> tuple[np.ndarray, np.ndarray]:
    """eta' on a grid over the strip, |Im xi| <= width (independent of theta)."""
    ctx = SpectralContext(Frequency(omega))
    c0 = _strip_center(ctx)
    re = c0 + np.linspace(-np.pi, np.pi, 4001 if width == 0 else 601)[1:-1]
    im = np.linspace(-width, width, 121) if width else np.zeros(1)
    grid = (re[None, :] + 1j * im[:, None]).ravel()
    _, d1, _ = _eta_derivatives(grid, ctx)
    return grid, d1


def _seed(st: float, ct: float, ctx: SpectralContext, width: float) -> complex:
    """Grid minimiser of |phi'| over the strip."""
    grid, d1 = _seed_grid(complex(ctx.omega), width)
    return complex(grid[int(np.argmin(np.abs(d1 * st - ct)))])


def _newton(xi: complex, st: float, ct: float, ctx: SpectralContext, tol: float) -> complex | None:
    for _ in range(100):
        _, d1, d2 = _eta_derivatives(xi, ctx)
        step = (complex(d1) * st - ct) / (complex(d2) * st)
        if abs(step) > 0.25:
            step *= 0.25 / abs(step)
        xi -= step
        if abs(step) < tol:
            return xi
    return None


def find_saddle(theta: float, ctx: SpectralContext, guess: complex | None = None, tol: float = 1e-13) -> SaddleData:
    """Stationary point of phi(xi) = eta(xi) sin(theta) - xi cos(theta) in the strip.

    Seeds from the real axis first; near grazing the saddle hugs a branch point
    off the axis and a seed from a complex grid is used instead.
    """
    if not (0.0 < theta < np.pi):
        raise SaddleError("observation angle must lie in (0, pi)")
    st, ct = np.sin(theta), np.cos(theta)
    seeds = [guess] if guess is not None else []
    seeds += [None, None]
    xi = None
    for k, seed in enumerate(seeds):
        if seed is None:
            seed = _seed(st, ct, ctx, 0.0 if k == len(seeds) - 2 else 0.6)
        xi = _newton(complex(seed), st, ct, ctx, tol)
        if xi is not None:
            eta, d1, d2 = _eta_derivatives(xi, ctx)
            if abs(complex(d1) * st - ct) <= 1e-10:
                break
            xi = None
    if xi is None:
        raise SaddleError(f"saddle search did not converge at theta = {theta}")
    eta, d2 = complex(eta), complex(d2)
    return SaddleData(float(theta), xi, eta, d2, eta * st - xi * ct)


def saddle_sweep(thetas, ctx: SpectralContext) -> list[SaddleData]:
    """Saddles along a theta sweep, each seeded by its predecessor."""
    out = []
    guess = None
    for th in thetas:
        sd = find_saddle(float(th), ctx, guess)
        out.append(sd)
        guess = sd.xi_S
    return out


def shadow_angle(inc: BulkIncidence) -> float:
    """theta_ref: direction of the incident group velocity (sin kx, sin ky)."""
    return float(np.arctan2(np.sin(inc.kappa_y).real, np.sin(inc.kappa_x).real))


# ----------------------------------------------------------------------------
# Bulk far field
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class FarFieldValue:
    saddle: complex
    pole: complex
    near_shadow: bool

    @property
    def value(self) -> complex:
        return self.saddle + self.pole


def reflected_wave(sol: WHSolution, x, y, form: str = "pole"):
    """Pole term u^ref at sites with y >= N.

    ``form="pole"`` is the residue at z_P of the row transform; ``form="simplified"``
    is -u^inc_{0,N} e^{i kx x + i ky (y-N)} (constraint) or
    -v^inc_{0,N} (1 - e^{-i ky})^{-1} e^{i kx x + i ky (y-N)} (crack).
    """
    if not sol.from_bulk:
        raise LatticeError("reflected wave is defined for bulk incidence")
    inc = sol.incidence
    N = sol.cfg.N
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if form == "pole":
        c_N = sol._pole_coefficient(N)
        return c_N * sol.z_P**x * complex(sol.ctx.lam(sol.z_P)) ** (y - N)
    if form == "simplified":
        wave = np.exp(1j * inc.kappa_x * x + 1j * inc.kappa_y * (y - N))
        if sol.cfg.defect is Defect.CRACK:
            return -sol.strength / (1.0 - np.exp(-1j * inc.kappa_y)) * wave
        return -sol.strength * wave
    raise ValueError(f"unknown form {form!r}")


def _saddle_amplitude(sol: WHSolution, sd: SaddleData) -> complex:
    """Smooth part of the integrand at the saddle, without exp(i R phi)."""
    N = sol.cfg.N
    zs = sd.z_S
    lam = np.exp(1j * sd.eta)
    g = -sol.AC0 * complex(np.asarray(sol.K(np.asarray(zs)))) / (sol.z_P / zs - 1.0)
    g *= complex(row_transfer(lam, N, sol.cfg))
    return complex(g * np.exp(-1j * (N + 0.5 * (1 - sol.cfg.parity)) * sd.eta))


def saddle_term(sol: WHSolution, x: int, y: int, sd: SaddleData | None = None) -> complex:
    p = PolarPoint.from_site(x, y, sol.cfg.parity)
    if sd is None:
        sd = find_saddle(p.theta, sol.ctx)
    phi2 = sd.eta2 * np.sin(p.theta)
    amp = np.sqrt(2j * np.pi / (p.R * phi2)) / (2.0 * np.pi)
    return complex(_saddle_amplitude(sol, sd) * amp * np.exp(1j * p.R * sd.phase))


def saddle_term_printed(sol: WHSolution, x: int, y: int, sd: SaddleData | None = None) -> complex:
    """Saddle term in the form (1 + i sgn eta'')/(2 sqrt(pi)) / sqrt(R |eta''| sin theta)."""
    p = PolarPoint.from_site(x, y, sol.cfg.parity)
    if sd is None:
        sd = find_saddle(p.theta, sol.ctx)
    pref = (1.0 + 1j * sd.sign) / (2.0 * np.sqrt(np.pi))
    val = pref / np.sqrt(p.R * abs(sd.eta2) * np.sin(p.theta))
    return complex(_saddle_amplitude(sol, sd) * val * np.exp(1j * p.R * sd.phase))


def farfield_bulk(sol: WHSolution, x: int, y: int, band: float = EXCLUSION_BAND) -> FarFieldValue:
    """Saddle plus gated pole approximation of the scattered field at site (x, y), y >= N."""
    if not sol.from_bulk:
        raise LatticeError("farfield_bulk needs bulk incidence")
    if y < sol.cfg.N:
        raise LatticeError("bulk far field applies above the defect row")
    p = PolarPoint.from_site(x, y, sol.cfg.parity)
    th_ref = shadow_angle(sol.incidence)
    near = abs(p.theta - th_ref) < band
    s = saddle_term(sol, x, y)
    pole = complex(reflected_wave(sol, x, y)) if p.theta < th_ref else 0.0
    if near:
        logger.info("theta = %.4f within %.2f of the shadow boundary %.4f", p.theta, band, th_ref)
    return FarFieldValue(s, pole, near)


# ----------------------------------------------------------------------------
# Guide far field
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GuideFarField:
    value: complex
    n_terms: int
    n_propagating: int
    n_edge: int = 0  # propagating modes at a branch point, not captured by the series

    @property
    def decaying_only(self) -> bool:
        return self.n_propagating == 0


def _profile_ratio(z, y: int, sol: WHSolution):
    """a_y / a_{N-1} for the guide mode with longitudinal root z."""
    lam = sol.ctx.lam(np.asarray(z, dtype=complex))
    return row_transfer(lam, y, sol.cfg) / row_transfer(lam, sol.cfg.N - 1, sol.cfg)


def guide_zeros(sol: WHSolution) -> list[PlusZero]:
    if "_zeros" not in sol._rows:
        sol._rows["_zeros"] = locate_plus_zeros(sol.sampling)
    return sol._rows["_zeros"]


def _circle_residue(f, z0: complex, r: float, n: int = 256) -> complex:
    """(1/2 pi i) of f around |z - z0| = r by the trapezoidal rule."""
    t = np.exp(2j * np.pi * np.arange(n) / n)
    z = z0 + r * t
    return complex(np.mean(f(z) * r * t))


def farfield_waveguide(sol: WHSolution, x: int, y: int, include_incident: bool = True) -> GuideFarField:
    """Total field deep in the guide (0 <= y <= N-1) as a residue series over zeros of L_+.

    Simple zeros use L_+'; repeated zeros are integrated on a small circle.
    For guide incidence the incident mode itself is added when ``include_incident``.
    """
    cfg = sol.cfg
    if not (0 <= y <= cfg.N - 1):
        raise LatticeError("guide rows are 0..N-1")
    s = sol.sampling
    zp = sol.z_P
    zq = sol.ctx.z_q
    sq = np.sqrt(complex(zq))
    crack = cfg.defect is Defect.CRACK

    def q_plus(z):
        return (1.0 - zq / z) / sq

    def q_minus(z):
        return (1.0 - zq * z) / sq

    if crack:
        if sol.from_bulk:
            pref = -sol.strength / complex(s.L_minus(np.asarray(zp)))
        else:
            pref = -sol.strength * complex(s.L_plus(np.asarray(zp)))
    elif sol.from_bulk:
        pref = sol.strength * q_minus(zp) / complex(s.L_minus(np.asarray(zp)))
    else:
        pref = sol.strength * complex(s.L_plus(np.asarray(zp))) / q_plus(zp)

    def weight(z):
        w = _profile_ratio(z, y, sol) * z**x / (z - zp)
        return w if crack else w * q_plus(z)

    zeros = guide_zeros(sol)
    total = 0.0j
    used = 0
    for k, p in enumerate(zeros):
        if p.multiplicity == 1:
            if not crack and abs(p.z - zq) < 1e-8:
                continue  # cancelled by Q_+
            total += complex(weight(p.z)) / p.derivative
        else:
            others = [abs(p.z - o.z) for j, o in enumerate(zeros) if j != k]
            r = 0.3 * min([abs(abs(p.z) - 1.0)] + others + [abs(p.z - zp)])

            def f(z):
                return weight(z) / s.L_plus(z, continued=True)

            total += _circle_residue(f, p.z, r)
        used += 1
    value = pref * total
    if include_incident and not sol.from_bulk:
        value += complex(sol.incidence(np.array(x), np.array(y)))
    prop = [m for m in waveguide_modes(cfg, sol.ctx, include_edge=True) if m.propagating]
    n_edge = sum(1 for m in prop if abs(abs(m.q) - 2.0) < 1e-9)
    if n_edge:
        logger.info("%d propagating guide mode(s) sit at a branch point; the series omits them", n_edge)
    return GuideFarField(complex(value), used, len(prop) - n_edge, n_edge)


# ----------------------------------------------------------------------------
# Polar scans
# ----------------------------------------------------------------------------


@dataclass
class PolarRow:
    theta: float
    x: int
    y: int
    scattered: complex
    total: complex
    method: str


def polar_sites(R: float, thetas, parity: int, y_min: int) -> list[tuple[float, int, int]]:
    out = []
    seen = set()
    for th in thetas:
        x, y = PolarPoint(R, float(th)).site(parity)
        if y < y_min or (x, y) in seen:
            continue
        seen.add((x, y))
        out.append((float(th), x, y))
    return out


def polar_scan(sol: WHSolution, R: float, thetas, methods=("exact", "asymptotic")) -> list[PolarRow]:
    """Scattered and total field on the nearest sites of a circle of radius R (y >= N)."""
    rows = []
    sites = polar_sites(R, thetas, sol.cfg.parity, sol.cfg.N)
    for th, x, y in sites:
        inc = complex(np.asarray(sol.incident_rows(np.array([x]), y))[0])
        if "exact" in methods:
            u = sol.field_value(x, y)
            rows.append(PolarRow(th, x, y, u, u + inc, "exact"))
        if "asymptotic" in methods:
            try:
                u = farfield_bulk(sol, x, y).value
            except SaddleError:
                u = complex(np.nan)
            rows.append(PolarRow(th, x, y, u, u + inc, "asymptotic"))
    return rows


def polar_csv(rows, path=None, header: str | None = None) -> str:
    buf = io.StringIO()
    if header:
        buf.write(f"# {header}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["theta", "abs_scattered", "arg_scattered", "abs_total", "arg_total", "method"])
    for r in rows:
        w.writerow(
            [f"{r.theta:.15g}"]
            + [f"{v:.15g}" for v in (abs(r.scattered), np.angle(r.scattered), abs(r.total), np.angle(r.total))]
            + [r.method]
        )
    text = buf.getvalue()
    if path is not None:
        tmp = Path(str(path) + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
    return text
