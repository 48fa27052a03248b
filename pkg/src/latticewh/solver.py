"""Exact half-plane solutions for a crack or rigid constraint at row N.

The solved defect-row transform has the same shape in all four variants,

    F(z) = A C0 z K(z) / (z - z_P),

where F is the bond stretch v_N^F across the crack (K = (1 - 1/L) L_-) or the
displacement u_N^F on the constraint row (K = L_-/(1 - z_q z)).  Every other
row follows by a transverse transfer factor of lambda, and real-space values
come from the trapezoidal rule on the unit circle after removing the z_P pole
analytically.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .factorization import (
    AdditiveSplit,
    KernelSampling,
    additive_split_constraint_bulk,
    additive_split_constraint_waveguide,
    additive_split_crack_bulk,
    additive_split_crack_waveguide,
    factorize,
)
from .kernel import Defect, KernelFunction, ProblemConfig, Source, boundary_coefficient
from .lattice import (
    BulkIncidence,
    LatticeError,
    SpectralContext,
    boundary_factor,
    delta_minus,
    delta_plus,
    incident_halfplane,
    q_symbol,
    reflection_coefficient,
)
from .modes import WaveguideMode, propagating_modes

QUADRATURE_TOL = 1e-9
MAX_FIELD_M = 1 << 17


class QuadratureError(ArithmeticError):
    """Field reconstruction did not converge on the sampling grid."""


# ----------------------------------------------------------------------------
# Incident waves
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class GuideIncidence:
    """Guide mode A a_y z_P^x on rows 0..N-1 travelling towards the defect tip."""

    mode: WaveguideMode
    amplitude: complex = 1.0

    @property
    def z_P(self) -> complex:
        return self.mode.z_outside

    def __call__(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        rows = self.mode.rows
        prof = np.concatenate([self.mode.profile, [0.0]])
        idx = np.where((y >= 0) & (y < rows), y, rows)
        out = self.amplitude * prof[idx] * self.z_P ** x.astype(float)
        return out if np.ndim(out) else complex(out)


def incident_strength_crack(cfg: ProblemConfig, inc: BulkIncidence, form: str = "direct") -> complex:
    """v^inc_{0,N} = u^inc_{0,N} - u^inc_{0,N-1} of the half-plane incident wave.

    ``form="direct"`` differences the incident field; ``form="factored"`` uses
    A (l^N - l^{N-1})(1 - C_B(1/l) l^{1-2N}) with l = exp(i ky).
    """
    N = cfg.N
    if form == "direct":
        up = incident_halfplane(0, N, inc, cfg.beta, cfg.gamma)
        dn = incident_halfplane(0, N - 1, inc, cfg.beta, cfg.gamma)
        return complex(up - dn)
    if form == "factored":
        lp = inc.lambda_P
        cb = complex(boundary_factor(1.0 / lp, cfg.beta, cfg.gamma))
        return complex(inc.amplitude * (lp**N - lp ** (N - 1)) * (1.0 - cb * lp ** (1 - 2 * N)))
    raise ValueError(f"unknown form {form!r}")


def incident_strength_constraint(cfg: ProblemConfig, inc: BulkIncidence) -> complex:
    """u^inc_{0,N} = A(exp(i ky N) + c_B exp(-i ky N))."""
    return complex(incident_halfplane(0, cfg.N, inc, cfg.beta, cfg.gamma))


# ----------------------------------------------------------------------------
# Transverse transfer
# ----------------------------------------------------------------------------


def row_transfer(lam, y: int, cfg: ProblemConfig):
    """u_y^F / F(z) with F the defect-row transform (see module docstring)."""
    lam = np.asarray(lam, dtype=complex)
    N = cfg.N
    c = boundary_coefficient(lam, cfg)
    if cfg.defect is Defect.CRACK:
        a = c * lam ** (2 * N - 2)
        den = 2.0 + a - a * lam
        if y >= N:
            return (1.0 - a * lam) / den * lam ** (y - N)
        return -(lam ** (N - 1 - y)) * (1.0 + c * lam ** (2 * y)) / den
    if y >= N:
        return lam ** (y - N)
    return lam ** (N - y) * (1.0 + c * lam ** (2 * y)) / (1.0 + c * lam ** (2 * N))


def row_kernel(lam, y: int, cfg: ProblemConfig, z=None, z_q=None):
    """(L - 1) T_y (crack) or L T_y / (1 - z_q z) (constraint), common factors cancelled.

    The constraint form uses lambda + 1/lambda = -(z - z_q)(z - 1/z_q)/z, so it
    stays finite when z -> 1/z_q.
    """
    lam = np.asarray(lam, dtype=complex)
    N = cfg.N
    c = boundary_coefficient(lam, cfg)
    if cfg.defect is Defect.CRACK:
        if y >= N:
            a = c * lam ** (2 * N - 2)
            return -lam * (1.0 - a * lam) * lam ** (y - N) / (1.0 + lam)
        return lam ** (N - y) * (1.0 + c * lam ** (2 * y)) / (1.0 + lam)
    b = lam / (1.0 - lam * lam) * (z - z_q) / (z * z_q)
    if y >= N:
        return (1.0 + c * lam ** (2 * N)) * b * lam ** (y - N)
    return b * lam ** (N - y) * (1.0 + c * lam ** (2 * y))


# ----------------------------------------------------------------------------
# Field containers
# ----------------------------------------------------------------------------


@dataclass
class FieldGrid:
    """Complex field on the index window x in xs, y in ys (arrays indexed [y, x])."""

    xs: np.ndarray
    ys: np.ndarray
    scattered: np.ndarray
    incident: np.ndarray | None = None
    tag: str = "scattered"
    meta: dict = field(default_factory=dict)

    @property
    def total(self) -> np.ndarray:
        if self.incident is None:
            raise LatticeError("no incident field attached to this grid")
        return self.scattered + self.incident

    def at(self, x: int, y: int, which: str = "scattered") -> complex:
        i = int(np.searchsorted(self.ys, y))
        j = int(np.searchsorted(self.xs, x))
        if i >= self.ys.size or self.ys[i] != y or j >= self.xs.size or self.xs[j] != x:
            raise IndexError(f"site ({x}, {y}) outside the window")
        arr = self.total if which == "total" else getattr(self, which)
        return complex(arr[i, j])

    def to_csv(self, path=None, header: str | None = None) -> str:
        buf = io.StringIO()
        if header:
            buf.write(f"# {header}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "re_scattered", "im_scattered", "re_total", "im_total"])
        tot = self.total if self.incident is not None else self.scattered
        for i, y in enumerate(self.ys):
            for j, x in enumerate(self.xs):
                s, t = self.scattered[i, j], tot[i, j]
                w.writerow([int(x), int(y)] + [f"{v:.15g}" for v in (s.real, s.imag, t.real, t.imag)])
        text = buf.getvalue()
        if path is not None:
            tmp = Path(str(path) + ".tmp")
            tmp.write_text(text)
            tmp.replace(path)
        return text


# ----------------------------------------------------------------------------
# Solution
# ----------------------------------------------------------------------------


@dataclass
class WHSolution:
    """Solved Wiener-Hopf problem for one half-plane configuration."""

    cfg: ProblemConfig
    sampling: KernelSampling
    incidence: BulkIncidence | GuideIncidence
    strength: complex  # v^inc_{0,N}, u^inc_{0,N} or u^inc_{0,N-1}
    AC0: complex
    split: AdditiveSplit
    u_m1N: complex | None = None  # scattered u_{-1,N} (constraint only)
    builder: Callable | None = field(default=None, repr=False)  # M -> WHSolution
    _rows: dict = field(default_factory=dict, repr=False)

    # -- basic data ---------------------------------------------------------

    @property
    def ctx(self) -> SpectralContext:
        return self.sampling.ctx

    @property
    def amplitude(self) -> complex:
        return complex(self.incidence.amplitude)

    @property
    def z_P(self) -> complex:
        return complex(self.incidence.z_P)

    @property
    def from_bulk(self) -> bool:
        return isinstance(self.incidence, BulkIncidence)

    @property
    def C0(self) -> complex:
        return self.AC0 / self.amplitude

    # -- transforms ---------------------------------------------------------

    def K(self, z):
        s = self.sampling
        z = np.asarray(z, dtype=complex)
        if self.cfg.defect is Defect.CRACK:
            if s._is_nodes(z):
                return (1.0 - 1.0 / s.L_nodes) * s.minus_nodes
            inner = np.abs(z) < s.rho
            out = np.empty(z.shape, dtype=complex)
            zi, zo = z[inner], z[~inner]
            if zi.size:
                out[inner] = (1.0 - 1.0 / s.kernel(zi)) * s.L_minus(zi)
            if zo.size:
                out[~inner] = (s.kernel(zo) - 1.0) / s.L_plus(zo)
            return out if out.ndim else complex(out)
        out = s.L_minus(z) / (1.0 - self.ctx.z_q * z)
        return out

    def defect_transform(self, z):
        """v_N^F (crack) or u_N^F (constraint)."""
        z = np.asarray(z, dtype=complex)
        return self.AC0 * z * self.K(z) / (z - self.z_P)

    def plus(self, z):
        """v_{N;+} or pi_{N;+} = C_+/L_+."""
        return self.split.plus(z) / self.sampling.L_plus(z)

    def minus(self, z):
        """v_{N;-} or pi_{N;-} = C_- L_-."""
        return self.split.minus(z) * self.sampling.L_minus(z)

    def transform_field(self, y: int) -> Callable:
        """Evaluator z -> u_y^F(z) of the scattered field."""
        if y < 0 and not self.cfg.isolated:
            raise LatticeError("rows below the boundary are not part of the half-plane")
        ctx = self.ctx

        def u_y(z):
            z = np.asarray(z, dtype=complex)
            return row_transfer(ctx.lam(z), y, self.cfg) * self.defect_transform(z)

        return u_y

    def incident_rows(self, xs, y: int):
        if self.from_bulk:
            cfg = self.cfg
            return incident_halfplane(np.asarray(xs), y, self.incidence, cfg.beta, cfg.gamma, extend=cfg.isolated)
        return self.incidence(np.asarray(xs), np.full(np.shape(xs), y))

    # -- real space -----------------------------------------------------------

    def _pole_coefficient(self, y: int) -> complex:
        """Residue coefficient c_y of u_y^F at z_P: u_y^F ~ c_y z/(z - z_P)."""
        zp = self.z_P
        lam_p = complex(self.ctx.lam(zp))
        if self.from_bulk:
            return complex(self.AC0 * complex(np.asarray(self.K(np.asarray(zp)))) * row_transfer(lam_p, y, self.cfg))
        # a guide mode has L_-(z_P) = 0 and a pole of T_y at lambda_P; use the cancelled product
        val = self.AC0 * complex(row_kernel(lam_p, y, self.cfg, zp, self.ctx.z_q))
        return complex(val / complex(self.sampling.L_plus(np.asarray(zp))))

    def _row_coefficients(self, y: int):
        """Fourier coefficients of the scattered row y on the sampling grid."""
        if y in self._rows:
            return self._rows[y]
        s = self.sampling
        z = s.z
        uf = self.transform_field(y)(z)
        c = self._pole_coefficient(y)
        smooth = uf - c * z / (z - self.z_P)
        coeffs = np.fft.ifft(smooth)
        half = np.fft.ifft(smooth[::2])
        idx = np.r_[0 : s.M // 8, -(s.M // 8) : 0]
        err = float(np.max(np.abs(coeffs[idx] - half[idx % half.size])))
        self._rows[y] = (coeffs, c, err)
        return self._rows[y]

    def refine(self) -> None:
        """Rebuild in place on a grid with twice as many nodes."""
        if self.builder is None or 2 * self.sampling.M > MAX_FIELD_M:
            raise QuadratureError(f"cannot refine beyond M = {self.sampling.M}")
        new = self.builder(2 * self.sampling.M)
        for name in ("sampling", "strength", "AC0", "split", "u_m1N"):
            setattr(self, name, getattr(new, name))
        self._rows = {}

    def field_row(self, xs, y: int, check: bool = True) -> np.ndarray:
        """Scattered u_{x,y} for the integer array ``xs``.

        The estimate compares the full grid with every other node; the grid
        doubles until it falls below the tolerance.
        """
        xs = np.asarray(xs, dtype=np.int64)
        scale = max(1.0, abs(self.amplitude))
        while True:
            coeffs, c, err = self._row_coefficients(y)
            M = coeffs.size
            big_x = np.any(np.abs(xs) >= M // 8)
            if not check or (err <= QUADRATURE_TOL * scale and not big_x):
                break
            try:
                self.refine()
            except QuadratureError:
                raise QuadratureError(f"row {y}: quadrature error estimate {err:.2e} at M = {M}") from None
        out = coeffs[xs % M].astype(complex)
        zp = self.z_P
        if self.from_bulk:
            out = out + np.where(xs >= 0, c * zp ** xs.astype(float), 0.0)
        else:
            out = out - np.where(xs < 0, c * zp ** xs.astype(float), 0.0)
        return out

    def quadrature_error(self, y: int) -> float:
        return self._row_coefficients(y)[2]

    def field_value(self, x: int, y: int, total: bool = False) -> complex:
        v = complex(self.field_row(np.array([x]), y)[0])
        if total:
            v += complex(np.asarray(self.incident_rows(np.array([x]), y))[0])
        return v

    def window(self, x0: int, x1: int, y0: int, y1: int) -> FieldGrid:
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0 if self.cfg.isolated else max(y0, 0), y1 + 1)
        sc = np.array([self.field_row(xs, int(y)) for y in ys])
        inc = np.array([self.incident_rows(xs, int(y)) for y in ys])
        return FieldGrid(xs, ys, sc, inc, tag="total", meta={"M": self.sampling.M})

    # -- named scalars --------------------------------------------------------

    def tip_opening(self) -> complex:
        """Total bond stretch v^t_{0,N} across the crack at the tip (closed form)."""
        self._need(Defect.CRACK)
        s = self.sampling
        if self.from_bulk:
            return complex(self.strength / complex(s.L_minus(np.asarray(self.z_P))) / s.l_plus0)
        return complex(self.strength * complex(s.L_plus(np.asarray(self.z_P))) / s.l_plus0)

    def tip_opening_limit(self, z_far: float = 1e12) -> complex:
        """v^inc_{0,N} + lim_{z -> inf} v_{N;+}(z)."""
        self._need(Defect.CRACK)
        return complex(self.strength + complex(self.plus(np.asarray(complex(z_far)))))

    def u_m1N_total(self) -> complex:
        """Closed-form total displacement u^t_{-1,N} ahead of the constraint tip."""
        self._need(Defect.CONSTRAINT)
        s = self.sampling
        zq, zp = self.ctx.z_q, self.z_P
        if self.from_bulk:
            qp = complex(q_symbol(zp, self.ctx.omega))
            lmp = complex(s.L_minus(np.asarray(zp)))
            return complex(-self.strength * zq / (zq - zp) * qp / (s.l_minus0_inv * lmp))
        lpp = complex(s.L_plus(np.asarray(zp)))
        return complex(-self.strength * zq / (zq - zp) * lpp / s.l_minus0_inv)

    def W_N(self, z):
        self._need(Defect.CONSTRAINT)
        z = np.asarray(z, dtype=complex)
        if self.from_bulk:
            return self.u_m1N + z * self.strength
        return self.u_m1N + 0.0 * z

    def _need(self, defect: Defect):
        if self.cfg.defect is not defect:
            raise LatticeError(f"quantity defined only for a {defect.value}")

    # -- residuals ------------------------------------------------------------

    def wh_residual(self) -> float:
        """Relative residual of the Wiener-Hopf equation on the sampling nodes."""
        s = self.sampling
        z = s.z
        L = s.L_nodes
        zp = self.z_P
        p, m = self.plus(z), self.minus(z)
        if self.cfg.defect is Defect.CRACK:
            if self.from_bulk:
                rhs = (1.0 - L) * self.strength * delta_plus(z / zp)
            else:
                rhs = -(1.0 - L) * self.strength * delta_minus(z / zp)
        else:
            if self.from_bulk:
                u_plus = -self.strength * delta_plus(z / zp)
                rhs = (1.0 - L) * (self.W_N(z) - q_symbol(z, self.ctx.omega) * u_plus)
            else:
                rhs = (1.0 - L) * (self.W_N(z) - self.strength * delta_minus(z / zp))
        lhs = L * p + m
        return float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(rhs))))


# ----------------------------------------------------------------------------
# Construction
# ----------------------------------------------------------------------------


def _sampling_for(cfg: ProblemConfig, ctx: SpectralContext, sampling, M: int | None):
    if sampling is not None:
        return sampling
    kw = {} if M is None else {"M": M}
    return factorize(KernelFunction(cfg, ctx), **kw)


def _regauged_copy(s: KernelSampling, m: int) -> KernelSampling:
    """Factorization on m nodes carrying over the gauge of ``s``."""
    new = factorize(s.kernel, rho=s.rho, M=m, max_M=max(m, MAX_FIELD_M))
    return new.regauged(s.gauge / new.gauge)


def _guide_incidence(cfg: ProblemConfig, ctx: SpectralContext, amplitude: complex) -> GuideIncidence:
    modes = propagating_modes(cfg, ctx)
    if cfg.mode_index >= len(modes):
        raise LatticeError(f"guide has {len(modes)} propagating modes, index {cfg.mode_index} requested")
    return GuideIncidence(modes[cfg.mode_index], amplitude)


def _context_for(ctx, inc):
    if ctx is not None:
        return ctx
    if isinstance(inc, BulkIncidence):
        return SpectralContext(inc.frequency, inc)
    raise LatticeError("guide incidence needs an explicit SpectralContext")


def _resolve_incidence(cfg, ctx, inc, amplitude):
    if cfg.source is Source.BULK:
        if not isinstance(inc, BulkIncidence):
            raise LatticeError("bulk incidence requires a BulkIncidence")
        if np.cos(inc.theta) <= 0.0:
            raise LatticeError("bulk incidence on the half-plane needs 0 < theta < pi/2")
        return inc
    if isinstance(inc, GuideIncidence):
        return inc
    return _guide_incidence(cfg, ctx, amplitude)


def solve_crack(
    cfg: ProblemConfig,
    inc: BulkIncidence | GuideIncidence | None,
    ctx: SpectralContext | None = None,
    sampling: KernelSampling | None = None,
    M: int | None = None,
    amplitude: complex = 1.0,
) -> WHSolution:
    """Solve the crack problem for bulk or guide-mode incidence."""
    if cfg.defect is not Defect.CRACK:
        raise LatticeError("solve_crack needs a crack configuration")
    ctx = _context_for(ctx, inc)
    inc = _resolve_incidence(cfg, ctx, inc, amplitude)
    s = _sampling_for(cfg, ctx, sampling, M)
    zp = complex(inc.z_P)
    if isinstance(inc, BulkIncidence):
        v0 = incident_strength_crack(cfg, inc)
        split = additive_split_crack_bulk(s, zp, v0)
        AC0 = -v0 / complex(s.L_minus(np.asarray(zp)))
    else:
        v0 = complex(-inc.amplitude * inc.mode.profile[-1])
        split = additive_split_crack_waveguide(s, zp, v0)
        AC0 = -v0 * complex(s.L_plus(np.asarray(zp)))

    def builder(m):
        return solve_crack(cfg, inc, ctx, sampling=_regauged_copy(s, m), amplitude=amplitude)

    return WHSolution(cfg, s, inc, v0, AC0, split, builder=builder)


def solve_constraint(
    cfg: ProblemConfig,
    inc: BulkIncidence | GuideIncidence | None,
    ctx: SpectralContext | None = None,
    sampling: KernelSampling | None = None,
    M: int | None = None,
    amplitude: complex = 1.0,
) -> WHSolution:
    """Solve the rigid-constraint problem for bulk or guide-mode incidence."""
    if cfg.defect is not Defect.CONSTRAINT:
        raise LatticeError("solve_constraint needs a constraint configuration")
    ctx = _context_for(ctx, inc)
    inc = _resolve_incidence(cfg, ctx, inc, amplitude)
    s = _sampling_for(cfg, ctx, sampling, M)
    zp = complex(inc.z_P)
    zq = ctx.z_q
    if abs(zq - zp) < 1e-12:
        raise LatticeError("z_q coincides with z_P")
    lbar = s.l_minus0_inv
    if isinstance(inc, BulkIncidence):
        u0 = incident_strength_constraint(cfg, inc)
        qp = complex(q_symbol(zp, ctx.omega))
        lmp = complex(s.L_minus(np.asarray(zp)))
        u_tot = -u0 * zq / (zq - zp) * qp / (lbar * lmp)
        u_m1 = u_tot - u0 / zp
        split = additive_split_constraint_bulk(s, zp, u0, u_m1)
        AC0 = u0 * zp * qp / lmp * zq / (zq - zp)
    else:
        u0 = complex(inc.amplitude * inc.mode.profile[-1])
        lpp = complex(s.L_plus(np.asarray(zp)))
        u_m1 = -u0 * zq / (zq - zp) * lpp / lbar
        split = additive_split_constraint_waveguide(s, zp, u0, u_m1)
        AC0 = u0 * zp * lpp * zq / (zq - zp)

    def builder(m):
        return solve_constraint(cfg, inc, ctx, sampling=_regauged_copy(s, m), amplitude=amplitude)

    return WHSolution(cfg, s, inc, u0, AC0, split, u_m1N=complex(u_m1), builder=builder)


def solve(cfg: ProblemConfig, inc, ctx: SpectralContext | None = None, **kw) -> WHSolution:
    if cfg.defect is Defect.CRACK:
        return solve_crack(cfg, inc, ctx, **kw)
    return solve_constraint(cfg, inc, ctx, **kw)


def u_m1N_quadrature(sol: WHSolution) -> complex:
    """Scattered u_{-1,N} recovered as the z^1 coefficient of (pi_{N;-} - W_N)/Q.

    Independent of the closed form only through the analyticity of u_{N;-}:
    a wrong u_{-1,N} leaves a pole of 1/Q at z_q inside the contour.
    """
    s = sol.sampling
    z = s.z
    num = sol.minus(z) - sol.W_N(z)
    if not sol.from_bulk:
        num = num + sol.strength * delta_minus(z / sol.z_P)
    u_minus = num / q_symbol(z, sol.ctx.omega)
    return complex(np.mean(u_minus * z ** (-1)))
