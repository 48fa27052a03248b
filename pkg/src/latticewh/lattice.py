"""Square-lattice dispersion machinery and branch-correct special functions.

The anti-plane lattice with unit spacing and unit bond stiffness obeys

    u[x+1, y] + u[x-1, y] + u[x, y+1] + u[x, y-1] - 4 u[x, y] + omega^2 u[x, y] = 0

at intact sites.  With the one-sided transforms

    u_{y;+}(z) = sum_{x >= 0} u[x, y] z^{-x},    u_{y;-}(z) = sum_{x < 0} u[x, y] z^{-x},

the row equation becomes ``u_{y+1} + u_{y-1} = Q(z) u_y`` where

    Q(z) = 4 - z - 1/z - omega^2,   H = Q - 2,   R = Q + 2.

The decaying transverse factor is lambda = (r - h)/(r + h) with h = sqrt(H),
r = sqrt(R) and the branch chosen so that |lambda| <= 1.  Equivalently lambda is
the small root of ``lambda^2 - Q lambda + 1 = 0``.

Damping enters through a complex frequency omega = omega1 + i omega2 with
omega2 > 0; this moves every branch point off the unit circle so that
|z| = 1 is a valid integration contour.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

logger = logging.getLogger(__name__)

SQRT8 = 2.0 * np.sqrt(2.0)
#: real frequencies at which the lattice band structure degenerates
EXCLUDED_FREQUENCIES = (0.0, 2.0, SQRT8)


class LatticeError(ValueError):
    """Invalid lattice parameters."""


class BranchCutError(ArithmeticError):
    """Evaluation requested on the branch cut of lambda."""


class ResonanceError(ArithmeticError):
    """A resonant denominator vanished."""


# ----------------------------------------------------------------------------
# Domain types
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class Frequency:
    """Complex lattice frequency omega = omega1 + i omega2."""

    omega: complex
    exclusion_tol: float = 1e-6

    def __post_init__(self):
        om = complex(self.omega)
        object.__setattr__(self, "omega", om)
        if not om.imag > 0.0:
            raise LatticeError(f"damping omega2 must be positive, got {om.imag}")
        if not (0.0 <= om.real <= SQRT8):
            raise LatticeError(f"omega1 = {om.real} outside [0, 2 sqrt 2]")
        for w in EXCLUDED_FREQUENCIES:
            if abs(om.real - w) < self.exclusion_tol:
                raise LatticeError(f"omega1 = {om.real} coincides with band-edge value {w:.6g}")

    @property
    def omega1(self) -> float:
        return self.omega.real

    @property
    def omega2(self) -> float:
        return self.omega.imag

    @property
    def omega_sq(self) -> complex:
        return self.omega * self.omega


def _as_frequency(omega) -> Frequency:
    return omega if isinstance(omega, Frequency) else Frequency(complex(omega))


def dispersion_residual(kappa_x: complex, kappa_y: complex, omega: complex) -> complex:
    """Return omega^2 - 4 (sin^2(kx/2) + sin^2(ky/2)); zero on the dispersion surface."""
    kappa_x, kappa_y, omega = complex(kappa_x), complex(kappa_y), complex(omega)
    return omega * omega - 4.0 * (np.sin(kappa_x / 2) ** 2 + np.sin(kappa_y / 2) ** 2)


def _solve_wavenumber(omega: complex, theta: float) -> complex:
    """Complex kappa with kappa2 > 0 such that (kappa cos theta, kappa sin theta) is on the surface."""
    a, b = np.cos(theta), np.sin(theta)

    def f(k):
        return 4.0 * (np.sin(a * k / 2) ** 2 + np.sin(b * k / 2) ** 2)

    def df(k):
        return 2.0 * (a * np.sin(a * k) + b * np.sin(b * k))

    w1sq = omega.real**2
    kmax = np.pi / max(abs(a), abs(b))
    ks = np.linspace(0.0, kmax, 2001)
    fs = f(ks) - w1sq
    idx = np.flatnonzero(np.sign(fs[:-1]) != np.sign(fs[1:]))
    if idx.size == 0:
        raise LatticeError(
            f"no propagating bulk wave at omega1 = {omega.real} for incidence angle {theta}"
        )
    i = idx[0]
    k = complex(brentq(lambda t: f(t) - w1sq, ks[i], ks[i + 1]))
    target = omega * omega
    for _ in range(60):
        step = (f(k) - target) / df(k)
        k -= step
        if abs(step) < 1e-15 * max(1.0, abs(k)):
            break
    if not k.imag > 0:
        raise LatticeError(f"wavenumber {k} does not decay along the incidence direction")
    return k


@dataclass(frozen=True)
class BulkIncidence:
    """Plane wave A exp(i kx x + i ky y) on the intact lattice."""

    frequency: Frequency
    theta: float
    amplitude: complex = 1.0
    kappa: complex = field(init=False)

    def __post_init__(self):
        freq = _as_frequency(self.frequency)
        object.__setattr__(self, "frequency", freq)
        object.__setattr__(self, "amplitude", complex(self.amplitude))
        if not (0.0 < self.theta <= np.pi):
            raise LatticeError(f"incidence angle {self.theta} outside (0, pi]")
        object.__setattr__(self, "kappa", _solve_wavenumber(freq.omega, float(self.theta)))

    @property
    def kappa_x(self) -> complex:
        return self.kappa * np.cos(self.theta)

    @property
    def kappa_y(self) -> complex:
        return self.kappa * np.sin(self.theta)

    @property
    def z_P(self) -> complex:
        return complex(np.exp(1j * self.kappa_x))

    @property
    def lambda_P(self) -> complex:
        """Transverse factor exp(i ky), which equals lambda(z_P)."""
        return complex(np.exp(1j * self.kappa_y))

    def with_amplitude(self, amplitude: complex) -> "BulkIncidence":
        return BulkIncidence(self.frequency, self.theta, amplitude)


# ----------------------------------------------------------------------------
# Symbols
# ----------------------------------------------------------------------------


def q_symbol(z, omega):
    """Q(z) = 4 - z - 1/z - omega^2 (vectorised)."""
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise LatticeError("Q is singular at z = 0")
    om = complex(omega.omega if isinstance(omega, Frequency) else omega)
    out = 4.0 - z - 1.0 / z - om * om
    return out if out.ndim else complex(out)


def q_derivative(z, omega=None):
    """dQ/dz = -1 + 1/z^2."""
    z = np.asarray(z, dtype=complex)
    out = -1.0 + 1.0 / (z * z)
    return out if out.ndim else complex(out)


def lambda_from_q(q):
    """Root of lambda^2 - q lambda + 1 = 0 with |lambda| <= 1.

    This is the h-flip rule: take principal roots h = sqrt(q - 2), r = sqrt(q + 2)
    and flip the sign of h wherever |(r - h)/(r + h)| > 1.
    """
    q = np.asarray(q, dtype=complex)
    h = np.sqrt(q - 2.0)
    r = np.sqrt(q + 2.0)
    # r + h and r - h are never both zero since r^2 - h^2 = 4
    num = r - h
    den = r + h
    flip = np.abs(num) > np.abs(den)
    h = np.where(flip, -h, h)
    num = r - h
    den = r + h
    lam = num / den
    return lam if lam.ndim else complex(lam)


def hr_from_q(q):
    """Return (h, r) consistent with lambda_from_q."""
    q = np.asarray(q, dtype=complex)
    h = np.sqrt(q - 2.0)
    r = np.sqrt(q + 2.0)
    flip = np.abs(r - h) > np.abs(r + h)
    h = np.where(flip, -h, h)
    if h.ndim == 0:
        return complex(h), complex(r)
    return h, r


def dlambda_dq(lam, q):
    """Derivative of a root of lambda^2 - q lambda + 1 with respect to q."""
    return lam / (2.0 * lam - q)


def on_branch_cut(q, tol: float = 1e-13):
    """True where Q lies on the open segment (-2, 2), where |lambda| = 1."""
    q = np.asarray(q, dtype=complex)
    return (np.abs(q.imag) <= tol * (1.0 + np.abs(q))) & (np.abs(q.real) < 2.0 - tol)


def boundary_factor(zeta, beta: float, gamma: float):
    """C_B(zeta) = -F_B(zeta)/F_B(1/zeta) with F_B(zeta) = zeta - beta/zeta + gamma."""
    zeta = np.asarray(zeta, dtype=complex)
    num = zeta - beta / zeta + gamma
    den = 1.0 / zeta - beta * zeta + gamma
    if np.any(np.abs(den) < 1e-14 * (1.0 + np.abs(num))):
        raise ResonanceError("boundary reflection denominator F_B(1/zeta) vanishes")
    out = -num / den
    return out if out.ndim else complex(out)


def delta_plus(z):
    """delta_{D+}(z) = sum_{x>=0} z^{-x} = 1/(1 - 1/z), valid for |z| > 1."""
    z = np.asarray(z, dtype=complex)
    out = z / (z - 1.0)
    return out if out.ndim else complex(out)


def delta_minus(z):
    """delta_{D-}(z) = sum_{x<=-1} z^{-x} = z/(1 - z), valid for |z| < 1."""
    z = np.asarray(z, dtype=complex)
    out = z / (1.0 - z)
    return out if out.ndim else complex(out)


def _inside_root(c: complex) -> complex:
    """Root of z^2 - c z + 1 = 0 with |z| < 1."""
    d = np.sqrt(complex(c * c - 4.0))
    z1, z2 = (c + d) / 2.0, (c - d) / 2.0
    big = z1 if abs(z1) >= abs(z2) else z2
    return 1.0 / big


def branch_points(omega):
    """Zeros of H, R and Q.

    Returns ``((z_h, 1/z_h), (z_r, 1/z_r), z_q)`` with the first member of each pair
    and ``z_q`` inside the unit disk.
    """
    freq = _as_frequency(omega)
    w2 = freq.omega_sq
    roots = []
    for c in (2.0 - w2, 6.0 - w2, 4.0 - w2):
        zi = _inside_root(c)
        if abs(abs(zi) - 1.0) < 1e-14:
            raise LatticeError("confluent branch points on the unit circle")
        roots.append(zi)
    z_h, z_r, z_q = roots
    return (z_h, 1.0 / z_h), (z_r, 1.0 / z_r), z_q


@dataclass(frozen=True)
class SpectralContext:
    """Shared analytic data for one frequency (and optionally one incident wave)."""

    frequency: Frequency
    incidence: BulkIncidence | None = None

    def __post_init__(self):
        object.__setattr__(self, "frequency", _as_frequency(self.frequency))
        (zh, _), (zr, _), zq = branch_points(self.frequency)
        object.__setattr__(self, "_zh", zh)
        object.__setattr__(self, "_zr", zr)
        object.__setattr__(self, "_zq", zq)

    @classmethod
    def from_omega(cls, omega: complex, incidence: BulkIncidence | None = None) -> "SpectralContext":
        return cls(Frequency(omega), incidence)

    @property
    def omega(self) -> complex:
        return self.frequency.omega

    @property
    def z_h(self) -> complex:
        return self._zh

    @property
    def z_r(self) -> complex:
        return self._zr

    @property
    def z_q(self) -> complex:
        return self._zq

    @property
    def R_L(self) -> float:
        return max(abs(self._zh), abs(self._zr))

    @property
    def R_plus(self) -> float:
        if self.incidence is None:
            return 0.0
        return float(np.exp(-self.incidence.kappa.imag))

    @property
    def R_minus(self) -> float:
        if self.incidence is None:
            return np.inf
        return float(np.exp(self.incidence.kappa.imag * np.cos(self.incidence.theta)))

    def Q(self, z):
        return q_symbol(z, self.omega)

    def lam(self, z):
        return lambda_eval(z, self)

    def in_annulus(self, z) -> bool:
        a = abs(complex(z))
        lo = max(self.R_L, self.R_plus)
        hi = min(1.0 / self.R_L, self.R_minus)
        return lo < a < hi


def lambda_eval(z, ctx: SpectralContext, strict: bool = False):
    """lambda(z) on the branch with |lambda| <= 1.

    With ``strict`` the evaluation refuses points on the open cut where |lambda| = 1;
    branch points themselves return lambda = +1 or -1.
    """
    q = q_symbol(z, ctx.omega)
    if strict and np.any(on_branch_cut(q)):
        raise BranchCutError("lambda evaluated on its branch cut")
    return lambda_from_q(q)


def continue_lambda(z, ctx: SpectralContext, steps: int = 400):
    """lambda continued radially inward/outward from the unit circle.

    For points inside the unit disk this is the analytic continuation of the
    unit-circle values along rays, which crosses the |lambda| = 1 set without
    jumping.  Rays passing through a branch point are not supported.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    phase = z / np.abs(z)
    lam = lambda_from_q(q_symbol(phase, ctx.omega))
    lam = np.atleast_1d(lam)
    if z.size == 1:
        return np.array([_continue_scalar(complex(z[0]), complex(phase[0]), complex(lam[0]), ctx.omega, steps)])
    radii = np.abs(z)
    for t in np.linspace(0.0, 1.0, steps + 1)[1:]:
        rr = 1.0 + t * (radii - 1.0)
        q = q_symbol(rr * phase, ctx.omega)
        d = np.sqrt(q * q - 4.0)
        c1 = (q + d) / 2.0
        c2 = (q - d) / 2.0
        lam = np.where(np.abs(c1 - lam) <= np.abs(c2 - lam), c1, c2)
    return lam


def _continue_scalar(z: complex, phase: complex, lam: complex, omega: complex, steps: int) -> complex:
    """Scalar path of continue_lambda, without array overhead."""
    c = 4.0 - omega * omega
    radius = abs(z)
    for k in range(1, steps + 1):
        w = (1.0 + k / steps * (radius - 1.0)) * phase
        q = c - w - 1.0 / w
        d = cmath.sqrt(q * q - 4.0)
        c1, c2 = (q + d) / 2.0, (q - d) / 2.0
        lam = c1 if abs(c1 - lam) <= abs(c2 - lam) else c2
    return lam


# ----------------------------------------------------------------------------
# Incident waves
# ----------------------------------------------------------------------------


def incident_bulk(x, y, inc: BulkIncidence):
    """A exp(i kx x + i ky y)."""
    x = np.asarray(x)
    y = np.asarray(y)
    out = inc.amplitude * np.exp(1j * (inc.kappa_x * x + inc.kappa_y * y))
    return out if np.ndim(out) else complex(out)


def reflection_coefficient(inc: BulkIncidence, beta: float, gamma: float) -> complex:
    """c_B = C_B(exp(-i ky)) for the half-plane boundary case (beta, gamma)."""
    return complex(boundary_factor(np.exp(-1j * inc.kappa_y), beta, gamma))


def incident_halfplane(x, y, inc: BulkIncidence, beta: float, gamma: float, extend: bool = False):
    """Incident plus boundary-reflected wave A e^{i kx x}(e^{i ky y} + c_B e^{-i ky y}).

    ``extend`` continues the two plane waves to y < 0 (full-plane use).
    """
    y_arr = np.asarray(y)
    if not extend and np.any(y_arr < 0):
        raise LatticeError("half-plane incident field defined for y >= 0 only")
    cb = reflection_coefficient(inc, beta, gamma)
    x = np.asarray(x)
    out = (
        inc.amplitude
        * np.exp(1j * inc.kappa_x * x)
        * (np.exp(1j * inc.kappa_y * y_arr) + cb * np.exp(-1j * inc.kappa_y * y_arr))
    )
    return out if np.ndim(out) else complex(out)
