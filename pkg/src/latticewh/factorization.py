"""Multiplicative and additive Wiener-Hopf splits on the circle |z| = rho.

Multiplicative split.  With zero winding number, log L has a Laurent
expansion sum_n a_n z^n on the contour, computed by FFT of log L at M
equispaced nodes.  The negative-power part gives L_+ (analytic and nonzero
outside the contour, L_+(inf) = 1 in the default gauge) and the rest gives L_-
(analytic and nonzero inside).  The node count doubles until the top Fourier
coefficients fall below a tolerance.

Inside the contour L_+ is continued as L/L_-, with lambda continued radially
from the unit circle; its zeros there are the longitudinal roots of the guided
modes (plus z_q for a constraint) and drive the waveguide residue series.

Additive splits are the closed forms for the four problem variants; each
returns evaluators C_+ and C_- together with C itself for residual checks.
"""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .kernel import KernelFunction, winding_number
from .lattice import LatticeError, continue_lambda, delta_minus, delta_plus, q_symbol

logger = logging.getLogger(__name__)

DEFAULT_M = 4096
MAX_M = 1 << 18
TAIL_TOL = 1e-13
CACHE_MAGIC = b"LWHF"
CACHE_VERSION = 1


class FactorizationError(ArithmeticError):
    """Factorization preconditions failed."""


@dataclass
class KernelSampling:
    """Sampled kernel with its Laurent split of log L."""

    kernel: KernelFunction
    rho: float
    M: int
    coeffs: np.ndarray  # A_n = a_n rho^n in FFT order
    gauge: complex = 1.0
    z: np.ndarray = field(init=False, repr=False)
    L_nodes: np.ndarray = field(init=False, repr=False)
    plus_nodes: np.ndarray = field(init=False, repr=False)
    minus_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        M = self.M
        t = np.exp(2j * np.pi * np.arange(M) / M)
        self.z = self.rho * t
        self.L_nodes = np.asarray(self.kernel(self.z), dtype=complex)
        n = np.fft.fftfreq(M, d=1.0 / M).astype(int)
        neg = np.where(n < 0, self.coeffs, 0.0)
        pos = np.where((n >= 0) & (n != -M // 2), self.coeffs, 0.0)
        # ifft(c)[j] * M = sum_n c_n t_j^n
        self.plus_nodes = self.gauge * np.exp(np.fft.ifft(neg) * M)
        self.minus_nodes = np.exp(np.fft.ifft(pos) * M) / self.gauge
        K = M // 2 - 1
        self._plus_poly = np.concatenate(([0.0], self.coeffs[M - np.arange(1, K + 1)]))[::-1]
        self._minus_poly = self.coeffs[: K + 1][::-1]

    # -- limits -------------------------------------------------------------

    @property
    def ctx(self):
        return self.kernel.ctx

    @property
    def l_plus0(self) -> complex:
        """lim_{z -> inf} L_+(z)."""
        return complex(self.gauge)

    @property
    def l_minus0_inv(self) -> complex:
        """lim_{z -> 0} 1/L_-(z)."""
        return complex(self.gauge * np.exp(-self.coeffs[0]))

    # -- pointwise evaluation -----------------------------------------------

    def _is_nodes(self, z) -> bool:
        return isinstance(z, np.ndarray) and z.shape == self.z.shape and np.array_equal(z, self.z)

    def _log_plus(self, z):
        w = self.rho / z
        return np.polyval(self._plus_poly, w)

    def _log_minus(self, z):
        return np.polyval(self._minus_poly, z / self.rho)

    def L_plus(self, z, continued: bool = False):
        """L_+(z); for |z| < rho uses L/L_- (radially continued lambda if ``continued``)."""
        if self._is_nodes(z):
            return self.plus_nodes
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        outer = ~(np.abs(z) < self.rho)
        out[outer] = self.gauge * np.exp(self._log_plus(z[outer]))
        if np.any(~outer):
            zi = z[~outer]
            if continued:
                lam = continue_lambda(zi, self.ctx)
                lv = self.kernel.of_lambda(lam)
            else:
                lv = self.kernel(zi)
            out[~outer] = lv / self.L_minus(zi)
        return out if out.ndim else complex(out)

    def L_minus(self, z):
        """L_-(z); for |z| > rho uses L/L_+."""
        if self._is_nodes(z):
            return self.minus_nodes
        z = np.asarray(z, dtype=complex)
        out = np.empty(z.shape, dtype=complex)
        inner = np.abs(z) <= self.rho
        out[inner] = np.exp(self._log_minus(z[inner])) / self.gauge
        if np.any(~inner):
            zo = z[~inner]
            out[~inner] = self.kernel(zo) / self.L_plus(zo)
        return out if out.ndim else complex(out)

    def L_minus_prime(self, z):
        """dL_-/dz for |z| <= rho."""
        z = np.asarray(z, dtype=complex)
        dpoly = np.polyder(self._minus_poly)
        return self.L_minus(z) * np.polyval(dpoly, z / self.rho) / self.rho

    def L_plus_prime(self, z):
        """dL_+/dz for |z| >= rho."""
        z = np.asarray(z, dtype=complex)
        dpoly = np.polyder(self._plus_poly)
        w = self.rho / z
        return self.L_plus(z) * np.polyval(dpoly, w) * (-self.rho / z**2)

    # -- diagnostics ----------------------------------------------------------

    def multiplicative_residual(self, z=None) -> float:
        """max |L_+ L_- - L| / max |L| on the given points (default: nodes)."""
        if z is None:
            z = self.z
        lv = np.asarray(self.kernel(z))
        r = np.abs(self.L_plus(z) * self.L_minus(z) - lv)
        return float(r.max() / np.abs(lv).max())

    def tail(self) -> float:
        M = self.M
        band = max(8, M // 32)
        idx = np.r_[M // 2 - band : M // 2 + band]
        return float(np.abs(self.coeffs[idx]).max())

    def regauged(self, c: complex) -> "KernelSampling":
        """Same split with L_+ -> c L_+, L_- -> L_-/c."""
        return KernelSampling(self.kernel, self.rho, self.M, self.coeffs, self.gauge * c)


def _log_coefficients(values: np.ndarray) -> np.ndarray:
    ang = np.unwrap(np.angle(values))
    logv = np.log(np.abs(values)) + 1j * ang
    return np.fft.fft(logv) / values.size


def factorize(
    L: KernelFunction,
    rho: float = 1.0,
    M: int = DEFAULT_M,
    tol: float = TAIL_TOL,
    max_M: int = MAX_M,
    gauge: complex = 1.0,
    cache_dir: str | Path | None = None,
) -> KernelSampling:
    """Split L = L_+ L_- on |z| = rho, refining M until the Laurent tail is below ``tol``."""
    ctx = L.ctx
    if not (ctx.R_L < rho < 1.0 / ctx.R_L):
        raise FactorizationError(f"contour radius {rho} outside ({ctx.R_L}, {1 / ctx.R_L})")
    if cache_dir is not None:
        path = Path(cache_dir) / (config_hash(L, rho, M, tol) + ".lwhf")
        if path.exists():
            coeffs, rho_c, gauge_c = load_coefficients(path)
            return KernelSampling(L, rho_c, coeffs.size, coeffs, gauge_c * gauge)
    m = int(M)
    while True:
        z = rho * np.exp(2j * np.pi * np.arange(m) / m)
        vals = np.asarray(L(z), dtype=complex)
        if not np.all(np.isfinite(vals)):
            raise FactorizationError("kernel not finite on the contour")
        wn = winding_number(vals)
        if wn != 0:
            raise FactorizationError(f"kernel index is {wn}, expected 0")
        coeffs = _log_coefficients(vals)
        sampling = KernelSampling(L, rho, m, coeffs, gauge)
        t = sampling.tail()
        if t < tol:
            break
        if 2 * m > max_M:
            logger.warning("factorization tail %.3e above tolerance at M = %d", t, m)
            break
        m *= 2
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_coefficients(path, sampling.coeffs, rho, 1.0)
    return sampling


# ----------------------------------------------------------------------------
# Coefficient cache (little-endian binary)
# ----------------------------------------------------------------------------


def config_hash(L: KernelFunction, rho: float, M: int, tol: float) -> str:
    cfg = L.cfg
    key = (
        f"v{CACHE_VERSION}|{cfg.defect.value}|{cfg.N}|{cfg.beta}|{cfg.gamma}|{int(cfg.isolated)}|"
        f"{L.ctx.omega!r}|{rho!r}|{M}|{tol!r}"
    )
    return hashlib.sha256(key.encode()).hexdigest()[:24]


def save_coefficients(path, coeffs: np.ndarray, rho: float, gauge: complex) -> None:
    coeffs = np.asarray(coeffs, dtype=complex)
    header = CACHE_MAGIC + struct.pack("<IIddd", CACHE_VERSION, coeffs.size, rho, gauge.real if
                                       isinstance(gauge, complex) else float(gauge),
                                       complex(gauge).imag)
    body = np.column_stack([coeffs.real, coeffs.imag]).astype("<f8").tobytes()
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(header + body)
    tmp.replace(path)


def load_coefficients(path):
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise FactorizationError(f"{path} is not a coefficient cache")
    version, m, rho, gr, gi = struct.unpack("<IIddd", data[4:36])
    if version != CACHE_VERSION:
        raise FactorizationError(f"cache version {version} unsupported")
    arr = np.frombuffer(data[36:], dtype="<f8").reshape(m, 2)
    return arr[:, 0] + 1j * arr[:, 1], rho, complex(gr, gi)


# ----------------------------------------------------------------------------
# Additive splits
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class AdditiveSplit:
    """C = C_+ + C_- with C_+ analytic outside and C_- inside the contour."""

    plus: Callable
    minus: Callable
    total: Callable

    def residual(self, z) -> float:
        c = self.total(z)
        return float(np.max(np.abs(self.plus(z) + self.minus(z) - c)) / max(1.0, np.max(np.abs(c))))


def additive_split_crack_bulk(s: KernelSampling, z_P: complex, v_inc_0N: complex) -> AdditiveSplit:
    """C_pm = pm v0 (1/L_-(z_P) - L_pm^{pm1}(z)) delta_{D+}(z/z_P)."""
    lmp_inv = 1.0 / complex(s.L_minus(np.asarray(z_P)))

    def plus(z):
        return v_inc_0N * (lmp_inv - s.L_plus(z)) * delta_plus(np.asarray(z) / z_P)

    def minus(z):
        return -v_inc_0N * (lmp_inv - 1.0 / s.L_minus(z)) * delta_plus(np.asarray(z) / z_P)

    def total(z):
        return (1.0 / s.L_minus(z) - s.L_plus(z)) * v_inc_0N * delta_plus(np.asarray(z) / z_P)

    return AdditiveSplit(plus, minus, total)


def additive_split_crack_waveguide(s: KernelSampling, z_P: complex, v_inc_0N: complex) -> AdditiveSplit:
    """C_pm = -+ v0 (L_+(z_P) - L_pm^{pm1}(z)) delta_{D-}(z/z_P)."""
    lpp = complex(s.L_plus(np.asarray(z_P)))

    def plus(z):
        return -v_inc_0N * (lpp - s.L_plus(z)) * delta_minus(np.asarray(z) / z_P)

    def minus(z):
        return v_inc_0N * (lpp - 1.0 / s.L_minus(z)) * delta_minus(np.asarray(z) / z_P)

    def total(z):
        return (s.L_plus(z) - 1.0 / s.L_minus(z)) * v_inc_0N * delta_minus(np.asarray(z) / z_P)

    return AdditiveSplit(plus, minus, total)


def additive_split_constraint_bulk(
    s: KernelSampling, z_P: complex, u_inc_0N: complex, u_m1N: complex
) -> AdditiveSplit:
    """Split of (1/L_- - L_+)(W_N + Q u^inc_{N;+}), W_N = u_{-1,N} + z u^inc_{0,N}.

    ``u_m1N`` is the scattered displacement at (-1, N).
    """
    omega = s.ctx.omega
    lp0 = s.l_plus0
    lm0 = s.l_minus0_inv
    lmp_inv = 1.0 / complex(s.L_minus(np.asarray(z_P)))
    qp = complex(q_symbol(z_P, omega))

    def _part(z, lpm, sign):
        z = np.asarray(z, dtype=complex)
        q = q_symbol(z, omega)
        brace = q * lpm - qp * lmp_inv + lm0 * (1.0 / z - 1.0 / z_P) + lp0 * (z - z_P)
        return sign * (
            u_m1N * (lpm - lm0) + z * u_inc_0N * (lpm - lp0) + u_inc_0N * delta_plus(z / z_P) * brace
        )

    def plus(z):
        return _part(z, s.L_plus(z), -1.0)

    def minus(z):
        return _part(z, 1.0 / s.L_minus(z), 1.0)

    def total(z):
        z = np.asarray(z, dtype=complex)
        w = u_m1N + z * u_inc_0N
        return (1.0 / s.L_minus(z) - s.L_plus(z)) * (w + q_symbol(z, omega) * u_inc_0N * delta_plus(z / z_P))

    return AdditiveSplit(plus, minus, total)


def additive_split_constraint_waveguide(
    s: KernelSampling, z_P: complex, spring_inc_0N: complex, u_m1N: complex
) -> AdditiveSplit:
    """Split of (W_N - pi^inc_{N;-})(1/L_- - L_+) with W_N = u_{-1,N}."""
    lm0 = s.l_minus0_inv
    lpp = complex(s.L_plus(np.asarray(z_P)))

    def plus(z):
        lp = s.L_plus(z)
        return -u_m1N * (lp - lm0) + spring_inc_0N * delta_minus(np.asarray(z) / z_P) * (lp - lpp)

    def minus(z):
        lm = 1.0 / s.L_minus(z)
        return u_m1N * (lm - lm0) - spring_inc_0N * delta_minus(np.asarray(z) / z_P) * (lm - lpp)

    def total(z):
        w = u_m1N - spring_inc_0N * delta_minus(np.asarray(z) / z_P)
        return w * (1.0 / s.L_minus(z) - s.L_plus(z))

    return AdditiveSplit(plus, minus, total)


# ----------------------------------------------------------------------------
# Zeros of L_+ inside the contour
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PlusZero:
    z: complex
    derivative: complex  # dL_+/dz at the zero
    multiplicity: int = 1


def _near_root(q, seed):
    d = np.sqrt(q * q - 4.0)
    c1, c2 = (q + d) / 2.0, (q - d) / 2.0
    return np.where(np.abs(c1 - seed) <= np.abs(c2 - seed), c1, c2)


def _plus_continued(s: KernelSampling, z: complex, lam_seed: complex):
    """L_+ and its derivative at z, continuing lambda from ``lam_seed``."""
    omega = s.ctx.omega
    q = complex(q_symbol(z, omega))
    lam = complex(_near_root(q, lam_seed))
    lv, dl = s.kernel.of_lambda(lam, derivative=True)
    dlam = lam / (2.0 * lam - q) * (-1.0 + 1.0 / z**2)
    lm = complex(s.L_minus(np.asarray(z)))
    dlm = complex(s.L_minus_prime(np.asarray(z)))
    g = complex(lv) / lm
    dg = complex(dl) * dlam / lm - complex(lv) * dlm / lm**2
    return g, dg, lam


def locate_plus_zeros(
    s: KernelSampling,
    n_radii: int = 240,
    sector: int = 16,
    margin: float = 1e-4,
    newton_tol: float = 1e-13,
) -> list[PlusZero]:
    """Zeros of L_+ between the inner branch point and the contour.

    Counts zeros by the argument principle on polar cells of a keyhole region
    (the ray from the outer branch point towards the origin is excluded), then
    refines each with Newton's method on L/L_-.
    """
    if s.rho != 1.0:
        raise LatticeError("zero location assumes the unit-circle contour")
    ctx = s.ctx
    M = s.M
    zb = sorted([ctx.z_h, ctx.z_r], key=abs)
    r_lo = abs(zb[0]) * (1.0 + margin)
    z_out = zb[1]
    t = np.linspace(0.0, 1.0, n_radii + 1)
    radii = 1.0 - (1.0 - r_lo) * 0.5 * (1.0 - np.cos(np.pi * t))
    phases = np.exp(2j * np.pi * np.arange(M) / M)
    n = np.fft.fftfreq(M, d=1.0 / M).astype(int)
    pos_mask = (n >= 0) & (n != -M // 2)

    # radial continuation of lambda through the circles
    G = np.empty((radii.size, M), dtype=complex)
    LAM = np.empty((radii.size, M), dtype=complex)
    lam = np.asarray(ctx.lam(phases), dtype=complex)
    sub = 4
    prev_r = 1.0
    for k, r in enumerate(radii):
        for rr in np.linspace(prev_r, r, sub + 1)[1:]:
            lam = _near_root(q_symbol(rr * phases, ctx.omega), lam)
        prev_r = r
        coeff_r = np.where(pos_mask, s.coeffs * r ** np.maximum(n, 0), 0.0)
        lm = np.exp(np.fft.ifft(coeff_r) * M) / s.gauge
        G[k] = s.kernel.of_lambda(lam) / lm
        LAM[k] = lam
    arg = np.angle(G)
    wrap = lambda d: (d + np.pi) % (2.0 * np.pi) - np.pi  # noqa: E731
    arc = wrap(np.roll(arg, -1, axis=1) - arg)  # j -> j+1 along each circle
    rad = wrap(arg[1:] - arg[:-1])  # k -> k+1 (inward) along each ray
    arc_cum = np.concatenate([np.zeros((radii.size, 1)), np.cumsum(np.concatenate([arc, arc], axis=1), axis=1)], axis=1)

    # keyhole: boundaries at rays j_b+1, j_b+1+sector, ..., ending at j_b+M
    jb = int(np.floor((np.angle(z_out) % (2 * np.pi)) / (2 * np.pi / M)))
    cut_inside = abs(z_out) > r_lo
    start = jb + 1 if cut_inside else 0
    stop = start + M - (1 if cut_inside else 0)
    bounds = list(range(start, stop, sector))
    if bounds[-1] != stop:
        bounds.append(stop)

    candidates = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        ja, jbb = a % M, b % M
        outer = arc_cum[:-1, b] - arc_cum[:-1, a]
        inner = arc_cum[1:, b] - arc_cum[1:, a]
        wnum = (outer - inner + rad[:, jbb] - rad[:, ja]) / (2.0 * np.pi)
        for k in np.flatnonzero(np.rint(wnum) != 0):
            w = int(np.rint(wnum[k]))
            if w < 0:
                logger.warning("negative cell winding %d; kernel pole inside search region?", w)
                continue
            jm = ((a + b) // 2) % M
            rm = 0.5 * (radii[k] + radii[k + 1])
            for i in range(w):
                off = np.exp(2j * np.pi * (i / max(w, 1))) * 0.25 * (radii[k] - radii[k + 1])
                candidates.append((rm * phases[jm] + off, LAM[k, jm], w, (a, k)))

    zeros: list[PlusZero] = []
    cells: list[set] = []
    for z0, lam0, w, cell in candidates:
        z = complex(z0)
        lam = complex(lam0)
        ok = False
        cap = 0.5 * (1.0 - r_lo) / n_radii
        for _ in range(80):
            g, dg, lam = _plus_continued(s, z, lam)
            step = g / dg
            if not np.isfinite(step):
                break
            if abs(step) > cap:
                step *= cap / abs(step)
            z -= step
            if not (r_lo * 0.9 < abs(z) < 1.0):
                break
            if abs(step) < newton_tol * max(1.0, abs(z)):
                ok = True
                break
        g, dg, lam = _plus_continued(s, z, lam)
        if not np.isfinite(z):
            logger.warning("Newton refinement of an L_+ zero left the region near %s", z0)
            continue
        if not ok and abs(g) > 1e-10:
            logger.warning("Newton refinement of an L_+ zero did not converge near %s", z0)
            continue
        dup = [i for i, p in enumerate(zeros) if abs(z - p.z) < 1e-8]
        if dup:
            # a repeated zero may straddle neighbouring cells
            i = dup[0]
            if cell not in cells[i] and abs(zeros[i].derivative) < 1e-6:
                cells[i].add(cell)
                zeros[i] = PlusZero(zeros[i].z, zeros[i].derivative, zeros[i].multiplicity + w)
            continue
        mult = w if w > 1 and abs(dg) < 1e-6 else 1
        zeros.append(PlusZero(complex(z), complex(dg), mult))
        cells.append({cell})
    order = sorted(range(len(zeros)), key=lambda i: -abs(zeros[i].z))
    return [zeros[i] for i in order]


def plus_zero_count(s: KernelSampling, **kw) -> int:
    return len(locate_plus_zeros(s, **kw))
