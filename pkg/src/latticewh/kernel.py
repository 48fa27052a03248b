"""Scalar Wiener-Hopf kernels for a crack or rigid constraint above a half-plane boundary.

Geometry of the reduced problem: rows y >= 0, boundary row y = 0 obeying

    u[x+1,0] + u[x-1,0] + (1 + beta) u[x,1] + (omega^2 - 4 - gamma) u[x,0] = 0,

and for x >= 0 either the bonds between rows N-1 and N are broken (crack) or
row N is pinned (constraint).  The waveguide between the boundary and the
defect enters the kernel through a structure factor multiplying the
single-defect kernel:

    crack:       L = F_k h/r,      F_k = 1 - C_B(lambda) lambda^(2N-1)
    constraint:  L = F_c Q/(r h),  F_c = 1 + C_B(lambda) lambda^(2N)

Both are functions of lambda alone (Q = lambda + 1/lambda), which lets the
same code serve pointwise evaluation and analytic continuation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .lattice import (
    LatticeError,
    ResonanceError,
    SpectralContext,
    boundary_factor,
    lambda_eval,
    q_derivative,
    q_symbol,
)

RESONANCE_TOL = 1e-13


class Defect(str, Enum):
    CRACK = "crack"
    CONSTRAINT = "constraint"


class Source(str, Enum):
    BULK = "bulk"
    WAVEGUIDE = "waveguide"


@dataclass(frozen=True)
class BoundaryCase:
    """Half-plane boundary row coefficients."""

    beta: float
    gamma: float
    case_id: str

    @classmethod
    def from_id(cls, case_id: str) -> "BoundaryCase":
        try:
            beta, gamma = CASES[case_id.upper()]
        except KeyError:
            raise LatticeError(f"unknown boundary case {case_id!r}") from None
        return cls(beta, gamma, case_id.upper())

    @classmethod
    def from_coefficients(cls, beta: float, gamma: float) -> "BoundaryCase":
        for cid, bg in CASES.items():
            if bg == (beta, gamma):
                return cls(float(beta), float(gamma), cid)
        raise LatticeError(f"(beta, gamma) = ({beta}, {gamma}) is not one of H1-H4")

    def mirror(self) -> str:
        """Description of the image rule behind this boundary."""
        return {
            "H1": "u[x,-1] = 0",
            "H2": "u[x,-1] = u[x,0]",
            "H3": "u[x,-1] = -u[x,0]",
            "H4": "u[x,-1] = u[x,1]",
        }[self.case_id]


CASES = {"H1": (0.0, 0.0), "H2": (0.0, -1.0), "H3": (0.0, 1.0), "H4": (1.0, 0.0)}


@dataclass(frozen=True)
class ProblemConfig:
    """One reduced half-plane problem."""

    defect: Defect
    N: int
    boundary: BoundaryCase
    source: Source = Source.BULK
    parity: int = 0
    mode_index: int = 0
    isolated: bool = False  # drop the boundary row: the lone defect in the full plane

    def __post_init__(self):
        object.__setattr__(self, "defect", Defect(self.defect))
        object.__setattr__(self, "source", Source(self.source))
        if isinstance(self.boundary, str):
            object.__setattr__(self, "boundary", BoundaryCase.from_id(self.boundary))
        if self.parity not in (0, 1):
            raise LatticeError("parity bit must be 0 or 1")
        if int(self.N) != self.N or self.N < 1:
            raise LatticeError(f"half-spacing N must be a positive integer, got {self.N}")
        if self.defect is Defect.CRACK and self.N < 2 and self.boundary.beta != 0.0:
            # the boundary row would lose two bonds at once, which the reduced
            # row equation does not describe
            raise LatticeError("a crack next to a mirror row (H4) needs N >= 2")
        if self.isolated and self.source is Source.WAVEGUIDE:
            raise LatticeError("an isolated defect has no waveguide to feed the incident mode")

    @property
    def beta(self) -> float:
        return self.boundary.beta

    @property
    def gamma(self) -> float:
        return self.boundary.gamma

    @property
    def width(self) -> int:
        """Full-plane waveguide width N_w = 2N - parity."""
        return 2 * self.N - self.parity

    def replace(self, **kw) -> "ProblemConfig":
        data = dict(
            defect=self.defect,
            N=self.N,
            boundary=self.boundary,
            source=self.source,
            parity=self.parity,
            mode_index=self.mode_index,
            isolated=self.isolated,
        )
        data.update(kw)
        return ProblemConfig(**data)


# ----------------------------------------------------------------------------
# Transfer coefficients across the waveguide rows
# ----------------------------------------------------------------------------


def _guard(den, what: str):
    if np.any(np.abs(den) < RESONANCE_TOL):
        raise ResonanceError(f"{what} denominator vanishes")


def transfer_coefficients_crack(z, N: int, ctx: SpectralContext):
    """(f_1, f_{N-2}) for rows 0..N-1 between the boundary and a crack.

    f_y is the weight of u_0 in u_y when u_0 and u_{N-1} are prescribed; the
    ladder is written in powers of lambda with |lambda| <= 1 only.
    """
    if N < 2:
        raise LatticeError("crack transfer coefficients need N >= 2")
    lam = np.asarray(lambda_eval(z, ctx), dtype=complex)
    den = 1.0 - lam ** (2 * N - 2)
    _guard(den, "waveguide resonance (lambda^(2N-2) = 1)")
    f1 = (lam - lam ** (2 * N - 3)) / den
    fN2 = (lam ** (N - 2) - lam**N) / den
    return f1, fN2


def transfer_coefficients_constraint(z, N: int, ctx: SpectralContext):
    """(f_1, f_{N-1}) for rows 0..N between the boundary and a pinned row N."""
    lam = np.asarray(lambda_eval(z, ctx), dtype=complex)
    den = 1.0 - lam ** (2 * N)
    _guard(den, "waveguide resonance (lambda^(2N) = 1)")
    f1 = (lam - lam ** (2 * N - 1)) / den
    fN1 = (lam ** (N - 1) - lam ** (N + 1)) / den
    return f1, fN1


def _boundary_ratio(q, f1, fN, beta, gamma):
    den = q + gamma - (1.0 + beta) * f1
    _guard(den, "boundary-row resonance (Q + gamma - (1+beta) f_1)")
    return (1.0 + beta) * fN / den


def v_crack(z, cfg: ProblemConfig, ctx: SpectralContext):
    """V_k with v_N^F = V_k u_{N-1}^F, from the transfer coefficients."""
    q = np.asarray(q_symbol(z, ctx.omega), dtype=complex)
    lam = np.asarray(lambda_eval(z, ctx), dtype=complex)
    f1, fN2 = transfer_coefficients_crack(z, cfg.N, ctx)
    den = 1.0 / lam - 1.0
    _guard(den, "lambda = 1")
    ratio = _boundary_ratio(q, f1, fN2, cfg.beta, cfg.gamma)
    return fN2 * ratio / den - (q - 2.0 - f1 + 1.0 / lam) / den


def v_constraint(z, cfg: ProblemConfig, ctx: SpectralContext):
    """V_c with u_{N-1}^F = V_c u_N^F, from the transfer coefficients."""
    q = np.asarray(q_symbol(z, ctx.omega), dtype=complex)
    f1, fN1 = transfer_coefficients_constraint(z, cfg.N, ctx)
    ratio = _boundary_ratio(q, f1, fN1, cfg.beta, cfg.gamma)
    return ratio * fN1 + f1


# ----------------------------------------------------------------------------
# Kernels as functions of lambda
# ----------------------------------------------------------------------------


def boundary_coefficient(lam, cfg: ProblemConfig):
    """C_B(lambda) of the boundary row, identically 0 for an isolated defect."""
    if cfg.isolated:
        return np.zeros(np.shape(lam), dtype=complex)
    return boundary_factor(lam, cfg.beta, cfg.gamma)


def _cb_and_derivative(lam, beta, gamma):
    num = lam - beta / lam + gamma
    den = 1.0 / lam - beta * lam + gamma
    dnum = 1.0 + beta / lam**2
    dden = -1.0 / lam**2 - beta
    c = -num / den
    dc = -(dnum * den - num * dden) / den**2
    return c, dc


def structure_factor(lam, cfg: ProblemConfig):
    lam = np.asarray(lam, dtype=complex)
    c = boundary_coefficient(lam, cfg)
    if cfg.defect is Defect.CRACK:
        return 1.0 - c * lam ** (2 * cfg.N - 1)
    return 1.0 + c * lam ** (2 * cfg.N)


def base_kernel(lam, defect: Defect):
    """h/r for a crack, Q/(r h) for a constraint, written in lambda."""
    lam = np.asarray(lam, dtype=complex)
    if Defect(defect) is Defect.CRACK:
        return (1.0 - lam) / (1.0 + lam)
    return (1.0 + lam * lam) / (1.0 - lam * lam)


def kernel_of_lambda(lam, cfg: ProblemConfig, derivative: bool = False):
    """L as a function of lambda, optionally with dL/dlambda."""
    lam = np.asarray(lam, dtype=complex)
    c, dc = _cb_and_derivative(lam, cfg.beta, cfg.gamma)
    if cfg.isolated:
        c, dc = 0.0 * c, 0.0 * dc
    if cfg.defect is Defect.CRACK:
        m = 2 * cfg.N - 1
        s = 1.0 - c * lam**m
        ds = -(dc * lam**m + c * m * lam ** (m - 1))
        b = (1.0 - lam) / (1.0 + lam)
        db = -2.0 / (1.0 + lam) ** 2
    else:
        m = 2 * cfg.N
        s = 1.0 + c * lam**m
        ds = dc * lam**m + c * m * lam ** (m - 1)
        b = (1.0 + lam * lam) / (1.0 - lam * lam)
        db = 4.0 * lam / (1.0 - lam * lam) ** 2
    if derivative:
        return s * b, ds * b + s * db
    return s * b


def v_closed(lam, cfg: ProblemConfig):
    """Closed forms of V_k and V_c from the boundary-adapted transverse solution.

    The field below the defect is proportional to lambda^-y + C_B(lambda) lambda^y,
    which gives the row ratios directly.
    """
    lam = np.asarray(lam, dtype=complex)
    c = boundary_coefficient(lam, cfg)
    N = cfg.N
    if cfg.defect is Defect.CRACK:
        a = 1.0 + c * lam ** (2 * N - 2)
        return -(2.0 + c * lam ** (2 * N - 2) - c * lam ** (2 * N - 1)) / a
    return lam * (1.0 + c * lam ** (2 * N - 2)) / (1.0 + c * lam ** (2 * N))


def single_defect_kernel(z, defect: Defect, ctx: SpectralContext):
    """N -> infinity limit: h/r or Q/(r h)."""
    return base_kernel(lambda_eval(z, ctx), defect)


@dataclass(frozen=True)
class KernelFunction:
    """The kernel L(z) for one configuration and frequency."""

    cfg: ProblemConfig
    ctx: SpectralContext

    def __call__(self, z):
        return kernel_eval(z, self.cfg, self.ctx)

    def of_lambda(self, lam, derivative: bool = False):
        return kernel_of_lambda(lam, self.cfg, derivative)

    def derivative(self, z, lam=None):
        """dL/dz, using the supplied lambda branch if given."""
        z = np.asarray(z, dtype=complex)
        if lam is None:
            lam = lambda_eval(z, self.ctx)
        lam = np.asarray(lam, dtype=complex)
        q = lam + 1.0 / lam
        _, dl = kernel_of_lambda(lam, self.cfg, derivative=True)
        return dl * (lam / (2.0 * lam - q)) * q_derivative(z)

    def v_form(self, z):
        return kernel_from_v(z, self.cfg, self.ctx)


def kernel_eval(z, cfg: ProblemConfig, ctx: SpectralContext):
    """L(z) in factored (structure factor times base kernel) form."""
    out = kernel_of_lambda(lambda_eval(z, ctx), cfg)
    return out if np.ndim(out) else complex(out)


def kernel_from_v(z, cfg: ProblemConfig, ctx: SpectralContext):
    """L(z) from the transfer function V (cross-check only)."""
    lam = np.asarray(lambda_eval(z, ctx), dtype=complex)
    if cfg.defect is Defect.CRACK:
        v = v_crack(z, cfg, ctx)
        out = (1.0 + v) / (1.0 + v / (1.0 - lam))
    else:
        q = np.asarray(q_symbol(z, ctx.omega), dtype=complex)
        v = v_constraint(z, cfg, ctx)
        out = q / (1.0 / lam - v)
    return out if np.ndim(out) else complex(out)


def winding_number(values) -> int:
    """Winding number about 0 of a closed, densely sampled curve."""
    values = np.asarray(values, dtype=complex)
    ang = np.angle(np.append(values, values[0]))
    d = np.diff(ang)
    d = (d + np.pi) % (2.0 * np.pi) - np.pi
    return int(np.rint(d.sum() / (2.0 * np.pi)))
