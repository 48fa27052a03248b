"""Transverse eigenmodes of the channel between the half-plane boundary and the defect."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import Defect, ProblemConfig
from .lattice import LatticeError, SpectralContext, _inside_root

# modes with Q at the band edges +-2 sit on a branch point and are not poles
EDGE_TOL = 1e-9


@dataclass(frozen=True)
class WaveguideMode:
    """Profile a_y on guide rows 0..N-1 (a_{N-1} = 1) and its longitudinal roots.

    ``z_inside`` is the root of z + 1/z = 4 - omega^2 - q inside the unit disk
    (a zero of L_+); ``z_outside`` = 1/z_inside carries a mode travelling to -x.
    """

    index: int
    q: float
    profile: np.ndarray
    z_inside: complex
    propagating: bool

    @property
    def z_outside(self) -> complex:
        return 1.0 / self.z_inside

    @property
    def rows(self) -> int:
        return self.profile.size


def guide_matrix(cfg: ProblemConfig) -> np.ndarray:
    """Transverse operator T with T a = Q a on the guide rows.

    Row 0 carries the boundary rule u_{-1} = -gamma u_0 + beta u_1; the last
    row carries the free crack face (diagonal +1) or the pinned row N (nothing).
    """
    n = cfg.N
    T = np.zeros((n, n))
    for i in range(n - 1):
        T[i, i + 1] = 1.0
        T[i + 1, i] = 1.0
    T[0, 0] += -cfg.gamma
    if n > 1:
        T[0, 1] += cfg.beta
    elif cfg.beta:
        raise LatticeError("a one-row guide needs beta = 0")
    if cfg.defect is Defect.CRACK:
        T[n - 1, n - 1] += 1.0
    return T


def guide_weights(cfg: ProblemConfig) -> np.ndarray:
    """Diagonal weights making T self-adjoint (row 0 halved when beta = 1)."""
    w = np.ones(cfg.N)
    if cfg.beta:
        w[0] = 0.5
    return w


def waveguide_modes(cfg: ProblemConfig, ctx: SpectralContext, include_edge: bool = False) -> list[WaveguideMode]:
    """Guide modes sorted by decreasing q (fundamental first).

    Modes whose q sits on a band edge (q = +-2) are dropped unless
    ``include_edge``: their longitudinal root is a branch point of lambda.
    """
    T = guide_matrix(cfg)
    w = guide_weights(cfg)
    sw = np.sqrt(w)
    S = (T * sw[:, None]) / sw[None, :]  # similarity to a symmetric matrix
    S = 0.5 * (S + S.T)
    q, vecs = np.linalg.eigh(S)
    order = np.argsort(-q)
    s_re = 4.0 - ctx.omega.real**2 + ctx.omega.imag**2
    out = []
    for k in order:
        qk = float(q[k])
        if not include_edge and abs(abs(qk) - 2.0) < EDGE_TOL:
            continue
        a = vecs[:, k] / sw
        a = a / a[-1]
        s = 4.0 - ctx.omega**2 - qk
        z_in = _inside_root(s)
        out.append(
            WaveguideMode(
                index=len(out),
                q=qk,
                profile=a,
                z_inside=complex(z_in),
                propagating=bool(abs(s_re - qk) <= 2.0),
            )
        )
    return out


def propagating_modes(cfg: ProblemConfig, ctx: SpectralContext) -> list[WaveguideMode]:
    return [m for m in waveguide_modes(cfg, ctx) if m.propagating]


def mode_inner(a: np.ndarray, b: np.ndarray, cfg: ProblemConfig) -> float:
    """Weighted inner product under which distinct profiles are orthogonal."""
    return float(np.sum(guide_weights(cfg) * a * b))
