"""Square-lattice equations of motion with broken bonds, pinned sites and a boundary row.

A site obeys  sum over intact bonds (u_n - u) + omega^2 u = 0.  Cracks break
the vertical bond between rows y-1 and y for x >= 0; constraints pin the sites
(x, y), x >= 0.  A half-plane carries the ghost rule u_{x,-1} = -gamma u_{x,0}
+ beta u_{x,1} on its boundary row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel import Defect, ProblemConfig


@dataclass(frozen=True)
class Geometry:
    crack_rows: tuple[int, ...] = ()  # upper row of each broken bond row
    pinned_rows: tuple[int, ...] = ()
    boundary: tuple[float, float] | None = None  # (beta, gamma) at y = 0

    @classmethod
    def halfplane(cls, cfg: ProblemConfig) -> "Geometry":
        if cfg.isolated:
            if cfg.defect is Defect.CRACK:
                return cls(crack_rows=(cfg.N,))
            return cls(pinned_rows=(cfg.N,))
        if cfg.defect is Defect.CRACK:
            return cls(crack_rows=(cfg.N,), boundary=(cfg.beta, cfg.gamma))
        return cls(pinned_rows=(cfg.N,), boundary=(cfg.beta, cfg.gamma))

    @classmethod
    def pair(cls, defect: Defect, N: int, parity: int) -> "Geometry":
        if defect is Defect.CRACK:
            return cls(crack_rows=(N, -N + parity))
        return cls(pinned_rows=(N, -N - 1 + parity))

    def bond_broken(self, x, y_upper):
        """Vertical bond between rows y_upper - 1 and y_upper is absent."""
        x = np.asarray(x)
        y_upper = np.asarray(y_upper)
        out = np.zeros(np.broadcast(x, y_upper).shape, dtype=bool)
        for r in self.crack_rows:
            out |= (y_upper == r) & (x >= 0)
        return out

    def pinned(self, x, y):
        x = np.asarray(x)
        y = np.asarray(y)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for r in self.pinned_rows:
            out |= (y == r) & (x >= 0)
        return out


@dataclass
class StencilReport:
    residual: np.ndarray  # on the interior of the window, nan where unchecked
    by_kind: dict

    def worst(self) -> float:
        vals = [v for v in self.by_kind.values() if np.isfinite(v)]
        return max(vals) if vals else 0.0


def stencil_residual(U: np.ndarray, xs, ys, geom: Geometry, omega: complex) -> StencilReport:
    """Residual of the lattice equations for a total field U[y, x] on a window.

    Sites on the window edge (missing neighbours) are skipped, except that the
    boundary row of a half-plane uses its ghost rule.
    """
    xs = np.asarray(xs)
    ys = np.asarray(ys)
    ny, nx = U.shape
    X, Y = np.meshgrid(xs, ys)
    res = np.full(U.shape, np.nan, dtype=complex)
    w2 = omega * omega
    inner = np.zeros(U.shape, dtype=bool)
    inner[1:-1, 1:-1] = True
    if geom.boundary is not None and ys[0] == 0:
        inner[0, 1:-1] = True

    pin = geom.pinned(X, Y)
    acc = w2 * U.astype(complex)
    # horizontal bonds (never broken)
    acc[:, 1:-1] += (U[:, 2:] - U[:, 1:-1]) + (U[:, :-2] - U[:, 1:-1])
    # vertical bond to the row above
    up = np.zeros_like(acc)
    up[:-1] = np.where(geom.bond_broken(X[:-1], Y[1:]), 0.0, U[1:] - U[:-1])
    # vertical bond to the row below (ghost on the boundary row)
    dn = np.zeros_like(acc)
    dn[1:] = np.where(geom.bond_broken(X[1:], Y[1:]), 0.0, U[:-1] - U[1:])
    if geom.boundary is not None and ys[0] == 0 and ny > 1:
        beta, gamma = geom.boundary
        dn[0] = (-gamma * U[0] + beta * U[1]) - U[0]
    acc += up + dn
    res[inner] = acc[inner]
    res[pin & inner] = U[pin & inner]

    kinds = {}
    broken_any = geom.bond_broken(X, Y) | geom.bond_broken(X, Y + 1)
    pin_nb = np.zeros(U.shape, dtype=bool)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        pin_nb |= geom.pinned(X + dx, Y + dy)
    masks = {
        "pinned": pin,
        "boundary": (Y == 0) & (geom.boundary is not None) & ~pin,
        "crack_face": broken_any & ~pin,
        "constraint_adjacent": pin_nb & ~pin,
    }
    special = np.zeros(U.shape, dtype=bool)
    for m in masks.values():
        special |= m
    masks["bulk"] = ~special
    for k, m in masks.items():
        sel = m & inner
        kinds[k] = float(np.max(np.abs(res[sel]))) if np.any(sel) else float("nan")
    return StencilReport(res, kinds)
