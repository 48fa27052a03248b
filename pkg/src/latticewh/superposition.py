"""Full-plane fields of a defect pair from two mirror-symmetric half-plane solutions.

Even separation 2N (parity 0) mirrors about y = -1/2: the even part is a
half-plane with a free row (H2), the odd part one with an antisymmetric
ghost (H3).  Odd separation 2N - 1 (parity 1) mirrors about y = 0: the even
part uses the reflecting rule (H4), the odd part has a fixed row y = 0 and is
solved on the half-plane shifted up by one row (H1 with N - 1).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kernel import BoundaryCase, Defect, ProblemConfig
from .lattice import BulkIncidence, LatticeError, incident_bulk, incident_halfplane
from .solver import FieldGrid, WHSolution, solve
from .stencil import Geometry


@dataclass(frozen=True)
class HalfPlaneCall:
    """One half-plane term: u_{x, y - row_shift} of case ``case_id`` with N + n_shift."""

    symmetry: str  # "even" or "odd" about the mid-plane
    case_id: str
    beta: float
    gamma: float
    row_shift: int
    n_shift: int
    phase_ky: bool  # amplitude carries exp(i ky)

    def scale(self, inc: BulkIncidence) -> complex:
        s = 0.5 * inc.amplitude
        return s * np.exp(1j * inc.kappa_y) if self.phase_ky else s


def _call(sym, cid, row_shift=0, n_shift=0, phase=False) -> HalfPlaneCall:
    b = BoundaryCase.from_id(cid)
    return HalfPlaneCall(sym, cid, b.beta, b.gamma, row_shift, n_shift, phase)


_TABLE = {
    (0, "even"): _call("even", "H2"),
    (0, "odd"): _call("odd", "H3"),
    (1, "even"): _call("even", "H4"),
    (1, "odd"): _call("odd", "H1", row_shift=1, n_shift=-1, phase=True),
}


def case_table() -> dict:
    """{(parity, symmetry): HalfPlaneCall}."""
    return dict(_TABLE)


def mirror_row(y, parity: int):
    """Image row of y under the mid-plane reflection."""
    y = np.asarray(y)
    return -y if parity else -y - 1


@dataclass(frozen=True)
class PairConfig:
    defect: Defect
    N: int
    parity: int
    incidence: BulkIncidence

    def __post_init__(self):
        object.__setattr__(self, "defect", Defect(self.defect))
        if self.parity not in (0, 1):
            raise LatticeError("parity bit must be 0 or 1")
        if self.N < 1 or (self.parity == 1 and self.N < 2):
            raise LatticeError("odd separation needs N >= 2")

    @property
    def separation(self) -> int:
        return 2 * self.N - self.parity

    @property
    def geometry(self) -> Geometry:
        return Geometry.pair(self.defect, self.N, self.parity)

    def calls(self) -> list[HalfPlaneCall]:
        return [_TABLE[(self.parity, "even")], _TABLE[(self.parity, "odd")]]

    def half_config(self, call: HalfPlaneCall) -> ProblemConfig:
        if (self.parity, call.symmetry) not in _TABLE or _TABLE[(self.parity, call.symmetry)] != call:
            raise LatticeError(f"case {call.case_id} does not belong to parity {self.parity}")
        return ProblemConfig(self.defect, self.N + call.n_shift, call.case_id, parity=self.parity)


def decompose_incident(inc: BulkIncidence, parity: int):
    """(even, odd) evaluators (x, y) -> value with even + odd = the bulk wave."""

    def even(x, y):
        return 0.5 * (incident_bulk(x, y, inc) + incident_bulk(x, mirror_row(y, parity), inc))

    def odd(x, y):
        return 0.5 * (incident_bulk(x, y, inc) - incident_bulk(x, mirror_row(y, parity), inc))

    return even, odd


@dataclass
class PairSolution:
    pair: PairConfig
    parts: dict  # symmetry -> (HalfPlaneCall, WHSolution)
    meta: dict = field(default_factory=dict)

    def _half_row(self, sym: str, xs, y: int, which: str) -> np.ndarray:
        """Half-plane term of one symmetry class on full-plane row y >= 0 (upper half)."""
        call, sol = self.parts[sym]
        yh = y - call.row_shift
        xs = np.asarray(xs)
        if yh < 0:
            return np.zeros(xs.shape, dtype=complex)  # the fixed mid-plane row
        if which == "scattered":
            return sol.field_row(xs, yh)
        inc = sol.incidence
        return incident_halfplane(xs, np.full(xs.shape, yh), inc, call.beta, call.gamma)

    def component_row(self, sym: str, xs, y: int, which: str = "scattered") -> np.ndarray:
        """Even or odd component on any full-plane row, extended by the mirror rule."""
        if y >= 0:
            return self._half_row(sym, xs, y, which)
        sign = 1.0 if sym == "even" else -1.0
        return sign * self._half_row(sym, xs, int(mirror_row(y, self.pair.parity)), which)

    def scattered_row(self, xs, y: int) -> np.ndarray:
        return self.component_row("even", xs, y) + self.component_row("odd", xs, y)

    def incident_row(self, xs, y: int, assembled: bool = False) -> np.ndarray:
        """Bulk incident wave; ``assembled`` rebuilds it from the half-plane incident fields."""
        if assembled:
            return self.component_row("even", xs, y, "incident") + self.component_row("odd", xs, y, "incident")
        xs = np.asarray(xs)
        return np.asarray(incident_bulk(xs, np.full(xs.shape, y), self.pair.incidence), dtype=complex)

    def value(self, x: int, y: int, total: bool = False) -> complex:
        v = complex(self.scattered_row(np.array([x]), y)[0])
        if total:
            v += complex(self.incident_row(np.array([x]), y)[0])
        return v

    def window(self, x0: int, x1: int, y0: int, y1: int) -> FieldGrid:
        xs = np.arange(x0, x1 + 1)
        ys = np.arange(y0, y1 + 1)
        sc = np.array([self.scattered_row(xs, int(y)) for y in ys])
        inc = np.array([self.incident_row(xs, int(y)) for y in ys])
        meta = dict(self.meta)
        meta.update({f"M_{s}": p[1].sampling.M for s, p in self.parts.items()})
        return FieldGrid(xs, ys, sc, inc, tag="total", meta=meta)


def assemble_pair(pair: PairConfig, threads: int = 1, M: int | None = None) -> PairSolution:
    """Solve the two half-plane problems of ``pair`` and return the full-plane evaluator."""
    inc = pair.incidence

    def run(call: HalfPlaneCall) -> tuple[HalfPlaneCall, WHSolution]:
        cfg = pair.half_config(call)
        kw = {} if M is None else {"M": M}
        return call, solve(cfg, inc.with_amplitude(call.scale(inc)), **kw)

    calls = pair.calls()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, 2)) as ex:
            results = list(ex.map(run, calls))
    else:
        results = [run(c) for c in calls]
    parts = {call.symmetry: (call, sol) for call, sol in results}
    meta = {
        "defect": pair.defect.value,
        "N": pair.N,
        "parity": pair.parity,
        "separation": pair.separation,
        "theta": inc.theta,
        "omega": inc.frequency.omega,
    }
    return PairSolution(pair, parts, meta)
