import numpy as np
import pytest

from latticewh.kernel import ProblemConfig
from latticewh.lattice import BulkIncidence, Frequency, SpectralContext
from latticewh.solver import solve
from latticewh.stencil import Geometry, stencil_residual

DEFECTS = ("crack", "constraint")
CASE_IDS = ("H1", "H2", "H3", "H4")


def bulk(omega=1.2 + 0.01j, theta_deg=50.0, amplitude=1.0) -> BulkIncidence:
    return BulkIncidence(Frequency(complex(omega)), np.deg2rad(theta_deg), amplitude)


def ctx_for(omega) -> SpectralContext:
    return SpectralContext(Frequency(complex(omega)))


def halfplane_audit(sol, x0=-30, x1=29, y1=59) -> dict:
    """Stencil residual of a half-plane total field on a window starting at the boundary row."""
    g = sol.window(x0, x1, 0, y1)
    geom = Geometry.halfplane(sol.cfg)
    return stencil_residual(g.total, g.xs, g.ys, geom, sol.ctx.omega).by_kind


def worst(kinds: dict) -> float:
    vals = [v for v in kinds.values() if np.isfinite(v)]
    return max(vals) if vals else 0.0


_cache = {}


def cached_solution(defect, N, case, omega=1.2 + 0.01j, theta_deg=50.0, source="bulk"):
    key = (defect, N, case, complex(omega), theta_deg, source)
    if key not in _cache:
        cfg = ProblemConfig(defect, N, case, source=source)
        if source == "bulk":
            _cache[key] = solve(cfg, bulk(omega, theta_deg))
        else:
            _cache[key] = solve(cfg, None, ctx=ctx_for(omega))
    return _cache[key]


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240611)
