"""Command-line batch harness.

Configuration files are flat ``key = value`` text (``#`` starts a comment).
Keys:

    defect        crack | constraint | both
    N             half spacing (>= 1)
    parity        0 (even separation 2N) or 1 (odd separation 2N - 1)
    case          H1..H4 or all (half-plane commands)
    source        bulk | waveguide
    mode_index    guide mode for waveguide incidence
    omega1        real part of the frequency
    omega2        damping (> 0)
    theta_deg     incidence angle in degrees
    amplitude     incident amplitude
    quadrature    initial number of contour nodes
    N_grid        physical half-width of the reference grid
    N_pml         absorbing layer thickness
    pml_strength  absorbing ramp strength
    R             comparison circle radius
    n_theta       angular samples on the circle
    window        x0, x1, y0, y1 for field dumps
    reference     yes | no (run the reference grid in polar-scan)
    sweep_omega1, sweep_theta_deg, sweep_N   comma-separated lists
"""

from __future__ import annotations

import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from importlib import resources
from itertools import product
from pathlib import Path

import click
import numpy as np

from .factorization import DEFAULT_M, FactorizationError, factorize
from .farfield import SaddleError
from .kernel import CASES, KernelFunction, ProblemConfig
from .lattice import BulkIncidence, Frequency, LatticeError, SpectralContext
from .reference_grid import GridSolveError, GridSpec, assemble_and_solve, compare_on_circle
from .solver import FieldGrid, QuadratureError, solve
from .superposition import PairConfig, assemble_pair

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass(frozen=True)
class RunConfig:
    defect: str = "crack"
    N: int = 3
    parity: int = 0
    case: str = "H2"
    source: str = "bulk"
    mode_index: int = 0
    omega1: float = 1.2
    omega2: float = 0.01
    theta_deg: float = 44.0
    amplitude: float = 1.0
    quadrature: int = DEFAULT_M
    N_grid: int = 81
    N_pml: int = 65
    pml_strength: float = 0.05
    R: float = 39.0
    n_theta: int = 720
    window: tuple = (-30, 30, -30, 30)
    reference: bool = True
    sweep_omega1: tuple = ()
    sweep_theta_deg: tuple = ()
    sweep_N: tuple = ()
    preset: str = ""

    # -- parsing --------------------------------------------------------------

    @classmethod
    def from_mapping(cls, data: dict, base: "RunConfig | None" = None) -> "RunConfig":
        base = base or cls()
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for key, raw in data.items():
            if key not in types:
                raise ConfigError(f"unknown key {key!r}")
            kw[key] = _convert(key, raw, getattr(base, key))
        cfg = replace(base, **kw)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if self.defect not in ("crack", "constraint", "both"):
            raise ConfigError(f"defect must be crack, constraint or both, got {self.defect!r}")
        if self.case != "all" and self.case.upper() not in CASES:
            raise ConfigError(f"unknown boundary case {self.case!r}")
        if self.source not in ("bulk", "waveguide"):
            raise ConfigError(f"source must be bulk or waveguide, got {self.source!r}")
        if self.parity not in (0, 1):
            raise ConfigError("parity must be 0 or 1")
        if self.N < 1:
            raise ConfigError("N must be positive")
        if self.quadrature < 16 or self.quadrature & (self.quadrature - 1):
            raise ConfigError("quadrature must be a power of two >= 16")
        if len(self.window) != 4:
            raise ConfigError("window needs x0, x1, y0, y1")
        try:
            for w1 in self.sweep_omega1 or (self.omega1,):
                Frequency(complex(w1, self.omega2))
        except LatticeError as exc:
            raise ConfigError(str(exc)) from None
        for th in self.sweep_theta_deg or (self.theta_deg,):
            if not 0.0 < th < 90.0:
                raise ConfigError(f"theta_deg must lie in (0, 90), got {th}")

    # -- derived objects ------------------------------------------------------

    @property
    def defects(self) -> list[str]:
        return ["crack", "constraint"] if self.defect == "both" else [self.defect]

    @property
    def cases(self) -> list[str]:
        return list(CASES) if self.case == "all" else [self.case.upper()]

    @property
    def frequency(self) -> Frequency:
        return Frequency(complex(self.omega1, self.omega2))

    def incidence(self) -> BulkIncidence:
        return BulkIncidence(self.frequency, np.deg2rad(self.theta_deg), self.amplitude)

    def problem(self, defect: str, case: str) -> ProblemConfig:
        return ProblemConfig(defect, self.N, case, source=self.source, parity=self.parity, mode_index=self.mode_index)

    def header(self, **extra) -> str:
        d = asdict(self)
        d.update(extra)
        return "; ".join(f"{k}={_fmt(v)}" for k, v in d.items())


def _fmt(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return f"{v:.15g}"
    if isinstance(v, complex):
        return f"{v.real:.15g}{v.imag:+.15g}j"
    return str(v)


def _convert(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            if raw.lower() in ("1", "yes", "true", "on"):
                return True
            if raw.lower() in ("0", "no", "false", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, tuple):
            items = [s.strip() for s in raw.split(",") if s.strip()]
            if key in ("window", "sweep_N"):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def preset_names() -> list[str]:
    files = resources.files("latticewh").joinpath("presets").iterdir()
    return sorted(f.name[:-4] for f in files if f.name.endswith(".cfg"))


def load_preset(name: str) -> dict:
    path = resources.files("latticewh").joinpath("presets", f"{name}.cfg")
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    data = parse_config_text(path.read_text())
    data["preset"] = name
    return data


def resolve_config(preset: str | None, config: str | None, quadrature: int | None) -> RunConfig:
    cfg = RunConfig()
    if preset:
        cfg = RunConfig.from_mapping(load_preset(preset), cfg)
    if config:
        try:
            text = Path(config).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        cfg = RunConfig.from_mapping(parse_config_text(text), cfg)
    if quadrature is not None:
        cfg = RunConfig.from_mapping({"quadrature": str(quadrature)}, cfg)
    return cfg


def _write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _csv_lines(header: str, columns: list[str], rows: list[list]) -> str:
    lines = [f"# {header}", ",".join(columns)]
    lines += [",".join(_fmt(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------------


def run_kernel_check(cfg: RunConfig, out: Path) -> list[Path]:
    rows = []
    ctx = SpectralContext(cfg.frequency)
    for defect in cfg.defects:
        for case in cfg.cases:
            pc = ProblemConfig(defect, cfg.N, case)
            s = factorize(KernelFunction(pc, ctx), M=cfg.quadrature)
            rows.append([defect, case, cfg.N, s.M, s.multiplicative_residual(), s.tail()])
    path = out / "kernel_check.csv"
    _write(path, _csv_lines(cfg.header(), ["defect", "case", "N", "M", "residual", "tail"], rows))
    return [path]


def run_solve(cfg: RunConfig, out: Path) -> list[Path]:
    paths = []
    inc = cfg.incidence()
    ctx = SpectralContext(cfg.frequency, inc if cfg.source == "bulk" else None)
    x0, x1, y0, y1 = cfg.window
    for defect in cfg.defects:
        for case in cfg.cases:
            pc = cfg.problem(defect, case)
            sol = solve(pc, inc if cfg.source == "bulk" else None, ctx=ctx, M=cfg.quadrature)
            grid = sol.window(x0, x1, max(y0, 0), y1)
            header = cfg.header(M=sol.sampling.M)
            tag = f"{defect}_{case}"
            p = out / f"solve_{tag}_field.csv"
            grid.to_csv(p, header=header)
            paths.append(p)
            names = ["wh_residual"]
            vals = [sol.wh_residual()]
            if defect == "crack":
                names.append("v_tot_0N")
                vals.append(sol.tip_opening())
            else:
                names.append("u_tot_m1N")
                vals.append(sol.u_m1N_total())
            rows = [[n, complex(v).real, complex(v).imag] for n, v in zip(names, vals)]
            p = out / f"solve_{tag}_scalars.csv"
            _write(p, _csv_lines(header, ["name", "re", "im"], rows))
            paths.append(p)
    return paths


def run_polar_scan(cfg: RunConfig, out: Path) -> list[Path]:
    paths = []
    inc = cfg.incidence()
    for defect in cfg.defects:
        pair = PairConfig(defect, cfg.N, cfg.parity, inc)
        ps = assemble_pair(pair, M=cfg.quadrature)
        if cfg.reference:
            grid = assemble_and_solve(GridSpec(pair, cfg.N_grid, cfg.N_pml, cfg.pml_strength))
        else:
            h = int(np.ceil(cfg.R)) + 1
            xs = np.arange(-h, h + 1)
            inc_rows = np.array([ps.incident_row(xs, int(y)) for y in xs])
            grid = FieldGrid(xs, xs.copy(), np.full(inc_rows.shape, np.nan + 0j), inc_rows, tag="total")
        rep = compare_on_circle(grid, ps, cfg.R, cfg.n_theta)
        Ms = {f"M_{k}": v[1].sampling.M for k, v in ps.parts.items()}
        header = cfg.header(**Ms, median_numeric_vs_exact=rep.median(), median_asymptotic_vs_exact=rep.median("asymptotic"))
        p = out / f"polar_{defect}.csv"
        rep.to_csv(p, header=header)
        paths.append(p)
    return paths


def run_pair(cfg: RunConfig, out: Path) -> list[Path]:
    paths = []
    inc = cfg.incidence()
    x0, x1, y0, y1 = cfg.window
    for defect in cfg.defects:
        ps = assemble_pair(PairConfig(defect, cfg.N, cfg.parity, inc), M=cfg.quadrature)
        grid = ps.window(x0, x1, y0, y1)
        Ms = {f"M_{k}": v[1].sampling.M for k, v in ps.parts.items()}
        p = out / f"pair_{defect}_window.csv"
        grid.to_csv(p, header=cfg.header(**Ms))
        paths.append(p)
    return paths


def _sweep_point(args):
    cfg, out = args
    return run_solve(cfg, out)


def run_sweep(cfg: RunConfig, out: Path, threads: int = 1) -> list[Path]:
    points = []
    for w1, th, n in product(cfg.sweep_omega1 or (cfg.omega1,), cfg.sweep_theta_deg or (cfg.theta_deg,), cfg.sweep_N or (cfg.N,)):
        sub = out / f"w{w1:g}_t{th:g}_N{n}"
        sub.mkdir(parents=True, exist_ok=True)
        points.append((replace(cfg, omega1=w1, theta_deg=th, N=n, sweep_omega1=(), sweep_theta_deg=(), sweep_N=()), sub))
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_sweep_point, points))
    else:
        results = [_sweep_point(p) for p in points]
    return [p for r in results for p in r]


# ----------------------------------------------------------------------------
# click wiring
# ----------------------------------------------------------------------------


def _fail(code: int, exc: Exception) -> None:
    record = {"error": type(exc).__name__, "message": str(exc), "exit": code}
    click.echo(json.dumps(record), err=True)
    sys.exit(code)


def _run(ctx: click.Context, runner, **kw) -> None:
    o = ctx.obj
    try:
        cfg = resolve_config(o["preset"], o["config"], o["quadrature"])
    except (ConfigError, LatticeError) as exc:
        _fail(EXIT_CONFIG, exc)
    out = Path(o["out"])
    out.mkdir(parents=True, exist_ok=True)
    try:
        paths = runner(cfg, out, **kw)
    except (ConfigError, LatticeError) as exc:
        _fail(EXIT_CONFIG, exc)
    except (FactorizationError, QuadratureError, SaddleError, GridSolveError, ArithmeticError) as exc:
        _fail(EXIT_NUMERIC, exc)
    for p in paths:
        click.echo(str(p))


@click.group()
@click.option("--config", "config", type=click.Path(), default=None, help="Key-value configuration file.")
@click.option("--preset", default=None, help="Shipped preset name (fig2, fig6, fig7, fig8).")
@click.option("--out", default="out", type=click.Path(file_okay=False), help="Output directory.")
@click.option("--threads", default=1, type=int, help="Worker processes for sweeps.")
@click.option("--quadrature", default=None, type=int, help="Initial number of contour nodes.")
@click.option("-v", "--verbose", is_flag=True)
@click.pass_context
def main(ctx, config, preset, out, threads, quadrature, verbose):
    """Exact Wiener-Hopf solutions for a pair of semi-infinite lattice defects."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"config": config, "preset": preset, "out": out, "threads": threads, "quadrature": quadrature}


@main.command("kernel-check")
@click.pass_context
def kernel_check_cmd(ctx):
    """Factorization residuals for every requested defect and boundary case."""
    _run(ctx, run_kernel_check)


@main.command("solve")
@click.pass_context
def solve_cmd(ctx):
    """Half-plane field window and tip scalars."""
    _run(ctx, run_solve)


@main.command("polar-scan")
@click.pass_context
def polar_scan_cmd(ctx):
    """Pair scattered field on a circle: reference grid, exact and asymptotic."""
    _run(ctx, run_polar_scan)


@main.command("pair")
@click.pass_context
def pair_cmd(ctx):
    """Full-plane field window of a defect pair."""
    _run(ctx, run_pair)


@main.command("sweep")
@click.pass_context
def sweep_cmd(ctx):
    """Half-plane solves over the sweep lists."""
    _run(ctx, run_sweep, threads=ctx.obj["threads"])


if __name__ == "__main__":
    main()
