import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np
import typer
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from hybrid_bell import locality, nonclassicality
from hybrid_bell.behaviors import (
    Behavior,
    CatBehavior,
    CatParams,
    Efficiencies,
    HybridSettings,
    TmsvsBehavior,
    TmsvsParams,
    read_tabulated_csv,
    sample_outcomes,
)
from hybrid_bell.config import (
    CONFIG_ENV_VAR,
    Layered,
    load_config_file,
    parse_bool,
    parse_complex,
    parse_float,
    parse_int,
)
from hybrid_bell.errors import ConfigurationError, HybridBellError, OptimizationError
from hybrid_bell.exporters import OutputFormat, rows_to_frame, write_table
from hybrid_bell.numerics import inclusive_grid

# --- Setup ---
app = typer.Typer(
    name="hybrid-bell",
    help="Locality and nonclassicality tests for hybrid balanced/unbalanced homodyne detection.",
    add_completion=False,
)
console = Console(stderr=True)
logging.basicConfig(level=logging.INFO, format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


class State(str, Enum):
    TMSVS = "tmsvs"
    CAT = "cat"


class Optimizer(str, Enum):
    MULTISTART = "multistart"
    SHGO = "shgo"


@dataclass(frozen=True)
class ScanSpec:
    """Everything a scan command needs once flags, file and defaults are merged."""

    state: State
    grid: tuple[float, ...]
    eff: Efficiencies
    test: HybridSettings | nonclassicality.NcTestConfig
    seed: int
    workers: int
    out: Optional[Path]
    fmt: OutputFormat

    def __post_init__(self):
        if not self.grid:
            raise ConfigurationError(f"the {self.state.value} scan grid is empty")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}")


# --- Defaults: the parameters of the two reference scans ---
TMSVS_SETTINGS = HybridSettings(phi=(0.0, math.pi / 2), gamma=(0j, 1 + 0j))
CAT_SETTINGS = HybridSettings(phi=(0.0, math.pi / 2), gamma=(0.25j, -0.25j))
NC_EFFICIENCIES = Efficiencies(0.7, 0.6)
CAT_EFFICIENCIES = Efficiencies(0.95, 0.95)
LOSSLESS = Efficiencies(1.0, 1.0)

NC_SCAN_COLUMNS = ["r", "eta_A", "eta_B", "x0", "alpha0", "D", "lhs", "rhs", "R"]
CAT_SCAN_COLUMNS = ["alpha0", "eta_A", "eta_B", "m1", "M1", "m2", "M2", "V"]
LOCALITY_COLUMNS = [
    "r", "eta_A", "eta_B", "F_max", "phi1", "phi2",
    "gamma1_re", "gamma1_im", "gamma2_re", "gamma2_im", "evaluations", "converged",
]  # fmt: skip
REPORT_COLUMNS = ["m1", "M1", "m2", "M2", "V"]

_context: dict = {"layer": Layered({})}


@contextmanager
def _failures():
    """Maps library errors to a red message on stderr and the matching exit status."""
    try:
        yield
    except HybridBellError as exc:
        console.print(f"[bold red]Error:[/] {exc}")
        raise typer.Exit(exc.exit_code)


def _layer() -> Layered:
    return _context["layer"]


def _efficiencies(eta_a, eta_b, default: Efficiencies) -> Efficiencies:
    layer = _layer()
    return Efficiencies(
        layer.get("eta_a", eta_a, default.eta_a, parse_float),
        layer.get("eta_b", eta_b, default.eta_b, parse_float),
    )


def _settings(phi1, phi2, gamma1, gamma2, default: HybridSettings) -> HybridSettings:
    layer = _layer()
    return HybridSettings(
        phi=(
            layer.get("phi1", phi1, default.phi[0], parse_float),
            layer.get("phi2", phi2, default.phi[1], parse_float),
        ),
        gamma=(
            layer.get("gamma1", gamma1, default.gamma[0], parse_complex),
            layer.get("gamma2", gamma2, default.gamma[1], parse_complex),
        ),
    )


def _grid(name: str, start, stop, step, defaults: tuple[float, float, float]) -> tuple:
    layer = _layer()
    grid = inclusive_grid(
        layer.get(f"{name}_min", start, defaults[0], parse_float),
        layer.get(f"{name}_max", stop, defaults[1], parse_float),
        layer.get(f"{name}_step", step, defaults[2], parse_float),
    )
    return tuple(grid.tolist())


def _x_grid(x_min, x_max, x_points) -> np.ndarray:
    layer = _layer()
    count = layer.get("x_points", x_points, 41, parse_int)
    if count < 2:
        raise ConfigurationError(f"x-points must be at least 2, got {count}")
    lo = layer.get("x_min", x_min, -4.0, parse_float)
    hi = layer.get("x_max", x_max, 4.0, parse_float)
    if not lo < hi:
        raise ConfigurationError(f"x-min must be below x-max, got {lo} and {hi}")
    return np.linspace(lo, hi, count)


def _output(out, fmt) -> tuple[Optional[Path], OutputFormat]:
    layer = _layer()
    return (
        layer.get("out", out, None, Path),
        layer.get("format", fmt, OutputFormat.CSV, OutputFormat),
    )


def _behavior(state, r, alpha0, eta_a, eta_b, phi1, phi2, gamma1, gamma2, table) -> Behavior:
    """Builds the behavior selected by --state (or read from --table)."""
    layer = _layer()
    state = layer.get("state", state, State.TMSVS, State)
    default_settings = CAT_SETTINGS if state is State.CAT else TMSVS_SETTINGS
    settings = _settings(phi1, phi2, gamma1, gamma2, default_settings)
    table = layer.get("table", table, None, Path)
    if table is not None:
        return read_tabulated_csv(table, settings)
    if state is State.CAT:
        eff = _efficiencies(eta_a, eta_b, CAT_EFFICIENCIES)
        return CatBehavior(settings, CatParams(layer.get("alpha0", alpha0, 1.0, parse_complex), eff))
    eff = _efficiencies(eta_a, eta_b, LOSSLESS)
    return TmsvsBehavior(settings, TmsvsParams(layer.get("r", r, 1.0, parse_float), eff))


def _report_table(title: str, values: dict[str, float]) -> Table:
    table = Table(title=title)
    table.add_column("Quantity", style="cyan")
    table.add_column("Value", justify="right")
    for name, value in values.items():
        table.add_row(name, f"{value:.10g}")
    return table


# --- Shared option declarations ---
STATE = typer.Option(None, "--state", help="Test state: 'tmsvs' or 'cat'.")
R = typer.Option(None, "--r", help="Squeezing parameter of the two-mode squeezed vacuum.")
ALPHA0 = typer.Option(None, "--alpha0", help="Cat-state amplitude (complex as 're,im').")
ETA_A = typer.Option(None, "--eta-a", help="Detection efficiency of Alice's homodyne detector.")
ETA_B = typer.Option(None, "--eta-b", help="Detection efficiency of Bob's click detector.")
PHI1 = typer.Option(None, "--phi1", help="First quadrature phase (radians).")
PHI2 = typer.Option(None, "--phi2", help="Second quadrature phase (radians).")
GAMMA1 = typer.Option(None, "--gamma1", help="First displacement, as 're,im'.")
GAMMA2 = typer.Option(None, "--gamma2", help="Second displacement, as 're,im'.")
SEED = typer.Option(None, "--seed", help="Seed of every random stream.")
OUT = typer.Option(None, "--out", "-o", help="Output file; stdout when omitted.")
FORMAT = typer.Option(None, "--format", help="Output format: 'csv' or 'json'.")
TABLE = typer.Option(None, "--table", help="Tabulated behavior CSV with columns x,n,i,j,p.")
WORKERS = typer.Option(None, "--workers", help="Worker processes for scans.")
X_MIN = typer.Option(None, "--x-min", help="Lower end of the quadrature grid.")
X_MAX = typer.Option(None, "--x-max", help="Upper end of the quadrature grid.")
X_POINTS = typer.Option(None, "--x-points", help="Number of quadrature grid points.")


@app.callback()
def callback(
    config: Optional[Path] = typer.Option(
        None, "--config", envvar=CONFIG_ENV_VAR, help="key=value configuration file."
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level."),
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Log warnings and errors only."),
):
    """
    Hybrid Bell-test CLI
    """
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.getLogger().setLevel(level)
    with _failures():
        _context["layer"] = Layered(load_config_file(config))


@app.command(name="nc-scan")
def nc_scan(
    state: Optional[State] = STATE,
    r_min: Optional[float] = typer.Option(None, "--r-min", help="First squeezing value."),
    r_max: Optional[float] = typer.Option(None, "--r-max", help="Last squeezing value."),
    r_step: Optional[float] = typer.Option(None, "--r-step", help="Squeezing step."),
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = typer.Option(None, "--phi1", help="Phase phi0 of the test."),
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    grid_points: Optional[int] = typer.Option(
        None, "--grid-points", help="Coarse grid size per axis for (x0, alpha0)."
    ),
    refine: Optional[bool] = typer.Option(
        None, "--refine/--no-refine", help="Polish the grid optimum with a simplex search."
    ),
    seed: Optional[int] = SEED,
    workers: Optional[int] = WORKERS,
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Relative violation R(r) of the nonclassicality inequality for the squeezed vacuum.
    """
    layer = _layer()
    with _failures():
        if layer.get("state", state, State.TMSVS, State) is not State.TMSVS:
            raise ConfigurationError("nc-scan is defined for the tmsvs state only")
        r_values = _grid("r", r_min, r_max, r_step, (0.05, 2.0, 0.05))
        for r in r_values:
            TmsvsParams(r)
        spec = ScanSpec(
            State.TMSVS,
            r_values,
            _efficiencies(eta_a, eta_b, NC_EFFICIENCIES),
            nonclassicality.NcTestConfig(
                0.0,
                0.0,
                layer.get("phi1", phi1, 0.0, parse_float),
                layer.get("gamma1", gamma1, 0j, parse_complex),
                layer.get("gamma2", gamma2, 1 + 0j, parse_complex),
            ),
            layer.get("seed", seed, 0, parse_int),
            layer.get("workers", workers, 1, parse_int),
            *_output(out, fmt),
        )
        console.print(
            f"[bold cyan]Scanning R over {len(spec.grid)} squeezing values "
            f"at eta=({spec.eff.eta_a}, {spec.eff.eta_b})...[/]"
        )
        rows = nonclassicality.scan_relative_violation(
            spec.grid,
            spec.eff,
            spec.test,
            seed=spec.seed,
            workers=spec.workers,
            grid_points=layer.get("grid_points", grid_points, nonclassicality.GRID_POINTS, parse_int),
            refine=layer.get("refine", refine, True, parse_bool),
        )
        frame = rows_to_frame(rows, NC_SCAN_COLUMNS)
        write_table(frame, spec.out, spec.fmt)
    positive = frame[frame["R"] > 0]
    if positive.empty:
        console.print("[yellow]No violation found on this grid.[/]")
    else:
        console.print(
            f"[bold green]R > 0 for r in [{positive['r'].min():g}, {positive['r'].max():g}][/]"
        )


@app.command(name="cat-scan")
def cat_scan(
    state: Optional[State] = STATE,
    alpha0_min: Optional[float] = typer.Option(None, "--alpha0-min", help="First amplitude."),
    alpha0_max: Optional[float] = typer.Option(None, "--alpha0-max", help="Last amplitude."),
    alpha0_step: Optional[float] = typer.Option(None, "--alpha0-step", help="Amplitude step."),
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = PHI1,
    phi2: Optional[float] = PHI2,
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    workers: Optional[int] = WORKERS,
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Absolute locality violation V(alpha0) of the Schroedinger-cat behavior.
    """
    layer = _layer()
    with _failures():
        if layer.get("state", state, State.CAT, State) is not State.CAT:
            raise ConfigurationError("cat-scan is defined for the cat state only")
        spec = ScanSpec(
            State.CAT,
            _grid("alpha0", alpha0_min, alpha0_max, alpha0_step, (0.0, 1.5, 0.05)),
            _efficiencies(eta_a, eta_b, CAT_EFFICIENCIES),
            _settings(phi1, phi2, gamma1, gamma2, CAT_SETTINGS),
            0,
            layer.get("workers", workers, 1, parse_int),
            *_output(out, fmt),
        )
        console.print(f"[bold cyan]Scanning V over {len(spec.grid)} amplitudes...[/]")
        rows = locality.scan_cat_violation(spec.grid, spec.eff, spec.test, workers=spec.workers)
        frame = rows_to_frame(rows, CAT_SCAN_COLUMNS)
        write_table(frame, spec.out, spec.fmt)
    nonlocal_rows = frame[frame["V"] > 0]
    if nonlocal_rows.empty:
        console.print("[yellow]The behavior is local on the whole grid.[/]")
    else:
        console.print(
            f"[bold green]Nonlocal from alpha0 = {nonlocal_rows['alpha0'].min():g}[/]"
        )


@app.command(name="locality")
def locality_cmd(
    state: Optional[State] = STATE,
    r: Optional[float] = R,
    alpha0: Optional[str] = ALPHA0,
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = PHI1,
    phi2: Optional[float] = PHI2,
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    table: Optional[Path] = TABLE,
    starts: Optional[int] = typer.Option(None, "--starts", help="Optimizer start points."),
    optimizer: Optional[Optimizer] = typer.Option(
        None, "--optimizer", help="Global strategy: 'multistart' or 'shgo'."
    ),
    seed: Optional[int] = SEED,
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Locality test. For the squeezed vacuum the objective F is maximized over
    all phases and displacements; otherwise V is reported at the given settings.
    """
    layer = _layer()
    with _failures():
        behavior = _behavior(state, r, alpha0, eta_a, eta_b, phi1, phi2, gamma1, gamma2, table)
        out, fmt = _output(out, fmt)
        if not isinstance(behavior, TmsvsBehavior):
            report = locality.locality_report(behavior)
            values = {"m1": report.m1, "M1": report.M1, "m2": report.m2, "M2": report.M2}
            values["V"] = report.violation
            console.print(_report_table("Locality at fixed settings", values))
            write_table(rows_to_frame([values], REPORT_COLUMNS), out, fmt)
            return

        params = behavior.params
        result = locality.optimize_locality(
            params,
            starts=layer.get("starts", starts, 64, parse_int),
            seed=layer.get("seed", seed, 0, parse_int),
            optimizer=layer.get("optimizer", optimizer, Optimizer.MULTISTART, Optimizer).value,
        )
        if not result.converged:
            raise OptimizationError(
                f"the best start did not converge (F = {result.value:.3g})", best=result
            )
        arg = result.argument
        row = {
            "r": params.r,
            "eta_A": params.eff.eta_a,
            "eta_B": params.eff.eta_b,
            "F_max": result.value,
            "phi1": arg[0],
            "phi2": arg[1],
            "gamma1_re": arg[2],
            "gamma1_im": arg[3],
            "gamma2_re": arg[4],
            "gamma2_im": arg[5],
            "evaluations": result.evaluations,
            "converged": result.converged,
        }
        console.print(
            Panel(
                f"max F = {result.value:.3e} after {result.evaluations} evaluations",
                title=f"[bold]Locality, r = {params.r:g}[/]",
                border_style="green" if result.value <= 1e-6 else "red",
            )
        )
        write_table(rows_to_frame([row], LOCALITY_COLUMNS), out, fmt)


@app.command()
def jpdao(
    state: Optional[State] = STATE,
    r: Optional[float] = R,
    alpha0: Optional[str] = ALPHA0,
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = PHI1,
    phi2: Optional[float] = PHI2,
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    table: Optional[Path] = TABLE,
    x_min: Optional[float] = X_MIN,
    x_max: Optional[float] = X_MAX,
    x_points: Optional[int] = X_POINTS,
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Builds the explicit non-negative joint distribution of a local behavior
    and dumps it on the tensor grid x1 x x2.
    """
    with _failures():
        behavior = _behavior(state, r, alpha0, eta_a, eta_b, phi1, phi2, gamma1, gamma2, table)
        x = _x_grid(x_min, x_max, x_points)
        out, fmt = _output(out, fmt)
        joint = locality.build_jpdao(behavior)
        check = locality.jpdao_marginal_check(joint, behavior)
        console.print(
            _report_table(
                "Joint distribution",
                {
                    "kappa": joint.kappa,
                    "max marginal deviation": check.max_deviation,
                    "min weight density": check.min_weight_density,
                },
            )
        )
        if check.max_deviation > locality.MARGINAL_TOLERANCE:
            logger.warning(
                f"marginal reproduction error {check.max_deviation:.3g} exceeds "
                f"{locality.MARGINAL_TOLERANCE:g}"
            )
        write_table(joint.tabulate(x, x), out, fmt)


@app.command()
def behavior(
    state: Optional[State] = STATE,
    r: Optional[float] = R,
    alpha0: Optional[str] = ALPHA0,
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = PHI1,
    phi2: Optional[float] = PHI2,
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    x_min: Optional[float] = X_MIN,
    x_max: Optional[float] = X_MAX,
    x_points: Optional[int] = X_POINTS,
    dichotomize: Optional[int] = typer.Option(
        None,
        "--dichotomize",
        help="Coarse-grain x with the sets built for setting k (1 or 2) and emit A,B,i,j,p.",
    ),
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Tabulates P(x, n | phi_i, gamma_j) on a quadrature grid.
    """
    layer = _layer()
    with _failures():
        source = _behavior(state, r, alpha0, eta_a, eta_b, phi1, phi2, gamma1, gamma2, None)
        out, fmt = _output(out, fmt)
        k = layer.get("dichotomize", dichotomize, None, parse_int)
        if k is None:
            write_table(source.tabulate(_x_grid(x_min, x_max, x_points)), out, fmt)
            return
        sets = locality.partition_sets(source, k)
        discrete = locality.dichotomize(source, sets, k)
        chsh = locality.chsh_value(discrete, locality.other(k), 1)
        console.print(
            _report_table(
                f"Dichotomized behavior, k = {k}",
                {"CHSH": chsh, "<m> - <M>": locality.dichotomized_functional(discrete, k)},
            )
        )
        write_table(discrete.to_frame(), out, fmt)


@app.command()
def sample(
    state: Optional[State] = STATE,
    r: Optional[float] = R,
    alpha0: Optional[str] = ALPHA0,
    eta_a: Optional[float] = ETA_A,
    eta_b: Optional[float] = ETA_B,
    phi1: Optional[float] = PHI1,
    phi2: Optional[float] = PHI2,
    gamma1: Optional[str] = GAMMA1,
    gamma2: Optional[str] = GAMMA2,
    setting_i: Optional[int] = typer.Option(None, "--setting-i", help="Alice setting (1 or 2)."),
    setting_j: Optional[int] = typer.Option(None, "--setting-j", help="Bob setting (1 or 2)."),
    count: Optional[int] = typer.Option(None, "--count", "-n", help="Number of records."),
    seed: Optional[int] = SEED,
    out: Optional[Path] = OUT,
    fmt: Optional[OutputFormat] = FORMAT,
):
    """
    Draws (x, n) records for one setting pair.
    """
    layer = _layer()
    with _failures():
        source = _behavior(state, r, alpha0, eta_a, eta_b, phi1, phi2, gamma1, gamma2, None)
        out, fmt = _output(out, fmt)
        samples = sample_outcomes(
            source,
            layer.get("setting_i", setting_i, 1, parse_int),
            layer.get("setting_j", setting_j, 1, parse_int),
            layer.get("count", count, 1000, parse_int),
            layer.get("seed", seed, 0, parse_int),
        )
        frame = rows_to_frame(
            ({"x": x, "n": n} for x, n in zip(samples.x.tolist(), samples.n.tolist())),
            ["x", "n"],
        )
        write_table(frame, out, fmt)


if __name__ == "__main__":
    app()
