"""
dualspin command line.

Exit codes: 0 success, 1 numeric failure, 2 usage or configuration error.
"""

import functools
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Type, TypeVar, Union

import click
import numpy as np
from pydantic import BaseModel, Field, ValidationError

from . import __version__, settings
from .analysis import AnalysisConfig, analyze_series
from .controller import (
    ControllerConfig,
    FeedbackLoop,
    default_gain_grid,
    eigen_modes,
    root_locus,
)
from .dynamics import PlantConfig, PlantMatrices, plant_from_config, validate_structure
from .errors import ConfigError, DivergenceError, DualSpinError, EigenSolverError
from .export import (
    RunManifest,
    config_hash,
    locus_annotations,
    locus_to_frame,
    read_result_csv,
    result_to_frame,
    write_csv,
    write_json,
    write_manifest,
)
from .orbit import OrbitConfig, orbit_schedule, semi_major_axis_for_period
from .presets import ORBIT_PERIOD, figure_alias, list_presets, loop_preset, plant_preset
from .simulator import Scenario, SimulationResult, preset_scenarios, preset_sweep, run_sweep

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)


class RootLocusConfig(BaseModel):
    """Root-locus block: the swept loop, loops held closed, and the gain grid."""

    plant: Union[str, PlantConfig] = "paper-longitudinal"
    loop: Union[str, ControllerConfig] = "paper-longitudinal"
    fixed_loops: List[Union[str, ControllerConfig]] = Field(default_factory=list)
    gains: Optional[List[float]] = Field(None, description="Explicit gain grid; overrides the range")
    k_min: float = Field(1e-5, gt=0, description="Smallest |K| of the logarithmic grid")
    k_max: Optional[float] = Field(None, gt=0, description="Largest |K|; default 10x the loop gain")
    points_per_decade: int = Field(settings.LOCUS_POINTS_PER_DECADE, ge=1)


def handle_errors(func: Callable[..., Any]) -> Callable[..., Any]:
    """Map toolkit errors onto exit codes."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return func(*args, **kwargs)
        except DualSpinError as exc:
            # NumericError carries exit code 1, everything else 2
            click.echo(f"Error: {exc}", err=True)
            sys.exit(exc.exit_code)
        except ValidationError as exc:
            click.echo(f"Error: invalid configuration\n{exc}", err=True)
            sys.exit(2)

    return wrapper


def load_config(path: Path, model: Type[M]) -> Tuple[M, Dict[str, Any]]:
    """Parse a JSON file into the given model; returns (model, raw payload)."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return model.model_validate(raw), raw
    except ValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()
        )
        raise ConfigError(f"{path}: {problems}") from exc


def _plant_from(source: Union[str, PlantConfig]) -> PlantMatrices:
    if isinstance(source, str):
        return plant_preset(source)
    return plant_from_config(source)


def _loop_from(source: Union[str, ControllerConfig]) -> FeedbackLoop:
    if isinstance(source, str):
        return loop_preset(source)
    return source.to_loop()


def _format_matrix(label: str, matrix: np.ndarray) -> List[str]:
    lines = [f"{label} ="]
    for row in matrix:
        lines.append("  " + "  ".join(f"{v:>12.6g}" for v in row))
    return lines


def _safe_name(name: str) -> str:
    return name.replace("/", "_")


def _write_runs(results: Sequence[SimulationResult], out_dir: Path) -> List[str]:
    written = []
    for result in results:
        path = write_csv(result_to_frame(result), out_dir / f"{_safe_name(result.scenario.name)}.csv")
        written.append(path.name)
    return written


@click.group()
@click.version_option(__version__, prog_name="dualspin")
@click.option(
    "--log-level",
    default=settings.LOG_LEVEL,
    show_default=True,
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logging level (logs go to stderr)",
)
def cli(log_level: str) -> None:
    """Dual-spin satellite attitude model, loop design and simulation."""
    logging.basicConfig(
        level=log_level.upper(), format=settings.LOG_FORMAT, stream=sys.stderr, force=True
    )


@cli.command()
@click.option("--preset", "preset", default=None, help="Plant preset name")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None, help="Write model.json here")
@handle_errors
def model(preset: Optional[str], config_path: Optional[Path], out_dir: Optional[Path]) -> None:
    """Print plant matrices, structural diagnostics and eigenmodes."""
    if (preset is None) == (config_path is None):
        raise click.UsageError("Give exactly one of --preset or --config")
    if preset is not None:
        plant = plant_preset(preset)
        payload: Dict[str, Any] = {"preset": preset}
    else:
        config, payload = load_config(config_path, PlantConfig)
        plant = plant_from_config(config, name=config_path.stem)

    diagnostics = validate_structure(plant)
    modes = eigen_modes(plant.A)

    lines = [f"Plant: {plant.name}"]
    lines += _format_matrix("A", plant.A)
    lines += _format_matrix("B", plant.B)
    lines.append("Structure:")
    lines += [f"  {d}" for d in diagnostics] or ["  ok"]
    lines.append("Eigenmodes:")
    lines.append(f"  {'real':>12}  {'imag':>12}  {'damping':>9}  {'wn (rad/s)':>11}")
    for mode in modes:
        lam = mode.eigenvalue
        lines.append(
            f"  {lam.real:>12.6g}  {lam.imag:>12.6g}  {mode.damping:>9.4g}  {mode.natural_frequency:>11.6g}"
        )
    click.echo("\n".join(lines))

    if out_dir is not None:
        write_json(
            {
                "name": plant.name,
                "A": plant.A.tolist(),
                "B": plant.B.tolist(),
                "diagnostics": [str(d) for d in diagnostics],
                "modes": [
                    {
                        "re": m.eigenvalue.real,
                        "im": m.eigenvalue.imag,
                        "damping": m.damping,
                        "natural_frequency": m.natural_frequency,
                    }
                    for m in modes
                ],
            },
            out_dir / "model.json",
        )
        write_manifest(
            RunManifest(
                command="model",
                inputs=[str(config_path)] if config_path else [],
                output_dir=str(out_dir),
                config_hash=config_hash(payload),
            ),
            out_dir,
        )


@cli.command()
@click.option("--preset", "preset", default=None, help="Loop preset to sweep")
@click.option("--plant", "plant_name", default=None, help="Plant preset (default: the loop's own)")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--gains", default=None, help="Comma separated gain grid")
@click.option("--k-min", type=float, default=None, help="Smallest |K|")
@click.option("--k-max", type=float, default=None, help="Largest |K|")
@click.option("--points-per-decade", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("locus"), show_default=True)
@handle_errors
def rootlocus(
    preset: Optional[str],
    plant_name: Optional[str],
    config_path: Optional[Path],
    gains: Optional[str],
    k_min: Optional[float],
    k_max: Optional[float],
    points_per_decade: Optional[int],
    out_dir: Path,
) -> None:
    """Sweep one loop gain and write locus.csv and locus.json."""
    if config_path is not None:
        config, payload = load_config(config_path, RootLocusConfig)
    else:
        loop_name = preset or "paper-longitudinal"
        config = RootLocusConfig(plant=plant_name or loop_name, loop=loop_name)
        payload = config.model_dump(mode="json")

    updates: Dict[str, Any] = {}
    if gains is not None:
        parsed = [g for g in (s.strip() for s in gains.split(",")) if g]
        if not parsed:
            raise click.UsageError("Gain grid is empty")
        try:
            updates["gains"] = [float(g) for g in parsed]
        except ValueError:
            raise click.UsageError(f"Cannot parse gain grid '{gains}'") from None
    for key, value in (("k_min", k_min), ("k_max", k_max), ("points_per_decade", points_per_decade)):
        if value is not None:
            updates[key] = value
    if updates:
        config = RootLocusConfig.model_validate({**config.model_dump(), **updates})
        payload = {**payload, **updates}

    plant = _plant_from(config.plant)
    loop = _loop_from(config.loop)
    fixed = [_loop_from(item) for item in config.fixed_loops]

    if config.gains is not None:
        if not config.gains:
            raise click.UsageError("Gain grid is empty")
        grid = np.asarray(config.gains, dtype=float)
    else:
        design_gain = loop.compensator.K
        top = config.k_max or 10.0 * max(abs(design_gain), config.k_min)
        grid = default_gain_grid(design_gain or 1.0, config.k_min, top, config.points_per_decade)
        if design_gain != 0.0 and config.k_min <= abs(design_gain) <= top:
            grid = np.unique(np.append(grid, design_gain))
            if design_gain < 0:
                grid = grid[::-1]

    try:
        locus = root_locus(plant, loop, grid, fixed_loops=fixed)
    except EigenSolverError as exc:
        if exc.partial is not None:
            write_csv(locus_to_frame(exc.partial), out_dir / "locus.csv")
        raise

    write_csv(locus_to_frame(locus), out_dir / "locus.csv")
    write_json(locus_annotations(locus), out_dir / "locus.json")
    write_manifest(
        RunManifest(
            command="rootlocus",
            inputs=[str(config_path)] if config_path else [],
            output_dir=str(out_dir),
            config_hash=config_hash(payload),
        ),
        out_dir,
    )
    click.echo(
        f"{locus.gains.size} gains, {len(locus.critical_gains)} critical gains, "
        f"{len(locus.breakaway)} coalescence points -> {out_dir}"
    )


@cli.command()
@click.option("--paper-figure", "figure", type=int, default=None, help="Reproduce a figure configuration")
@click.option("--preset", "preset", default=None, help="Scenario preset name")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--duration", type=float, default=None, help="Override run length (s)")
@click.option("--dt", type=float, default=None, help="Override integration step (s)")
@click.option("--workers", type=int, default=settings.SWEEP_WORKERS, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("results"), show_default=True)
@handle_errors
def simulate(
    figure: Optional[int],
    preset: Optional[str],
    config_path: Optional[Path],
    duration: Optional[float],
    dt: Optional[float],
    workers: int,
    out_dir: Path,
) -> None:
    """Run a scenario or preset sweep and write one CSV per run."""
    chosen = [x is not None for x in (figure, preset, config_path)]
    if sum(chosen) != 1:
        raise click.UsageError("Give exactly one of --paper-figure, --preset or --config")

    if config_path is not None:
        scenario, _ = load_config(config_path, Scenario)
        scenarios = [scenario]
    else:
        sweep_name = figure_alias(figure).sweep if figure is not None else preset
        scenarios = list(preset_sweep(sweep_name).scenarios)

    overrides: Dict[str, float] = {}
    if duration is not None:
        overrides["duration"] = duration
    if dt is not None:
        overrides["dt"] = dt
    if overrides:
        scenarios = [Scenario.model_validate({**s.model_dump(), **overrides}) for s in scenarios]

    try:
        results = run_sweep(scenarios, workers=workers)
    except DivergenceError as exc:
        _write_runs(exc.completed, out_dir)
        if exc.partial is not None:
            name = f"{_safe_name(exc.partial.scenario.name)}.partial.csv"
            write_csv(result_to_frame(exc.partial), out_dir / name)
            click.echo(f"Partial trace up to t={exc.t:g} s -> {out_dir / name}", err=True)
        raise
    written = _write_runs(results, out_dir)

    write_manifest(
        RunManifest(
            command="simulate",
            inputs=[str(config_path)] if config_path else [],
            output_dir=str(out_dir),
            config_hash=config_hash([s.model_dump(mode="json") for s in scenarios]),
        ),
        out_dir,
    )
    click.echo("\n".join(written))


@cli.command()
@click.argument("result_csv", type=click.Path(path_type=Path))
@click.option("--column", "columns", multiple=True, help="Column(s) to analyse")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path), default=None)
@click.option("--band", type=float, default=None, help="Absolute settling band")
@click.option("--budget", type=float, default=None, help="Pointing budget (deg)")
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None, help="Write JSON here")
@handle_errors
def analyze(
    result_csv: Path,
    columns: Sequence[str],
    config_path: Optional[Path],
    band: Optional[float],
    budget: Optional[float],
    out_file: Optional[Path],
) -> None:
    """Compute response metrics for result columns."""
    base = load_config(config_path, AnalysisConfig)[0] if config_path else AnalysisConfig()
    overrides: Dict[str, Any] = {}
    if band is not None:
        overrides["band"] = band
    if budget is not None:
        overrides["budget_deg"] = budget
    selected = list(columns) or [base.column]

    frame = read_result_csv(result_csv, required=["t", *selected])
    reports = {}
    for column in selected:
        config = AnalysisConfig.model_validate({**base.model_dump(), **overrides, "column": column})
        metrics = analyze_series(frame["t"].to_numpy(), frame[column].to_numpy(), config)
        reports[column] = metrics.report()

    payload: Any = reports[selected[0]] if len(selected) == 1 else reports
    if out_file is not None:
        write_json(payload, out_file)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@cli.group()
def presets() -> None:
    """Preset catalogue."""


@presets.command("list")
def presets_list() -> None:
    """List plant, loop and scenario presets and the figure aliases."""
    catalogue = list_presets()
    catalogue["scenarios"] = sorted(preset_scenarios())
    for section in ("plants", "loops", "scenarios", "figures"):
        click.echo(f"{section}:")
        for entry in catalogue[section]:
            click.echo(f"  {entry}")


@cli.command()
@click.option("--a", "a", type=float, default=None, help="Semi-major axis (m)")
@click.option("--period", type=float, default=None, help="Orbital period (s), alternative to --a")
@click.option("--e", "e", type=float, default=0.0, show_default=True)
@click.option("--i", "i_deg", type=float, default=0.0, show_default=True, help="Inclination (deg)")
@click.option("--argp", "argp_deg", type=float, default=0.0, show_default=True, help="Argument of perigee (deg)")
@click.option("--t-end", type=float, default=ORBIT_PERIOD, show_default=True)
@click.option("--dt", type=float, default=10.0, show_default=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None, help="CSV file (default stdout)")
@handle_errors
def orbit(
    a: Optional[float],
    period: Optional[float],
    e: float,
    i_deg: float,
    argp_deg: float,
    t_end: float,
    dt: float,
    out_file: Optional[Path],
) -> None:
    """Tabulate t, R, V_theta, n, delta_n, R_Zp."""
    if a is not None and period is not None:
        raise click.UsageError("Give --a or --period, not both")
    if a is None:
        a = semi_major_axis_for_period(period or ORBIT_PERIOD)
    elements = OrbitConfig(a=a, e=e, i_deg=i_deg, argp_deg=argp_deg).to_elements()
    frame = orbit_schedule(elements, t_end, dt)
    if out_file is None:
        click.echo(frame.to_csv(index=False, lineterminator="\n"), nl=False)
    else:
        write_csv(frame, out_file)


def main() -> None:
    cli(prog_name="dualspin")


if __name__ == "__main__":
    main()
