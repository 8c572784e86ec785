"""CLI entry point for statlin-access.

Provides the ``statlin-access`` command (alias ``statlin``) with subcommands
for checking rank conditions, running the biaffine test, simulating the
mean/covariance dynamics, probing genericity, and browsing saved reports.

Exit codes: 0 pass at every point, 1 error, 2 some point fails, 3 some point
inconclusive and none failing.

Typical usage::

    statlin check system.json --condition 1 --points "1;1/2"
    statlin check system.json --condition state --samples 100 --json
    statlin simulate system.json --method mc --paths 10000 --out run/
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Any, NoReturn

import click
import numpy as np
import sympy as sp
from rich.console import Console
from rich.logging import RichHandler

from statlin_access import __version__
from statlin_access.biaffine import check_prop213
from statlin_access.config import CONFIG_PATH, Config, load_config, write_config
from statlin_access.display import (
    render_biaffine_report,
    render_config_show,
    render_genericity_report,
    render_rank_report,
    render_report_list,
    render_simulation_summary,
)
from statlin_access.lift import StatePoint, upper_indices
from statlin_access.models import (
    BiaffineReport,
    Condition,
    GenericityReport,
    MonteCarloEstimate,
    RankReport,
    SimulationResult,
)
from statlin_access.rank_engine import (
    check_condition_1,
    check_condition_2,
    check_hormander_lifted,
    check_rank_at_state,
)
from statlin_access.reports import canonical_json, list_reports, load_report, save_report
from statlin_access.simulate import (
    closed_form_trajectory,
    empirical_accessibility,
    euler_maruyama,
    genericity_experiment,
    integrate_statlin,
)
from statlin_access.spec_io import SpecParseError, SystemSpec, load_spec
from statlin_access.vf_algebra import to_exact

console = Console(stderr=True)

_FLAT_CHECKS = {
    "1": check_condition_1,
    "2": check_condition_2,
    "hormander": check_hormander_lifted,
}

_GENERICITY_CONDITIONS = {
    "1": Condition.COND1,
    "2": Condition.COND2,
    "hormander": Condition.HORMANDER,
}


def _fail(message: str) -> NoReturn:
    console.print(f"[red bold]Error:[/red bold] {message}")
    sys.exit(1)


def _load_config() -> Config:
    try:
        return load_config()
    except (ValueError, OSError) as exc:
        _fail(str(exc))


def _load_spec(spec_path: str) -> SystemSpec:
    """Load a spec file, exiting 1 with a located diagnostic on failure."""
    try:
        return load_spec(Path(spec_path))
    except SpecParseError as exc:
        _fail(f"{spec_path}: {exc}")
    except OSError as exc:
        _fail(f"Cannot read {spec_path}: {exc}")


def _parse_points(text: str, n: int) -> list[tuple[sp.Rational, ...]]:
    """Parse ``"1,0;1/2,3"`` into rational points of dimension ``n``.

    Raises:
        ValueError: On a malformed entry or a wrong dimension.
    """
    points = []
    for chunk in text.split(";"):
        if not chunk.strip():
            continue
        try:
            point = tuple(to_exact(v) for v in chunk.split(","))
        except ValueError as exc:
            raise ValueError(f"--points: {exc}") from exc
        if len(point) != n:
            raise ValueError(
                f"--points: point '{chunk.strip()}' has {len(point)} coordinates, expected {n}"
            )
        points.append(point)
    return points


def _resolve_seed(flag: int | None, spec: SystemSpec, cfg: Config) -> int:
    if flag is not None:
        return flag
    if spec.seed is not None:
        return spec.seed
    return cfg.seed


def _emit_report(
    kind: str, payload: dict[str, Any], *, as_json: bool, save: bool, render: Any
) -> None:
    """Print a report (rich or canonical JSON on stdout) and optionally archive it."""
    if save:
        try:
            filepath = save_report(kind, payload)
        except OSError as exc:
            _fail(f"Cannot save report: {exc}")
        console.print(f"[dim]Report saved: {filepath.name}[/dim]")
    if as_json:
        click.echo(canonical_json(payload), nl=False)
    else:
        render()


def _exit_with(code: int) -> None:
    if code:
        sys.exit(code)


_JSON_OPTION = click.option(
    "--json", "as_json", is_flag=True, default=False, help="Print the report as JSON on stdout."
)
_SAVE_OPTION = click.option(
    "--save/--no-save", default=False, help="Archive the report under the reports directory."
)


@click.group()
@click.version_option(version=__version__, prog_name="statlin-access")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    help="Log verbosity on stderr (default: WARNING).",
)
def main(log_level: str) -> None:
    """Accessibility analysis for statistically linearized controlled SDEs.

    Decides sufficient rank conditions for the mean/covariance dynamics of
    polynomial control-affine SDEs with exact Lie-bracket calculus, and
    cross-checks the dynamics by simulation.
    """
    logging.basicConfig(
        level=log_level.upper(),
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@main.command()
@click.argument("spec_path", metavar="SPEC", type=click.Path(dir_okay=False))
@click.option(
    "--condition",
    type=click.Choice(["1", "2", "hormander", "state"], case_sensitive=False),
    default="1",
    help="1: free time, 2: fixed time, hormander: controls only, state: lifted with diffusion.",
)
@click.option("--points", default=None, help='Points "x1,x2;y1,y2" (rationals); overrides the spec.')
@click.option("--depth", type=click.IntRange(1), default=None, help="Bracket depth cap (default 2N+1).")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None, help="SVD tolerance.")
@click.option(
    "--samples", type=click.IntRange(0), default=0, help="Random states to add (state condition)."
)
@click.option("--seed", type=int, default=None, help="Seed for probes and samples.")
@click.option("--generic", is_flag=True, default=False, help="Also report the generic rank.")
@_JSON_OPTION
@_SAVE_OPTION
def check(
    spec_path: str,
    condition: str,
    points: str | None,
    depth: int | None,
    tol: float | None,
    samples: int,
    seed: int | None,
    generic: bool,
    as_json: bool,
    save: bool,
) -> None:
    """Check an accessibility rank condition for the system in SPEC."""
    cfg = _load_config()
    spec = _load_spec(spec_path)
    system = spec.system
    tolerance = tol if tol is not None else cfg.tolerance
    cap = depth if depth is not None else cfg.depth_cap
    master_seed = _resolve_seed(seed, spec, cfg)
    condition = condition.lower()

    try:
        if condition == "state":
            states: list[StatePoint] = list(spec.states)
            if points:
                states += [StatePoint.identity(p) for p in _parse_points(points, system.n)]
            if not states and not samples:
                _fail("The state condition needs states in the spec, --points or --samples.")
            report = check_rank_at_state(
                system,
                states,
                cap,
                tolerance,
                samples=samples,
                seed=master_seed,
                aux_probes=cfg.aux_probes,
                generic=generic,
            )
        else:
            chosen = _parse_points(points, system.n) if points else list(spec.points)
            if not chosen:
                _fail("No points to check: add \"points\" to the spec or pass --points.")
            report = _FLAT_CHECKS[condition](
                system,
                chosen,
                cap,
                tolerance,
                aux_probes=cfg.aux_probes,
                seed=master_seed,
                generic=generic,
            )
    except ValueError as exc:
        _fail(str(exc))

    _emit_report(
        "check",
        report.to_dict(),
        as_json=as_json,
        save=save,
        render=lambda: render_rank_report(report),
    )
    _exit_with(report.exit_code)


@main.command()
@click.argument("spec_path", metavar="SPEC", type=click.Path(dir_okay=False))
@click.option("--samples", type=click.IntRange(1), default=100, help="Random states to check.")
@click.option("--seed", type=int, default=None, help="Seed for the witness search and samples.")
@click.option("--depth", type=click.IntRange(1), default=None, help="Bracket depth cap (default 2N+1).")
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=None, help="SVD tolerance.")
@_JSON_OPTION
@_SAVE_OPTION
def biaffine(
    spec_path: str,
    samples: int,
    seed: int | None,
    depth: int | None,
    tol: float | None,
    as_json: bool,
    save: bool,
) -> None:
    """Run the sufficient fixed-time test for the biaffine system in SPEC."""
    cfg = _load_config()
    spec = _load_spec(spec_path)
    if spec.biaffine is None:
        _fail(f'{spec_path}: no "biaffine" section in the spec.')
    try:
        report = check_prop213(
            spec.biaffine,
            samples,
            tol if tol is not None else cfg.tolerance,
            seed=_resolve_seed(seed, spec, cfg),
            depth_cap=depth if depth is not None else cfg.depth_cap,
            retries=cfg.certificate_retries,
        )
    except ValueError as exc:
        _fail(str(exc))

    _emit_report(
        "biaffine",
        report.to_dict(),
        as_json=as_json,
        save=save,
        render=lambda: render_biaffine_report(report),
    )
    _exit_with(report.exit_code)


def _trajectory_table(result: SimulationResult | MonteCarloEstimate, n: int) -> tuple[np.ndarray, str]:
    """CSV body and header: time, mean, covariance upper triangle (and MC errors)."""
    tri = upper_indices(n)
    mean_cols = [f"m{i + 1}" for i in range(n)]
    cov_cols = [f"P{i + 1}{j + 1}" for i, j in tri]
    if isinstance(result, MonteCarloEstimate):
        cov = np.stack([result.cov[:, i, j] for i, j in tri], axis=1)
        cov_se = np.stack([result.cov_se[:, i, j] for i, j in tri], axis=1)
        body = np.column_stack([result.times, result.mean, cov, result.mean_se, cov_se])
        header = ["time", *mean_cols, *cov_cols]
        header += [f"se_{c}" for c in mean_cols] + [f"se_{c}" for c in cov_cols]
        return body, ",".join(header)
    cov = np.stack([result.P[:, i, j] for i, j in tri], axis=1)
    body = np.column_stack([result.times, result.m, cov, result.pd.astype(float)])
    return body, ",".join(["time", *mean_cols, *cov_cols, "pd"])


def _write_outputs(
    out: Path, result: SimulationResult | MonteCarloEstimate, summary: dict[str, Any], n: int
) -> None:
    out.mkdir(parents=True, exist_ok=True)
    body, header = _trajectory_table(result, n)
    np.savetxt(out / "trajectory.csv", body, fmt="%.12e", delimiter=",", header=header, comments="")
    (out / "summary.json").write_text(canonical_json(summary), encoding="utf-8")


@main.command()
@click.argument("spec_path", metavar="SPEC", type=click.Path(dir_okay=False))
@click.option(
    "--method",
    type=click.Choice(["rk4", "closedform", "mc"], case_sensitive=False),
    default="rk4",
    help="rk4: moment ODE, closedform: fundamental-matrix form, mc: Euler-Maruyama.",
)
@click.option("--dt", type=click.FloatRange(min=0, min_open=True), default=None, help="Step size.")
@click.option("--paths", type=click.IntRange(2), default=None, help="Monte Carlo paths.")
@click.option("--seed", type=int, default=None, help="Monte Carlo / probe seed.")
@click.option(
    "--out",
    type=click.Path(file_okay=False),
    default=None,
    help="Write trajectory.csv and summary.json to this directory.",
)
@click.option(
    "--probe", is_flag=True, default=False, help="Also estimate the endpoint-map rank."
)
@_JSON_OPTION
def simulate(
    spec_path: str,
    method: str,
    dt: float | None,
    paths: int | None,
    seed: int | None,
    out: str | None,
    probe: bool,
    as_json: bool,
) -> None:
    """Simulate the mean/covariance dynamics of the system in SPEC."""
    cfg = _load_config()
    spec = _load_spec(spec_path)
    system = spec.system
    if spec.m0 is None or spec.P0 is None:
        _fail(f'{spec_path}: simulation needs "simulation.m0" and "simulation.P0".')
    step = dt if dt is not None else (float(spec.dt) if spec.dt is not None else cfg.dt)
    n_paths = paths if paths is not None else (spec.paths or cfg.paths)
    master_seed = _resolve_seed(seed, spec, cfg)
    m0 = [float(v) for v in spec.m0]
    p0 = [[float(v) for v in row] for row in spec.P0]
    u = spec.control_signal()
    method = method.lower()

    try:
        result: SimulationResult | MonteCarloEstimate
        if method == "mc":
            result = euler_maruyama(
                system,
                u,
                m0,
                dt=step,
                paths=n_paths,
                seed=master_seed,
                P0=p0,
                chunk_size=cfg.mc_chunk_size,
                workers=cfg.workers,
                blowup_bound=cfg.blowup_bound,
            )
        elif method == "closedform":
            result = closed_form_trajectory(system, u, m0, p0, dt=step, blowup_bound=cfg.blowup_bound)
        else:
            result = integrate_statlin(system, u, m0, p0, dt=step, blowup_bound=cfg.blowup_bound)
        accessibility = None
        if probe:
            accessibility = empirical_accessibility(
                system,
                u,
                StatePoint(np.array(m0), np.array(p0)),
                dt=step,
                seed=master_seed,
                blowup_bound=cfg.blowup_bound,
            )
    except ValueError as exc:
        _fail(str(exc))

    summary = result.to_dict()
    summary["dt"] = step
    if accessibility is not None:
        summary["accessibility"] = accessibility.to_dict()

    if out is not None:
        try:
            _write_outputs(Path(out), result, summary, system.n)
        except OSError as exc:
            _fail(f"Cannot write to {out}: {exc}")
        console.print(f"[dim]Output written to {Path(out).resolve()}[/dim]")

    if as_json:
        click.echo(canonical_json(summary), nl=False)
    else:
        render_simulation_summary(result, accessibility)


@main.command()
@click.argument("spec_path", metavar="SPEC", type=click.Path(dir_okay=False))
@click.option("--eps", default="1/10", show_default=True, help="Noise amplitude (rational).")
@click.option("--trials", type=click.IntRange(1), default=200, show_default=True)
@click.option("--degree", type=click.IntRange(1), default=2, show_default=True)
@click.option("--seed", type=int, default=None, help="Seed for noise and sample points.")
@click.option(
    "--condition",
    type=click.Choice(["1", "2", "hormander"], case_sensitive=False),
    default="1",
    help="Rank condition re-checked on each perturbed system.",
)
@click.option("--points", default=None, help='Fixed points "x1,x2;y1,y2"; random if omitted.')
@_JSON_OPTION
@_SAVE_OPTION
def genericity(
    spec_path: str,
    eps: str,
    trials: int,
    degree: int,
    seed: int | None,
    condition: str,
    points: str | None,
    as_json: bool,
    save: bool,
) -> None:
    """Measure how often random drift perturbations satisfy a rank condition."""
    cfg = _load_config()
    spec = _load_spec(spec_path)
    try:
        epsilon = to_exact(eps)
        chosen = _parse_points(points, spec.system.n) if points else (list(spec.points) or None)
        report = genericity_experiment(
            spec.system,
            epsilon,
            trials,
            degree,
            _resolve_seed(seed, spec, cfg),
            condition=_GENERICITY_CONDITIONS[condition.lower()],
            points=chosen,
            depth_cap=cfg.depth_cap,
            tol=cfg.tolerance,
            aux_probes=cfg.aux_probes,
        )
    except ValueError as exc:
        _fail(str(exc))

    _emit_report(
        "genericity",
        report.to_dict(),
        as_json=as_json,
        save=save,
        render=lambda: render_genericity_report(report),
    )


@main.command("list")
@click.option(
    "--limit",
    default=20,
    type=click.IntRange(1),
    help="Maximum reports to show (default: 20).",
)
def list_cmd(limit: int) -> None:
    """List saved reports.

    Use ``statlin show <id>`` to re-render a specific report.
    """
    render_report_list(list_reports(limit=limit))


@main.command()
@click.argument("report_id")
@_JSON_OPTION
def show(report_id: str, as_json: bool) -> None:
    """Display a saved report by full or partial ID (minimum 4 characters)."""
    try:
        envelope = load_report(report_id)
    except ValueError as exc:
        _fail(str(exc))

    if envelope is None:
        _fail(f"No report found matching '{report_id}'.")

    kind, payload = envelope["kind"], envelope["report"]
    if as_json:
        click.echo(canonical_json(payload), nl=False)
    elif kind == "check":
        render_rank_report(RankReport.from_dict(payload))
    elif kind == "biaffine":
        render_biaffine_report(BiaffineReport.from_dict(payload))
    elif kind == "genericity":
        render_genericity_report(GenericityReport.from_dict(payload))
    else:
        _fail(f"Unknown report kind '{kind}'.")


@main.group()
def config() -> None:
    """Manage configuration."""


@config.command()
def path() -> None:
    """Print the configuration file path."""
    click.echo(CONFIG_PATH)


@config.command("show")
def config_show() -> None:
    """Display effective configuration."""
    render_config_show(_load_config(), CONFIG_PATH)


@config.command()
@click.option("--force", is_flag=True, default=False, help="Overwrite an existing file.")
def init(force: bool) -> None:
    """Write the default configuration file."""
    if CONFIG_PATH.exists() and not force:
        _fail(f"{CONFIG_PATH} already exists. Use --force to overwrite.")
    try:
        write_config(Config(), CONFIG_PATH)
    except OSError as exc:
        _fail(f"Cannot write {CONFIG_PATH}: {exc}")
    console.print(f"[dim]Config written to {CONFIG_PATH}[/dim]")
