"""Terminal display: Rich-based rendering of analysis reports.

Typical usage::

    from statlin_access.display import render_rank_report

    render_rank_report(report)
"""

from __future__ import annotations

from typing import Any

from rich.console import Console
from rich.markup import escape
from rich.panel import Panel
from rich.table import Table

from statlin_access.models import (
    AccessibilityProbe,
    BiaffineReport,
    GenericityReport,
    MonteCarloEstimate,
    RankReport,
    SimulationResult,
    Verdict,
)

console = Console()

VERDICT_STYLES: dict[str, str] = {
    Verdict.PASS: "green",
    Verdict.FAIL: "red",
    Verdict.INCONCLUSIVE: "yellow",
}

CONDITION_TITLES: dict[str, str] = {
    "cond1": "Free-time accessibility (Lie algebra)",
    "cond2": "Fixed-time accessibility (zero-time ideal)",
    "hormander": "Controllability (control fields only)",
    "lifted_at_state": "Lifted rank with diffusion at states",
}


def _verdict(v: str) -> str:
    style = VERDICT_STYLES.get(v, "white")
    return f"[{style}]{v}[/{style}]"


def _format_point(point: dict[str, Any]) -> str:
    m = ", ".join(str(v) for v in point.get("m", []))
    if "P" not in point:
        return f"({m})"
    rows = "; ".join(", ".join(str(v) for v in row) for row in point["P"])
    return f"m=({m})  P=[{rows}]"


def render_rank_report(report: RankReport) -> None:
    """Render a rank-condition report as a per-point table plus summary.

    Args:
        report: Completed RankReport.
    """
    title = CONDITION_TITLES.get(str(report.condition), str(report.condition))
    table = Table(show_header=True, padding=(0, 1), title=title)
    table.add_column("#", justify="right", style="dim")
    table.add_column("Point")
    table.add_column("Rank", justify="right")
    table.add_column("Verdict")

    for i, (point, rank, verdict) in enumerate(
        zip(report.points, report.ranks, report.verdicts), start=1
    ):
        table.add_row(str(i), _format_point(point), f"{rank}/{report.target}", _verdict(verdict))

    console.print()
    console.print(table)

    lines = [
        f"[bold]Overall:[/bold] {_verdict(report.overall_verdict)}",
        f"[bold]Mode:[/bold] {report.mode}   "
        f"[bold]Depth:[/bold] {report.depth_used}/{report.depth_cap}   "
        f"[bold]Closed:[/bold] {'yes' if report.closed else 'no'}   "
        f"[bold]Arithmetic:[/bold] {'exact' if report.exact else f'float (tol {report.tolerance:g})'}",
    ]
    if report.generic_rank is not None:
        lines.append(f"[bold]Generic rank:[/bold] {report.generic_rank}/{report.target}")
    if report.basis:
        brackets = escape(', '.join(report.basis))
        lines.append(f"[bold]Retained brackets:[/bold] [dim]{brackets}[/dim]")
    console.print(Panel("\n".join(lines), border_style="dim"))
    console.print()


def render_biaffine_report(report: BiaffineReport) -> None:
    """Render the biaffine sufficient test: hypotheses, witness, sampled ranks."""
    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("key", style="dim")
    table.add_column("value")
    table.add_row("dimension", f"n={report.n}, m_u={report.m_u}")
    table.add_row(
        "(i) control Lie algebra",
        f"dim {report.lie_dim}/{report.n**2} "
        + ("[green]holds[/green]" if report.hypothesis_i else "[red]fails[/red]"),
    )
    table.add_row(
        "(ii) B_0i nonzero",
        "[green]holds[/green]" if report.hypothesis_ii else "[red]fails[/red]",
    )
    if report.certificate is not None:
        cert = report.certificate
        table.add_row(
            "witness",
            f"i={cert['index']}  {_format_point(cert)}  alpha={cert['alpha']}",
        )
    if report.pass_fraction is not None:
        table.add_row(
            "sampled states",
            f"{report.pass_fraction:.2%} of {report.samples} pass the lifted rank check",
        )

    style = "green" if report.hypotheses_hold else "yellow"
    console.print()
    console.print(
        Panel(table, title=f"[{style}]{report.conclusion}[/{style}]", border_style=style)
    )
    console.print()


def render_genericity_report(report: GenericityReport) -> None:
    console.print()
    console.print(
        Panel(
            f"[bold]{report.passes}/{report.trials}[/bold] perturbed systems pass "
            f"{report.condition} ({report.fraction:.2%})\n"
            f"[dim]epsilon={report.epsilon}, degree<={report.degree}, seed={report.seed}, "
            f"points: {', '.join(_format_point(p) for p in report.points)}[/dim]",
            title="Genericity",
            border_style="dim",
        )
    )
    console.print()


def render_simulation_summary(
    result: SimulationResult | MonteCarloEstimate,
    probe: AccessibilityProbe | None = None,
) -> None:
    """Render the final state of a simulation run."""
    summary = result.to_dict()
    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("key", style="dim")
    table.add_column("value")
    for key, value in summary.items():
        if value is None:
            continue
        table.add_row(key, str(value))
    if probe is not None:
        table.add_row(
            "endpoint rank",
            f"{probe.rank}/{probe.target}" + ("" if probe.conclusive else " (inconclusive)"),
        )
    console.print()
    console.print(Panel(table, title=f"Simulation ({summary['method']})", border_style="dim"))
    console.print()


def render_report_list(reports: list[dict[str, Any]]) -> None:
    """Render saved report summaries as a Rich table.

    Args:
        reports: Dicts as returned by ``list_reports()``.
    """
    if not reports:
        console.print("[dim]No reports found.[/dim]")
        return

    table = Table(show_header=True, padding=(0, 1))
    table.add_column("ID", style="bold")
    table.add_column("Kind")
    table.add_column("Summary")
    table.add_column("File", style="dim")
    for r in reports:
        table.add_row(r["short_id"], r["kind"], r["summary"], r["file"])

    console.print()
    console.print(table)
    console.print()


def render_config_show(config: Any, config_path: Any) -> None:
    """Render effective configuration values as a Rich table."""
    path_status = "exists" if config_path.exists() else "not found"
    console.print()
    console.print(f"[bold]Config file:[/bold] {config_path} [dim]({path_status})[/dim]")
    console.print()

    table = Table(show_header=False, box=None, padding=(0, 2))
    table.add_column("key", style="dim")
    table.add_column("value")
    for key, value in config.to_dict().items():
        shown = "2N+1" if key == "depth_cap" and value is None else str(value)
        table.add_row(key, shown)
    console.print(table)
    console.print()
