"""Command-line interface for the matrix-free canonicalization toolkit."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, NoReturn, Optional

import typer
from dotenv import load_dotenv
from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.table import Table

from matfree.bench import PROBLEMS, BenchRecord, fit_slope, generate, run_bench, write_csv
from matfree.canon import canonicalize, manifest
from matfree.config.settings import AppConfig
from matfree.expr import dumps_problem, load_problem
from matfree.logging_config import configure_logging
from matfree.metrics import get_metrics
from matfree.solver import BACKENDS, solve as solve_program

console = Console()
app = typer.Typer(add_completion=False, help="Matrix-free cone program compiler and benchmarks")


def _bootstrap() -> AppConfig:
    load_dotenv()
    config = AppConfig()
    configure_logging(config.log_level, json_output=config.log_json)
    return config


def _fail(message: str, error: Exception | None = None) -> NoReturn:
    console.print(f"[red]{message}[/red]")
    if error is not None:
        raise typer.Exit(code=1) from error
    raise typer.Exit(code=1)


def _parse_sizes(raw: str) -> list[int]:
    try:
        sizes = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise typer.BadParameter(f"sizes must be comma-separated integers, got {raw!r}") from exc
    if not sizes:
        raise typer.BadParameter("at least one size is required")
    return sizes


def _check_choice(value: str, choices: tuple[str, ...], label: str) -> None:
    if value not in choices:
        _fail(f"Unknown {label} '{value}'; expected one of: {', '.join(choices)}")


def _record_table(records: list[BenchRecord], title: str) -> Table:
    table = Table(title=title)
    for column in ("n", "solve (s)", "multiply (s)", "iterations", "objective"):
        table.add_column(column, justify="right", style="cyan" if column == "n" else None)
    for r in records:
        table.add_row(
            str(r.n),
            f"{r.solve_seconds:.4f}",
            f"{r.multiply_seconds:.6f}",
            f"{r.iterations:.0f}",
            f"{r.objective:.6g}",
        )
    return table


def _slopes(records: list[BenchRecord]) -> dict[str, float | None]:
    slopes: dict[str, float | None] = {}
    for metric in ("solve_seconds", "multiply_seconds"):
        try:
            slopes[metric] = fit_slope(records, metric)
        except ValueError:
            slopes[metric] = None
    return slopes


@app.command()
def bench(
    problem: str = typer.Argument(..., help="Problem family: deconv or sylvester"),
    sizes: str = typer.Option("64,128,256", "--sizes", "-s", help="Comma-separated sizes"),
    seeds: int = typer.Option(1, "--seeds", "-k", help="Number of seeds per size"),
    backend: str = typer.Option("matfree", "--backend", "-b", help="matfree or sparse"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Absolute and relative tolerance"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV output path"),
    multiply_only: bool = typer.Option(
        False, "--multiply-only", help="Time operator multiplies without solving"
    ),
    json_output: bool = typer.Option(False, "--json", "-j", help="Output as JSON"),
):
    """Run a benchmark sweep and report timings and log-log slopes."""
    _bootstrap()
    _check_choice(problem, PROBLEMS, "problem")
    _check_choice(backend, BACKENDS, "backend")
    size_list = _parse_sizes(sizes)

    try:
        with Progress(
            SpinnerColumn(),
            TextColumn("[progress.description]{task.description}"),
            console=console,
            transient=True,
            disable=json_output,
        ) as progress:
            progress.add_task(f"Benchmarking {problem} ({backend})...", total=None)
            records = run_bench(
                problem,
                sorted(size_list),
                range(seeds),
                backend,
                tolerance=tol,
                run_solver=not multiply_only,
            )
    except ValueError as e:
        _fail(f"Benchmark failed: {e}", e)
    get_metrics().emit_metrics()

    csv_path = write_csv(records, out) if out is not None else None
    slopes = _slopes(records)

    if json_output:
        output = {
            "records": [r.to_row() for r in records],
            "slopes": slopes,
            "csv": str(csv_path) if csv_path else None,
        }
        typer.echo(json.dumps(output, indent=2))
        return

    console.print(_record_table(records, f"{problem} benchmark ({backend})"))
    for metric, slope in slopes.items():
        if slope is not None:
            console.print(f"log-log slope of {metric}: [bold]{slope:.2f}[/bold]")
    if csv_path:
        console.print(f"[green]✓[/green] CSV written to [cyan]{csv_path}[/cyan]")


@app.command()
def gen(
    problem: str = typer.Argument(..., help="Problem family: deconv or sylvester"),
    size: int = typer.Option(..., "--size", "-n", help="n for deconv, q for sylvester"),
    seed: int = typer.Option(0, "--seed", help="Random seed"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Write JSON here"),
):
    """Emit a generated problem in the JSON problem schema."""
    _bootstrap()
    _check_choice(problem, PROBLEMS, "problem")
    try:
        text = dumps_problem(generate(problem, size, seed))
    except ValueError as e:
        _fail(f"Cannot generate {problem}: {e}", e)

    if out is None:
        typer.echo(text)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    console.print(f"[green]✓[/green] Problem written to [cyan]{out}[/cyan]")


def _load(path: Path) -> Any:
    try:
        return load_problem(path)
    except (OSError, ValueError) as e:
        _fail(f"Cannot load problem '{path}': {e}", e)


@app.command()
def canon(
    path: Path = typer.Argument(..., help="JSON problem file"),
    json_output: bool = typer.Option(False, "--json", "-j", help="Output as JSON"),
):
    """Canonicalize a problem and print the cone program manifest."""
    _bootstrap()
    problem = _load(path)
    try:
        summary = manifest(canonicalize(problem))
    except ValueError as e:
        _fail(f"Canonicalization failed: {e}", e)

    if json_output:
        typer.echo(json.dumps(summary, indent=2))
        return

    table = Table(title=f"Cone program: {path.name}")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="green")
    table.add_row("Variables (n)", str(summary["n"]))
    table.add_row("Constraint rows (m)", str(summary["m"]))
    table.add_row(
        "Cones", ", ".join(f"{c['kind']}({c['size']})" for c in summary["cones"]) or "-"
    )
    table.add_row("Introduced variables", ", ".join(summary["new_vars"]) or "-")
    table.add_row("DAG nodes / edges", f"{summary['nodes']} / {summary['edges']}")
    table.add_row("Fast transforms", str(summary["fast_transforms"]))
    table.add_row(
        "Memory plan / naive",
        f"{summary['memory_plan_size']} / {summary['naive_size']} entries",
    )
    console.print(table)


@app.command()
def solve(
    path: Path = typer.Argument(..., help="JSON problem file"),
    backend: str = typer.Option("matfree", "--backend", "-b", help="matfree or sparse"),
    tol: Optional[float] = typer.Option(None, "--tol", help="Absolute and relative tolerance"),
    max_iters: Optional[int] = typer.Option(None, "--max-iters", help="Iteration limit"),
    json_output: bool = typer.Option(False, "--json", "-j", help="Output as JSON"),
):
    """Canonicalize and solve a problem."""
    config = _bootstrap()
    _check_choice(backend, BACKENDS, "backend")
    problem = _load(path)

    overrides: dict[str, Any] = {}
    if tol is not None:
        overrides.update(eps_abs=tol, eps_rel=tol)
    if max_iters is not None:
        overrides["max_iters"] = max_iters
    try:
        solution = solve_program(
            canonicalize(problem), config.solver, backend=backend, **overrides
        )
    except ValueError as e:
        _fail(f"Solve failed: {e}", e)
    get_metrics().emit_metrics()

    if json_output:
        output = solution.summary()
        output["variables"] = {
            name: value.tolist() for name, value in solution.variables.items()
        }
        typer.echo(json.dumps(output, indent=2))
        return

    table = Table(title=f"Solution: {path.name}")
    table.add_column("Field", style="cyan")
    table.add_column("Value", style="green")
    style = "green" if solution.solved else "yellow"
    table.add_row("Status", f"[bold {style}]{solution.status.upper()}[/bold {style}]")
    table.add_row("Objective", f"{solution.objective:.6g}")
    table.add_row("Iterations", f"{solution.iterations} (CG {solution.cg_iterations})")
    table.add_row("Primal residual", f"{solution.primal_residual:.3e}")
    table.add_row("Dual residual", f"{solution.dual_residual:.3e}")
    table.add_row("Materializations", str(solution.materializations))
    table.add_row("Time", f"{solution.solve_seconds:.3f}s")
    console.print(table)


if __name__ == "__main__":
    app()
