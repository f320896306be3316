"""Benchmark sweeps over problem sizes, CSV output and log-log slope fits."""

from __future__ import annotations

import csv
import math
import statistics
import time
from collections.abc import Callable, Iterable, Sequence
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..canon.program import ConeProgram, canonicalize
from ..config.settings import AppConfig, get_config
from ..fao.evaluate import DagOperator
from ..logging_config import bound_run, get_logger, set_problem
from ..solver.admm import BACKENDS, solve
from .generators import PROBLEMS, generate

logger = get_logger(__name__)

CSV_HEADER: tuple[str, ...] = (
    "problem",
    "n",
    "backend",
    "solve_seconds",
    "multiply_seconds",
    "iterations",
    "objective",
)


@dataclass(frozen=True)
class BenchRecord:
    """One benchmark row: averages over the seeds run at one size.

    ``solve_seconds``, ``iterations`` and ``objective`` are NaN when the sweep only timed
    multiplies.
    """

    problem: str
    n: int
    backend: str
    solve_seconds: float
    multiply_seconds: float
    iterations: float
    objective: float

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise ValueError(f"benchmark size must be positive, got {self.n}")
        for name in ("solve_seconds", "multiply_seconds"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def to_row(self) -> dict[str, Any]:
        return asdict(self)


def median_time(fn: Callable[[], Any], repeats: int, warmup: int) -> float:
    """Median wall time of ``repeats`` calls after ``warmup`` discarded calls."""
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(max(repeats, 1)):
        started = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - started)
    return statistics.median(samples)


def multiply_seconds(
    program: ConeProgram,
    backend: str,
    *,
    repeats: int,
    warmup: int,
    seed: int = 0,
) -> float:
    """Median time of one forward and one adjoint multiply with the constraint operator."""
    if program.m == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(program.n)
    y = rng.standard_normal(program.m)
    if backend == "sparse":
        matrix = program.sparse_matrix()
        transpose = matrix.T.tocsr()
        return median_time(lambda: (matrix @ x, transpose @ y), repeats, warmup)
    if program.G is None:
        raise ValueError("the program has no constraint operator")
    operator = DagOperator(program.G, parallel_workers=get_config().dag.parallel_workers)
    try:
        return median_time(lambda: (operator.matvec(x), operator.rmatvec(y)), repeats, warmup)
    finally:
        operator.close()


def _bench_one(
    problem: str,
    size: int,
    seed: int,
    backend: str,
    tolerance: float,
    config: AppConfig,
    run_solver: bool,
) -> tuple[int, float, float, float, float]:
    opr = generate(problem, size, seed)
    n = sum(v.size for v in opr.variables)
    program = canonicalize(opr)
    multiply = multiply_seconds(
        program,
        backend,
        repeats=config.bench.repeats,
        warmup=config.bench.warmup,
        seed=seed,
    )
    if not run_solver:
        return n, math.nan, multiply, math.nan, math.nan
    solution = solve(
        program, config.solver, backend=backend, eps_abs=tolerance, eps_rel=tolerance
    )
    if not solution.solved:
        logger.warning("bench_not_converged", size=size, seed=seed, status=solution.status)
    return n, solution.solve_seconds, multiply, solution.iterations, solution.objective


def run_bench(
    problem: str,
    sizes: Sequence[int],
    seeds: Iterable[int],
    backend: str = "matfree",
    *,
    tolerance: float | None = None,
    run_solver: bool = True,
    config: AppConfig | None = None,
) -> list[BenchRecord]:
    """Generate, canonicalize and solve ``problem`` at each size, averaging over ``seeds``.

    A size whose every seed fails produces no row; failures are logged and the sweep goes on.
    """
    if problem not in PROBLEMS:
        raise ValueError(f"unknown problem {problem!r}; expected one of {PROBLEMS}")
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if list(sizes) != sorted(sizes):
        raise ValueError(f"benchmark sizes must be ascending, got {list(sizes)}")
    seeds = list(seeds)
    config = config or get_config()
    tolerance = config.bench.tolerance if tolerance is None else tolerance

    records: list[BenchRecord] = []
    if not seeds:
        return records

    with bound_run(backend):
        for size in sizes:
            set_problem(f"{problem}:{size}")
            rows = []
            for seed in seeds:
                try:
                    rows.append(
                        _bench_one(problem, size, seed, backend, tolerance, config, run_solver)
                    )
                except Exception:
                    logger.exception("bench_failed", size=size, seed=seed)
            if not rows:
                continue
            columns = list(zip(*rows))
            record = BenchRecord(
                problem=problem,
                n=int(columns[0][0]),
                backend=backend,
                solve_seconds=float(np.mean(columns[1])),
                multiply_seconds=float(np.mean(columns[2])),
                iterations=float(np.mean(columns[3])),
                objective=float(np.mean(columns[4])),
            )
            records.append(record)
            logger.info("bench_size_done", seeds=len(rows), **record.to_row())
    return records


def fit_slope(records: Sequence[BenchRecord], metric: str = "solve_seconds") -> float:
    """Least-squares slope of log(metric) against log(n)."""
    if len(records) < 3 or len({r.n for r in records}) < 3:
        raise ValueError("a slope fit needs at least three sizes")
    n = np.array([r.n for r in records], dtype=np.float64)
    values = np.array([getattr(r, metric) for r in records], dtype=np.float64)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError(f"{metric} must be positive and finite to fit a slope")
    slope, _ = np.polyfit(np.log(n), np.log(values), 1)
    return float(slope)


def write_csv(records: Iterable[BenchRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.DictWriter(handle, fieldnames=CSV_HEADER)
        writer.writeheader()
        for record in records:
            writer.writerow(record.to_row())
    return path
