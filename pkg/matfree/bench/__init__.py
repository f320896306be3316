"""Benchmark problem generators and the sweep harness."""

from .generators import (
    PROBLEMS,
    gaussian_kernel,
    gen_deconv,
    gen_sylvester,
    generate,
    spike_clusters,
)
from .harness import (
    CSV_HEADER,
    BenchRecord,
    fit_slope,
    median_time,
    multiply_seconds,
    run_bench,
    write_csv,
)

__all__ = [
    "CSV_HEADER",
    "PROBLEMS",
    "BenchRecord",
    "fit_slope",
    "gaussian_kernel",
    "gen_deconv",
    "gen_sylvester",
    "generate",
    "median_time",
    "multiply_seconds",
    "run_bench",
    "spike_clusters",
    "write_csv",
]
