from __future__ import annotations

import math
import os
from dataclasses import asdict, dataclass, field
from functools import lru_cache


def _optional_int(name: str) -> int | None:
    raw = os.getenv(name, "").strip()
    return int(raw) if raw else None


@dataclass(frozen=True)
class FaoConfig:
    """Configuration payload for atom construction."""

    direct_kernel_max: int
    prng_block_entries: int


@dataclass(frozen=True)
class DagConfig:
    """Configuration payload for dag rewriting, planning and evaluation."""

    max_rewrite_passes: int
    allow_in_place: bool
    parallel_workers: int


@dataclass(frozen=True)
class SolverConfig:
    """Configuration payload for the ADMM cone solver."""

    eps_abs: float
    eps_rel: float
    max_iters: int
    rho: float
    cg_rtol: float
    cg_max_iters: int | None
    log_every: int

    def cg_iteration_cap(self, n: int) -> int:
        """Return the CG iteration cap for an n-dimensional linear subproblem."""

        if self.cg_max_iters is not None:
            return self.cg_max_iters
        return max(1, int(math.ceil(10 * math.sqrt(max(n, 1)))))


@dataclass(frozen=True)
class BenchConfig:
    """Configuration payload for the benchmark harness."""

    repeats: int
    warmup: int
    tolerance: float


@dataclass
class AppConfig:
    """Centralized configuration loader."""

    log_level: str = field(default_factory=lambda: os.getenv("MATFREE_LOG_LEVEL", "INFO"))
    log_json: bool = field(default_factory=lambda: os.getenv("MATFREE_LOG_JSON", "0") == "1")
    direct_kernel_max: int = field(
        default_factory=lambda: int(os.getenv("MATFREE_DIRECT_KERNEL_MAX", "32"))
    )
    prng_block_entries: int = field(
        default_factory=lambda: int(os.getenv("MATFREE_PRNG_BLOCK_ENTRIES", "65536"))
    )
    max_rewrite_passes: int = field(
        default_factory=lambda: int(os.getenv("MATFREE_MAX_REWRITE_PASSES", "10"))
    )
    allow_in_place: bool = field(
        default_factory=lambda: os.getenv("MATFREE_ALLOW_IN_PLACE", "1") == "1"
    )
    parallel_workers: int = field(
        default_factory=lambda: int(os.getenv("MATFREE_PARALLEL_WORKERS", "0"))
    )
    eps_abs: float = field(default_factory=lambda: float(os.getenv("MATFREE_EPS_ABS", "1e-4")))
    eps_rel: float = field(default_factory=lambda: float(os.getenv("MATFREE_EPS_REL", "1e-3")))
    max_iters: int = field(default_factory=lambda: int(os.getenv("MATFREE_MAX_ITERS", "5000")))
    rho: float = field(default_factory=lambda: float(os.getenv("MATFREE_RHO", "1.0")))
    cg_rtol: float = field(default_factory=lambda: float(os.getenv("MATFREE_CG_RTOL", "1e-7")))
    cg_max_iters: int | None = field(
        default_factory=lambda: _optional_int("MATFREE_CG_MAX_ITERS")
    )
    log_every: int = field(default_factory=lambda: int(os.getenv("MATFREE_LOG_EVERY", "100")))
    bench_repeats: int = field(
        default_factory=lambda: int(os.getenv("MATFREE_BENCH_REPEATS", "3"))
    )
    bench_warmup: int = field(default_factory=lambda: int(os.getenv("MATFREE_BENCH_WARMUP", "1")))
    bench_tolerance: float = field(
        default_factory=lambda: float(os.getenv("MATFREE_BENCH_TOLERANCE", "1e-3"))
    )
    config_version: str = "1.0"

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    @property
    def fao(self) -> FaoConfig:
        """Return the atom construction configuration block."""

        return FaoConfig(
            direct_kernel_max=self.direct_kernel_max,
            prng_block_entries=self.prng_block_entries,
        )

    @property
    def dag(self) -> DagConfig:
        """Return the dag configuration block."""

        return DagConfig(
            max_rewrite_passes=self.max_rewrite_passes,
            allow_in_place=self.allow_in_place,
            parallel_workers=self.parallel_workers,
        )

    @property
    def solver(self) -> SolverConfig:
        """Return the solver configuration block."""

        return SolverConfig(
            eps_abs=self.eps_abs,
            eps_rel=self.eps_rel,
            max_iters=self.max_iters,
            rho=self.rho,
            cg_rtol=self.cg_rtol,
            cg_max_iters=self.cg_max_iters,
            log_every=self.log_every,
        )

    @property
    def bench(self) -> BenchConfig:
        return BenchConfig(
            repeats=self.bench_repeats,
            warmup=self.bench_warmup,
            tolerance=self.bench_tolerance,
        )


@lru_cache(maxsize=1)
def get_config() -> AppConfig:
    """Return the process-wide configuration, read once from the environment."""

    return AppConfig()
