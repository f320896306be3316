"""Operator instrumentation counters."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Any

from .logging_config import get_logger

logger = get_logger(__name__)


@dataclass
class OperatorMetrics:
    """Counts operator applications and explicit matrix materializations."""

    forward_evals: int = 0
    adjoint_evals: int = 0
    cg_iterations: int = 0
    materializations: int = 0
    start_time: float = field(default_factory=time.monotonic)

    def record_forward(self) -> None:
        self.forward_evals += 1

    def record_adjoint(self) -> None:
        self.adjoint_evals += 1

    def record_cg(self, iterations: int) -> None:
        self.cg_iterations += iterations

    def record_materialization(self, source: str) -> None:
        """Record that an explicit matrix was built from an operator."""
        self.materializations += 1
        logger.debug("materialization", source=source, total=self.materializations)

    def emit_metrics(self) -> None:
        """Emit current metrics to logs."""
        logger.info("metrics", **self.get_metrics())

    def get_metrics(self) -> dict[str, Any]:
        """Get current metrics as a dictionary."""
        return {
            "forward_evals": self.forward_evals,
            "adjoint_evals": self.adjoint_evals,
            "cg_iterations": self.cg_iterations,
            "materializations": self.materializations,
            "elapsed_seconds": round(time.monotonic() - self.start_time, 3),
        }


# Global collector shared by atoms, dags and the solver
_global_metrics = OperatorMetrics()


def get_metrics() -> OperatorMetrics:
    """Get the global metrics collector."""
    return _global_metrics


def reset_metrics() -> None:
    """Reset global metrics (useful for testing)."""
    global _global_metrics
    _global_metrics = OperatorMetrics()
