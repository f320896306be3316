"""Structured logging configuration using structlog."""

from __future__ import annotations

import logging
import sys
import uuid
from collections.abc import Iterator
from contextlib import contextmanager
from contextvars import ContextVar
from typing import Any

import numpy as np
import structlog

# Benchmark sweep context
run_id_var: ContextVar[str | None] = ContextVar("run_id", default=None)
problem_var: ContextVar[str | None] = ContextVar("problem", default=None)
backend_var: ContextVar[str | None] = ContextVar("backend", default=None)

_CONTEXT_VARS = {"run_id": run_id_var, "problem": problem_var, "backend": backend_var}


def add_context_fields(logger: Any, method_name: str, event_dict: dict[str, Any]) -> dict[str, Any]:
    """Add sweep context (run_id, problem, backend) to log events."""
    for key, var in _CONTEXT_VARS.items():
        value = var.get()
        if value:
            event_dict.setdefault(key, value)
    return event_dict


def plain_numbers(logger: Any, method_name: str, event_dict: dict[str, Any]) -> dict[str, Any]:
    """Turn numpy scalars into Python numbers and trim floats to 6 significant digits."""
    for key, value in event_dict.items():
        if isinstance(value, np.generic):
            value = value.item()
        if isinstance(value, float):
            value = float(f"{value:.6g}")
        event_dict[key] = value
    return event_dict


def configure_logging(log_level: str = "INFO", json_output: bool = True) -> None:
    """Send structlog events through stdlib logging on stderr.

    ``log_level`` is a stdlib level name; unknown names fall back to INFO. Events render as
    one JSON object per line unless ``json_output`` is false, which selects the console
    renderer.
    """
    # stdout is reserved for command output
    logging.basicConfig(
        format="%(message)s",
        stream=sys.stderr,
        level=getattr(logging, log_level.upper(), logging.INFO),
        force=True,
    )

    processors = [
        structlog.contextvars.merge_contextvars,
        add_context_fields,
        plain_numbers,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]
    if json_output:
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def get_logger(name: str | None = None) -> structlog.stdlib.BoundLogger:
    """Get a configured structlog logger."""
    return structlog.get_logger(name)


@contextmanager
def bound_run(backend: str | None = None) -> Iterator[str]:
    """Tag every event inside the block with a fresh run id; restores the outer context."""
    run_id = uuid.uuid4().hex[:12]
    tokens = [run_id_var.set(run_id), backend_var.set(backend), problem_var.set(None)]
    try:
        yield run_id
    finally:
        for var, token in zip((run_id_var, backend_var, problem_var), tokens):
            var.reset(token)


def set_problem(problem: str | None) -> None:
    """Label the problem instance currently being processed."""
    problem_var.set(problem)
