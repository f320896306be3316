"""Logging context and processors."""

from __future__ import annotations

import logging

import numpy as np
import structlog

from matfree.logging_config import (
    add_context_fields,
    backend_var,
    bound_run,
    configure_logging,
    plain_numbers,
    problem_var,
    run_id_var,
    set_problem,
)


def test_bound_run_tags_events_and_restores_context():
    assert run_id_var.get() is None
    with bound_run("sparse") as run_id:
        set_problem("deconv:64")
        event = add_context_fields(None, "info", {"event": "x"})
        assert event == {
            "event": "x",
            "run_id": run_id,
            "problem": "deconv:64",
            "backend": "sparse",
        }
    assert run_id_var.get() is None
    assert problem_var.get() is None
    assert backend_var.get() is None


def test_explicit_fields_win_over_context():
    with bound_run("matfree"):
        event = add_context_fields(None, "info", {"backend": "sparse"})
    assert event["backend"] == "sparse"


def test_plain_numbers():
    event = plain_numbers(
        None, "info", {"residual": np.float64(1.23456789e-5), "iters": np.int64(7), "s": "ok"}
    )
    assert event == {"residual": 1.23457e-5, "iters": 7, "s": "ok"}
    assert type(event["iters"]) is int


def test_configure_logging_levels_and_renderer():
    root = logging.getLogger()
    previous = root.level
    try:
        configure_logging("debug", json_output=False)
        assert root.level == logging.DEBUG
        assert isinstance(structlog.get_config()["processors"][-1], structlog.dev.ConsoleRenderer)
        configure_logging("verbose")
        assert root.level == logging.INFO
        renderer = structlog.get_config()["processors"][-1]
        assert isinstance(renderer, structlog.processors.JSONRenderer)
    finally:
        root.setLevel(previous)
