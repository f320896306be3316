"""Graph-form ADMM for matrix-free cone programs.

The cone program  minimize c^T x + d  s.t.  A x + b in K  is solved as

    minimize  c^T x + I_K(z + b)   subject to  z = A x

by alternating the two proximal steps with a projection onto the graph {(x, z) : z = A x}.
The projection solves (I + A^T A) x = u + A^T w with conjugate gradient, warm started from the
previous iterate, so A is only ever applied forward and adjoint.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.sparse.linalg import LinearOperator, aslinearoperator, cg

from ..canon.program import ConeProgram
from ..config.settings import SolverConfig, get_config
from ..fao.evaluate import DagOperator
from ..logging_config import get_logger
from ..metrics import get_metrics
from .cones import project_cones

logger = get_logger(__name__)

BACKENDS: tuple[str, ...] = ("matfree", "sparse")

SOLVED = "solved"
MAX_ITERS = "max-iters"


@dataclass
class AdmmState:
    """One ADMM iterate.

    ``x``/``z`` lie on the graph z = A x; ``x_half``/``y_half`` are the proximal iterates with
    y_half in K; ``x_tilde``/``z_tilde`` are the scaled dual variables.
    """

    x: np.ndarray
    z: np.ndarray
    x_half: np.ndarray
    y_half: np.ndarray
    x_tilde: np.ndarray
    z_tilde: np.ndarray
    x_prev: np.ndarray
    z_prev: np.ndarray
    rho: float = 1.0

    @classmethod
    def zeros(cls, n: int, m: int, rho: float = 1.0) -> AdmmState:
        return cls(*(np.zeros(k) for k in (n, m, n, m, n, m, n, m)), rho=rho)


def residuals(
    state: AdmmState,
    operator: LinearOperator,
    b: np.ndarray,
    ax_half: np.ndarray | None = None,
) -> tuple[float, float]:
    """Primal residual ||A x_half + b - y_half|| and dual residual rho ||(dx, dz)||."""
    if ax_half is None:
        ax_half = operator.matvec(state.x_half)
    primal = float(np.linalg.norm(ax_half + b - state.y_half))
    dual = state.rho * math.hypot(
        float(np.linalg.norm(state.x - state.x_prev)),
        float(np.linalg.norm(state.z - state.z_prev)),
    )
    return primal, dual


@dataclass
class Solution:
    x: np.ndarray
    variables: dict[str, np.ndarray]
    objective: float
    status: str
    primal_residual: float
    dual_residual: float
    iterations: int
    cg_iterations: int = 0
    materializations: int = 0
    solve_seconds: float = 0.0
    backend: str = "matfree"
    history: list[dict[str, Any]] = field(default_factory=list, repr=False)

    @property
    def solved(self) -> bool:
        return self.status == SOLVED

    def summary(self) -> dict[str, Any]:
        return {
            "status": self.status,
            "objective": self.objective,
            "iterations": self.iterations,
            "cg_iterations": self.cg_iterations,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "materializations": self.materializations,
            "solve_seconds": round(self.solve_seconds, 6),
            "backend": self.backend,
        }


def _operator(program: ConeProgram, backend: str) -> LinearOperator:
    if backend == "matfree":
        if program.G is None:
            raise ValueError("the program has no constraint operator")
        return DagOperator(program.G, parallel_workers=get_config().dag.parallel_workers)
    if backend == "sparse":
        return aslinearoperator(program.sparse_matrix())
    raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")


def _unconstrained(program: ConeProgram, backend: str, started: float) -> Solution:
    x = np.zeros(program.n)
    if np.any(program.c):
        logger.warning("unbounded", reason="nonzero objective without constraints")
        status, objective = MAX_ITERS, -math.inf
    else:
        status, objective = SOLVED, program.offset
    return Solution(
        x=x,
        variables=program.variable_values(x),
        objective=objective,
        status=status,
        primal_residual=0.0,
        dual_residual=0.0,
        iterations=0,
        solve_seconds=time.perf_counter() - started,
        backend=backend,
    )


def solve(
    program: ConeProgram,
    config: SolverConfig | None = None,
    *,
    backend: str = "matfree",
    **overrides: Any,
) -> Solution:
    """Solve ``program``; keyword overrides replace fields of the solver configuration
    (``eps_abs``, ``eps_rel``, ``max_iters``, ``rho``, ``cg_rtol``, ...)."""
    config = dataclasses.replace(config or get_config().solver, **overrides)
    metrics = get_metrics()
    materialized_before = metrics.materializations
    started = time.perf_counter()
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; expected one of {BACKENDS}")
    if program.m == 0:
        return _unconstrained(program, backend, started)

    operator = _operator(program, backend)
    n, m, rho = program.n, program.m, config.rho
    c, b, cones = program.c, program.b, program.cones
    gram = LinearOperator(
        shape=(n, n),
        matvec=lambda v: v + operator.rmatvec(operator.matvec(v)),
        dtype=np.float64,
    )
    cg_cap = config.cg_iteration_cap(n)
    norm_b = float(np.linalg.norm(b))

    state = AdmmState.zeros(n, m, rho)
    history: list[dict[str, Any]] = []
    cg_total = 0
    best: tuple[float, np.ndarray, float, float] | None = None
    status = MAX_ITERS
    primal = dual = math.inf
    iteration = 0

    def count(_: np.ndarray) -> None:
        nonlocal cg_total
        cg_total += 1

    try:
        for iteration in range(1, config.max_iters + 1):
            state.x_prev, state.z_prev = state.x, state.z
            state.x_half = state.x - state.x_tilde - c / rho
            state.y_half = project_cones(cones, state.z - state.z_tilde + b)
            z_half = state.y_half - b

            u = state.x_half + state.x_tilde
            w = z_half + state.z_tilde
            rhs = u + operator.rmatvec(w)
            before = cg_total
            x_new, _ = cg(
                gram, rhs, x0=state.x, rtol=config.cg_rtol, maxiter=cg_cap, callback=count
            )
            metrics.record_cg(cg_total - before)
            z_new = operator.matvec(x_new)

            state.x_tilde = state.x_tilde + state.x_half - x_new
            state.z_tilde = state.z_tilde + z_half - z_new
            state.x, state.z = x_new, z_new

            ax_half = operator.matvec(state.x_half)
            primal, dual = residuals(state, operator, b, ax_half)
            eps_pri = config.eps_abs + config.eps_rel * max(
                float(np.linalg.norm(ax_half)), float(np.linalg.norm(state.y_half)), norm_b
            )
            eps_dual = config.eps_abs + config.eps_rel * rho * math.hypot(
                float(np.linalg.norm(state.x_tilde)), float(np.linalg.norm(state.z_tilde))
            )
            objective = float(c @ state.x_half) + program.offset

            score = max(primal / eps_pri, dual / eps_dual)
            if best is None or score < best[0]:
                best = (score, state.x_half.copy(), primal, dual)

            if iteration == 1 or iteration % config.log_every == 0:
                record = {
                    "iter": iteration,
                    "primal_res": primal,
                    "dual_res": dual,
                    "objective": objective,
                }
                history.append(record)
                logger.info("admm_iteration", **record)

            if primal <= eps_pri and dual <= eps_dual:
                status = SOLVED
                break
    finally:
        if isinstance(operator, DagOperator):
            operator.close()

    if status == SOLVED or best is None:
        x = state.x_half
    else:
        _, x, primal, dual = best
    objective = program.objective_value(x)
    solution = Solution(
        x=x,
        variables=program.variable_values(x),
        objective=objective,
        status=status,
        primal_residual=primal,
        dual_residual=dual,
        iterations=iteration,
        cg_iterations=cg_total,
        materializations=metrics.materializations - materialized_before,
        solve_seconds=time.perf_counter() - started,
        backend=backend,
        history=history,
    )
    log = logger.info if solution.solved else logger.warning
    log(
        "admm_finished",
        status=status,
        iterations=iteration,
        objective=objective,
        primal_res=primal,
        dual_res=dual,
        cg_iterations=cg_total,
    )
    return solution
