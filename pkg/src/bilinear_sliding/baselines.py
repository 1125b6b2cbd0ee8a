"""Reference solvers: extragradient and simultaneous gradient descent-ascent."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .oracles import CostModel, OracleLedger
from .problem import SaddlePointProblem, SolutionSet, r2_metric, solve_exact_quadratic
from .traces import TraceRecord

__all__ = ["BaselineConfig", "BaselineResult", "default_step", "run_baseline",
           "ExtragradientSolver", "GDASolver"]

METHODS = ("extragradient", "gda")
DIVERGENCE_FACTOR = 10.0


def default_step(problem: SaddlePointProblem) -> float:
    """``1 / (2 (L_x + L_y + L_xy))``, safe for the saddle operator."""
    p = problem.params
    return 1.0 / (2.0 * (p.L_x + p.L_y + p.L_xy))


@dataclass(frozen=True)
class BaselineConfig:
    method: str = "extragradient"
    step: float | None = None
    max_iters: int = 10_000
    stop_r2: float = 0.0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.step is not None and self.step < 0:
            raise ValueError("step must be non-negative")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


@dataclass
class BaselineResult:
    x: np.ndarray
    y: np.ndarray
    trace: list
    diverged: bool
    converged: bool
    iterations: int

    def __iter__(self):  # allows ``x, y, trace = run_baseline(...)``
        return iter((self.x, self.y, self.trace))


def run_baseline(problem: SaddlePointProblem, config: BaselineConfig = BaselineConfig(),
                 ledger: OracleLedger | None = None, solution: SolutionSet | None = None,
                 z0=None, cost_model: CostModel | None = None) -> BaselineResult:
    """Iterate extragradient or GDA on ``G(x, y) = (grad f(x) + B^T y, grad g(y) - B x)``.

    The trace holds one record per iteration (phase 0 is the start).  A run
    whose distance to the solution exceeds ten times the initial one stops
    and is reported as diverged rather than raising.
    """
    ledger = OracleLedger() if ledger is None else ledger
    model = CostModel() if cost_model is None else cost_model
    counted = problem.counted(ledger)
    if solution is None:
        solution = solve_exact_quadratic(problem)
    step = default_step(problem) if config.step is None else config.step
    dx = problem.dx
    x = np.zeros(dx) if z0 is None else np.asarray(z0, float)[:dx].copy()
    y = np.zeros(problem.dy) if z0 is None else np.asarray(z0, float)[dx:].copy()

    r2_0 = r2_metric(problem, solution, x, y)
    trace = [TraceRecord.from_ledger(0, ledger, model, r2=r2_0)]
    diverged = converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        gx, gy = counted.operator(x, y)
        if config.method == "extragradient":
            xh, yh = x - step * gx, y - step * gy
            gx, gy = counted.operator(xh, yh)
        x, y = x - step * gx, y - step * gy
        r2 = r2_metric(problem, solution, x, y)
        trace.append(TraceRecord.from_ledger(it, ledger, model, r2=r2))
        if not np.isfinite(r2) or r2 > DIVERGENCE_FACTOR * r2_0:
            diverged = True
            break
        if r2 <= config.stop_r2:
            converged = True
            break
    return BaselineResult(x, y, trace, diverged, converged, it)


class _BaselineSolver(BaseEstimator):
    method = None

    def __init__(self, step=None, max_iters=10_000, stop_r2=0.0, z0=None):
        self.step = step
        self.max_iters = max_iters
        self.stop_r2 = stop_r2
        self.z0 = z0

    def fit(self, problem: SaddlePointProblem, y=None):
        self.ledger_ = OracleLedger()
        res = run_baseline(problem, BaselineConfig(self.method, self.step, self.max_iters, self.stop_r2),
                           self.ledger_, z0=self.z0)
        self.x_, self.y_, self.trace_ = res.x, res.y, res.trace
        self.diverged_ = res.diverged
        self.converged_ = res.converged
        self.n_iter_ = res.iterations
        return self

    def predict(self, problem=None):
        return self.x_, self.y_


class ExtragradientSolver(_BaselineSolver):
    """Extragradient with step ``1 / (2 (L_x + L_y + L_xy))`` by default."""

    method = "extragradient"


class GDASolver(_BaselineSolver):
    """Simultaneous gradient descent-ascent."""

    method = "gda"
