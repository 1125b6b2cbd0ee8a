"""The saddle-point problem as a three-component monotone VI, and the restart driver.

On ``z = (x, y)`` the components are

* ``p1(z) = f(x)`` and ``p2(z) = g(y)`` with no operator part;
* ``p3(z) = bx/2 ||B x - grad g(y_in)||^2 + by/2 ||B^T y + grad f(x_in)||^2``
  together with the skew operator ``Q3(z) = (B^T y, -B x)``,

with ``bx = 1 / (4 L_y)``, ``by = 1 / (4 L_x)`` and the weight
``P = diag(delta_x I, delta_y I)``.  In that geometry the components have
Lipschitz constants ``(kappa_x, kappa_y, kappa_xy)`` and ``Q3`` has
``sqrt(kappa_xy)``.  One sliding pass with target ``1/72`` shrinks the
Lyapunov function by at least ``2/3``; restarting from the output gives
linear convergence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from sklearn.base import BaseEstimator

from .numerics import DiagWeight, as_vector
from .oracles import CostModel, LinearOp, MonotoneOp, OracleLedger, QuadraticFn, SmoothFn
from .problem import (AssumptionViolation, SaddlePointProblem, SolutionSet, _uncounted,
                      lyapunov, r2_metric, solve_exact_quadratic, validate_assumption5)
from .sliding import make_schedule, run_sliding
from .traces import TraceRecord
from .vi import VIComponent, VIProblem

__all__ = [
    "EPS_INNER", "CONTRACTION", "AdapterConfig", "adapter_config", "build_vi", "lyapunov",
    "RestartPlan", "restart_plan", "restarted_solve", "SlidingSaddleSolver",
]

EPS_INNER = 1.0 / 72.0
CONTRACTION = 2.0 / 3.0


@dataclass(frozen=True)
class AdapterConfig:
    beta_x: float
    beta_y: float
    P: DiagWeight
    eps_inner: float = EPS_INNER


def adapter_config(problem: SaddlePointProblem) -> AdapterConfig:
    p = problem.params
    cn = problem.condition_numbers()
    P = DiagWeight.blocks((cn.delta_x, problem.dx), (cn.delta_y, problem.dy))
    return AdapterConfig(1.0 / (4.0 * p.L_y), 1.0 / (4.0 * p.L_x), P)


class _LiftedFn(SmoothFn):
    """``z -> h(z[part])`` for one block of ``z = (x, y)``."""

    def __init__(self, fn: SmoothFn, part: slice, dim, ledger, counter):
        super().__init__(dim, fn.L, 0.0)
        self.inner = fn
        self.part = part
        self.ledger = ledger
        self.oracle_cost = {counter: 1}

    def value(self, z):
        return self.inner.value(z[self.part])

    def gradient(self, z):
        _charge(self.ledger, self.oracle_cost)
        out = np.zeros(self.dim)
        out[self.part] = self.inner.gradient(z[self.part])
        return out

    @property
    def is_quadratic(self):
        return self.inner.is_quadratic

    def affine_form(self):
        if not isinstance(self.inner, QuadraticFn):
            return None
        A = np.zeros((self.dim, self.dim))
        A[self.part, self.part] = self.inner.hessian
        b = np.zeros(self.dim)
        b[self.part] = self.inner.linear
        return A, b


class _AnchoredCoupling(SmoothFn):
    """``bx/2 ||B x - a_g||^2 + by/2 ||B^T y + a_f||^2`` with frozen anchors."""

    def __init__(self, B, beta_x, beta_y, anchor_f, anchor_g, ledger):
        dx, dy = B.cols, B.rows
        super().__init__(dx + dy, 0.0, 0.0)
        self.B = B
        self.beta_x = beta_x
        self.beta_y = beta_y
        self.anchor_f = anchor_f
        self.anchor_g = anchor_g
        self.ledger = ledger
        self.dx = dx
        self.oracle_cost = {"matvec_B": 2, "matvec_Bt": 2}

    def _residuals(self, z):
        x, y = z[:self.dx], z[self.dx:]
        return self.B.forward(x) - self.anchor_g, self.B.adjoint(y) + self.anchor_f

    def value(self, z):
        rx, ry = self._residuals(z)
        return 0.5 * self.beta_x * float(rx @ rx) + 0.5 * self.beta_y * float(ry @ ry)

    def gradient(self, z):
        _charge(self.ledger, self.oracle_cost)
        rx, ry = self._residuals(z)
        return np.concatenate([self.beta_x * self.B.adjoint(rx), self.beta_y * self.B.forward(ry)])

    @property
    def is_quadratic(self):
        return True

    def affine_form(self):
        B = self.B.to_dense()
        dx, dy = B.shape[1], B.shape[0]
        A = np.zeros((dx + dy, dx + dy))
        A[:dx, :dx] = self.beta_x * (B.T @ B)
        A[dx:, dx:] = self.beta_y * (B @ B.T)
        b = np.concatenate([self.beta_x * (B.T @ self.anchor_g), -self.beta_y * (B @ self.anchor_f)])
        return A, b


class _CouplingOp(MonotoneOp):
    """``Q3(x, y) = (B^T y, -B x)``."""

    def __init__(self, B, M, ledger):
        super().__init__(B.cols + B.rows, M)
        self.B = B
        self.dx = B.cols
        self.ledger = ledger
        self.oracle_cost = {"matvec_B": 1, "matvec_Bt": 1}

    def apply(self, z):
        _charge(self.ledger, self.oracle_cost)
        x, y = z[:self.dx], z[self.dx:]
        return np.concatenate([self.B.adjoint(y), -self.B.forward(x)])

    def affine_form(self):
        B = self.B.to_dense()
        dx, dy = B.shape[1], B.shape[0]
        S = np.zeros((dx + dy, dx + dy))
        S[:dx, dx:] = B.T
        S[dx:, :dx] = -B
        return S


def _charge(ledger, cost):
    if ledger is not None:
        for name, k in cost.items():
            ledger.increment(name, k)


def _raw_B(problem):
    return getattr(problem.B, "inner", problem.B)


def _check_assumptions(problem: SaddlePointProblem):
    report = validate_assumption5(problem.params)
    if not report:
        raise AssumptionViolation("; ".join(report.violations))


def build_vi(problem: SaddlePointProblem, z_in, ledger: OracleLedger | None = None,
             check=True) -> VIProblem:
    """Three-component VI for ``problem`` anchored at ``z_in = (x_in, y_in)``.

    The anchors ``grad f(x_in)`` and ``grad g(y_in)`` are evaluated here, once,
    and charged to ``ledger``.  Component oracles charge ``ledger`` on every
    evaluation: ``grad p1`` one ``grad_f``, ``grad p2`` one ``grad_g``,
    ``grad p3`` two products with ``B`` and two with ``B^T``, ``Q3`` one of each.
    """
    if check:
        _check_assumptions(problem)
    z_in = as_vector(z_in, "z_in")
    dx, dy = problem.dx, problem.dy
    if z_in.size != dx + dy:
        raise ValueError(f"z_in has dimension {z_in.size}, expected {dx + dy}")
    cfg = adapter_config(problem)
    cn = problem.condition_numbers()
    f, g, B = _uncounted(problem.f), _uncounted(problem.g), _raw_B(problem)
    anchor_f = f.gradient(z_in[:dx])
    anchor_g = g.gradient(z_in[dx:])
    _charge(ledger, {"grad_f": 1, "grad_g": 1})
    d = dx + dy
    comps = [
        VIComponent(_LiftedFn(f, slice(0, dx), d, ledger, "grad_f"), L=cn.kappa_x, M=0.0),
        VIComponent(_LiftedFn(g, slice(dx, d), d, ledger, "grad_g"), L=cn.kappa_y, M=0.0),
        VIComponent(_AnchoredCoupling(B, cfg.beta_x, cfg.beta_y, anchor_f, anchor_g, ledger),
                    _CouplingOp(B, math.sqrt(cn.kappa_xy), ledger), L=cn.kappa_xy, M=math.sqrt(cn.kappa_xy)),
    ]
    return VIProblem(comps, cfg.P)


@dataclass(frozen=True)
class RestartPlan:
    """Restart count ``ceil(log(c R^2 / eps) / log(3/2))`` with ``c = 1 + 12 kappa_x + 12 kappa_y``.

    Targets above ``R^2`` are already met at the start and need no restart.
    """

    eps_target: float
    R2_initial: float
    c: float
    T_restarts: int


def restart_plan(problem: SaddlePointProblem, eps_target, R2) -> RestartPlan:
    if not eps_target > 0:
        raise ValueError("eps_target must be positive")
    if R2 < 0:
        raise ValueError("R2 must be non-negative")
    cn = problem.condition_numbers()
    c = 1.0 + 12.0 * cn.kappa_x + 12.0 * cn.kappa_y
    if eps_target > R2:
        T = 0
    else:
        T = max(0, math.ceil(math.log(c * R2 / eps_target) / math.log(1.5)))
    return RestartPlan(float(eps_target), float(R2), c, T)


def restarted_solve(problem: SaddlePointProblem, eps_target=None, ledger: OracleLedger | None = None,
                    sink: Callable[[TraceRecord], None] | None = None, solution: SolutionSet | None = None,
                    n_restarts=None, R2=None, z0=None, cost_model: CostModel | None = None,
                    backend="auto", instrument=True):
    """Restarted sliding method for a bilinearly-coupled saddle problem.

    Parameters
    ----------
    problem : SaddlePointProblem
    eps_target : float, optional
        Accuracy in the weighted squared distance to the solution set.  The
        number of restarts follows :func:`restart_plan` unless
        ``n_restarts`` is given.
    ledger : OracleLedger, optional
        Accumulates oracle counts across all restarts.
    sink : callable, optional
        Receives one :class:`TraceRecord` per restart (phase 0 is the start).
    solution : SolutionSet, optional
        Instrumentation only: used for the distance and Lyapunov columns and,
        when ``R2`` is omitted, for the initial distance.  Computed exactly for
        quadratic problems when not supplied.
    n_restarts : int, optional
    R2 : float, optional
        Upper bound on the initial weighted squared distance.
    z0 : array_like, optional
        Starting point, zero by default.

    Returns
    -------
    x, y : ndarray
    trace : list of TraceRecord
    """
    _check_assumptions(problem)
    ledger = OracleLedger() if ledger is None else ledger
    model = CostModel() if cost_model is None else cost_model
    dx, dy = problem.dx, problem.dy
    z = np.zeros(dx + dy) if z0 is None else as_vector(z0, "z0").copy()
    if solution is None and instrument and problem.is_quadratic:
        solution = solve_exact_quadratic(problem)
    if n_restarts is None:
        if eps_target is None:
            raise ValueError("give eps_target or n_restarts")
        if R2 is None:
            if solution is None:
                raise ValueError("R2 is required when the solution set is unknown")
            R2 = r2_metric(problem, solution, z[:dx], z[dx:])
        n_restarts = restart_plan(problem, eps_target, R2).T_restarts

    trace = []

    def emit(phase):
        r2 = psi = None
        if solution is not None:
            r2 = r2_metric(problem, solution, z[:dx], z[dx:])
            psi = lyapunov(problem, solution, z[:dx], z[dx:])
        rec = TraceRecord.from_ledger(phase, ledger, model, r2=r2, psi=psi)
        trace.append(rec)
        if sink is not None:
            sink(rec)

    emit(0)
    schedule = None
    for k in range(1, int(n_restarts) + 1):
        vi = build_vi(problem, z, ledger, check=False)
        if schedule is None:
            schedule = make_schedule(vi.L, vi.M, EPS_INNER)
        z = run_sliding(vi, schedule, z, ledger, backend=backend)
        emit(k)
    return z[:dx].copy(), z[dx:].copy(), trace


class SlidingSaddleSolver(BaseEstimator):
    """Restarted sliding solver with an estimator interface.

    Parameters
    ----------
    eps : float
        Target weighted squared distance; with ``relative=True`` it is scaled
        by the initial distance.
    relative : bool
    n_restarts : int, optional
        Fixed restart count, overriding the planned one.
    backend : {"auto", "python", "compiled"}
    tau_f, tau_g, tau_B : float
        Oracle times of the execution-time model.

    Attributes
    ----------
    x_, y_ : ndarray
        Final iterate.
    trace_ : list of TraceRecord
    ledger_ : OracleLedger
    plan_ : RestartPlan or None
    solution_ : SolutionSet or None
    """

    def __init__(self, eps=1e-8, relative=True, n_restarts=None, backend="auto",
                 tau_f=1.0, tau_g=1.0, tau_B=1.0):
        self.eps = eps
        self.relative = relative
        self.n_restarts = n_restarts
        self.backend = backend
        self.tau_f = tau_f
        self.tau_g = tau_g
        self.tau_B = tau_B

    def fit(self, problem: SaddlePointProblem, y=None):
        if not isinstance(problem, SaddlePointProblem):
            raise TypeError("fit expects a SaddlePointProblem")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        self.solution_ = solve_exact_quadratic(problem) if problem.is_quadratic else None
        zeros_x, zeros_y = np.zeros(problem.dx), np.zeros(problem.dy)
        R2 = r2_metric(problem, self.solution_, zeros_x, zeros_y) if self.solution_ is not None else None
        eps = self.eps
        if self.relative:
            if R2 is None:
                raise ValueError("relative targets need a quadratic problem")
            eps = self.eps * R2
        self.plan_ = None
        n = self.n_restarts
        if n is None:
            if R2 is None:
                raise ValueError("R2 unknown: give n_restarts for non-quadratic problems")
            self.plan_ = restart_plan(problem, eps, R2)
            n = self.plan_.T_restarts
        self.ledger_ = OracleLedger()
        model = CostModel(self.tau_f, self.tau_g, self.tau_B)
        self.x_, self.y_, self.trace_ = restarted_solve(
            problem, eps, self.ledger_, solution=self.solution_, n_restarts=n, cost_model=model,
            backend=self.backend)
        return self

    def predict(self, problem=None):
        """The computed saddle point ``(x, y)``."""
        return self.x_, self.y_
