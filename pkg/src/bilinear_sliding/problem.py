"""Bilinearly-coupled saddle-point problems ``min_x max_y f(x) + <y, Bx> - g(y)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .numerics import as_vector, kernel_basis, sym_eigs
from .oracles import (CountedFn, DenseLinearMap, LinearMap, OracleLedger, QuadraticFn,
                      SmoothFn, bregman, wrap_counting)


class DegenerateProblem(ValueError):
    """``min(delta_x, delta_y) = 0``: no linearly converging method exists."""


class NonQuadratic(ValueError):
    """Raised when an exact solve is requested for non-affine gradients."""


class AssumptionViolation(ValueError):
    pass


@dataclass(frozen=True)
class ProblemParams:
    L_x: float
    L_y: float
    L_xy: float
    mu_x: float = 0.0
    mu_y: float = 0.0
    mu_xy: float = 0.0
    mu_yx: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{f.name} must be a finite non-negative number, got {v}")
            object.__setattr__(self, f.name, v)
        if not self.L_x > self.mu_x:
            raise ValueError("need L_x > mu_x")
        if not self.L_y > self.mu_y:
            raise ValueError("need L_y > mu_y")
        if not (self.L_xy > self.mu_xy and self.L_xy > self.mu_yx):
            raise ValueError("need L_xy > mu_xy, mu_yx")
        if self.mu_xy > 0 and self.mu_yx > 0 and not math.isclose(self.mu_xy, self.mu_yx, rel_tol=1e-12):
            raise ValueError("mu_xy and mu_yx must coincide when both are positive")

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes):
        d = self.as_dict()
        d.update(changes)
        return ProblemParams(**d)


@dataclass(frozen=True)
class ConditionNumbers:
    delta_x: float
    delta_y: float
    kappa_x: float
    kappa_y: float
    kappa_xy: float


def condition_numbers(params: ProblemParams) -> ConditionNumbers:
    p = params
    delta_x = p.mu_x + p.mu_xy ** 2 / p.L_y
    delta_y = p.mu_y + p.mu_yx ** 2 / p.L_x
    if min(delta_x, delta_y) <= 0:
        raise DegenerateProblem(f"min(delta_x, delta_y) = {min(delta_x, delta_y)}; linear convergence impossible")
    return ConditionNumbers(
        delta_x=delta_x,
        delta_y=delta_y,
        kappa_x=p.L_x / delta_x,
        kappa_y=p.L_y / delta_y,
        kappa_xy=p.L_xy ** 2 / (delta_x * delta_y),
    )


class AssumptionReport:
    """Truthy iff no inequality is violated; ``violations`` lists the failed ones."""

    def __init__(self, violations):
        self.violations = list(violations)

    @property
    def ok(self):
        return not self.violations

    def __bool__(self):
        return self.ok

    def __repr__(self):
        return f"AssumptionReport(ok={self.ok}, violations={self.violations!r})"


def validate_assumption5(params: ProblemParams) -> AssumptionReport:
    """Check the margin conditions that keep all condition numbers bounded below."""
    p = params
    m = max(p.mu_xy, p.mu_yx)
    checks = [
        ("L_x > 4 mu_x", p.L_x > 4 * p.mu_x),
        ("L_y > 4 mu_y", p.L_y > 4 * p.mu_y),
        ("L_xy > 18 max{mu_xy, mu_yx, sqrt(mu_x mu_y)}",
         p.L_xy > 18 * max(p.mu_xy, p.mu_yx, math.sqrt(p.mu_x * p.mu_y))),
        ("sqrt(L_x L_y) > 4 max{mu_xy, mu_yx}", math.sqrt(p.L_x * p.L_y) > 4 * m),
    ]
    return AssumptionReport(name for name, ok in checks if not ok)


class SaddlePointProblem:
    """``min_x max_y f(x) + <y, B x> - g(y)`` together with its parameter vector.

    Parameters
    ----------
    f, g : SmoothFn
        Convex smooth functions on ``R^{d_x}`` and ``R^{d_y}``.
    B : LinearMap or array_like
        Coupling matrix of shape ``(d_y, d_x)``.
    params : ProblemParams
    name : str, optional
    """

    def __init__(self, f: SmoothFn, g: SmoothFn, B, params: ProblemParams, name=None):
        if not isinstance(B, LinearMap):
            B = DenseLinearMap(B)
        if B.cols != f.dim or B.rows != g.dim:
            raise ValueError(f"B has shape {B.shape}, expected ({g.dim}, {f.dim})")
        self.f = f
        self.g = g
        self.B = B
        self.params = params
        self.name = name

    @property
    def dx(self):
        return self.f.dim

    @property
    def dy(self):
        return self.g.dim

    @property
    def is_quadratic(self):
        return self.f.is_quadratic and self.g.is_quadratic

    def condition_numbers(self):
        return condition_numbers(self.params)

    def split(self, z):
        z = np.asarray(z, dtype=float)
        return z[:self.dx], z[self.dx:]

    def operator(self, x, y):
        """Saddle operator ``G(x, y) = (grad f(x) + B^T y, grad g(y) - B x)``."""
        return (self.f.gradient(x) + self.B.adjoint(y), self.g.gradient(y) - self.B.forward(x))

    def counted(self, ledger: OracleLedger):
        """Copy whose oracles report every evaluation to ``ledger``."""
        return SaddlePointProblem(
            wrap_counting(_uncounted(self.f), ledger, "grad_f"),
            wrap_counting(_uncounted(self.g), ledger, "grad_g"),
            wrap_counting(getattr(self.B, "inner", self.B), ledger),
            self.params, self.name)

    def dense_B(self):
        return self.B.to_dense()

    def __repr__(self):
        return f"SaddlePointProblem(name={self.name!r}, dx={self.dx}, dy={self.dy}, params={self.params})"


def _uncounted(fn):
    return fn.inner if isinstance(fn, CountedFn) else fn


def kkt_residual(problem: SaddlePointProblem, x, y) -> float:
    gx, gy = problem.operator(as_vector(x, "x"), as_vector(y, "y"))
    return float(np.sqrt(gx @ gx + gy @ gy))


def check_spectra(problem: SaddlePointProblem, slack=1e-8):
    """Measure the spectra of a quadratic instance against its declared parameters.

    Returns an :class:`AssumptionReport`; range conditions of the coupling
    bounds are decided exactly from the quadratic data.
    """
    if not problem.is_quadratic:
        raise NonQuadratic("spectral checks need quadratic f and g")
    p = problem.params
    f, g = _uncounted(problem.f), _uncounted(problem.g)
    B = problem.dense_B()
    bad = []
    ef, eg = sym_eigs(f.hessian), sym_eigs(g.hessian)
    tol_x = slack * max(1.0, p.L_x)
    tol_y = slack * max(1.0, p.L_y)
    if ef[0] > p.L_x + tol_x or ef[-1] < p.mu_x - tol_x:
        bad.append(f"eigenvalues of grad^2 f span [{ef[-1]:.6g}, {ef[0]:.6g}] not within [mu_x, L_x]")
    if eg[0] > p.L_y + tol_y or eg[-1] < p.mu_y - tol_y:
        bad.append(f"eigenvalues of grad^2 g span [{eg[-1]:.6g}, {eg[0]:.6g}] not within [mu_y, L_y]")

    btb = sym_eigs(B.T @ B)
    bbt = sym_eigs(B @ B.T)
    tol_b = slack * max(1.0, p.L_xy ** 2)
    if btb[0] > p.L_xy ** 2 + tol_b:
        bad.append(f"sigma_max(B)^2 = {btb[0]:.6g} exceeds L_xy^2")
    lo_x = _coupling_floor(btb, _in_range(B.T, f))
    lo_y = _coupling_floor(bbt, _in_range(B, g))
    if p.mu_xy ** 2 > lo_x + tol_b:
        bad.append(f"mu_xy^2 = {p.mu_xy ** 2:.6g} exceeds the attainable bound {lo_x:.6g}")
    if p.mu_yx ** 2 > lo_y + tol_b:
        bad.append(f"mu_yx^2 = {p.mu_yx ** 2:.6g} exceeds the attainable bound {lo_y:.6g}")
    return AssumptionReport(bad)


def _coupling_floor(eigs, positive_only):
    scale = max(float(eigs[0]), 0.0)
    if positive_only:
        pos = eigs[eigs > 1e-10 * max(scale, 1e-300)]
        return float(pos[-1]) if pos.size else 0.0
    return max(float(eigs[-1]), 0.0)


def _in_range(M, fn: QuadraticFn):
    """Whether ``grad fn(x) = A x - b`` lies in ``range M`` for every ``x``."""
    K = kernel_basis(M.T)  # range(M)^perp = ker(M^T)
    if K.shape[1] == 0:
        return True
    scale = max(1.0, float(np.abs(fn.hessian).max()), float(np.abs(fn.linear).max(initial=0.0)))
    return bool(np.abs(K.T @ fn.hessian).max(initial=0.0) <= 1e-9 * scale
                and np.abs(K.T @ fn.linear).max(initial=0.0) <= 1e-9 * scale)


@dataclass
class SolutionSet:
    """One saddle point plus orthonormal bases of the affine directions of the solution set."""

    x_star: np.ndarray
    y_star: np.ndarray
    x_kernel: np.ndarray
    y_kernel: np.ndarray

    def project(self, x, y):
        """Euclidean projection of ``(x, y)`` onto the solution set."""
        Kx, Ky = self.x_kernel, self.y_kernel
        px = self.x_star + Kx @ (Kx.T @ (x - self.x_star))
        py = self.y_star + Ky @ (Ky.T @ (y - self.y_star))
        return px, py

    def sqdist(self, x, y):
        """Squared distances ``(dist^2(x; S_x), dist^2(y; S_y))``."""
        px, py = self.project(x, y)
        return float(np.sum((x - px) ** 2)), float(np.sum((y - py) ** 2))


def _affinity_probe(fn, rng):
    """Gradient affinity test along three random lines."""
    for _ in range(3):
        a = rng.normal(size=fn.dim)
        b = rng.normal(size=fn.dim)
        ga, gb, gm = fn.gradient(a), fn.gradient(b), fn.gradient(0.3 * a + 0.7 * b)
        scale = 1.0 + np.abs(ga).max() + np.abs(gb).max()
        if np.abs(gm - (0.3 * ga + 0.7 * gb)).max() > 1e-9 * scale:
            return False
    return True


def solve_exact_quadratic(problem: SaddlePointProblem) -> SolutionSet:
    """Exact solution set of a quadratic instance from the linear optimality system."""
    f, g = _uncounted(problem.f), _uncounted(problem.g)
    if not (isinstance(f, QuadraticFn) and isinstance(g, QuadraticFn)):
        rng = np.random.default_rng(0)
        if not (_affinity_probe(f, rng) and _affinity_probe(g, rng)):
            raise NonQuadratic("gradients of f and g are not affine")
        f = _quadratic_from_oracle(f)
        g = _quadratic_from_oracle(g)
    B = problem.dense_B()
    dx, dy = f.dim, g.dim
    K = np.block([[f.hessian, B.T], [-B, g.hessian]])
    rhs = np.concatenate([f.linear, g.linear])
    sol, *_ = np.linalg.lstsq(K, rhs, rcond=None)
    sol += np.linalg.lstsq(K, rhs - K @ sol, rcond=None)[0]  # one refinement step
    x_star, y_star = sol[:dx], sol[dx:]

    p = problem.params
    x_ker = np.zeros((dx, 0)) if p.mu_x > 0 else kernel_basis(B)
    y_ker = np.zeros((dy, 0)) if p.mu_y > 0 else kernel_basis(B.T)
    scale = max(1.0, float(np.abs(K).max()))
    if x_ker.size and np.abs(f.hessian @ x_ker).max() > 1e-8 * scale:
        raise AssumptionViolation("f is curved along ker B although mu_x = 0 allows flat directions only")
    if y_ker.size and np.abs(g.hessian @ y_ker).max() > 1e-8 * scale:
        raise AssumptionViolation("g is curved along ker B^T although mu_y = 0 allows flat directions only")
    return SolutionSet(x_star, y_star, x_ker, y_ker)


def _quadratic_from_oracle(fn):
    e = np.eye(fn.dim)
    g0 = fn.gradient(np.zeros(fn.dim))
    A = np.column_stack([fn.gradient(e[i]) - g0 for i in range(fn.dim)])
    return QuadraticFn(0.5 * (A + A.T), -g0, L=fn.L, mu=fn.mu)


def r2_metric(problem: SaddlePointProblem, sol: SolutionSet, x, y) -> float:
    """Weighted squared distance ``delta_x dist^2(x; S_x) + delta_y dist^2(y; S_y)``."""
    cn = problem.condition_numbers()
    dxx, dyy = sol.sqdist(np.asarray(x, float), np.asarray(y, float))
    return cn.delta_x * dxx + cn.delta_y * dyy


def lyapunov(problem: SaddlePointProblem, sol: SolutionSet, x, y) -> float:
    """``R^2(x, y) + 12 D_f(x, x*) + 12 D_g(y, y*)`` with ``(x*, y*)`` the projection onto the solution set."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    xs, ys = sol.project(x, y)
    f, g = _uncounted(problem.f), _uncounted(problem.g)
    return r2_metric(problem, sol, x, y) + 12.0 * bregman(f, x, xs) + 12.0 * bregman(g, y, ys)
