"""Finite-sum monotone variational inequalities over simple constraint sets."""

from __future__ import annotations

import numpy as np

from .numerics import DiagWeight, as_vector
from .oracles import LinearOp, MonotoneOp, QuadraticFn, SmoothFn, ZeroFn, ZeroOp

MAX_COMPONENTS = 8
BALL_FEAS_RTOL = 1e-9


class InfeasiblePoint(ValueError):
    pass


class FullSpace:
    kind = "full-space"

    def project(self, z, P=None):
        return z

    def contains(self, z, P=None):
        return True

    def __repr__(self):
        return "FullSpace()"


class PBall:
    """``{z : ||z - center||_P <= radius}``."""

    kind = "P-ball"

    def __init__(self, center, radius):
        self.center = as_vector(center, "center")
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        self.radius = float(radius)

    def _pnorm(self, d, P):
        return float(np.sqrt(np.dot(P.diagonal * d, d)))

    def project(self, z, P: DiagWeight):
        d = z - self.center
        r = self._pnorm(d, P)
        if r <= self.radius:
            return z
        return self.center + (self.radius / r) * d

    def contains(self, z, P: DiagWeight, rtol=BALL_FEAS_RTOL):
        return self._pnorm(z - self.center, P) <= self.radius * (1 + rtol)

    def __repr__(self):
        return f"PBall(radius={self.radius:g}, dim={self.center.size})"


def project(constraint, P: DiagWeight, z):
    """P-metric projection onto a constraint set (identity on the full space)."""
    return constraint.project(as_vector(z, "z"), P)


class VIComponent:
    """One summand ``(p_i, Q_i)`` with Lipschitz constants in the P-geometry.

    ``L`` is the Lipschitz constant of ``grad p_i`` and ``M`` that of ``Q_i``,
    both from ``||.||_P`` to ``||.||_{P^{-1}}``.  Either may be omitted for
    quadratic ``p`` / linear ``Q``; the exact value is then filled in by
    :class:`VIProblem`.
    """

    def __init__(self, p: SmoothFn | None = None, Q: MonotoneOp | None = None, L=None, M=None, dim=None):
        if dim is None:
            dim = p.dim if p is not None else Q.dim
        self.p = ZeroFn(dim) if p is None else p
        self.Q = ZeroOp(dim) if Q is None else Q
        if self.p.dim != dim or self.Q.dim != dim:
            raise ValueError("component dimensions disagree")
        self.dim = dim
        self.L = None if L is None else float(L)
        self.M = None if M is None else float(M)

    def resolved(self, P: DiagWeight):
        L, M = self.L, self.M
        r = 1.0 / np.sqrt(P.diagonal)
        if L is None:
            if isinstance(self.p, ZeroFn):
                L = 0.0
            elif isinstance(self.p, QuadraticFn):
                L = float(np.linalg.norm(r[:, None] * self.p.hessian * r[None, :], 2))
            else:
                raise ValueError("L must be supplied for non-quadratic p")
        if M is None:
            if isinstance(self.Q, ZeroOp):
                M = 0.0
            elif isinstance(self.Q, LinearOp):
                M = float(np.linalg.norm(r[:, None] * self.Q.matrix * r[None, :], 2))
            else:
                raise ValueError("M must be supplied for non-linear Q")
        if L < 0 or M < 0:
            raise ValueError("Lipschitz constants must be non-negative")
        if L + M <= 0:
            raise ValueError("each component needs L + M > 0; drop identically zero components")
        return VIComponent(self.p, self.Q, L, M, self.dim)

    def __repr__(self):
        return f"VIComponent(p={self.p!r}, Q={type(self.Q).__name__}, L={self.L}, M={self.M})"


class VIProblem:
    """Find ``z*`` in ``C`` with ``p(z*) - p(z) + <Q(z), z* - z> <= 0`` for all ``z`` in ``C``,
    where ``p = sum p_i`` and ``Q = sum Q_i``."""

    def __init__(self, components, P: DiagWeight | None = None, constraint=None):
        components = list(components)
        if not 1 <= len(components) <= MAX_COMPONENTS:
            raise ValueError(f"need between 1 and {MAX_COMPONENTS} components, got {len(components)}")
        dim = components[0].dim
        if any(c.dim != dim for c in components):
            raise ValueError("all components must share one dimension")
        self.P = DiagWeight.identity(dim) if P is None else P
        if self.P.dim != dim:
            raise ValueError("weight dimension mismatch")
        self.constraint = FullSpace() if constraint is None else constraint
        if isinstance(self.constraint, PBall) and self.constraint.center.size != dim:
            raise ValueError("ball center dimension mismatch")
        self.components = [c.resolved(self.P) for c in components]
        self.dim = dim

    @property
    def n(self):
        return len(self.components)

    @property
    def L(self):
        return np.array([c.L for c in self.components])

    @property
    def M(self):
        return np.array([c.M for c in self.components])

    def p_value(self, z):
        return sum(c.p.value(z) for c in self.components)

    def Q_value(self, z):
        out = np.zeros(self.dim)
        for c in self.components:
            if not c.Q.is_zero:
                out = out + c.Q.apply(z)
        return out

    def check_feasible(self, z, what="point"):
        if not self.constraint.contains(z, self.P):
            raise InfeasiblePoint(f"{what} lies outside the constraint set")


def gap(vi: VIProblem, z_out, z) -> float:
    """``p(z_out) - p(z) + <Q(z), z_out - z>``; non-positive for all feasible ``z`` iff ``z_out`` solves the VI."""
    z_out = as_vector(z_out, "z_out")
    z = as_vector(z, "z")
    vi.check_feasible(z, "probe point")
    return vi.p_value(z_out) - vi.p_value(z) + float(np.dot(vi.Q_value(z), z_out - z))


def _as_T(schedule):
    T = getattr(schedule, "T", schedule)
    order = getattr(schedule, "order", None)
    return [int(t) for t in T], order


def theorem3_rhs(vi: VIProblem, schedule, z_in, z) -> float:
    """Upper bound on :func:`gap` guaranteed for the output of the sliding method.

    ``schedule`` is either a :class:`~bilinear_sliding.sliding.Schedule`
    (whose component order is honoured) or a plain sequence ``T_1..T_n`` in
    the component order of ``vi``.
    """
    T, order = _as_T(schedule)
    if len(T) != vi.n:
        raise ValueError(f"schedule has {len(T)} levels for {vi.n} components")
    order = range(vi.n) if order is None else order
    d = as_vector(z_in, "z_in") - as_vector(z, "z")
    r2 = float(np.dot(vi.P.diagonal * d, d))
    total = 0.0
    prod = 1.0
    for i, (j, Ti) in enumerate(zip(order, T), start=1):
        prod *= Ti
        c = vi.components[j]
        total += 4.0 ** i * c.L / prod ** 2 + 2.0 ** i * c.M / prod
    return total * 0.5 * r2
