"""Recursive sliding method for finite-sum monotone variational inequalities.

Level ``k`` runs ``T_k`` accelerated steps on the ``k``-th component while
the deeper components are handled by the nested call; each level freezes its
component into a P-quadratic model and the innermost call minimises the sum
of all frozen models over the constraint set.  The function seen by level
``k`` is the original ``p_i`` composed with an affine change of variables,
tracked as an :class:`AffineReparam` instead of nested closures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .numerics import DiagWeight, as_vector
from .oracles import OracleLedger
from .vi import FullSpace, PBall, VIProblem

__all__ = [
    "AlphaSequence", "alpha", "AffineReparam", "FrozenQuadratic", "Schedule",
    "make_schedule", "inner_argmin", "run_sliding", "SlidingStats", "SlidingVISolver",
]


class AlphaSequence:
    """Memoised ``alpha_0 = 1``, ``alpha_{t+1} = 2 / (1 + sqrt(1 + 4 / alpha_t^2))``.

    Every term lies in ``(0, 1]`` and satisfies
    ``alpha_t^-2 = alpha_{t-1}^-2 + alpha_t^-1``.
    """

    def __init__(self):
        self._values = [1.0]

    def _extend(self, t):
        vals = self._values
        a = vals[-1]
        while len(vals) <= t:
            a = 2.0 / (1.0 + math.sqrt(1.0 + 4.0 / (a * a)))
            vals.append(a)

    def __getitem__(self, t):
        if t < 0:
            raise IndexError("alpha index must be non-negative")
        if t >= len(self._values):
            self._extend(t)
        return self._values[t]

    def table(self, size):
        """First ``size`` terms as a float array."""
        if size > len(self._values):
            self._extend(size - 1)
        return np.array(self._values[:size])


_ALPHA = AlphaSequence()


def alpha(t: int) -> float:
    return _ALPHA[int(t)]


class AffineReparam:
    """``p_hat(z) = scale * p(coeff * z + offset)``.

    Composing with step factor ``a`` and anchor ``zbar`` maps
    ``p_hat`` to ``a^-1 p_hat(a z + (1 - a) zbar)``.  Starting from the
    identity, ``scale * coeff == 1`` always, so the transformed gradient is
    just ``grad p`` at the shifted point, and its Lipschitz constant is
    ``coeff * L``.
    """

    __slots__ = ("scale", "coeff", "offset")

    def __init__(self, scale, coeff, offset):
        self.scale = scale
        self.coeff = coeff
        self.offset = offset

    @classmethod
    def identity(cls, dim):
        return cls(1.0, 1.0, np.zeros(dim))

    def compose(self, a, zbar):
        return AffineReparam(self.scale / a, self.coeff * a, self.offset + (self.coeff * (1.0 - a)) * zbar)

    def point(self, z):
        return self.coeff * z + self.offset

    def gradient(self, grad_fn, z):
        return (self.scale * self.coeff) * grad_fn(self.point(z))

    def value(self, value_fn, z):
        return self.scale * value_fn(self.point(z))

    def lipschitz(self, L):
        return self.scale * self.coeff * self.coeff * L


@dataclass
class FrozenQuadratic:
    """``(H/2) ||z - center||_P^2 + <z, linear>``."""

    H: float
    center: np.ndarray
    linear: np.ndarray

    def value(self, z, P: DiagWeight):
        d = z - self.center
        return 0.5 * self.H * float(np.dot(P.diagonal * d, d)) + float(np.dot(z, self.linear))


@dataclass(frozen=True)
class Schedule:
    """Inner iteration counts per level, for components taken in ``order``.

    ``T[j]`` is the iteration count of level ``j + 1``, which handles the
    original component ``order[j]``.
    """

    T: tuple
    order: tuple
    eps: float | None = None
    levels: tuple = ()

    def __post_init__(self):
        if len(self.T) != len(self.order):
            raise ValueError("schedule and order lengths differ")
        if any(int(t) < 1 for t in self.T):
            raise ValueError("iteration counts must be positive integers")
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("order must be a permutation")

    @property
    def n(self):
        return len(self.T)

    def products(self):
        return tuple(int(v) for v in np.cumprod(self.T))

    @classmethod
    def explicit(cls, T, order=None):
        T = tuple(int(t) for t in T)
        return cls(T, tuple(range(len(T))) if order is None else tuple(order))


def level_value(L, M, eps):
    """``max(sqrt(L / eps), M / eps, 1)``, the work scale of one component."""
    return max(math.sqrt(L / eps), M / eps, 1.0)


def make_schedule(L: Sequence[float], M: Sequence[float], eps: float) -> Schedule:
    """Iteration counts that push the gap bound below ``eps * n * ||z_in - z||_P^2``.

    Components are reordered ascending by :func:`level_value` (stable), then
    ``T_1 = ceil(2 v_1)`` and ``T_{i+1} = ceil(2 v_{i+1} / v_i)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    L = [float(v) for v in L]
    M = [float(v) for v in M]
    if len(L) != len(M) or not L:
        raise ValueError("L and M must be non-empty and of equal length")
    for Li, Mi in zip(L, M):
        if Li < 0 or Mi < 0 or Li + Mi <= 0:
            raise ValueError("each component needs L, M >= 0 and L + M > 0")
    v = [level_value(Li, Mi, eps) for Li, Mi in zip(L, M)]
    order = tuple(sorted(range(len(v)), key=lambda i: v[i]))
    vs = [v[i] for i in order]
    T = [math.ceil(2.0 * vs[0])]
    for prev, cur in zip(vs, vs[1:]):
        T.append(math.ceil(2.0 * cur / prev))
    return Schedule(tuple(T), order, float(eps), tuple(vs))


def _argmin_from_sums(sum_h, sum_hc, sum_lin, P: DiagWeight, constraint):
    if not sum_h > 0:
        raise FloatingPointError("total curvature of the frozen models must be positive")
    z = (sum_hc - P.inverse * sum_lin) / sum_h
    return constraint.project(z, P)


def inner_argmin(frozen: Sequence[FrozenQuadratic], P: DiagWeight, constraint=None):
    """Minimiser over the constraint set of a sum of frozen P-quadratics.

    The sum is a single P-quadratic with curvature ``sum H_i``, so the
    P-projection of its unconstrained minimiser is exact.
    """
    constraint = FullSpace() if constraint is None else constraint
    sum_h = sum(q.H for q in frozen)
    sum_hc = sum(q.H * q.center for q in frozen)
    sum_lin = sum(q.linear for q in frozen)
    return _argmin_from_sums(sum_h, np.asarray(sum_hc, float), np.asarray(sum_lin, float), P, constraint)


class IterationRecord(NamedTuple):
    level: int
    t: int
    z: np.ndarray
    zbar: np.ndarray
    H: float
    lipschitz: float
    reparam: AffineReparam


@dataclass
class SlidingStats:
    """Per-component evaluation counts of one run, in original component order."""

    grad_counts: np.ndarray
    op_counts: np.ndarray
    backend: str = "python"
    schedule: Schedule | None = None
    extra: dict = field(default_factory=dict)


def _check_run_inputs(vi: VIProblem, schedule: Schedule, z_in):
    z_in = as_vector(z_in, "z_in")
    if z_in.size != vi.dim:
        raise ValueError(f"z_in has dimension {z_in.size}, expected {vi.dim}")
    if schedule.n != vi.n:
        raise ValueError(f"schedule has {schedule.n} levels for {vi.n} components")
    vi.check_feasible(z_in, "z_in")
    return z_in


def run_sliding(vi: VIProblem, schedule: Schedule, z_in, ledger: OracleLedger | None = None,
                callback: Callable[[IterationRecord], None] | None = None, backend="auto",
                return_stats=False):
    """Run the recursive sliding method once from ``z_in``.

    Parameters
    ----------
    vi : VIProblem
    schedule : Schedule
        Iteration counts and component order, usually from :func:`make_schedule`.
    z_in : array_like
        Feasible starting point.
    ledger : OracleLedger, optional
        Receives ``grad_p<i>`` / ``Q<i>`` counters (1-based, original order).
        Oracles wrapped with :func:`~bilinear_sliding.oracles.wrap_counting`
        additionally count themselves.
    callback : callable, optional
        Called with an :class:`IterationRecord` after every inner step.
    backend : {"auto", "python", "compiled"}
        ``"compiled"`` runs a numba kernel on the affine form of every
        component and bills counting oracles from their cost tables;
        ``"auto"`` picks it whenever possible and no callback is given.

    Returns
    -------
    z_out : ndarray
        The averaged iterate of the outermost level; always feasible.
    """
    z_in = _check_run_inputs(vi, schedule, z_in)
    if backend not in ("auto", "python", "compiled"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "auto":
        backend = "compiled" if callback is None and _compiled_available(vi) else "python"
    if backend == "compiled":
        if callback is not None:
            raise ValueError("the compiled backend does not support callbacks")
        from ._kernel import run_affine
        z_out, gcnt, qcnt = run_affine(vi, schedule, z_in)
        _charge_costs(vi, schedule, gcnt, qcnt)
    else:
        z_out, gcnt, qcnt = _run_python(vi, schedule, z_in, callback)
    if not np.all(np.isfinite(z_out)):
        raise FloatingPointError("non-finite iterate; check the declared Lipschitz constants")
    stats = SlidingStats(np.zeros(vi.n, dtype=np.int64), np.zeros(vi.n, dtype=np.int64), backend, schedule)
    for j, orig in enumerate(schedule.order):
        stats.grad_counts[orig] = gcnt[j]
        stats.op_counts[orig] = qcnt[j]
    if ledger is not None:
        for i in range(vi.n):
            ledger.increment(f"grad_p{i + 1}", int(stats.grad_counts[i]))
            ledger.increment(f"Q{i + 1}", int(stats.op_counts[i]))
    if return_stats:
        return z_out, stats
    return z_out


def _compiled_available(vi: VIProblem):
    if not all(_affine_form_p(c.p) is not None and _affine_form_q(c.Q) is not None for c in vi.components):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def _affine_form_p(p):
    form = getattr(p, "affine_form", None)
    return form() if form is not None else None


def _affine_form_q(Q):
    if Q.is_zero:
        return np.zeros((Q.dim, Q.dim))
    form = getattr(Q, "affine_form", None)
    return form() if form is not None else None


def _charge_costs(vi, schedule, gcnt, qcnt):
    """Bill counting oracles the compiled kernel bypassed.

    Each oracle with an ``oracle_cost`` table is charged on its own ``ledger``,
    exactly as its evaluations would have been on the python path.
    """
    for j, orig in enumerate(schedule.order):
        comp = vi.components[orig]
        for oracle, calls in ((comp.p, gcnt[j]), (comp.Q, qcnt[j])):
            own = getattr(oracle, "ledger", None)
            if own is None:
                continue
            for name, k in getattr(oracle, "oracle_cost", {}).items():
                own.increment(name, k * int(calls))


def _run_python(vi: VIProblem, schedule: Schedule, z_in, callback):
    n = vi.n
    comps = [vi.components[j] for j in schedule.order]
    T = schedule.T
    P = vi.P
    p_inv = P.inverse
    constraint = vi.constraint
    alphas = _ALPHA.table(max(T))
    alpha_last = [alphas[Tk - 1] for Tk in T]
    grads = [c.p.gradient for c in comps]
    ops = [None if c.Q.is_zero else c.Q.apply for c in comps]
    Ls = [c.L for c in comps]
    Ms = [c.M for c in comps]
    z = [z_in.copy() for _ in range(n)]  # one persistent iterate per level
    gcnt = [0] * n
    qcnt = [0] * n

    def level(k, rep, lprod, mprod, sum_h, sum_hc, sum_lin):
        if k == n:
            return _argmin_from_sums(sum_h, sum_hc, sum_lin, P, constraint)
        grad, op = grads[k], ops[k]
        zbar = z[k]
        for t in range(T[k]):
            a = alphas[t]
            rep_k = rep.compose(a, zbar)
            lp = lprod * a
            mp = mprod * a / alpha_last[k]
            H = Ls[k] * lp + Ms[k] * mp
            zk = z[k]
            delta = rep_k.gradient(grad, zk)
            gcnt[k] += 1
            if op is not None:
                qz = op(zk)  # reused below for the extragradient correction
                qcnt[k] += 1
                delta = delta + qz
            z_half = level(k + 1, rep_k, lp, mp, sum_h + H, sum_hc + H * zk, sum_lin + delta)
            zbar = a * z_half + (1.0 - a) * zbar
            if op is not None:
                z[k] = z_half + (qz - op(z_half)) * p_inv / H
                qcnt[k] += 1
            else:
                z[k] = z_half
            if callback is not None:
                callback(IterationRecord(k + 1, t, z[k], zbar, H, Ls[k] * lp, rep_k))
        return zbar

    d = vi.dim
    z_out = level(0, AffineReparam.identity(d), 1.0, 1.0, 0.0, np.zeros(d), np.zeros(d))
    return np.array(z_out, dtype=float), gcnt, qcnt


class SlidingVISolver(BaseEstimator):
    """Estimator wrapper around :func:`run_sliding`.

    Parameters
    ----------
    eps : float
        Target of the schedule; the gap bound becomes ``eps * n * ||z_in - z||_P^2``.
    T : sequence of int, optional
        Explicit iteration counts (component order as given); overrides ``eps``.
    backend : {"auto", "python", "compiled"}
    """

    def __init__(self, eps=1e-2, T=None, backend="auto"):
        self.eps = eps
        self.T = T
        self.backend = backend

    def fit(self, vi: VIProblem, z_in=None):
        if z_in is None:
            z_in = np.zeros(vi.dim) if vi.constraint.contains(np.zeros(vi.dim), vi.P) else vi.constraint.center
        if self.T is not None:
            schedule = Schedule.explicit(self.T)
        else:
            schedule = make_schedule(vi.L, vi.M, self.eps)
        self.ledger_ = OracleLedger()
        self.z_out_, self.stats_ = run_sliding(vi, schedule, z_in, self.ledger_, backend=self.backend,
                                               return_stats=True)
        self.schedule_ = schedule
        self.z_in_ = np.asarray(z_in, float)
        return self

    def transform(self, vi: VIProblem, z_in):
        """Sliding output started from ``z_in`` under the fitted schedule."""
        return run_sliding(vi, self.schedule_, z_in, backend=self.backend)
