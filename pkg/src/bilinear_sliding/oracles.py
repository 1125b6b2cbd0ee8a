"""First-order oracles, call counting and the weighted execution-time model."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .numerics import DiagWeight, as_matrix, as_vector, sym_eigs

DEFAULT_SEED = 42


class SmoothFn:
    """Convex differentiable function with declared smoothness ``L`` and
    strong convexity ``mu`` (Euclidean geometry)."""

    def __init__(self, dim, L, mu=0.0):
        L = float(L)
        mu = float(mu)
        if L < 0 or mu < 0:
            raise ValueError("L and mu must be non-negative")
        if mu > L * (1 + 1e-12):
            raise ValueError(f"mu={mu} exceeds L={L}")
        self.dim = int(dim)
        self.L = L
        self.mu = mu

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    @property
    def is_quadratic(self):
        return False


class QuadraticFn(SmoothFn):
    """``h(x) = 1/2 x^T A x - <b, x> + c`` with symmetric PSD ``A``.

    ``L`` and ``mu`` default to the extreme eigenvalues of ``A``.
    """

    def __init__(self, A, b=None, c=0.0, L=None, mu=None):
        A = as_matrix(A, "A")
        if A.shape[0] != A.shape[1]:
            raise ValueError("Hessian must be square")
        A = 0.5 * (A + A.T)
        eig = sym_eigs(A)
        lam_max, lam_min = float(eig[0]), float(eig[-1])
        if lam_min < -1e-10 * max(1.0, abs(lam_max)):
            raise ValueError("Hessian is not positive semidefinite")
        lam_min = max(lam_min, 0.0)
        super().__init__(A.shape[0], lam_max if L is None else L, lam_min if mu is None else mu)
        self.hessian = A
        self.linear = np.zeros(self.dim) if b is None else as_vector(b, "b")
        if self.linear.size != self.dim:
            raise ValueError("linear term dimension mismatch")
        self.offset = float(c)

    def value(self, x):
        return 0.5 * float(x @ (self.hessian @ x)) - float(self.linear @ x) + self.offset

    def gradient(self, x):
        return self.hessian @ x - self.linear

    @property
    def is_quadratic(self):
        return True

    def affine_form(self):
        """``(A, b)`` with ``grad h(x) = A x - b``."""
        return self.hessian, self.linear

    def __repr__(self):
        return f"QuadraticFn(dim={self.dim}, L={self.L:g}, mu={self.mu:g})"


class ZeroFn(QuadraticFn):
    def __init__(self, dim):
        super().__init__(np.zeros((dim, dim)), L=0.0, mu=0.0)

    def value(self, x):
        return 0.0

    def gradient(self, x):
        return np.zeros(self.dim)


class CallableFn(SmoothFn):
    """Black-box function from a pair of callables."""

    def __init__(self, value, gradient, dim, L, mu=0.0):
        super().__init__(dim, L, mu)
        self._value = value
        self._gradient = gradient

    def value(self, x):
        return float(self._value(x))

    def gradient(self, x):
        return np.asarray(self._gradient(x), dtype=float)


class MonotoneOp:
    """Monotone operator, ``M``-Lipschitz from ``||.||_P`` to ``||.||_{P^{-1}}``."""

    def __init__(self, dim, M):
        if M < 0:
            raise ValueError("M must be non-negative")
        self.dim = int(dim)
        self.M = float(M)

    def apply(self, z):
        raise NotImplementedError

    @property
    def is_zero(self):
        return False


class LinearOp(MonotoneOp):
    """``G(z) = S z`` for a matrix with PSD symmetric part (skew matrices included).

    Without an explicit ``M`` the exact Lipschitz constant
    ``||P^{-1/2} S P^{-1/2}||_2`` is used.
    """

    def __init__(self, S, M=None, P: DiagWeight | None = None):
        S = as_matrix(S, "S")
        if S.shape[0] != S.shape[1]:
            raise ValueError("operator matrix must be square")
        sym = 0.5 * (S + S.T)
        if S.size and np.min(np.linalg.eigvalsh(sym)) < -1e-10 * max(1.0, np.abs(S).max()):
            raise ValueError("operator is not monotone")
        if M is None:
            r = np.ones(S.shape[0]) if P is None else 1.0 / np.sqrt(P.diagonal)
            M = float(np.linalg.norm(r[:, None] * S * r[None, :], 2)) if S.size else 0.0
        super().__init__(S.shape[0], M)
        self.matrix = S

    def apply(self, z):
        return self.matrix @ z

    def affine_form(self):
        return self.matrix

    @property
    def is_zero(self):
        return not np.any(self.matrix)


class ZeroOp(MonotoneOp):
    def __init__(self, dim):
        super().__init__(dim, 0.0)

    def apply(self, z):
        return np.zeros(self.dim)

    @property
    def is_zero(self):
        return True


class CallableOp(MonotoneOp):
    def __init__(self, apply, dim, M):
        super().__init__(dim, M)
        self._apply = apply

    def apply(self, z):
        return np.asarray(self._apply(z), dtype=float)


class LinearMap:
    """Linear map ``B: R^cols -> R^rows`` with its adjoint."""

    def __init__(self, rows, cols):
        self.rows = int(rows)
        self.cols = int(cols)

    @property
    def shape(self):
        return (self.rows, self.cols)

    def forward(self, v):
        raise NotImplementedError

    def adjoint(self, w):
        raise NotImplementedError

    def to_dense(self):
        return np.column_stack([self.forward(e) for e in np.eye(self.cols)]) if self.cols else np.zeros((self.rows, 0))


class DenseLinearMap(LinearMap):
    def __init__(self, B):
        B = as_matrix(B, "B")
        super().__init__(*B.shape)
        self.matrix = B
        self._bt = np.ascontiguousarray(B.T)

    def forward(self, v):
        return self.matrix @ v

    def adjoint(self, w):
        return self._bt @ w

    def to_dense(self):
        return self.matrix.copy()


@dataclass
class OracleLedger:
    """Oracle call counts of one solver run.

    Besides the four saddle-point counters, arbitrary named counters (for
    example per-component VI oracles) live in ``extra``.
    """

    grad_f: int = 0
    grad_g: int = 0
    matvec_B: int = 0
    matvec_Bt: int = 0
    extra: Counter = field(default_factory=Counter)

    def increment(self, name, k=1):
        if k < 0:
            raise ValueError("counters never decrease")
        if name in ("grad_f", "grad_g", "matvec_B", "matvec_Bt"):
            setattr(self, name, getattr(self, name) + k)
        else:
            self.extra[name] += k

    def counts(self):
        return (self.grad_f, self.grad_g, self.matvec_B, self.matvec_Bt)

    @property
    def matvecs(self):
        return self.matvec_B + self.matvec_Bt

    def snapshot(self):
        return OracleLedger(self.grad_f, self.grad_g, self.matvec_B, self.matvec_Bt, Counter(self.extra))


@dataclass(frozen=True)
class CostModel:
    tau_f: float = 1.0
    tau_g: float = 1.0
    tau_B: float = 1.0

    def __post_init__(self):
        if min(self.tau_f, self.tau_g, self.tau_B) < 0:
            raise ValueError("oracle times must be non-negative")


def execution_time(ledger: OracleLedger, model: CostModel) -> float:
    return (model.tau_f * ledger.grad_f + model.tau_g * ledger.grad_g
            + model.tau_B * (ledger.matvec_B + ledger.matvec_Bt))


class CountedFn(SmoothFn):
    """Gradient calls go to ``ledger.<counter>``; values are not counted."""

    def __init__(self, fn: SmoothFn, ledger: OracleLedger, counter):
        super().__init__(fn.dim, fn.L, fn.mu)
        self.inner = fn
        self.ledger = ledger
        self.counter = counter
        self.oracle_cost = {counter: 1}

    def value(self, x):
        return self.inner.value(x)

    def gradient(self, x):
        self.ledger.increment(self.counter)
        return self.inner.gradient(x)

    @property
    def is_quadratic(self):
        return self.inner.is_quadratic

    def __getattr__(self, name):
        # hessian / linear of quadratic inner functions
        if name == "inner":
            raise AttributeError(name)
        return getattr(self.inner, name)


class CountedOp(MonotoneOp):
    def __init__(self, op: MonotoneOp, ledger: OracleLedger, counter):
        super().__init__(op.dim, op.M)
        self.inner = op
        self.ledger = ledger
        self.counter = counter
        self.oracle_cost = {counter: 1}

    def affine_form(self):
        form = getattr(self.inner, "affine_form", None)
        return form() if form is not None else None

    def apply(self, z):
        self.ledger.increment(self.counter)
        return self.inner.apply(z)

    @property
    def is_zero(self):
        return self.inner.is_zero


class CountedMap(LinearMap):
    def __init__(self, B: LinearMap, ledger: OracleLedger):
        super().__init__(B.rows, B.cols)
        self.inner = B
        self.ledger = ledger

    def forward(self, v):
        self.ledger.matvec_B += 1
        return self.inner.forward(v)

    def adjoint(self, w):
        self.ledger.matvec_Bt += 1
        return self.inner.adjoint(w)

    def to_dense(self):
        return self.inner.to_dense()


def wrap_counting(oracle, ledger: OracleLedger, counter=None):
    """Wrap a function, operator or linear map so every evaluation is counted.

    ``counter`` names the ledger field for functions (``"grad_f"`` or
    ``"grad_g"``) and operators; linear maps always count into
    ``matvec_B`` / ``matvec_Bt``.
    """
    if isinstance(oracle, LinearMap):
        return CountedMap(oracle, ledger)
    if isinstance(oracle, SmoothFn):
        if counter is None:
            raise ValueError("counter name required for functions, e.g. 'grad_f'")
        return CountedFn(oracle, ledger, counter)
    if isinstance(oracle, MonotoneOp):
        if counter is None:
            raise ValueError("counter name required for operators")
        return CountedOp(oracle, ledger, counter)
    raise TypeError(f"cannot wrap {type(oracle).__name__}")


def bregman(h: SmoothFn, x, x0) -> float:
    """``D_h(x, x0) = h(x) - h(x0) - <grad h(x0), x - x0>``."""
    x = as_vector(x, "x")
    x0 = as_vector(x0, "x0")
    if x.shape != x0.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x0.shape}")
    if np.array_equal(x, x0):
        return 0.0
    if isinstance(h, QuadraticFn) or (isinstance(h, CountedFn) and isinstance(h.inner, QuadraticFn)):
        # exact form avoids cancellation
        d = x - x0
        return 0.5 * float(d @ (h.hessian @ d))
    return h.value(x) - h.value(x0) - float(np.dot(h.gradient(x0), x - x0))


def empirical_constants(h: SmoothFn, n_pairs=100, scale=1.0, seed=DEFAULT_SEED):
    """Extreme ratios ``2 D_h(x, x') / ||x - x'||^2`` over random pairs.

    Returns ``(min_ratio, max_ratio)``; they bracket the declared ``mu`` and
    ``L`` whenever the declaration is consistent.
    """
    rng = np.random.default_rng(seed)
    lo, hi = np.inf, -np.inf
    for _ in range(n_pairs):
        x = rng.normal(scale=scale, size=h.dim)
        x0 = rng.normal(scale=scale, size=h.dim)
        r = 2.0 * bregman(h, x, x0) / float(np.dot(x - x0, x - x0))
        lo, hi = min(lo, r), max(hi, r)
    return lo, hi


def empirical_lipschitz(G, dim, P: DiagWeight, n_pairs=200, seed=DEFAULT_SEED):
    """Largest ``||G(z) - G(z')||_{P^{-1}} / ||z - z'||_P`` over random pairs."""
    rng = np.random.default_rng(seed)
    best = 0.0
    for _ in range(n_pairs):
        z = rng.normal(size=dim)
        z2 = rng.normal(size=dim)
        d = G(z) - G(z2)
        num = np.sqrt(np.dot(P.inverse * d, d))
        den = np.sqrt(np.dot(P.diagonal * (z - z2), z - z2))
        best = max(best, float(num / den))
    return best
