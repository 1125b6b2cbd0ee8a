"""Test-problem generators: random quadratics with prescribed spectra and the
structured hard instances (chain, coupled-block and bidiagonal families).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import singular_values, sym_eigs
from .oracles import QuadraticFn
from .problem import (AssumptionViolation, ProblemParams, SaddlePointProblem, check_spectra,
                      validate_assumption5)

__all__ = [
    "InstanceSpec", "generate", "gen_random_quadratic", "gen_chain_matrices", "chain_matrix",
    "gen_chain_gradient", "coupling_block_matrix", "block_parameters", "gen_coupled_block",
    "SpectrumReport", "validate_spectrum_E", "gen_bilinear_tridiag", "tridiag_matrix",
    "validate_tridiag_spectrum", "bilinear_1d", "named_instance", "NAMED_INSTANCES",
]

KINDS = ("random-quadratic", "chain-gradient", "coupled-block", "bilinear-tridiag")
SPECTRUM_SLACK = 1e-8


@dataclass(frozen=True)
class InstanceSpec:
    """Recipe for one generated problem.

    Attributes
    ----------
    kind : str
        One of ``random-quadratic``, ``chain-gradient``, ``coupled-block``,
        ``bilinear-tridiag``.
    params : ProblemParams
    dx, dy : int
        Dimensions for random quadratics; ``dx`` is the block size ``d`` of
        the structured families.
    A : float
        Magnitude of the linear terms.
    seed : int
    """

    kind: str
    params: ProblemParams
    dx: int = 4
    dy: int | None = None
    A: float = 1.0
    seed: int = 0
    name: str | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown instance kind {self.kind!r}; choose from {KINDS}")
        if self.dx < 1 or (self.dy is not None and self.dy < 1):
            raise ValueError("dimensions must be positive")


def generate(spec: InstanceSpec) -> SaddlePointProblem:
    if spec.kind == "random-quadratic":
        return gen_random_quadratic(spec)
    if spec.kind == "chain-gradient":
        return gen_chain_gradient(spec.params, spec.dx, spec.A, name=spec.name)
    if spec.kind == "coupled-block":
        return gen_coupled_block(spec.params, spec.dx, spec.A, name=spec.name)
    return gen_bilinear_tridiag(spec.params, spec.dx, spec.A, name=spec.name)


def _require_assumption5(params):
    report = validate_assumption5(params)
    if not report:
        raise AssumptionViolation("; ".join(report.violations))


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def _spread(rng, lo, hi, k):
    """``k`` values in ``[lo, hi]`` containing both endpoints (``hi`` alone when ``k = 1``)."""
    if k == 1:
        return np.array([hi])
    inner = rng.uniform(lo, hi, size=k - 2)
    return np.sort(np.concatenate([[hi], inner, [lo]]))[::-1]


def gen_random_quadratic(spec: InstanceSpec) -> SaddlePointProblem:
    """Quadratic saddle problem whose spectra attain the declared parameters.

    Hessians are diagonal in random orthonormal frames with extreme
    eigenvalues exactly ``mu`` and ``L``; the coupling matrix has largest
    singular value ``L_xy`` and smallest (positive) one equal to
    ``max(mu_xy, mu_yx)``, or ``L_xy / 10`` when both vanish.  When
    ``mu_x = 0`` and ``d_x > d_y`` the function ``f`` lives on ``range B^T``
    so that the solution set in ``x`` is a translate of ``ker B``.
    """
    p = spec.params
    _require_assumption5(p)
    dx = spec.dx
    dy = spec.dx if spec.dy is None else spec.dy
    rng = np.random.default_rng(spec.seed)
    r = min(dx, dy)
    lo = max(p.mu_xy, p.mu_yx)
    if lo == 0:
        lo = p.L_xy / 10
    U, V = _orthogonal(rng, dy), _orthogonal(rng, dx)
    s = _spread(rng, lo, p.L_xy, r)
    B = U[:, :r] @ np.diag(s) @ V[:, :r].T

    kernel_x = p.mu_x == 0 and dx > dy
    kernel_y = p.mu_y == 0 and dy > dx
    Hf, bf = _random_quadratic_part(rng, p.mu_x, p.L_x, V, r if kernel_x else dx, spec.A)
    Hg, bg = _random_quadratic_part(rng, p.mu_y, p.L_y, U, r if kernel_y else dy, spec.A)
    problem = SaddlePointProblem(QuadraticFn(Hf, bf, L=p.L_x, mu=p.mu_x), QuadraticFn(Hg, bg, L=p.L_y, mu=p.mu_y),
                                 B, p, name=spec.name)
    report = check_spectra(problem)
    if not report:
        raise ValueError("parameters infeasible for these dimensions: " + "; ".join(report.violations))
    return problem


def _random_quadratic_part(rng, mu, L, frame, k, A):
    """Hessian and linear term supported on the first ``k`` columns of ``frame``."""
    basis = frame[:, :k]
    eig = _spread(rng, mu, L, k)
    H = (basis * eig) @ basis.T
    H = 0.5 * (H + H.T)
    b = basis @ (A * rng.normal(size=k))
    return H, b


def chain_matrix(d):
    """``(d-1) x d`` matrix ``1/2 [1 -1; 1 -1; ...]`` of consecutive differences."""
    if d < 2:
        raise ValueError("chain matrices need d >= 2")
    F = np.zeros((d - 1, d))
    idx = np.arange(d - 1)
    F[idx, idx] = 0.5
    F[idx, idx + 1] = -0.5
    return F


def gen_chain_matrices(d):
    """Interleaved difference matrices ``(F1, F2)`` and the chain matrix ``F``.

    ``F1`` has ``floor(d/2)`` rows ``(e_{2i-1} - e_{2i}) / sqrt(2)`` and ``F2``
    has ``floor((d-1)/2)`` rows ``(e_{2i} - e_{2i+1}) / sqrt(2)``; each has
    orthonormal rows.
    """
    if d < 2:
        raise ValueError("chain matrices need d >= 2")
    c = 1.0 / math.sqrt(2.0)
    n1, n2 = d // 2, (d - 1) // 2
    F1 = np.zeros((n1, d))
    for i in range(n1):
        F1[i, 2 * i], F1[i, 2 * i + 1] = c, -c
    F2 = np.zeros((n2, d))
    for i in range(n2):
        F2[i, 2 * i + 1], F2[i, 2 * i + 2] = c, -c
    return F1, F2, chain_matrix(d)


def gen_chain_gradient(params: ProblemParams, d, A=1.0, name=None) -> SaddlePointProblem:
    """Chain instance that makes gradient calls of ``f`` expensive.

    With ``mu_xy > 0``: ``f = mu_x/2 |x|^2 + (L_x - mu_x)/2 |F x|^2 - A x_1``,
    ``g = L_y/2 |y|^2`` and ``B = mu_xy I``.  With ``mu_xy = 0`` the variable
    is ``x = (u, v)`` with an extra coordinate, the chain acts on ``u`` only and
    ``B = mu_yx [0 ... 0 1]``.
    """
    p = params
    _require_assumption5(p)
    F = chain_matrix(d)
    if p.mu_xy > 0:
        Hf = p.mu_x * np.eye(d) + (p.L_x - p.mu_x) * (F.T @ F)
        bf = np.zeros(d)
        bf[0] = A
        B = p.mu_xy * np.eye(d)
        dy = d
    else:
        if p.mu_yx <= 0:
            raise ValueError("chain instance needs mu_xy > 0 or mu_yx > 0")
        Hf = p.mu_x * np.eye(d + 1)
        Hf[:d, :d] += (p.L_x - p.mu_x) * (F.T @ F)
        bf = np.zeros(d + 1)
        bf[0] = A
        B = np.zeros((1, d + 1))
        B[0, d] = p.mu_yx
        dy = 1
    g = QuadraticFn(p.L_y * np.eye(dy), L=p.L_y, mu=p.mu_y)
    return SaddlePointProblem(QuadraticFn(Hf, bf, L=p.L_x, mu=p.mu_x), g, B, p, name=name)


def block_parameters(params: ProblemParams):
    """``(n, alpha, beta, gamma)``: ``n = floor(L_xy / (6 mu_yx))``,
    ``alpha = L_xy / 2``, ``beta = L_xy / n``, ``gamma = 2 mu_xy / sqrt(n)``."""
    p = params
    if p.mu_yx <= 0:
        raise ValueError("the coupled-block instance needs mu_yx > 0")
    n = math.floor(p.L_xy / (6.0 * p.mu_yx))
    if n < 2:
        raise ValueError(f"block count n = {n} < 2")
    return n, p.L_xy / 2.0, p.L_xy / n, 2.0 * p.mu_xy / math.sqrt(n)


def coupling_block_matrix(n, alpha, beta, gamma):
    """The ``3n``-column block coupling matrix.

    Rows, top to bottom: one ``gamma`` row over the first ``n`` columns
    (omitted when ``gamma = 0``, giving ``3n - 1`` rows); ``n`` rows
    ``beta (e_i - e_{n+1})``; ``n - 1`` rows ``alpha (e_{n+j} - e_{n+j+1})``;
    ``n`` rows ``beta (e_{2n+i} - e_{2n})``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rows = []
    if gamma != 0:
        r = np.zeros(3 * n)
        r[:n] = gamma
        rows.append(r)
    for i in range(n):
        r = np.zeros(3 * n)
        r[i], r[n] = beta, -beta
        rows.append(r)
    for j in range(n - 1):
        r = np.zeros(3 * n)
        r[n + j], r[n + j + 1] = alpha, -alpha
        rows.append(r)
    for i in range(n):
        r = np.zeros(3 * n)
        r[2 * n - 1], r[2 * n + i] = -beta, beta
        rows.append(r)
    return np.array(rows)


def gen_coupled_block(params: ProblemParams, d, A=1.0, name=None) -> SaddlePointProblem:
    """Block instance that makes products with ``B`` expensive.

    ``x`` has ``3n`` blocks of size ``d``: the first ``n`` carry
    ``mu_x/2 |z|^2 + (L_x - dt)/2 |F1 z|^2``, the middle ``n`` carry
    ``dt/2 |z|^2`` and the last ``n`` carry
    ``dt/2 |z|^2 + (L_x - dt)/2 |F2 z|^2 - A z_1`` with
    ``dt = mu_x + 4 mu_xy^2 / L_y``.  ``g`` has curvature ``L_y`` (or
    ``mu_y`` when ``mu_xy = 0``) on its first block and ``mu_y`` elsewhere;
    ``B`` is the block coupling matrix Kronecker ``I_d``.
    """
    p = params
    _require_assumption5(p)
    if d < 2:
        raise ValueError("block size d must be >= 2")
    n, alpha_, beta_, gamma_ = block_parameters(p)
    F1, F2, _ = gen_chain_matrices(d)
    dt = p.mu_x + 4.0 * p.mu_xy ** 2 / p.L_y
    blocks, lin = [], []
    for i in range(3 * n):
        b = np.zeros(d)
        if i < n:
            H = p.mu_x * np.eye(d) + (p.L_x - dt) * (F1.T @ F1)
        elif i < 2 * n:
            H = dt * np.eye(d)
        else:
            H = dt * np.eye(d) + (p.L_x - dt) * (F2.T @ F2)
            b[0] = A
        blocks.append(H)
        lin.append(b)
    Hf = _block_diag(blocks)
    E = coupling_block_matrix(n, alpha_, beta_, gamma_ if p.mu_xy > 0 else 0.0)
    ny = E.shape[0]
    L_first = p.L_y if p.mu_xy > 0 else p.mu_y
    gdiag = np.full(ny * d, p.mu_y)
    gdiag[:d] = L_first
    B = np.kron(E, np.eye(d))
    return SaddlePointProblem(QuadraticFn(Hf, np.concatenate(lin), L=p.L_x, mu=p.mu_x),
                              QuadraticFn(np.diag(gdiag), L=p.L_y, mu=p.mu_y), B, p, name=name)


def _block_diag(blocks):
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k:k + m, k:k + m] = b
        k += m
    return out


@dataclass
class SpectrumReport:
    """Measured squared singular values against a pair of bounds."""

    sigma2_min: float
    sigma2_max: float
    lower_bound: float
    upper_bound: float
    lower_bound_ok: bool
    upper_bound_ok: bool

    @property
    def ok(self):
        return self.lower_bound_ok and self.upper_bound_ok

    def lines(self):
        flag = lambda b: "true" if b else "false"  # noqa: E731
        return [f"sigma2_min={self.sigma2_min:.12g} lower_bound={self.lower_bound:.12g} "
                f"lower_bound_ok={flag(self.lower_bound_ok)}",
                f"sigma2_max={self.sigma2_max:.12g} upper_bound={self.upper_bound:.12g} "
                f"upper_bound_ok={flag(self.upper_bound_ok)}"]


def validate_spectrum_E(E, alpha, beta, gamma, n, slack=SPECTRUM_SLACK) -> SpectrumReport:
    """Compare the squared singular values of the block coupling matrix with
    ``min{n g^2/4, b^2/36, a^2/(9 n^2)}`` and ``max{2 n g^2, 2(n+1) b^2, 4 a^2}``.

    For ``gamma = 0`` the ``g`` terms are dropped and the smallest positive
    singular value is used.
    """
    E = np.asarray(E, float)
    eig = sym_eigs(E @ E.T)  # rows <= cols, so every eigenvalue is a sigma^2
    smax = float(eig[0])
    if gamma > 0:
        smin = float(eig[-1])
        lower = min(n * gamma ** 2 / 4, beta ** 2 / 36, alpha ** 2 / (9 * n ** 2))
        upper = max(2 * n * gamma ** 2, 2 * (n + 1) * beta ** 2, 4 * alpha ** 2)
    else:
        pos = eig[eig > 1e-10 * max(smax, 1e-300)]
        smin = float(pos[-1])
        lower = min(beta ** 2 / 36, alpha ** 2 / (9 * n ** 2))
        upper = max(2 * (n + 1) * beta ** 2, 4 * alpha ** 2)
    tol = slack * max(1.0, upper)
    return SpectrumReport(smin, smax, lower, upper, smin >= lower - tol, smax <= upper + tol)


def tridiag_matrix(L_xy, mu_bar, d):
    """``1/2`` times the upper bidiagonal matrix with ``L_xy + mu_bar`` on the
    diagonal and ``-(L_xy - mu_bar)`` above it."""
    a, b = L_xy + mu_bar, L_xy - mu_bar
    B = np.diag(np.full(d, 0.5 * a))
    if d > 1:
        B += np.diag(np.full(d - 1, -0.5 * b), 1)
    return B


def gen_bilinear_tridiag(params: ProblemParams, d, A=1.0, name=None) -> SaddlePointProblem:
    """``f = mu_x/2 |x|^2 - A x_1``, ``g = mu_y/2 |y|^2`` with the bidiagonal coupling."""
    p = params
    if not (p.mu_x > 0 and p.mu_y > 0):
        raise ValueError("the bidiagonal instance needs mu_x, mu_y > 0")
    _require_assumption5(p)
    mu_bar = max(p.mu_xy, p.mu_yx)
    b = np.zeros(d)
    b[0] = A
    return SaddlePointProblem(QuadraticFn(p.mu_x * np.eye(d), b, L=p.L_x, mu=p.mu_x),
                              QuadraticFn(p.mu_y * np.eye(d), L=p.L_y, mu=p.mu_y),
                              tridiag_matrix(p.L_xy, mu_bar, d), p, name=name)


def validate_tridiag_spectrum(L_xy, mu_bar, d, slack=SPECTRUM_SLACK) -> SpectrumReport:
    """``mu_bar <= sigma_min(B) <= sigma_max(B) <= L_xy`` for the bidiagonal matrix (squared)."""
    s = singular_values(tridiag_matrix(L_xy, mu_bar, d))
    lower, upper = mu_bar ** 2, L_xy ** 2
    tol = slack * max(1.0, upper)
    smin, smax = float(s[-1]) ** 2, float(s[0]) ** 2
    return SpectrumReport(smin, smax, lower, upper, smin >= lower - tol, smax <= upper + tol)


NAMED_INSTANCES = {
    "scsc_small": InstanceSpec("random-quadratic", ProblemParams(10.0, 10.0, 20.0, 1.0, 1.0), 6, 6,
                               seed=1, name="scsc_small"),
    "coupled_block_n3": InstanceSpec("coupled-block", ProblemParams(10.0, 10.0, 19.0, 0.5, 0.5, 1.0, 1.0), 3,
                                     name="coupled_block_n3"),
    "bilinear_tridiag_small": InstanceSpec("bilinear-tridiag", ProblemParams(10.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0),
                                           6, name="bilinear_tridiag_small"),
    "chain_gradient_small": InstanceSpec("chain-gradient", ProblemParams(40.0, 10.0, 19.0, 1.0, 1.0, 1.0, 1.0), 8,
                                         name="chain_gradient_small"),
    "benchmark_separation": InstanceSpec("random-quadratic", ProblemParams(5.0, 5.0, 100.0, 1.0, 1.0), 5, 5,
                                         seed=7, name="benchmark_separation"),
}


def bilinear_1d() -> SaddlePointProblem:
    """``f = g = 0``, ``B = 1``: pure bilinear scalar game with solution at the origin.

    Its parameters (``L_x = L_y = 1``, ``L_xy = 2``, ``mu_xy = mu_yx = 1``)
    are not meant for the sliding solver; the instance is a baseline check.
    """
    return SaddlePointProblem(QuadraticFn(np.zeros((1, 1)), L=0.0, mu=0.0),
                              QuadraticFn(np.zeros((1, 1)), L=0.0, mu=0.0), np.eye(1),
                              ProblemParams(1.0, 1.0, 2.0, 0.0, 0.0, 1.0, 1.0), name="bilinear_1d")


def named_instance(name) -> SaddlePointProblem:
    if name == "bilinear_1d":
        return bilinear_1d()
    try:
        return generate(NAMED_INSTANCES[name])
    except KeyError:
        raise KeyError(f"unknown instance {name!r}; known: {sorted([*NAMED_INSTANCES, 'bilinear_1d'])}") from None
