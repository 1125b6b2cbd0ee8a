"""Dense linear-algebra helpers and the diagonal P-geometry.

Everything here works on small dense numpy arrays. Vectors are 1-d float
arrays, matrices 2-d float arrays.
"""

from __future__ import annotations

import numpy as np

RANK_RTOL = 1e-10
PIVOT_RTOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-10


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when elimination meets a pivot below tolerance."""


class AsymmetricMatrixError(ValueError):
    pass


def as_vector(v, name="vector"):
    """Validate and convert ``v`` to a finite 1-d float array."""
    arr = np.asarray(v, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def as_matrix(a, name="matrix"):
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def _check_same_dim(u, v):
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")


class DiagWeight:
    """Positive diagonal weight matrix ``P`` defining ``<u, v>_P = sum P_i u_i v_i``.

    Parameters
    ----------
    diagonal : array_like
        Strictly positive diagonal entries.
    """

    __slots__ = ("diagonal", "inverse")

    def __init__(self, diagonal):
        d = as_vector(diagonal, "diagonal")
        if d.size == 0 or np.any(d <= 0):
            raise ValueError("weight diagonal must be non-empty and strictly positive")
        d = d.copy()
        d.setflags(write=False)
        inv = 1.0 / d
        inv.setflags(write=False)
        self.diagonal = d
        self.inverse = inv

    @classmethod
    def identity(cls, dim):
        return cls(np.ones(dim))

    @classmethod
    def blocks(cls, *pairs):
        """Build ``diag(w_1 I_{d_1}, ..., w_m I_{d_m})`` from ``(w, d)`` pairs."""
        return cls(np.concatenate([np.full(d, float(w)) for w, d in pairs]))

    @property
    def dim(self):
        return self.diagonal.size

    def __repr__(self):
        return f"DiagWeight({self.diagonal.tolist()!r})"

    def __eq__(self, other):
        return isinstance(other, DiagWeight) and np.array_equal(self.diagonal, other.diagonal)

    __hash__ = None


def weighted_dot(u, v, P: DiagWeight) -> float:
    u = as_vector(u, "u")
    v = as_vector(v, "v")
    _check_same_dim(u, v)
    if P.dim != u.size:
        raise ValueError(f"weight has dimension {P.dim}, vectors have {u.size}")
    return float(np.dot(P.diagonal * u, v))


def weighted_sqnorm(u, P: DiagWeight) -> float:
    """``||u||_P^2``."""
    return weighted_dot(u, u, P)


def weighted_norm(u, P: DiagWeight) -> float:
    return float(np.sqrt(weighted_sqnorm(u, P)))


def dual_norm(u, P: DiagWeight) -> float:
    """``||u||_{P^{-1}}``, the norm in which operator values are measured."""
    u = as_vector(u, "u")
    return float(np.sqrt(np.dot(P.inverse * u, u)))


def solve_linear(A, b):
    """Solve ``A x = b`` by Gaussian elimination with partial pivoting.

    Raises
    ------
    SingularMatrixError
        If a pivot falls below ``1e-12 * max|A_ij|``.
    """
    A = as_matrix(A, "A")
    b = as_vector(b, "b")
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError(f"A must be square, got {A.shape}")
    if b.size != n:
        raise ValueError(f"b has length {b.size}, expected {n}")
    scale = np.max(np.abs(A)) if A.size else 0.0
    if scale == 0.0:
        raise SingularMatrixError("matrix is zero")
    tol = PIVOT_RTOL * scale

    M = np.hstack([A, b[:, None]])
    for col in range(n):
        piv = col + int(np.argmax(np.abs(M[col:, col])))
        if abs(M[piv, col]) < tol:
            raise SingularMatrixError(f"pivot {abs(M[piv, col]):.3e} below tolerance at column {col}")
        if piv != col:
            M[[col, piv]] = M[[piv, col]]
        factors = M[col + 1:, col] / M[col, col]
        M[col + 1:, col:] -= np.outer(factors, M[col, col:])

    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (M[row, n] - np.dot(M[row, row + 1:n], x[row + 1:])) / M[row, row]
    return x


def _off_norm(S):
    off = S - np.diag(np.diag(S))
    return float(np.sqrt(np.sum(off * off)))


def sym_eigs(S, return_vectors=False):
    """Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in descending order; with ``return_vectors`` the
    matching orthonormal eigenvectors are returned as columns.
    """
    S = as_matrix(S, "S")
    n = S.shape[0]
    if S.shape != (n, n):
        raise ValueError(f"S must be square, got {S.shape}")
    scale = max(float(np.max(np.abs(S))) if S.size else 0.0, 1.0)
    if np.max(np.abs(S - S.T), initial=0.0) > SYMMETRY_TOL * scale:
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")

    A = 0.5 * (S + S.T)
    V = np.eye(n)
    fro = float(np.linalg.norm(A))
    threshold = JACOBI_TOL * max(fro, np.finfo(float).tiny)
    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_norm(A) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # rotate rows/cols p, q
                Ap = A[:, p].copy()
                Aq = A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap = A[p, :].copy()
                Aq = A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                A[p, q] = A[q, p] = 0.0
                Vp = V[:, p].copy()
                V[:, p] = c * Vp - s * V[:, q]
                V[:, q] = s * Vp + c * V[:, q]

    w = np.diag(A).copy()
    order = np.argsort(-w, kind="stable")
    if return_vectors:
        return w[order], V[:, order]
    return w[order]


def singular_values(A):
    """Singular values of ``A`` (descending), via Jacobi on the smaller Gram matrix."""
    A = as_matrix(A, "A")
    G = A @ A.T if A.shape[0] <= A.shape[1] else A.T @ A
    w = sym_eigs(G)
    return np.sqrt(np.clip(w, 0.0, None))


def kernel_basis(A, rtol=RANK_RTOL):
    """Orthonormal basis of ``ker A`` as the columns of a ``(cols, k)`` array.

    The rank is decided by singular values above ``rtol * sigma_max``.
    """
    A = as_matrix(A, "A")
    cols = A.shape[1]
    if A.size == 0:
        return np.eye(cols)
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return np.eye(cols)
    rank = int(np.sum(s > rtol * smax))
    return vt[rank:].T.copy()
