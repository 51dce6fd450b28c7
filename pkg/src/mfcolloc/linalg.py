"""Small dense and tridiagonal linear-algebra kernels.

Everything here works on plain ``numpy`` arrays. Symmetric matrices are
stored densely; tridiagonal systems are passed as three diagonals.
"""

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.linalg import lapack

from .errors import DimMismatch, NoConvergence, NonPositiveDefinite, SingularPivot

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EigDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``values`` is sorted in descending order and ``vectors[:, k]`` is the
    unit eigenvector paired with ``values[k]``.
    """

    values: np.ndarray
    vectors: np.ndarray
    sweeps: int = 0

    def __len__(self):
        return self.values.shape[0]


def _check_square(A):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimMismatch(f"expected a square matrix, got shape {A.shape}")
    return A


def cholesky_spd(A):
    """Lower-triangular ``L`` with ``A = L @ L.T``.

    Raises :class:`NonPositiveDefinite` when a pivot drops to
    ``1e-14 * max(diag(A))`` or below.
    """
    A = _check_square(A)
    n = A.shape[0]
    L = np.zeros_like(A)
    tol = 1e-14 * max(np.max(np.diag(A)), 0.0) if n else 0.0
    for j in range(n):
        pivot = A[j, j] - L[j, :j] @ L[j, :j]
        if not pivot > tol:
            raise NonPositiveDefinite(f"pivot {j} is {pivot:.3e} (tolerance {tol:.3e})")
        L[j, j] = np.sqrt(pivot)
        if j + 1 < n:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return L


@njit(cache=True)
def _jacobi_two_sided(B, V, max_sweeps):
    n = B.shape[0]
    fro = 0.0
    for i in range(n):
        for j in range(n):
            fro += B[i, j] * B[i, j]
    floor = _EPS * _EPS * np.sqrt(fro)
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = B[p, q]
                app = B[p, p]
                aqq = B[q, q]
                if abs(apq) <= _EPS * np.sqrt(abs(app * aqq)) or abs(apq) <= floor:
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(n):
                    bkp = B[k, p]
                    bkq = B[k, q]
                    B[k, p] = c * bkp - s * bkq
                    B[k, q] = s * bkp + c * bkq
                for k in range(n):
                    bpk = B[p, k]
                    bqk = B[q, k]
                    B[p, k] = c * bpk - s * bqk
                    B[q, k] = s * bpk + c * bqk
                B[p, q] = 0.0
                B[q, p] = 0.0
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        if not rotated:
            return sweep
    return -1


@njit(cache=True)
def _jacobi_one_sided(W, V, max_sweeps):
    m, n = W.shape
    total = 0.0
    for i in range(m):
        for j in range(n):
            total += W[i, j] * W[i, j]
    floor = _EPS * _EPS * total
    for sweep in range(1, max_sweeps + 1):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = 0.0
                beta = 0.0
                gamma = 0.0
                for k in range(m):
                    alpha += W[k, p] * W[k, p]
                    beta += W[k, q] * W[k, q]
                    gamma += W[k, p] * W[k, q]
                if abs(gamma) <= _EPS * np.sqrt(alpha * beta) or abs(gamma) <= floor:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                t = (1.0 if zeta >= 0 else -1.0) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                for k in range(m):
                    wkp = W[k, p]
                    wkq = W[k, q]
                    W[k, p] = c * wkp - s * wkq
                    W[k, q] = s * wkp + c * wkq
                for k in range(n):
                    vkp = V[k, p]
                    vkq = V[k, q]
                    V[k, p] = c * vkp - s * vkq
                    V[k, q] = s * vkp + c * vkq
        if not rotated:
            return sweep
    return -1


def _sorted_pairs(values, V, W=None):
    """Descending order (stable) and sign-normalized vectors."""
    n = values.shape[0]
    order = np.argsort(-values, kind="stable")
    values, V = values[order], V[:, order]
    if n:
        lead = np.argmax(np.abs(V), axis=0)
        signs = np.where(V[lead, np.arange(n)] < 0, -1.0, 1.0)
        V = V * signs
        if W is not None:
            W = W[:, order] * signs
    return values, V, W


def eig_sym(A, max_sweeps=60):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Row-cyclic ordering. A rotation is skipped once
    ``|a_pq| <= eps * sqrt(|a_pp a_qq|)`` (or the entry is negligible
    against ``||A||_F``); this keeps small eigenvalues of graded matrices
    such as snapshot correlation matrices accurate.

    Eigenvectors are sign-normalized so that the largest-magnitude entry of
    each one is positive; equal eigenvalues keep the lower original index
    first. Raises :class:`NoConvergence` after ``max_sweeps`` sweeps.
    """
    A = _check_square(A)
    n = A.shape[0]
    B = 0.5 * (A + A.T)
    V = np.eye(n)
    sweeps = _jacobi_two_sided(B, V, max_sweeps) if n > 1 else 0
    if sweeps < 0:
        raise NoConvergence(f"Jacobi did not converge in {max_sweeps} sweeps", iterations=max_sweeps)
    values, V, _ = _sorted_pairs(np.diag(B).copy(), V)
    return EigDecomposition(values, V, sweeps)


def gram_eig_jacobi(X, scale=1.0, max_sweeps=60):
    """Eigenpairs of ``scale * X^T X`` by one-sided (Hestenes) Jacobi on ``X``.

    Columns of ``X`` are rotated pairwise until every pair is orthogonal to
    working precision relative to the product of their norms. The rotations
    accumulate into the eigenvectors and the squared column norms give the
    eigenvalues, so the Gram matrix is never formed and small eigenvalues
    keep their relative accuracy.

    Returns ``(EigDecomposition, XV)`` where the columns of ``XV = X @ V``
    are mutually orthogonal and ordered like the eigenvalues.
    """
    W = np.array(X, dtype=float, order="C")
    if W.ndim != 2:
        raise DimMismatch("expected a matrix")
    n = W.shape[1]
    V = np.eye(n)
    sweeps = _jacobi_one_sided(W, V, max_sweeps) if n > 1 else 0
    if sweeps < 0:
        raise NoConvergence(f"one-sided Jacobi did not converge in {max_sweeps} sweeps", iterations=max_sweeps)
    values = scale * np.einsum("ij,ij->j", W, W)
    values, V, W = _sorted_pairs(values, V, W)
    return EigDecomposition(values, V, sweeps), W


def minnorm_solve(A, rhs, null_tol=1e-8, eig=None):
    """Minimum-norm least-squares solution of ``A x = rhs`` for symmetric ``A``.

    ``rhs`` is expanded in the eigenbasis of ``A``; components whose
    eigenvalue satisfies ``|lam| <= null_tol * max|lam|`` are set to zero.
    A precomputed decomposition of ``A`` may be passed as ``eig``.
    """
    rhs = np.asarray(rhs, dtype=float)
    if eig is None:
        eig = eig_sym(A)
    lam = eig.values
    scale = np.max(np.abs(lam)) if lam.size else 0.0
    keep = np.abs(lam) > null_tol * scale
    coef = eig.vectors.T @ rhs
    coef = np.where(keep, coef / np.where(keep, lam, 1.0), 0.0)
    return eig.vectors @ coef


def tridiag_solve(lower, diag, upper, rhs):
    """Solve a tridiagonal system given its three diagonals.

    ``lower`` and ``upper`` have one entry fewer than ``diag``. Backed by
    LAPACK ``dgtsv`` (Gaussian elimination with partial pivoting).
    """
    diag = np.asarray(diag, dtype=float)
    n = diag.shape[0]
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lower.shape != (n - 1,) or upper.shape != (n - 1,) or rhs.shape[0] != n:
        raise DimMismatch("tridiagonal bands and right-hand side disagree in size")
    if n == 1:
        if diag[0] == 0.0:
            raise SingularPivot("zero pivot at row 0")
        return rhs / diag[0]
    _, _, _, x, info = lapack.dgtsv(lower, diag, upper, rhs)
    if info > 0:
        raise SingularPivot(f"zero pivot at row {info - 1}")
    return x


def tridiag_matvec(lower, diag, upper, x):
    """Product of a tridiagonal matrix (given by its diagonals) with ``x``."""
    y = diag * x
    y[:-1] += upper * x[1:]
    y[1:] += lower * x[:-1]
    return y


def mass_orthonormalize(V, mass, drop_tol=1e-10, start=0):
    """Modified Gram-Schmidt in the ``mass`` inner product, applied twice.

    Columns before ``start`` are assumed already orthonormal and are only
    used for projection. Returns the orthonormal columns and the indices of
    input columns that were dropped because their norm after projection
    fell below ``drop_tol``.
    """
    V = np.array(V, dtype=float)
    kept = [V[:, j] for j in range(start)]
    dropped = []
    for j in range(start, V.shape[1]):
        v = V[:, j].copy()
        for _ in range(2):
            for w in kept:
                v -= (w @ (mass @ v)) * w
        norm = np.sqrt(max(v @ (mass @ v), 0.0))
        if norm < drop_tol:
            dropped.append(j)
            continue
        kept.append(v / norm)
    out = np.column_stack(kept) if kept else np.zeros((V.shape[0], 0))
    return out, dropped
