"""Dense complex linear algebra kernels.

Every factorization here is written out by hand (Householder, Givens,
Cholesky, one-sided Jacobi, shifted QR) so that the structured solvers
do not depend on LAPACK semantics for their numerical behaviour.
Triangular factors are always sign-normalized to a real non-negative
diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvergenceError,
    DimensionError,
    NotPositiveDefiniteError,
    SingularTriangularError,
    ZeroColumnError,
    ZeroRowError,
)

EPS = np.finfo(float).eps


def _work_dtype(*arrays):
    return np.result_type(float, *[np.asarray(a).dtype for a in arrays])


# ---------------------------------------------------------------------------
# elementary transforms


def _ldexp(x, e, is_real):
    if is_real:
        return math.ldexp(float(x), e)
    x = complex(x)
    return complex(math.ldexp(x.real, e), math.ldexp(x.imag, e))


def givens(a, b):
    """Return ``(c, s, r)`` with ``[c, conj(s); -s, c] @ [a, b] = [r, 0]``.

    ``c`` is real and ``r`` carries the phase of ``a`` (of ``b`` when a = 0).
    Real inputs give a real ``s``.
    """
    is_real = not (np.iscomplexobj(a) or np.iscomplexobj(b))
    if b == 0:
        return 1.0, (0.0 if is_real else 0j), a
    if a == 0:
        return 0.0, (1.0 if is_real else 1 + 0j), b
    # exact power-of-two scalings keep subnormal and huge inputs accurate
    ea = math.frexp(max(abs(a.real), abs(a.imag)))[1]
    e = max(ea, math.frexp(max(abs(b.real), abs(b.imag)))[1])
    a_n = _ldexp(a, -ea, is_real)
    phase = a_n / abs(a_n)
    abs_a = math.ldexp(abs(a_n), ea - e)
    b_s = _ldexp(b, -e, is_real)
    nrm = math.hypot(abs_a, abs(b_s))
    c = abs_a / nrm
    s = np.conj(phase) * b_s / nrm
    r = phase * math.ldexp(nrm, e)
    if is_real:
        return c, float(s), float(r)
    return c, complex(s), complex(r)


def householder_vector(x):
    """Reflector ``H = I - beta w w^H`` with ``w[0] = 1`` and ``H x = rho e1``.

    Returns ``(w, beta, rho)``. ``beta = 0`` means no reflection is needed.
    """
    x = np.asarray(x)
    alpha = x[0]
    sigma = np.linalg.norm(x[1:]) if x.shape[0] > 1 else 0.0
    w = np.zeros_like(x)
    w[0] = 1
    if sigma == 0:
        return w, 0.0, alpha
    nrm = math.hypot(abs(alpha), sigma)
    phase = alpha / abs(alpha) if alpha != 0 else 1.0
    rho = -phase * nrm
    v1 = alpha - rho
    w[1:] = x[1:] / v1
    av1 = abs(v1)
    beta = 2.0 * av1 * av1 / (av1 * av1 + sigma * sigma)
    return w, beta, rho


@dataclass(frozen=True)
class Reflector:
    start: int
    w: np.ndarray
    beta: float


@dataclass(frozen=True)
class Rotation:
    i: int
    j: int
    c: float
    s: complex


def _apply_reflector(t: Reflector, B):
    if t.beta == 0:
        return
    rows = slice(t.start, t.start + t.w.shape[0])
    blk = B[rows]
    blk -= t.beta * np.outer(t.w, t.w.conj() @ blk)


def _apply_rotation(t: Rotation, B, adjoint):
    x = B[t.i].copy()
    y = B[t.j]
    s = t.s
    if adjoint:
        B[t.i] = t.c * x + np.conj(s) * y
        B[t.j] = -s * x + t.c * y
    else:
        B[t.i] = t.c * x - np.conj(s) * y
        B[t.j] = s * x + t.c * y


@dataclass
class QFactors:
    """Implicit unitary ``Q`` stored as a sequence of elementary transforms.

    ``Q^H A = [R; 0]``. The trailing ``phases`` (length n) are applied to
    the leading rows after the transforms to pin the sign convention.
    """

    dim: int
    transforms: list = field(default_factory=list)
    phases: np.ndarray | None = None

    def materialize(self) -> np.ndarray:
        return apply_q(self, np.eye(self.dim, dtype=complex))


def apply_q_adjoint(q: QFactors, B) -> np.ndarray:
    """Return ``Q^H B`` without forming ``Q``."""
    B = np.array(B, dtype=_work_dtype(B, *(t.w for t in q.transforms if isinstance(t, Reflector))))
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    if B.shape[0] != q.dim:
        raise DimensionError(f"expected {q.dim} rows, got {B.shape[0]}")
    if q.phases is not None and np.iscomplexobj(q.phases):
        B = B.astype(np.result_type(B, q.phases))
    for t in q.transforms:
        if isinstance(t, Reflector):
            _apply_reflector(t, B)
        else:
            _apply_rotation(t, B, adjoint=True)
    if q.phases is not None:
        B[: q.phases.shape[0]] *= q.phases[:, None]
    return B[:, 0] if vec else B


def apply_q(q: QFactors, B) -> np.ndarray:
    """Return ``Q B``."""
    B = np.array(B, dtype=_work_dtype(B, *(t.w for t in q.transforms if isinstance(t, Reflector))))
    vec = B.ndim == 1
    if vec:
        B = B[:, None]
    if B.shape[0] != q.dim:
        raise DimensionError(f"expected {q.dim} rows, got {B.shape[0]}")
    if q.phases is not None:
        B = B.astype(np.result_type(B, q.phases))
        B[: q.phases.shape[0]] *= np.conj(q.phases)[:, None]
    for t in reversed(q.transforms):
        if isinstance(t, Reflector):
            # Hermitian reflectors are self-inverse
            _apply_reflector(t, B)
        else:
            _apply_rotation(t, B, adjoint=False)
    return B[:, 0] if vec else B


def diagonal_phases(R) -> np.ndarray:
    """Phases ``d`` with ``conj(d) * diag(R)`` real non-negative."""
    d = np.diag(R)
    mag = np.abs(d)
    out = np.ones_like(d)
    nz = mag != 0
    out[nz] = d[nz] / mag[nz]
    return out


def sign_normalize(R, *extra):
    """Scale rows so the diagonal is real non-negative.

    Rows of each array in ``extra`` are scaled identically.
    """
    d = np.conj(diagonal_phases(R))
    n = d.shape[0]
    R = R * d[:, None]
    idx = np.arange(n)
    R[idx, idx] = np.abs(R[idx, idx])
    if not extra:
        return R
    scaled = []
    for E in extra:
        E = np.asarray(E).astype(np.result_type(E, d), copy=True)
        if E.ndim == 1:
            E[:n] *= d
        else:
            E[:n] *= d[:, None]
        scaled.append(E)
    return (R, *scaled)


# ---------------------------------------------------------------------------
# QR factorizations


def householder_qr(A, counter=None):
    """Householder QR ``A = Q [R; 0]`` with ``R`` sign-normalized.

    Returns ``(QFactors, R)``.
    """
    A = np.array(A, dtype=_work_dtype(A))
    if A.ndim != 2:
        raise DimensionError("expected a matrix")
    m, n = A.shape
    if m < n:
        raise DimensionError(f"householder_qr needs m >= n, got {m}x{n}")
    transforms = []
    for k in range(n):
        w, beta, rho = householder_vector(A[k:, k])
        if beta != 0:
            tail = A[k:, k + 1:]
            tail -= beta * np.outer(w, w.conj() @ tail)
        A[k, k] = rho
        A[k + 1:, k] = 0
        transforms.append(Reflector(k, w, beta))
        if counter is not None:
            counter.add_reflector(m - k, n - k)
    R = np.triu(A[:n])
    phases = np.conj(diagonal_phases(R))
    R = sign_normalize(R)
    return QFactors(m, transforms, phases), R


@dataclass
class PivotedQR:
    """Column-pivoted QR ``A[:, perm] = Q [R; 0]``."""

    q: QFactors
    r: np.ndarray
    perm: np.ndarray
    rank: int

    @property
    def permutation_matrix(self) -> np.ndarray:
        n = self.perm.shape[0]
        P = np.zeros((n, n))
        P[self.perm, np.arange(n)] = 1
        return P


def numerical_rank(R, rank_tol) -> int:
    """Smallest ``r`` with ``|R[r, r]| <= rank_tol |R[r-1, r-1]|`` (0-based), else n."""
    d = np.abs(np.diag(R))
    n = d.shape[0]
    if n == 0 or d[0] == 0:
        return 0
    for k in range(n - 1):
        if d[k + 1] <= rank_tol * d[k]:
            return k + 1
    return n


def pivoted_qr(A, rank_tol=None) -> PivotedQR:
    """Businger-Golub column pivoted Householder QR with rank detection."""
    A = np.array(A, dtype=_work_dtype(A))
    if A.ndim != 2:
        raise DimensionError("expected a matrix")
    m, n = A.shape
    if m < n:
        raise DimensionError(f"pivoted_qr needs m >= n, got {m}x{n}")
    if rank_tol is None:
        rank_tol = n * EPS
    perm = np.arange(n)
    transforms = []
    for k in range(n):
        norms = np.linalg.norm(A[k:, k:], axis=0)
        p = k + int(np.argmax(norms))
        if p != k:
            A[:, [k, p]] = A[:, [p, k]]
            perm[[k, p]] = perm[[p, k]]
        w, beta, rho = householder_vector(A[k:, k])
        if beta != 0:
            tail = A[k:, k + 1:]
            tail -= beta * np.outer(w, w.conj() @ tail)
        A[k, k] = rho
        A[k + 1:, k] = 0
        transforms.append(Reflector(k, w, beta))
    R = np.triu(A[:n])
    phases = np.conj(diagonal_phases(R))
    R = sign_normalize(R)
    q = QFactors(m, transforms, phases)
    return PivotedQR(q, R, perm, numerical_rank(R, rank_tol))


# ---------------------------------------------------------------------------
# Cholesky and triangular solves


def cholesky_upper(H) -> np.ndarray:
    """Upper Cholesky factor ``U`` with ``H = U^H U``.

    The input is symmetrized as ``(H + H^H)/2`` first. Raises
    :class:`NotPositiveDefiniteError` at the first pivot that is not
    positive and finite.
    """
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DimensionError("cholesky_upper needs a square matrix")
    H = 0.5 * (H + H.conj().T)
    H = H.astype(_work_dtype(H))
    n = H.shape[0]
    U = np.zeros_like(H)
    for j in range(n):
        col = U[:j, j]
        ajj = H[j, j].real - np.vdot(col, col).real
        if not ajj > 0 or not math.isfinite(ajj):
            raise NotPositiveDefiniteError(j, ajj)
        ujj = math.sqrt(ajj)
        U[j, j] = ujj
        if j + 1 < n:
            U[j, j + 1:] = (H[j, j + 1:] - col.conj() @ U[:j, j + 1:]) / ujj
    return U


def tri_solve(T, B, lower=False, trans="N", side="L"):
    """Solve ``op(T) X = B`` (side 'L') or ``X op(T) = B`` (side 'R').

    ``trans`` is 'N', 'T' or 'C'. A 1-D ``B`` is treated as one column
    (or one row for side 'R').
    """
    T = np.asarray(T)
    trans = trans.upper()
    side = side.upper()
    if trans not in "NTC" or side not in "LR":
        raise ValueError("trans must be N/T/C and side L/R")
    n = T.shape[0]
    if T.shape != (n, n):
        raise DimensionError("triangular matrix must be square")
    diag = np.diag(T)
    zero = np.flatnonzero(diag == 0)
    if zero.size:
        raise SingularTriangularError(int(zero[0]))
    B = np.asarray(B)
    vec = B.ndim == 1
    if side == "R":
        # X op(T) = B  <=>  op(T)^T X^T = B^T
        M = {"N": T.T, "T": T, "C": T.conj()}[trans]
        M_lower = lower if trans != "N" else not lower
        Bt = B[:, None] if vec else B.T
        X = _substitute(M, Bt, M_lower)
        return X[:, 0] if vec else X.T
    M = {"N": T, "T": T.T, "C": T.conj().T}[trans]
    M_lower = lower if trans == "N" else not lower
    X = _substitute(M, B[:, None] if vec else B, M_lower)
    return X[:, 0] if vec else X


def _substitute(M, B, lower):
    n = M.shape[0]
    if B.shape[0] != n:
        raise DimensionError(f"right-hand side has {B.shape[0]} rows, expected {n}")
    X = np.array(B, dtype=np.result_type(M, B, float))
    order = range(n) if lower else range(n - 1, -1, -1)
    for i in order:
        if lower:
            acc = X[i] - M[i, :i] @ X[:i]
        else:
            acc = X[i] - M[i, i + 1:] @ X[i + 1:]
        X[i] = acc / M[i, i]
    return X


# ---------------------------------------------------------------------------
# SVD and conditioning


def _jacobi_columns(G, V, max_sweeps):
    n = G.shape[1]
    tol = max(G.shape[0], 1) * EPS
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                gp = G[:, p]
                gq = G[:, q]
                a = np.vdot(gp, gp).real
                b = np.vdot(gq, gq).real
                g = np.vdot(gp, gq)
                ag = abs(g)
                if a == 0 or b == 0 or ag <= tol * math.sqrt(a * b):
                    continue
                rotated = True
                phase = g / ag
                zeta = (b - a) / (2.0 * ag)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1.0 + zeta * zeta))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = c * t
                for M in (G, V):
                    xp = M[:, p].copy()
                    xq = M[:, q] * np.conj(phase)
                    M[:, p] = c * xp - s * xq
                    M[:, q] = (s * xp + c * xq) * phase
        if not rotated:
            return
    raise ConvergenceError(f"Jacobi SVD did not converge in {max_sweeps} sweeps")


def _complete_basis(U, k):
    """Replace columns k: of U by an orthonormal complement of U[:, :k]."""
    m, n = U.shape
    if k == n:
        return U
    if k == 0:
        return np.eye(m, n, dtype=U.dtype)
    q, _ = householder_qr(U[:, :k])
    Q = q.materialize()
    # Q[:, :k] spans U[:, :k]; remaining columns are orthogonal to it
    U = U.copy()
    U[:, k:] = Q[:, k:n].astype(U.dtype, copy=False)
    return U


def jacobi_svd(A, max_sweeps=50):
    """One-sided Jacobi SVD ``A = U diag(s) V^H`` (thin).

    Tall inputs are first reduced by Householder QR. Wide inputs are
    handled through ``A^H``. Singular values are sorted descending.
    """
    A = np.asarray(A)
    if A.ndim != 2:
        raise DimensionError("expected a matrix")
    m, n = A.shape
    if m < n:
        U, s, V = jacobi_svd(A.conj().T, max_sweeps)
        return V, s, U
    dtype = np.result_type(A, complex)
    if m > n:
        q, R = householder_qr(A.astype(dtype))
        G = R.astype(dtype)
    else:
        q = None
        G = A.astype(dtype, copy=True)
    V = np.eye(n, dtype=dtype)
    _jacobi_columns(G, V, max_sweeps)
    s = np.linalg.norm(G, axis=0)
    order = np.argsort(-s, kind="stable")
    s = s[order]
    G = G[:, order]
    V = V[:, order]
    k = int(np.count_nonzero(s))
    U = np.zeros_like(G)
    U[:, :k] = G[:, :k] / s[:k]
    U = _complete_basis(U, k)
    if q is not None:
        pad = np.zeros((m, n), dtype=dtype)
        pad[:n] = U
        U = apply_q(q, pad)
    if not np.iscomplexobj(A):
        U, V = U.real.copy(), V.real.copy()
    return U, s, V


def singular_values(A) -> np.ndarray:
    return jacobi_svd(A)[1]


def cond2(A) -> float:
    """Spectral condition number; ``inf`` for rank-deficient input."""
    s = singular_values(A)
    if s.size == 0:
        return 1.0
    if s[-1] == 0:
        return math.inf
    return float(s[0] / s[-1])


def equilibrate_columns(A):
    """Return ``(A_c, d)`` with unit columns and ``A = A_c diag(d)``."""
    A = np.asarray(A)
    d = np.linalg.norm(A, axis=0)
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise ZeroColumnError(int(zero[0]))
    return A / d, d


def equilibrate_rows(A):
    """Return ``(d, A_r)`` with unit rows and ``A = diag(d) A_r``."""
    A = np.asarray(A)
    d = np.linalg.norm(A, axis=1)
    zero = np.flatnonzero(d == 0)
    if zero.size:
        raise ZeroRowError(int(zero[0]))
    return d, A / d[:, None]


# ---------------------------------------------------------------------------
# small nonsymmetric eigenproblem


def hessenberg(A):
    """Householder reduction ``A = Q H Q^H``. Returns ``(H, Q)``."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        w, beta, rho = householder_vector(H[k + 1:, k])
        if beta == 0:
            continue
        rows = slice(k + 1, n)
        H[rows, k:] -= beta * np.outer(w, w.conj() @ H[rows, k:])
        H[:, rows] -= beta * np.outer(H[:, rows] @ w, w.conj())
        Q[:, rows] -= beta * np.outer(Q[:, rows] @ w, w.conj())
        H[k + 2:, k] = 0
    return H, Q


def schur_complex(A, max_iter_per_eig=60):
    """Complex Schur form ``A = Z T Z^H`` by single-shift Hessenberg QR."""
    T, Z = hessenberg(A)
    n = T.shape[0]
    hi = n - 1
    its = 0
    while hi > 0:
        lo = hi
        while lo > 0:
            sub = abs(T[lo, lo - 1])
            scale = abs(T[lo, lo]) + abs(T[lo - 1, lo - 1])
            if sub <= EPS * scale or sub < np.finfo(float).tiny:
                T[lo, lo - 1] = 0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            its = 0
            continue
        its += 1
        if its > max_iter_per_eig:
            raise ConvergenceError("QR iteration for eigenvalues did not converge")
        if its % 11 == 0:
            # exceptional shift to break cycles
            mu = T[hi, hi] + 0.75 * abs(T[hi, hi - 1])
        else:
            a, b = T[hi - 1, hi - 1], T[hi - 1, hi]
            c, d = T[hi, hi - 1], T[hi, hi]
            half = 0.5 * (a - d)
            disc = np.sqrt(half * half + b * c)
            mid = 0.5 * (a + d)
            mu1 = mid + disc
            mu2 = mid - disc
            mu = mu1 if abs(mu1 - d) <= abs(mu2 - d) else mu2
        x = T[lo, lo] - mu
        y = T[lo + 1, lo]
        for k in range(lo, hi):
            if k > lo:
                x = T[k, k - 1]
                y = T[k + 1, k - 1]
            c, s, r = givens(complex(x), complex(y))
            cols = slice(max(lo, k - 1), n)
            rk = T[k, cols].copy()
            rk1 = T[k + 1, cols]
            T[k, cols] = c * rk + np.conj(s) * rk1
            T[k + 1, cols] = -s * rk + c * rk1
            if k > lo:
                T[k + 1, k - 1] = 0
            rows = slice(0, min(k + 3, hi + 1))
            ck = T[rows, k].copy()
            ck1 = T[rows, k + 1]
            T[rows, k] = c * ck + s * ck1
            T[rows, k + 1] = -np.conj(s) * ck + c * ck1
            zk = Z[:, k].copy()
            zk1 = Z[:, k + 1]
            Z[:, k] = c * zk + s * zk1
            Z[:, k + 1] = -np.conj(s) * zk + c * zk1
    return np.triu(T), Z


def normalize_columns(X):
    """Unit columns with the largest-modulus entry made real positive."""
    X = np.array(X, dtype=complex)
    for j in range(X.shape[1]):
        col = X[:, j]
        nrm = np.linalg.norm(col)
        if nrm == 0:
            continue
        col /= nrm
        p = int(np.argmax(np.abs(col)))
        col *= np.conj(col[p]) / abs(col[p])
        col[p] = abs(col[p])
    return X


def eig_small(A):
    """Eigenvalues and unit eigenvectors of a small dense matrix."""
    A = np.asarray(A)
    n = A.shape[0]
    if A.shape != (n, n):
        raise DimensionError("eig_small needs a square matrix")
    if n == 0:
        return np.zeros(0, complex), np.zeros((0, 0), complex)
    T, Z = schur_complex(A)
    lam = np.diag(T).copy()
    small = EPS * max(np.abs(T).max(), np.finfo(float).tiny)
    Y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        Y[k, k] = 1
        for i in range(k - 1, -1, -1):
            denom = T[i, i] - lam[k]
            if abs(denom) < small:
                denom = small
            Y[i, k] = -(T[i, i + 1:k + 1] @ Y[i + 1:k + 1, k]) / denom
    return lam, normalize_columns(Z @ Y)
