"""DMD front-end: Ritz pairs from snapshots, amplitudes and reconstruction."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dense import (
    EPS,
    apply_q_adjoint,
    eig_small,
    householder_qr,
    jacobi_svd,
    pivoted_qr,
    tri_solve,
)
from .errors import DimensionError, RankDeficientBasisError
from .structure import gram_from, vandermonde

DEFAULT_EPS_RANK = 1e-10


@dataclass
class SnapshotPair:
    X: np.ndarray
    Y: np.ndarray
    dt: float = 1.0

    def __post_init__(self):
        self.X = np.asarray(self.X)
        self.Y = np.asarray(self.Y)
        if self.X.ndim != 2 or self.X.shape != self.Y.shape:
            raise DimensionError("X and Y must be matrices of equal shape")

    @classmethod
    def from_sequence(cls, F, dt=1.0):
        """Pairs ``(f_i, f_{i+1})`` from a snapshot sequence ``F`` (n x (m+1))."""
        F = np.asarray(F)
        return cls(F[:, :-1], F[:, 1:], dt)


@dataclass
class RitzOutput:
    """Ritz pairs with the truncated SVD data they came from.

    ``Z = U @ B``; ``AU`` is the data-driven image of ``U`` under the
    operator and ``Dx`` the column scaling applied to the snapshots
    (ones when unscaled).
    """

    Z: np.ndarray
    lam: np.ndarray
    B: np.ndarray
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray
    AU: np.ndarray
    Dx: np.ndarray
    residuals: np.ndarray | None = None
    rayleigh: np.ndarray | None = None

    @property
    def k(self) -> int:
        return self.lam.shape[0]


def _truncated_svd(X, eps_rank):
    if not np.any(X):
        raise ValueError("snapshot matrix X is zero")
    n, m = X.shape
    if m > n:
        raise DimensionError(f"expected at most as many snapshots as rows, got {n}x{m}")
    U, s, V = jacobi_svd(X.astype(complex))
    k = int(np.count_nonzero(s >= s[0] * eps_rank))
    if k == 0:
        raise ValueError("numerical rank is zero")
    return U[:, :k], s[:k], V[:, :k]


def _scale(X, Y, scale):
    if not scale:
        return X, Y, np.ones(X.shape[1])
    d = np.linalg.norm(X, axis=0)
    dinv = np.zeros_like(d)
    nz = d > 0
    dinv[nz] = 1.0 / d[nz]
    return X * dinv[None, :], Y * dinv[None, :], d


def data_residuals(AU, U, W, lam) -> np.ndarray:
    """``||A U w_i - lam_i U w_i||`` for each column of ``W``."""
    return np.linalg.norm(AU @ W - (U @ W) * lam[None, :], axis=0)


def dmd(pair: SnapshotPair, eps_rank=DEFAULT_EPS_RANK) -> RitzOutput:
    """Rayleigh-Ritz DMD from the truncated SVD of ``X``."""
    X = pair.X.astype(complex)
    U, s, V = _truncated_svd(X, eps_rank)
    AU = (pair.Y @ V) / s[None, :]
    Sk = U.conj().T @ AU
    lam, B = eig_small(Sk)
    Z = U @ B
    res = data_residuals(AU, U, B, lam)
    return RitzOutput(Z, lam, B, U, s, V, AU, np.ones(X.shape[1]), residuals=res)


def ddmd_rrr(pair: SnapshotPair, eps_rank=DEFAULT_EPS_RANK, scale=True) -> RitzOutput:
    """Refined Rayleigh-Ritz DMD with optimal data-driven residuals."""
    X, Y, Dx = _scale(pair.X.astype(complex), pair.Y.astype(complex), scale)
    U, s, V = _truncated_svd(X, eps_rank)
    n, k = U.shape
    AU = (Y @ V) / s[None, :]
    M = np.concatenate([U, AU], axis=1)
    if n < 2 * k:
        M = np.concatenate([M, np.zeros((2 * k - n, 2 * k), dtype=complex)], axis=0)
    _, Rf = householder_qr(M)
    R11, R12, R22 = Rf[:k, :k], Rf[:k, k:], Rf[k:, k:]
    Sk = np.conj(np.diag(R11))[:, None] * R12
    lam = eig_small(Sk)[0]
    W = np.zeros((k, k), dtype=complex)
    res = np.zeros(k)
    rho = np.zeros(k, dtype=complex)
    for i in range(k):
        Rl = np.concatenate([R12 - lam[i] * R11, R22], axis=0)
        _, sv, Vr = jacobi_svd(Rl)
        w = Vr[:, -1]
        W[:, i] = w
        res[i] = sv[-1]
        rho[i] = np.vdot(w, Sk @ w)
    Z = U @ W
    return RitzOutput(Z, lam, W, U, s, V, AU, Dx, residuals=res, rayleigh=rho)


def amplitudes_full(Z, x1, B=None, U=None) -> np.ndarray:
    """Coefficients of ``x1`` in the basis ``Z``.

    With ``B`` and ``U`` (``Z = U B``) this solves ``B a = U^H x1``;
    otherwise it is the least-squares solution in ``Z``.
    """
    x1 = np.asarray(x1)
    if B is not None and U is not None:
        B = np.asarray(B)
        piv = pivoted_qr(B, B.shape[0] * EPS)
        if piv.rank < B.shape[1]:
            raise RankDeficientBasisError("eigenvector matrix B is singular")
        c = apply_q_adjoint(piv.q, np.asarray(U).conj().T @ x1)
        y = tri_solve(piv.r, c[: B.shape[1]])
        a = np.zeros_like(y)
        a[piv.perm] = y
        return a
    Z = np.asarray(Z)
    n, k = Z.shape
    piv = pivoted_qr(Z, n * EPS)
    if piv.rank < k:
        raise RankDeficientBasisError("mode matrix Z is rank deficient")
    c = apply_q_adjoint(piv.q, x1)
    y = tri_solve(piv.r, c[:k])
    a = np.zeros(k, dtype=np.result_type(y, complex))
    a[piv.perm] = y
    return a


@dataclass
class Reconstruction:
    approx: np.ndarray
    errors: np.ndarray | None = None
    rel_errors: np.ndarray | None = None


def reconstruct(Z, lam, alpha, m, reference=None) -> Reconstruction:
    """``Z diag(alpha) V`` and optional column-wise errors against ``reference``."""
    Z = np.asarray(Z)
    alpha = np.asarray(alpha)
    if Z.shape[1] != alpha.shape[0] or np.asarray(lam).shape[0] != alpha.shape[0]:
        raise DimensionError("Z, lam and alpha sizes disagree")
    approx = Z @ (alpha[:, None] * vandermonde(lam, m))
    if reference is None:
        return Reconstruction(approx)
    reference = np.asarray(reference)
    if reference.shape != approx.shape:
        raise DimensionError(f"reference must be {approx.shape}")
    err = np.linalg.norm(reference - approx, axis=0)
    ref = np.linalg.norm(reference, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(ref > 0, err / np.where(ref > 0, ref, 1), err)
    return Reconstruction(approx, err, rel)


def build_polish_inputs(ritz: RitzOutput, m=None, X=None):
    """Gram matrix ``P`` and vector ``q`` of the amplitude problem.

    ``q`` comes from the SVD factors alone; when ``X`` is given the
    direct form ``(conj(V) o (Z^H X)) e`` is used instead.
    """
    m = ritz.V.shape[0] if m is None else m
    Vd = vandermonde(ritz.lam, m)
    Z = ritz.Z
    P = gram_from(Z.conj().T @ Z, Vd)
    if X is not None:
        q = np.sum(np.conj(Vd) * (Z.conj().T @ np.asarray(X)[:, :m]), axis=1)
        return P, q
    M = ((ritz.Dx[:, None] * ritz.V) * ritz.sigma[None, :]) @ ritz.B
    M = M[:m]
    q = np.conj(np.einsum("ji,ij->j", Vd, M))
    return P, q
