"""Vandermonde-Khatri-Rao structure: builders, Gram matrix, real form."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dense import EPS, apply_q_adjoint, householder_qr
from .errors import DimensionError, NotConjugateClosedError


def _as_lambda(lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=complex)
    if lam.ndim != 1 or lam.size == 0:
        raise DimensionError("eigenvalues must be a non-empty vector")
    return lam


def _check_weights(w, m):
    if w is None:
        return None
    w = np.asarray(w, dtype=float)
    if w.shape != (m,):
        raise DimensionError(f"weights must have length {m}, got {w.shape}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    return w


@dataclass
class SpectralModel:
    """Eigenvalues plus the mode matrix ``Z`` and/or its triangular factor ``R``."""

    lam: np.ndarray
    m: int
    R: np.ndarray | None = None
    Z: np.ndarray | None = None
    _qr: tuple | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.lam = _as_lambda(self.lam)
        l = self.lam.shape[0]
        if int(self.m) < 1:
            raise DimensionError("m must be at least 1")
        self.m = int(self.m)
        if self.R is None and self.Z is None:
            raise ValueError("SpectralModel needs R or Z")
        if self.R is not None:
            self.R = np.asarray(self.R)
            if self.R.shape != (l, l):
                raise DimensionError(f"R must be {l}x{l}, got {self.R.shape}")
            if np.any(np.tril(self.R, -1) != 0):
                raise ValueError("R must be upper triangular")
        if self.Z is not None:
            self.Z = np.asarray(self.Z)
            if self.Z.ndim != 2 or self.Z.shape[1] != l:
                raise DimensionError(f"Z must have {l} columns")
            if self.Z.shape[0] < l:
                raise DimensionError("Z must have at least as many rows as columns")
        if self.R is not None and self.Z is not None:
            RR = self.R.conj().T @ self.R
            ZZ = self.Z.conj().T @ self.Z
            scale = max(np.abs(ZZ).max(), np.finfo(float).tiny)
            if np.abs(RR - ZZ).max() > 1e-10 * scale:
                raise ValueError("R is not a triangular factor of Z (R*R != Z*Z)")

    @property
    def l(self) -> int:
        return self.lam.shape[0]

    def z_qr(self):
        """Cached Householder QR of ``Z``: ``(QFactors, R)``."""
        if self.Z is None:
            raise ValueError("model has no Z")
        if self._qr is None:
            self._qr = householder_qr(self.Z)
        return self._qr

    @property
    def triangular(self) -> np.ndarray:
        if self.R is not None:
            return self.R
        return self.z_qr()[1]

    @property
    def vandermonde(self) -> np.ndarray:
        return vandermonde(self.lam, self.m)


@dataclass
class LSProblem:
    """Spectral model with data ``G`` (l x m) or raw snapshots ``X`` (n x m)."""

    model: SpectralModel
    G: np.ndarray | None = None
    X: np.ndarray | None = None
    weights: np.ndarray | None = None

    def __post_init__(self):
        if (self.G is None) == (self.X is None):
            raise ValueError("give exactly one of G or X")
        m, l = self.model.m, self.model.l
        if self.G is not None:
            self.G = np.asarray(self.G)
            if self.G.shape != (l, m):
                raise DimensionError(f"G must be {l}x{m}, got {self.G.shape}")
        else:
            if self.model.Z is None:
                raise ValueError("raw snapshots X need the mode matrix Z")
            self.X = np.asarray(self.X)
            if self.X.shape != (self.model.Z.shape[0], m):
                raise DimensionError(f"X must be {self.model.Z.shape[0]}x{m}")
        self.weights = _check_weights(self.weights, m)

    @property
    def w(self) -> np.ndarray:
        return np.ones(self.model.m) if self.weights is None else self.weights

    @property
    def unit_weights(self) -> bool:
        return self.weights is None or bool(np.all(self.weights == 1))

    def reduced(self):
        """``(R, G)`` in the l-dimensional coordinates."""
        if self.G is not None:
            return self.model.triangular, self.G
        q, R = self.model.z_qr()
        return R, apply_q_adjoint(q, self.X)[: self.model.l]


def vandermonde(lam, m) -> np.ndarray:
    """``V[j, i] = lam_j**i`` for ``i < m``, built by cumulative products."""
    lam = _as_lambda(lam)
    if m < 1:
        raise DimensionError("m must be at least 1")
    V = np.empty((lam.shape[0], m), dtype=complex)
    V[:, 0] = 1
    for i in range(1, m):
        V[:, i] = V[:, i - 1] * lam
    return V


def khatri_rao(A, B) -> np.ndarray:
    """Column-wise Kronecker product."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise DimensionError("khatri_rao needs matrices with equal column counts")
    p, n = A.shape
    q = B.shape[0]
    return (A[:, None, :] * B[None, :, :]).reshape(p * q, n)


def kr_permutation(l, m) -> np.ndarray:
    """0-based row permutation with ``S[perm] == khatri_rao(R, V.T)``."""
    if l < 1 or m < 1:
        raise DimensionError("l and m must be positive")
    return np.arange(l * m).reshape(m, l).T.ravel()


def build_S(model: SpectralModel, weights=None) -> np.ndarray:
    """Explicit ``S`` (block row i is ``R diag(lam)**i``), optionally ``(W x I) S``."""
    V = model.vandermonde
    Vt = V.T
    if weights is not None:
        Vt = _check_weights(weights, model.m)[:, None] * Vt
    return khatri_rao(Vt, model.triangular)


def _hermitian_from_upper(M) -> np.ndarray:
    U = np.triu(M, 1)
    C = U + U.conj().T
    idx = np.arange(M.shape[0])
    C[idx, idx] = M[idx, idx].real
    return C


def gram_from(RR, V, w=None) -> np.ndarray:
    """``RR o conj(V W^2 V^H)`` mirrored from its upper triangle."""
    Vw2 = V if w is None else V * (w * w)[None, :]
    M = RR * np.conj(Vw2 @ V.conj().T)
    return _hermitian_from_upper(M)


def rhs_from(RG, V, w=None) -> np.ndarray:
    """``(conj(V W) o (RG W)) e`` where ``RG = R^H G``."""
    if w is None:
        return np.sum(np.conj(V) * RG, axis=1)
    return np.sum(np.conj(V) * RG * (w * w)[None, :], axis=1)


def gram_C(model: SpectralModel, w=None) -> np.ndarray:
    """Gram matrix ``S_w^H S_w`` by the Hadamard formula."""
    w = _check_weights(w, model.m)
    R = model.triangular
    return gram_from(R.conj().T @ R, model.vandermonde, w)


def rhs_vector(model: SpectralModel, G, w=None) -> np.ndarray:
    """``S_w^H (W x I) vec(G)`` by the Hadamard formula."""
    G = np.asarray(G)
    if G.shape != (model.l, model.m):
        raise DimensionError(f"G must be {model.l}x{model.m}, got {G.shape}")
    w = _check_weights(w, model.m)
    R = model.triangular
    return rhs_from(R.conj().T @ G, model.vandermonde, w)


# ---------------------------------------------------------------------------
# real arithmetic form for conjugate-closed spectra


@dataclass
class RealSpectralForm:
    """Real-first ordering with conjugate pairs as 2x2 rotation-like blocks.

    ``order`` maps positions in the real form to original indices. For a
    pair the Im > 0 member comes first. ``mu`` holds one complex number
    per block (reals, then pair representatives); block powers are the
    powers of ``mu``.
    """

    order: np.ndarray
    n_real: int
    n_pairs: int
    mu: np.ndarray
    Z_hat: np.ndarray | None = None
    _r_hat: np.ndarray | None = field(default=None, init=False, repr=False)
    _qr: tuple | None = field(default=None, init=False, repr=False)

    @property
    def l(self) -> int:
        return self.n_real + 2 * self.n_pairs

    @property
    def lam(self) -> np.ndarray:
        """Eigenvalues in real-form order."""
        pairs = self.mu[self.n_real:]
        out = np.empty(self.l, dtype=complex)
        out[: self.n_real] = self.mu[: self.n_real].real
        out[self.n_real::2] = pairs
        out[self.n_real + 1::2] = pairs.conj()
        return out

    @property
    def pair_columns(self) -> np.ndarray:
        return self.n_real + 2 * np.arange(self.n_pairs)

    def phi(self) -> np.ndarray:
        """``Phi`` with ``Z_hat = Z[:, order] @ Phi``."""
        P = np.zeros((self.l, self.l), dtype=complex)
        idx = np.arange(self.n_real)
        P[idx, idx] = 1
        for j in self.pair_columns:
            P[j, j] = 0.5
            P[j + 1, j] = 0.5
            P[j, j + 1] = -0.5j
            P[j + 1, j + 1] = 0.5j
        return P

    def lambda_hat_power(self, i) -> np.ndarray:
        """Real block-diagonal matrix ``Lambda_hat ** i``."""
        p = self.mu ** 0
        for _ in range(i):
            p = p * self.mu
        L = np.zeros((self.l, self.l))
        idx = np.arange(self.n_real)
        L[idx, idx] = p[: self.n_real].real
        for k, j in enumerate(self.pair_columns):
            a, b = p[self.n_real + k].real, p[self.n_real + k].imag
            L[j, j] = a
            L[j, j + 1] = b
            L[j + 1, j] = -b
            L[j + 1, j + 1] = a
        return L

    def blocks(self) -> list[np.ndarray]:
        out = [np.array([[v.real]]) for v in self.mu[: self.n_real]]
        for v in self.mu[self.n_real:]:
            out.append(np.array([[v.real, v.imag], [-v.imag, v.real]]))
        return out

    def qr(self):
        if self.Z_hat is None:
            raise ValueError("real form has no mode matrix")
        if self._qr is None:
            self._qr = householder_qr(self.Z_hat)
        return self._qr

    @property
    def R_hat(self) -> np.ndarray:
        if self._r_hat is None:
            self._r_hat = self.qr()[1]
        return self._r_hat

    @R_hat.setter
    def R_hat(self, value):
        self._r_hat = np.asarray(value, dtype=float)

    def rho_to_alpha(self, rho, ordered=False) -> np.ndarray:
        """Map real coordinates to complex amplitudes (``alpha = Phi rho``).

        The pair entries come out as exact conjugates. With
        ``ordered=False`` the result follows the original eigenvalue order.
        """
        rho = np.asarray(rho, dtype=float)
        a = np.empty(self.l, dtype=complex)
        a[: self.n_real] = rho[: self.n_real]
        for j in self.pair_columns:
            re, im = 0.5 * rho[j], 0.5 * rho[j + 1]
            a[j] = complex(re, -im)
            a[j + 1] = complex(re, im)
        if ordered:
            return a
        out = np.empty_like(a)
        out[self.order] = a
        return out

    def alpha_to_rho(self, alpha) -> np.ndarray:
        """Inverse of :meth:`rho_to_alpha` for an original-order ``alpha``."""
        a = np.asarray(alpha, dtype=complex)[self.order]
        rho = np.empty(self.l)
        rho[: self.n_real] = a[: self.n_real].real
        for j in self.pair_columns:
            s = a[j] + a[j + 1]
            d = a[j + 1] - a[j]
            rho[j] = s.real
            rho[j + 1] = d.imag
        return rho


def real_transform(lam, Z=None, pair_tol=8 * EPS) -> RealSpectralForm:
    """Order ``lam`` real-first, pair conjugates, and build the real ``Z_hat``.

    An eigenvalue is real when ``|Im| <= pair_tol |lam|``. Complex ones are
    matched greedily to the nearest conjugate within the same tolerance.
    """
    lam = _as_lambda(lam)
    l = lam.shape[0]
    scale = np.maximum(np.abs(lam), np.finfo(float).tiny)
    is_real = np.abs(lam.imag) <= pair_tol * scale
    reals = [int(i) for i in np.flatnonzero(is_real)]
    upper = [int(i) for i in np.flatnonzero(~is_real & (lam.imag > 0))]
    lower = [int(i) for i in np.flatnonzero(~is_real & (lam.imag < 0))]
    if len(upper) != len(lower):
        raise NotConjugateClosedError("eigenvalues are not closed under conjugation")
    pairs = []
    free = list(lower)
    for j in upper:
        dist = [abs(lam[k] - np.conj(lam[j])) for k in free]
        pick = int(np.argmin(dist))
        if dist[pick] > pair_tol * scale[j]:
            raise NotConjugateClosedError(f"eigenvalue {lam[j]} has no conjugate partner")
        pairs.append((j, free.pop(pick)))
    order = np.array(reals + [i for pr in pairs for i in pr], dtype=int)
    mu = np.concatenate([lam[reals].real.astype(complex), lam[[p[0] for p in pairs]]])
    Z_hat = None
    if Z is not None:
        Z = np.asarray(Z)
        if Z.ndim != 2 or Z.shape[1] != l:
            raise DimensionError(f"Z must have {l} columns")
        Z_hat = np.empty((Z.shape[0], l))
        zs = Z[:, order]
        nr = len(reals)
        for k in range(nr):
            col = zs[:, k]
            if np.iscomplexobj(col) and np.abs(col.imag).max(initial=0) > np.sqrt(EPS) * max(np.abs(col).max(), 1e-300):
                raise NotConjugateClosedError("mode of a real eigenvalue is not real")
            Z_hat[:, k] = col.real
        for k in range(len(pairs)):
            j = nr + 2 * k
            z1, z2 = zs[:, j], zs[:, j + 1]
            if np.abs(z2 - z1.conj()).max() > np.sqrt(EPS) * max(np.abs(z1).max(), 1e-300):
                raise NotConjugateClosedError("paired modes are not complex conjugates")
            Z_hat[:, j] = z1.real
            Z_hat[:, j + 1] = z1.imag
    return RealSpectralForm(order, len(reals), len(pairs), mu, Z_hat)
