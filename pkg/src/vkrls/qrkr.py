"""Recursive QR factorization of ``S`` with block rows ``R diag(lam)**i``.

Block rows are merged pairwise by stacked-triangular kernels, giving
``O(l**3 log2 m)`` work. Powers of two use one kernel call per level.
Other ``m`` walk the binary digits of ``m`` and merge the finished
chunks into a running global factor. Right-hand sides ride along as
extra columns of the same kernels, so ``Q`` is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dense import diagonal_phases, givens, householder_qr, sign_normalize
from .errors import DimensionError
from .kernels import _prepare, run_stack_kernel
from .structure import RealSpectralForm, build_S, SpectralModel

BLOCKED_THRESHOLD = 64
DEFAULT_BLOCK = 32


@dataclass
class OpCounter:
    """Tallies of elementary work performed by the kernels."""

    kernel_calls: int = 0
    rotations: int = 0
    reflectors: int = 0
    bulge_rotations: int = 0
    flops: int = 0

    def add_reflector(self, length, ncols):
        self.reflectors += 1
        self.flops += 4 * length * ncols

    def add_rotation(self, ncols, bulge=False):
        self.rotations += 1
        if bulge:
            self.bulge_rotations += 1
        self.flops += 6 * ncols

    def add_stats(self, stats):
        rot, ref, flops = stats
        self.rotations += rot
        self.reflectors += ref
        self.flops += flops


# ---------------------------------------------------------------------------
# stacked-triangular kernels


class StackedResult(NamedTuple):
    T: np.ndarray
    top: np.ndarray | None
    bottom: np.ndarray | None


def _check_pair(A, B):
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape != B.shape:
        raise DimensionError("stacked blocks must be square and of equal size")
    return A, B


def _blocked(A, B, EA, EB, block, counter, backend):
    """Panel-wise Householder + merge with compact WY trailing updates."""
    l = A.shape[0]
    for j0 in range(0, l, block):
        j1 = min(j0 + block, l)
        bw = j1 - j0
        # condense B[:j1, j0:j1] into its leading bw rows
        P = B[:j1, j0:j1]
        W = np.zeros((j1, bw), dtype=B.dtype)
        Tc = np.zeros((bw, bw), dtype=B.dtype)
        for t in range(bw):
            rows = slice(t, j0 + t + 1)
            x = P[rows, t]
            alpha = x[0]
            sigma = np.linalg.norm(x[1:])
            beta = 0.0
            w = np.zeros(x.shape[0], dtype=B.dtype)
            w[0] = 1
            if sigma != 0:
                nrm = np.hypot(abs(alpha), sigma)
                phase = alpha / abs(alpha) if alpha != 0 else 1.0
                rho = -phase * nrm
                v1 = alpha - rho
                w[1:] = x[1:] / v1
                beta = 2.0 * abs(v1) ** 2 / (abs(v1) ** 2 + sigma * sigma)
                sub = P[rows, t + 1:]
                sub -= beta * np.outer(w, w.conj() @ sub)
                P[rows, t] = 0
                P[t, t] = rho
            if counter is not None:
                counter.add_reflector(x.shape[0], bw - t)
            W[rows, t] = w
            if t > 0:
                Tc[:t, t] = -beta * (Tc[:t, :t] @ (W[:, :t].conj().T @ W[:, t]))
            Tc[t, t] = beta
        # trailing columns and rhs: X <- X - W T^H (W^H X)
        trail = np.concatenate([B[:j1, j1:], EB[:j1]], axis=1)
        if trail.shape[1]:
            trail -= W @ (Tc.conj().T @ (W.conj().T @ trail))
            B[:j1, j1:] = trail[:, : l - j1]
            EB[:j1] = trail[:, l - j1:]
            if counter is not None:
                counter.flops += 4 * j1 * bw * trail.shape[1]
        # merge diagonal block of A with the condensed triangle
        xa = np.concatenate([A[j0:j1, j1:], EA[j0:j1]], axis=1)
        xb = np.concatenate([B[:bw, j1:], EB[:bw]], axis=1)
        Ad, xa, xb, stats = run_stack_kernel(
            "householder", A[j0:j1, j0:j1], B[:bw, j0:j1], xa, xb, backend=backend
        )
        if counter is not None:
            counter.add_stats(stats)
        A[j0:j1, j0:j1] = Ad
        B[:bw, j0:j1] = 0
        A[j0:j1, j1:] = xa[:, : l - j1]
        EA[j0:j1] = xa[:, l - j1:]
        B[:bw, j1:] = xb[:, : l - j1]
        EB[:bw] = xb[:, l - j1:]
    return A, EA, EB


def _pick_kernel(kernel, l):
    if kernel == "auto":
        return "blocked" if l >= BLOCKED_THRESHOLD else "householder"
    if kernel not in ("givens", "householder", "blocked"):
        raise ValueError(f"unknown kernel {kernel!r}")
    return kernel


def stacked_qr(A, B, kernel="auto", block=DEFAULT_BLOCK, extra_top=None,
               extra_bottom=None, counter=None, backend=None) -> StackedResult:
    """Triangular factor of ``[A; B]`` for upper-triangular ``A``, ``B``.

    ``extra_top``/``extra_bottom`` are columns attached to the rows of
    ``A``/``B`` and receive ``Q^H``. The factor is sign-normalized and
    the top extra rows get the same phases.
    """
    A, B = _check_pair(A, B)
    l = A.shape[0]
    kernel = _pick_kernel(kernel, l)
    has_extra = extra_top is not None
    EA = EB = None
    vec = False
    if has_extra:
        EA = np.asarray(extra_top)
        EB = np.asarray(extra_bottom)
        vec = EA.ndim == 1
        if EA.shape[0] != l or EB.shape != EA.shape:
            raise DimensionError("extra columns must match the block rows")
    if counter is not None:
        counter.kernel_calls += 1
    if kernel == "blocked":
        if not 1 <= block:
            raise ValueError("block size must be positive")
        T, EA2, EB2 = _blocked(*_prepare(A, B, EA, EB), min(block, l), counter, backend)
    else:
        T, EA2, EB2, stats = run_stack_kernel(kernel, A, B, EA, EB, backend=backend)
        if counter is not None:
            counter.add_stats(stats)
    T = np.triu(T)
    if not has_extra:
        return StackedResult(sign_normalize(T), None, None)
    T, EA2 = sign_normalize(T, EA2)
    if vec:
        EA2, EB2 = EA2[:, 0], EB2[:, 0]
    return StackedResult(T, EA2, EB2)


def stacked_qr_givens(A, B, counter=None, backend=None) -> np.ndarray:
    """Givens-only reduction of ``[A; B]``: ``l(l+1)/2`` rotations."""
    return stacked_qr(A, B, "givens", counter=counter, backend=backend).T


def stacked_qr_householder(A, B, counter=None, backend=None) -> np.ndarray:
    """Per column, one reflector condenses ``B`` and one rotation merges into ``A``."""
    return stacked_qr(A, B, "householder", counter=counter, backend=backend).T


def stacked_qr_blocked(A, B, block=DEFAULT_BLOCK, counter=None, backend=None) -> np.ndarray:
    """Blocked Householder + Givens with compact WY panel updates."""
    return stacked_qr(A, B, "blocked", block=block, counter=counter, backend=backend).T


# ---------------------------------------------------------------------------
# diagonal scalings


class _Diagonal:
    """Complex diagonal ``diag(d)`` acting on columns."""

    def __init__(self, d):
        d = np.asarray(d)
        self.d = d if d.dtype == float else d.astype(complex)

    def apply(self, T):
        return T * self.d[None, :]

    def times(self, other):
        return _Diagonal(self.d * other.d)

    def squared(self):
        return self.times(self)

    bulges = ()


class _Blocks:
    """Real block diagonal with 1x1 and ``[[a, b], [-b, a]]`` blocks."""

    def __init__(self, n_real, mu):
        self.n_real = n_real
        self.mu = np.asarray(mu, dtype=complex)
        self.bulges = n_real + 2 * np.arange(self.mu.shape[0] - n_real)

    def apply(self, T):
        out = np.array(T, dtype=float)
        nr = self.n_real
        out[:, :nr] *= self.mu[:nr].real[None, :]
        js = self.bulges
        if js.size:
            a = self.mu[nr:].real[None, :]
            b = self.mu[nr:].imag[None, :]
            Tj = out[:, js].copy()
            Tj1 = out[:, js + 1].copy()
            out[:, js] = Tj * a - Tj1 * b
            out[:, js + 1] = Tj * b + Tj1 * a
        return out

    def times(self, other):
        return _Blocks(self.n_real, self.mu * other.mu)

    def squared(self):
        return self.times(self)


def _remove_bulges(B, EB, bulges, counter):
    """Zero ``B[j+1, j]`` at each pair column with one rotation of rows j, j+1."""
    for j in bulges:
        c, s, r = givens(float(B[j, j]), float(B[j + 1, j]))
        if counter is not None:
            counter.add_rotation(B.shape[1] - j + (EB.shape[1] if EB is not None else 0), bulge=True)
        if s == 0:
            continue
        x = B[j, j + 1:].copy()
        y = B[j + 1, j + 1:]
        B[j, j + 1:] = c * x + s * y
        B[j + 1, j + 1:] = -s * x + c * y
        B[j, j] = r
        B[j + 1, j] = 0
        if EB is not None:
            x = EB[j].copy()
            y = EB[j + 1]
            EB[j] = c * x + s * y
            EB[j + 1] = -s * x + c * y
    return B, EB


# ---------------------------------------------------------------------------
# recursion


@dataclass
class RecursiveQRTrace:
    """Result of a recursive factorization.

    ``levels`` holds the local factors ``T_0 .. T_K`` and ``merges`` the
    running global factors, both only when ``keep_levels`` was requested.
    """

    r_s: np.ndarray
    m: int
    kernel_calls: int
    levels: list | None = None
    merges: list | None = None
    counter: OpCounter | None = field(default=None, repr=False)


class RHSResult(NamedTuple):
    r_s: np.ndarray
    gtop: np.ndarray
    tail_sq: np.ndarray | float


def _segments(g, l, m):
    g = np.asarray(g)
    if g.ndim == 1:
        if g.shape[0] != l * m:
            raise DimensionError(f"rhs must have length {l * m}, got {g.shape[0]}")
        return g.reshape(m, l, 1), True
    if g.ndim == 2 and g.shape[0] == l * m:
        return g.reshape(m, l, g.shape[1]), False
    raise DimensionError(f"rhs must have {l * m} rows")


def _run(R, scaling, m, g, kernel, block, counter, keep_levels, backend, real):
    R = np.asarray(R)
    l = R.shape[0]
    if R.shape != (l, l):
        raise DimensionError("R must be square")
    if m < 1:
        raise DimensionError("m must be at least 1")
    kernel = _pick_kernel(kernel, l)
    dtype = float if real else complex
    calls_before = counter.kernel_calls if counter is not None else 0
    local_counter = counter if counter is not None else OpCounter()

    segs = vec = None
    tail = None
    if g is not None:
        segs, vec = _segments(g, l, m)
        segs = np.array(segs, dtype=np.result_type(segs, dtype))
        tail = np.zeros(segs.shape[2])

    d = np.conj(diagonal_phases(R))
    T = np.triu(R * d[:, None]).astype(dtype)
    idx = np.arange(l)
    T[idx, idx] = np.abs(T[idx, idx])
    if segs is not None:
        segs *= d[None, :, None]

    levels = [T.copy()] if keep_levels else None
    merges = [] if keep_levels else None

    K = m.bit_length() - 1
    chunks = []
    off = 0
    for k in range(K + 1):
        if (m >> k) & 1:
            chunks.append((off, k))
            off += 1 << k

    def merge(TT, top, local, bottom):
        local, bottom = _remove_bulges(local, bottom, scaling.bulges, local_counter)
        res = stacked_qr(TT, local, kernel, block, top, bottom, local_counter, backend)
        if bottom is not None:
            tail[:] += np.sum(np.abs(res.bottom) ** 2, axis=0)
        return res.T, res.top

    TT = gtop = None
    pos = 0
    P = None
    if m & 1:
        TT = T.copy()
        gtop = segs[0].copy() if segs is not None else None
        pos = 1
        P = scaling
        if keep_levels:
            merges.append(TT.copy())

    D = scaling
    for k in range(1, K + 1):
        half = 1 << (k - 1)
        EA = EB = None
        tops = bots = None
        if segs is not None:
            tops = [o + t for o, e in chunks if e >= k for t in range(0, 1 << e, 1 << k)]
            bots = [i + half for i in tops]
            c = segs.shape[2]
            EA = segs[tops].transpose(1, 0, 2).reshape(l, -1)
            EB = segs[bots].transpose(1, 0, 2).reshape(l, -1).copy()
        B = D.apply(T)
        B, EB = _remove_bulges(B, EB, D.bulges, local_counter)
        res = stacked_qr(T, B, kernel, block, EA, EB, local_counter, backend)
        T = res.T
        if segs is not None:
            segs[tops] = res.top.reshape(l, len(tops), c).transpose(1, 0, 2)
            tail += np.sum(np.abs(res.bottom.reshape(l, len(tops), c)) ** 2, axis=(0, 1))
        if keep_levels:
            levels.append(T.copy())
        Dsq = D.squared()
        if (m >> k) & 1:
            if TT is None:
                TT = T.copy()
                gtop = segs[0].copy() if segs is not None else None
                P = Dsq
            else:
                local = P.apply(T)
                bottom = segs[pos].copy() if segs is not None else None
                TT, gtop = merge(TT, gtop, local, bottom)
                P = P.times(Dsq)
            pos += 1 << k
            if keep_levels:
                merges.append(TT.copy())
        D = Dsq

    calls = local_counter.kernel_calls - calls_before
    if g is None:
        return RecursiveQRTrace(TT, m, calls, levels, merges, local_counter)
    if vec:
        return RHSResult(TT, gtop[:, 0], float(tail[0]))
    return RHSResult(TT, gtop, tail)


def _check_lam(R, lam):
    lam = np.asarray(lam, dtype=complex)
    if lam.ndim != 1 or lam.shape[0] != np.asarray(R).shape[0]:
        raise DimensionError("lam must have one entry per column of R")
    return lam


def _diagonal(R, lam, g=None):
    """Real arithmetic when ``R``, ``lam`` (and ``g``) are all real."""
    real = (not np.iscomplexobj(R) and not np.any(lam.imag)
            and (g is None or not np.iscomplexobj(g)))
    return _Diagonal(lam.real.copy() if real else lam), real


def recursive_qr_general(R, lam, m, *, kernel="auto", block=DEFAULT_BLOCK,
                         counter=None, keep_levels=False, backend=None) -> RecursiveQRTrace:
    """Triangular factor of ``S`` for any ``m >= 1`` by binary splitting.

    Real ``R`` and ``lam`` are processed in real arithmetic.
    """
    lam = _check_lam(R, lam)
    scaling, real = _diagonal(np.asarray(R), lam)
    return _run(R, scaling, int(m), None, kernel, block, counter, keep_levels, backend, real)


def recursive_qr_general_with_rhs(R, lam, m, g, *, kernel="auto", block=DEFAULT_BLOCK,
                                  counter=None, backend=None) -> RHSResult:
    """As :func:`recursive_qr_general`, also returning ``(Q^H g)[:l]``.

    ``tail_sq`` is the squared norm of the discarded part of ``Q^H g``.
    ``g`` may be a vector of length ``l*m`` or an ``(l*m, c)`` matrix.
    """
    lam = _check_lam(R, lam)
    scaling, real = _diagonal(np.asarray(R), lam, np.asarray(g))
    return _run(R, scaling, int(m), g, kernel, block, counter, False, backend, real)


def recursive_qr_pow2(R, lam, p, *, kernel="auto", block=DEFAULT_BLOCK,
                      counter=None, keep_levels=False, backend=None) -> RecursiveQRTrace:
    """Triangular factor of ``S`` with ``m = 2**p`` block rows."""
    if p < 0:
        raise DimensionError("p must be non-negative")
    return recursive_qr_general(R, lam, 1 << p, kernel=kernel, block=block, counter=counter,
                                keep_levels=keep_levels, backend=backend)


def recursive_qr_pow2_with_rhs(R, lam, p, g, *, kernel="auto", block=DEFAULT_BLOCK,
                               counter=None, backend=None) -> RHSResult:
    if p < 0:
        raise DimensionError("p must be non-negative")
    return recursive_qr_general_with_rhs(R, lam, 1 << p, g, kernel=kernel, block=block,
                                         counter=counter, backend=backend)


def real_recursive_qr(form: RealSpectralForm, m, *, R_hat=None, kernel="auto",
                      block=DEFAULT_BLOCK, counter=None, keep_levels=False,
                      backend=None) -> RecursiveQRTrace:
    """Real-arithmetic factor of ``S_hat`` (block rows ``R_hat Lambda_hat**i``).

    Conjugate pairs enter as 2x2 blocks; the sub-diagonal bulges they
    create are rotated away before each kernel call.
    """
    R_hat = form.R_hat if R_hat is None else np.asarray(R_hat, dtype=float)
    scaling = _Blocks(form.n_real, form.mu)
    return _run(R_hat, scaling, int(m), None, kernel, block, counter, keep_levels, backend, True)


def real_recursive_qr_with_rhs(form: RealSpectralForm, m, g, *, R_hat=None, kernel="auto",
                               block=DEFAULT_BLOCK, counter=None, backend=None) -> RHSResult:
    R_hat = form.R_hat if R_hat is None else np.asarray(R_hat, dtype=float)
    g = np.asarray(g)
    if np.iscomplexobj(g):
        raise ValueError("the real path needs a real right-hand side")
    scaling = _Blocks(form.n_real, form.mu)
    return _run(R_hat, scaling, int(m), g, kernel, block, counter, False, backend, True)


def dense_qr_counter(R, lam, m) -> OpCounter:
    """Work tally of plain Householder QR on the explicit ``S``."""
    counter = OpCounter()
    householder_qr(build_S(SpectralModel(lam, m, R=R)), counter=counter)
    return counter
