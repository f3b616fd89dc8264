"""QR-based least-squares solvers built on the recursive factorization."""

from __future__ import annotations

import math
import time

import numpy as np

from .dense import EPS, pivoted_qr, tri_solve, apply_q_adjoint
from .normal import objective_value
from .qrkr import (
    real_recursive_qr_with_rhs,
    recursive_qr_general,
    recursive_qr_general_with_rhs,
)
from .report import Method, SolveReport
from .structure import RealSpectralForm, SpectralModel, rhs_vector


def _check_unit(weights, m):
    if weights is None:
        return
    w = np.asarray(weights, dtype=float)
    if w.shape != (m,) or not np.all(w == 1):
        raise ValueError("the QR path supports only unit weights; use solve_ne for weighted problems")


def _vec(G) -> np.ndarray:
    """Stack the columns of ``G``."""
    return np.asarray(G).T.reshape(-1)


def objective(model: SpectralModel, G, w, alpha) -> float:
    """Weighted objective in reduced coordinates (orthogonal part excluded)."""
    G = np.asarray(G)
    return objective_value(model.triangular, G, model.lam, alpha, None if w is None else np.asarray(w))


def _report(model, G, alpha, method, **kw) -> SolveReport:
    obj = objective(model, G, None, alpha)
    return SolveReport(alpha=alpha, method=method, residual=math.sqrt(obj), objective=obj, **kw)


def qr_solve(model: SpectralModel, G, weights=None, kernel="auto", counter=None) -> SolveReport:
    """``alpha = R_S^-1 (Q_S^H g)[:l]`` with ``Q_S`` applied on the fly."""
    G = np.asarray(G)
    _check_unit(weights, model.m)
    t0 = time.perf_counter()
    res = recursive_qr_general_with_rhs(model.triangular, model.lam, model.m, _vec(G),
                                        kernel=kernel, counter=counter)
    alpha = tri_solve(res.r_s, res.gtop)
    t1 = time.perf_counter()
    return _report(model, G, alpha, Method.QR, timings={"solve": t1 - t0},
                   details={"r_s": res.r_s, "tail_sq": res.tail_sq})


def seminormal_solve(R_S, rhs) -> np.ndarray:
    """``R_S^-1 R_S^-H rhs``."""
    return tri_solve(R_S, tri_solve(R_S, rhs, trans="C"))


def corrected_seminormal(model: SpectralModel, G, sweeps=1, weights=None, R_S=None,
                         kernel="auto") -> SolveReport:
    """Semi-normal solution plus ``sweeps`` residual corrections."""
    G = np.asarray(G)
    _check_unit(weights, model.m)
    if sweeps < 0:
        raise ValueError("sweeps must be non-negative")
    t0 = time.perf_counter()
    if R_S is None:
        R_S = recursive_qr_general(model.triangular, model.lam, model.m, kernel=kernel).r_s
    alpha = seminormal_solve(R_S, rhs_vector(model, G))
    R = model.triangular
    V = model.vandermonde
    deltas = []
    for _ in range(sweeps):
        resid = G - R @ (alpha[:, None] * V)
        delta = seminormal_solve(R_S, rhs_vector(model, resid))
        alpha = alpha + delta
        deltas.append(float(np.linalg.norm(delta)))
    t1 = time.perf_counter()
    return _report(model, G, alpha, Method.SEMINORMAL_CORRECTED, corrections=sweeps,
                   timings={"solve": t1 - t0}, details={"r_s": R_S, "delta_norms": deltas})


def rank_revealing_solve(model: SpectralModel, G, rank_tol=None, weights=None,
                         kernel="auto") -> SolveReport:
    """Basic solution ``alpha = P [R11^-1 (Q^H g)[:r]; 0]`` from pivoted ``R_S``."""
    G = np.asarray(G)
    _check_unit(weights, model.m)
    l = model.l
    if rank_tol is None:
        rank_tol = l * EPS
    t0 = time.perf_counter()
    res = recursive_qr_general_with_rhs(model.triangular, model.lam, model.m, _vec(G), kernel=kernel)
    piv = pivoted_qr(res.r_s, rank_tol)
    r = piv.rank
    c = apply_q_adjoint(piv.q, res.gtop)
    y = np.zeros(l, dtype=complex)
    if r > 0:
        y[:r] = tri_solve(piv.r[:r, :r], c[:r])
    alpha = np.zeros(l, dtype=complex)
    alpha[piv.perm] = y
    t1 = time.perf_counter()
    return _report(model, G, alpha, Method.RANK_REVEALING, rank=r, timings={"solve": t1 - t0},
                   details={"r_s": res.r_s, "pivoted": piv})


def real_qr_solve(form: RealSpectralForm, m, X=None, G_hat=None, kernel="auto"):
    """Amplitudes for a conjugate-closed spectrum using real arithmetic only.

    Give either real snapshots ``X`` (projected with the QR of ``Z_hat``)
    or real reduced data ``G_hat`` (``l x m``). Returns ``(alpha, rho)``
    with ``alpha`` in the original eigenvalue order.
    """
    if (X is None) == (G_hat is None):
        raise ValueError("give exactly one of X or G_hat")
    if X is not None:
        q, R_hat = form.qr()
        G_hat = apply_q_adjoint(q, np.asarray(X, dtype=float))[: form.l]
    G_hat = np.asarray(G_hat, dtype=float)
    res = real_recursive_qr_with_rhs(form, m, _vec(G_hat), kernel=kernel)
    rho = tri_solve(res.r_s, res.gtop)
    return form.rho_to_alpha(rho), rho
