"""Normal-equations solver, scaled conditioning and the method decision tree."""

from __future__ import annotations

import math
import time
import warnings

import numpy as np

from .dense import EPS, cholesky_upper, cond2, equilibrate_columns, equilibrate_rows, tri_solve
from .errors import NonpositiveDiagonalError, NotPositiveDefiniteError
from .report import ConditionReport, Method, SolveReport
from .structure import LSProblem, build_S, gram_from, rhs_from, vandermonde

DEFAULT_TOL = 1.0 / (100.0 * math.sqrt(EPS))

BRANCH_RC = "normal-equations via R_c test"
BRANCH_CS = "normal-equations via C_s test"
BRANCH_QR = "QR solver"


def objective_value(R, G, lam, alpha, w=None) -> float:
    """``sum_i w_i^2 ||G[:, i] - R diag(alpha) V[:, i]||^2``."""
    V = vandermonde(lam, G.shape[1])
    E = G - R @ (np.asarray(alpha)[:, None] * V)
    if w is not None:
        E = E * np.asarray(w)[None, :]
    return float(np.vdot(E, E).real)


def _normal_system(problem: LSProblem):
    model = problem.model
    V = model.vandermonde
    w = None if problem.unit_weights else problem.w
    if problem.X is not None:
        Z = model.Z
        RR, RG = Z.conj().T @ Z, Z.conj().T @ problem.X
    else:
        R = model.triangular
        RR, RG = R.conj().T @ R, R.conj().T @ problem.G
    return gram_from(RR, V, w), rhs_from(RG, V, w)


def solve_ne(problem: LSProblem) -> SolveReport:
    """Cholesky solve of the Hadamard-form normal equations.

    Raises :class:`NotPositiveDefiniteError` when the Gram matrix is not
    numerically positive definite.
    """
    t0 = time.perf_counter()
    C, rhs = _normal_system(problem)
    U = cholesky_upper(C)
    alpha = tri_solve(U, tri_solve(U, rhs, trans="C"))
    t1 = time.perf_counter()
    R, G = problem.reduced()
    w = None if problem.unit_weights else problem.w
    obj = objective_value(R, G, problem.model.lam, alpha, w)
    return SolveReport(
        alpha=alpha,
        method=Method.NE,
        residual=math.sqrt(obj),
        objective=obj,
        timings={"solve": t1 - t0},
        details={"cholesky": U},
    )


def scaled_condition(C, cond=cond2) -> ConditionReport:
    """``kappa_2(C_s)`` for ``C_s = D^-1 C D^-1`` with ``D = sqrt(diag(C))``."""
    C = np.asarray(C)
    d = np.diag(C).real
    bad = np.flatnonzero(~(d > 0))
    if bad.size:
        raise NonpositiveDiagonalError(int(bad[0]))
    s = np.sqrt(d)
    Cs = C / s[:, None] / s[None, :]
    return ConditionReport(kappa_Cs=cond(Cs), diag_range=(float(d.min()), float(d.max())))


def scaled_matrix(C) -> np.ndarray:
    d = np.sqrt(np.diag(C).real)
    Cs = C / d[:, None] / d[None, :]
    idx = np.arange(C.shape[0])
    Cs[idx, idx] = 1.0
    return Cs


def condition_report(problem: LSProblem, with_S=False, cond=cond2) -> ConditionReport:
    """All conditioning diagnostics for ``problem``."""
    model = problem.model
    w = None if problem.unit_weights else problem.w
    R = model.triangular
    C = gram_from(R.conj().T @ R, model.vandermonde, w)
    rep = scaled_condition(C, cond)
    rep.kappa_C = cond(C)
    rep.kappa_Rc = cond(equilibrate_columns(R)[0])
    VW = model.vandermonde if w is None else model.vandermonde * w[None, :]
    # fewer columns than rows leaves the row Gram singular
    rep.kappa_Vr = math.inf if VW.shape[1] < VW.shape[0] else cond(equilibrate_rows(VW)[1])
    if with_S:
        rep.kappa_Sc = cond(equilibrate_columns(build_S(model, w))[0])
    return rep


def decision_tree_solve(problem: LSProblem, tol=DEFAULT_TOL, cond=cond2, qr_options=None) -> SolveReport:
    """Choose between normal equations and the structured QR solver.

    Normal equations run when ``kappa(R_c)**2 <= tol`` or, failing that,
    ``kappa(C_s) <= tol``. Otherwise the QR path runs. A Cholesky failure
    in a normal-equations branch falls back to QR and is logged.
    Weighted problems cannot use the QR path; they go to normal
    equations with a warning.
    """
    from .solvers import qr_solve

    if not 1 < tol < 1 / EPS:
        raise ValueError("tol must lie in (1, 1/eps)")
    qr_options = qr_options or {}
    log = []
    model = problem.model
    w = None if problem.unit_weights else problem.w
    R, G = problem.reduced()
    report = ConditionReport()
    report.kappa_Rc = cond(equilibrate_columns(R)[0])
    log.append(f"kappa(R_c)^2 = {report.kappa_Rc ** 2:.3e}, tol = {tol:.3e}")
    branch = None
    if report.kappa_Rc ** 2 <= tol:
        branch = BRANCH_RC
    else:
        C = gram_from(R.conj().T @ R, model.vandermonde, w)
        frag = scaled_condition(C, cond)
        report.kappa_Cs = frag.kappa_Cs
        report.diag_range = frag.diag_range
        log.append(f"kappa(C_s) = {report.kappa_Cs:.3e}")
        branch = BRANCH_CS if report.kappa_Cs <= tol else BRANCH_QR

    if branch == BRANCH_QR and w is not None:
        msg = "weighted problem: QR path needs unit weights, using normal equations"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        log.append(msg)
        branch = BRANCH_CS

    log.append(f"branch: {branch}")
    if branch != BRANCH_QR:
        try:
            out = solve_ne(problem)
        except NotPositiveDefiniteError as exc:
            if w is not None:
                raise
            log.append(f"Cholesky failed ({exc}); falling back to QR solver")
            out = qr_solve(model.__class__(model.lam, model.m, R=R), G, **qr_options)
            out.method = Method.NE_FALLBACK
            branch = BRANCH_QR
            log.append(f"branch: {branch}")
    else:
        out = qr_solve(model.__class__(model.lam, model.m, R=R), G, **qr_options)
    out.condition = report
    out.branch = branch
    out.branch_log = log + out.branch_log
    return out


def polish(P, q, keep) -> np.ndarray:
    """Solve the principal subsystem selected by ``keep``; other entries are 0."""
    P = np.asarray(P)
    q = np.asarray(q)
    keep = np.asarray(keep, dtype=bool)
    k = P.shape[0]
    if P.shape != (k, k) or q.shape != (k,) or keep.shape != (k,):
        raise ValueError("polish needs P (k x k), q (k) and keep (k)")
    alpha = np.zeros(k, dtype=np.result_type(P, q, float))
    idx = np.flatnonzero(keep)
    if idx.size == 0:
        return alpha
    U = cholesky_upper(P[np.ix_(idx, idx)])
    alpha[idx] = tri_solve(U, tri_solve(U, q[idx], trans="C"))
    return alpha
