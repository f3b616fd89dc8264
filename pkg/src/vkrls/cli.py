"""Command-line interface: ``vkrls solve|dmd|reconstruct|diag``.

Exit codes: 0 on success, 1 on parse or usage errors, 2 when a forced
normal-equations solve meets a matrix that is not positive definite.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .dense import EPS, cholesky_upper, tri_solve
from .dmd import DEFAULT_EPS_RANK, SnapshotPair, ddmd_rrr, dmd, reconstruct
from .errors import NotPositiveDefiniteError, VkrlsError
from .normal import DEFAULT_TOL, condition_report, decision_tree_solve, solve_ne
from .qrkr import recursive_qr_general
from .report import ConditionReport, Method, SolveReport
from .solvers import (
    corrected_seminormal,
    qr_solve,
    rank_revealing_solve,
    seminormal_solve,
)
from .structure import LSProblem, SpectralModel, gram_C

METHODS = ("auto", "ne", "seminormal", "qr", "rank")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _tol(text):
    v = float(text)
    if not 1 < v < 1 / EPS:
        raise argparse.ArgumentTypeError("tol must lie in (1, 1/eps)")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("value must lie in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="vkrls", description="Structured least squares for Vandermonde-Khatri-Rao problems.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable report on stdout")
        sp.add_argument("--out", help="output file (solve/reconstruct) or directory (dmd)")

    def solver_flags(sp):
        sp.add_argument("--method", choices=METHODS, default="auto")
        sp.add_argument("--tol", type=_tol, default=DEFAULT_TOL, help="decision-tree tolerance")
        sp.add_argument("--rank-tol", type=_unit_interval, default=None,
                        help="rank threshold for --method rank (default l*eps)")
        sp.add_argument("--sweeps", type=int, default=1, help="correction sweeps for seminormal")
        sp.add_argument("--weights", help="CSV with m non-negative weights")

    s = sub.add_parser("solve", help="amplitudes from R, lambda and G")
    s.add_argument("R")
    s.add_argument("lam", metavar="lambda")
    s.add_argument("G", nargs="?")
    s.add_argument("--normal-rhs", help="CSV with S^H g given directly instead of G (needs -m)")
    s.add_argument("-m", "--snapshots", type=int, help="number of snapshots with --normal-rhs")
    solver_flags(s)
    common(s)

    d = sub.add_parser("dmd", help="Ritz pairs from snapshot pairs X, Y")
    d.add_argument("X")
    d.add_argument("Y")
    d.add_argument("--eps-rank", type=float, default=DEFAULT_EPS_RANK)
    d.add_argument("--refined", action="store_true", help="refined Rayleigh-Ritz vectors")
    d.add_argument("--no-scaling", action="store_true", help="skip column scaling in refined mode")
    common(d)

    r = sub.add_parser("reconstruct", help="amplitudes and reconstruction errors for modes Z")
    r.add_argument("Z")
    r.add_argument("lam", metavar="lambda")
    r.add_argument("X")
    r.add_argument("--select", help="comma-separated 0-based mode indices")
    r.add_argument("--top", type=int, help="keep the TOP modes with largest |amplitude|")
    solver_flags(r)
    common(r)

    g = sub.add_parser("diag", help="conditioning report")
    g.add_argument("R")
    g.add_argument("lam", metavar="lambda")
    g.add_argument("-m", "--snapshots", type=int, help="number of snapshots (default: weights length)")
    g.add_argument("--weights")
    g.add_argument("--with-S", action="store_true", help="also form S explicitly for kappa(S_c)")
    common(g)
    return p


# ---------------------------------------------------------------------------


def _read_weights(path, m):
    if path is None:
        return None
    w = csvio.real_if_possible(csvio.read_vector(path), "weights")
    if w.shape[0] != m:
        raise UsageError(f"weights file has {w.shape[0]} entries, expected {m}")
    return w


def _run_method(problem: LSProblem, args) -> SolveReport:
    method = args.method
    if method == "auto":
        return decision_tree_solve(problem, tol=args.tol)
    if method == "ne":
        return solve_ne(problem)
    if not problem.unit_weights:
        raise UsageError(f"--method {method} needs unit weights; use ne or auto")
    R, G = problem.reduced()
    model = SpectralModel(problem.model.lam, problem.model.m, R=R)
    if method == "qr":
        return qr_solve(model, G)
    if method == "seminormal":
        return corrected_seminormal(model, G, sweeps=args.sweeps)
    return rank_revealing_solve(model, G, rank_tol=args.rank_tol)


def _normal_rhs_solve(model, b, args) -> SolveReport:
    """Solve ``S^H S alpha = b`` for a given ``b``; no residual is available."""
    if args.method == "ne":
        U = cholesky_upper(gram_C(model))
        alpha = tri_solve(U, tri_solve(U, b, trans="C"))
        method = Method.NE
    elif args.method in ("qr", "seminormal", "auto"):
        R_S = recursive_qr_general(model.triangular, model.lam, model.m).r_s
        alpha = seminormal_solve(R_S, b)
        method = Method.QR
    else:
        raise UsageError("--normal-rhs supports --method ne, qr or seminormal")
    return SolveReport(alpha=alpha, method=method, residual=float("nan"), objective=float("nan"),
                       branch_log=["normal-equations right-hand side given directly"])


def _emit_report(rep: SolveReport, args, extra=None):
    if args.out:
        csvio.write_matrix(args.out, np.asarray(rep.alpha)[:, None])
    if args.json:
        d = rep.to_dict()
        if extra:
            d.update(extra)
        print(json.dumps(d, indent=2))
        return
    print(f"method: {rep.method}")
    if rep.branch:
        print(f"branch: {rep.branch}")
    print("alpha:")
    for a in np.asarray(rep.alpha):
        print(f"  {csvio.format_number(a)}")
    print(f"residual: {rep.residual:.6e}")
    print(f"objective: {rep.objective:.6e}")
    if rep.rank is not None:
        print(f"rank: {rep.rank}")
    c = rep.condition
    for name in ("kappa_Rc", "kappa_Cs", "kappa_Sc"):
        v = getattr(c, name)
        if v is not None:
            print(f"{name}: {v:.6e}")
    for line in rep.branch_log:
        print(f"log: {line}")
    for k, v in rep.timings.items():
        print(f"time[{k}]: {v:.3e} s")
    if extra and "errors" in extra:
        print("snapshot  abs_error  rel_error")
        for i, (e, r) in enumerate(zip(extra["errors"], extra["rel_errors"])):
            print(f"{i:8d}  {e:.6e}  {r:.6e}")


def cmd_solve(args) -> int:
    R = csvio.read_matrix(args.R)
    lam = csvio.read_vector(args.lam)
    if (args.G is None) == (args.normal_rhs is None):
        raise UsageError("give either a G file or --normal-rhs")
    if args.normal_rhs is not None:
        if args.snapshots is None:
            raise UsageError("--normal-rhs needs -m")
        model = SpectralModel(lam, args.snapshots, R=R)
        b = csvio.read_vector(args.normal_rhs)
        rep = _normal_rhs_solve(model, b, args)
    else:
        G = csvio.read_matrix(args.G)
        model = SpectralModel(lam, G.shape[1], R=R)
        problem = LSProblem(model, G=G, weights=_read_weights(args.weights, G.shape[1]))
        rep = _run_method(problem, args)
    _emit_report(rep, args)
    return 0


def cmd_dmd(args) -> int:
    X = csvio.read_matrix(args.X)
    Y = csvio.read_matrix(args.Y)
    pair = SnapshotPair(X, Y)
    if args.refined:
        ritz = ddmd_rrr(pair, args.eps_rank, scale=not args.no_scaling)
    else:
        ritz = dmd(pair, args.eps_rank)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        csvio.write_matrix(out / "Z.csv", ritz.Z)
        csvio.write_matrix(out / "lambda.csv", ritz.lam[:, None])
        csvio.write_matrix(out / "residuals.csv", ritz.residuals[:, None])
    if args.json:
        print(json.dumps({
            "k": ritz.k,
            "lambda": [[float(v.real), float(v.imag)] for v in ritz.lam],
            "residuals": [float(v) for v in ritz.residuals],
            "refined": bool(args.refined),
        }, indent=2))
    else:
        print(f"rank k = {ritz.k}")
        print("lambda, residual:")
        for v, r in zip(ritz.lam, ritz.residuals):
            print(f"  {csvio.format_number(v)}  {r:.3e}")
    return 0


def _parse_select(text, l):
    items = [t for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("empty mode selection")
    idx = []
    for t in items:
        try:
            i = int(t)
        except ValueError:
            raise UsageError(f"bad mode index {t!r}") from None
        if not 0 <= i < l:
            raise UsageError(f"mode index {i} out of range 0..{l - 1}")
        idx.append(i)
    if len(set(idx)) != len(idx):
        raise UsageError("duplicate mode index")
    return np.array(idx)


def cmd_reconstruct(args) -> int:
    Z = csvio.read_matrix(args.Z)
    lam = csvio.read_vector(args.lam)
    X = csvio.read_matrix(args.X)
    m = X.shape[1]
    w = _read_weights(args.weights, m)
    sel = np.arange(lam.shape[0])
    if args.select is not None:
        sel = _parse_select(args.select, lam.shape[0])
    if args.top is not None:
        if args.top < 1:
            raise UsageError("--top must be positive")
        full = _run_method(LSProblem(SpectralModel(lam[sel], m, Z=Z[:, sel]), X=X, weights=w), args)
        order = np.argsort(-np.abs(full.alpha), kind="stable")[: args.top]
        sel = sel[np.sort(order)]
    problem = LSProblem(SpectralModel(lam[sel], m, Z=Z[:, sel]), X=X, weights=w)
    rep = _run_method(problem, args)
    rec = reconstruct(Z[:, sel], lam[sel], rep.alpha, m, X)
    extra = {
        "selection": [int(i) for i in sel],
        "errors": [float(e) for e in rec.errors],
        "rel_errors": [float(e) for e in rec.rel_errors],
    }
    _emit_report(rep, args, extra)
    return 0


def cmd_diag(args) -> int:
    R = csvio.read_matrix(args.R)
    lam = csvio.read_vector(args.lam)
    m = args.snapshots
    w = None
    if args.weights is not None:
        w = csvio.real_if_possible(csvio.read_vector(args.weights), "weights")
        if m is None:
            m = w.shape[0]
    if m is None:
        raise UsageError("diag needs -m or --weights")
    model = SpectralModel(lam, m, R=R)
    G = np.zeros((lam.shape[0], m), dtype=complex)
    rep: ConditionReport = condition_report(LSProblem(model, G=G, weights=w), with_S=args.with_S)
    d = rep.to_dict()
    d["kappa_Rc_squared"] = None if rep.kappa_Rc is None else float(rep.kappa_Rc) ** 2
    if args.out:
        Path(args.out).write_text(json.dumps(d, indent=2) + "\n")
    if args.json:
        print(json.dumps(d, indent=2))
    else:
        for k, v in d.items():
            print(f"{k}: {v}")
    return 0


COMMANDS = {"solve": cmd_solve, "dmd": cmd_dmd, "reconstruct": cmd_reconstruct, "diag": cmd_diag}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except NotPositiveDefiniteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, csvio.CSVParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (VkrlsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
