import math

import numpy as np
import pytest

from conftest import LAM_EX, R_EX1, R_EX2, crandn, explicit_S, lstsq_oracle, random_lambda, random_triangular
from vkrls.dense import EPS, cholesky_upper, cond2, equilibrate_columns, equilibrate_rows
from vkrls.errors import NonpositiveDiagonalError, NotPositiveDefiniteError
from vkrls.normal import (
    BRANCH_CS,
    BRANCH_QR,
    BRANCH_RC,
    DEFAULT_TOL,
    condition_report,
    decision_tree_solve,
    polish,
    scaled_condition,
    scaled_matrix,
    solve_ne,
)
from vkrls.report import Method
from vkrls.solvers import seminormal_solve
from vkrls.structure import LSProblem, SpectralModel, build_S, gram_C, vandermonde


def _vec(G):
    return G.T.reshape(-1)


def _well_conditioned(rng, l=3, m=8):
    R = random_triangular(rng, l, 3.0)
    lam = np.exp(2j * np.pi * (np.arange(l) + rng.uniform(0, 0.3, l)) / l) * rng.uniform(0.9, 1.0, l)
    return SpectralModel(lam, m, R=R), crandn(rng, l, m)


def _augmented(P, q, keep):
    """Saddle-point solve of [[P, E], [E^H, 0]] [a; nu] = [q; 0]."""
    k = P.shape[0]
    E = np.eye(k)[:, ~keep]
    s = E.shape[1]
    K = np.block([[P, E], [E.conj().T, np.zeros((s, s))]])
    sol = np.linalg.solve(K, np.concatenate([q, np.zeros(s)]))
    return sol[:k]


def _random_pd(rng, k):
    G = crandn(rng, k + 3, k)
    return G.conj().T @ G


class TestSolveNE:
    def test_scalar(self):
        out = solve_ne(LSProblem(SpectralModel([1.0], 1, R=np.eye(1)), G=np.array([[7.0]]), weights=[1.0]))
        np.testing.assert_allclose(out.alpha, [7])
        assert out.method is Method.NE

    def test_example_not_pd(self, rng):
        problem = LSProblem(SpectralModel(LAM_EX, 4, R=R_EX1), G=rng.standard_normal((3, 4)))
        with pytest.raises(NotPositiveDefiniteError) as info:
            solve_ne(problem)
        assert "not numerically positive definite" in str(info.value)

    def test_matches_dense_oracle(self, rng):
        for _ in range(10):
            model, G = _well_conditioned(rng)
            w = rng.uniform(0.5, 1.5, model.m)
            out = solve_ne(LSProblem(model, G=G, weights=w))
            S = explicit_S(model.R, model.lam, model.m, w)
            ref = lstsq_oracle(S, np.repeat(w, model.l) * _vec(G))
            np.testing.assert_allclose(out.alpha, ref, rtol=1e-9)
            r = np.repeat(w, model.l) * _vec(G) - S @ out.alpha
            assert out.residual == pytest.approx(np.linalg.norm(r), rel=1e-10)

    def test_snapshot_route(self, rng):
        Z = crandn(rng, 7, 3)
        lam = random_lambda(rng, 3)
        X = crandn(rng, 7, 5)
        out = solve_ne(LSProblem(SpectralModel(lam, 5, Z=Z), X=X))
        S_full = np.vstack([Z * lam[None, :] ** i for i in range(5)])
        ref = lstsq_oracle(S_full, _vec(X))
        np.testing.assert_allclose(out.alpha, ref, rtol=1e-9)

    def test_first_order_optimality(self, rng):
        model, G = _well_conditioned(rng)
        out = solve_ne(LSProblem(model, G=G))
        S = build_S(model)
        g = _vec(G)
        base = np.linalg.norm(g - S @ out.alpha)
        for _ in range(20):
            d = 1e-3 * crandn(rng, model.l)
            assert np.linalg.norm(g - S @ (out.alpha + d)) >= base - 1e-9


class TestScaledCondition:
    def test_diagonal(self):
        assert scaled_condition(np.diag([1e6, 1e-6])).kappa_Cs == pytest.approx(1.0)

    def test_two_by_two(self):
        rep = scaled_condition(np.array([[1.0, 0.5], [0.5, 1.0]]))
        assert rep.kappa_Cs == pytest.approx(3.0, rel=1e-14)
        assert rep.diag_range == (1.0, 1.0)

    def test_example_exceeds_two_over_eps(self):
        kappa = scaled_condition(gram_C(SpectralModel(LAM_EX, 4, R=R_EX2))).kappa_Cs
        assert kappa * EPS > 2

    def test_nonpositive_diagonal(self):
        with pytest.raises(NonpositiveDiagonalError) as info:
            scaled_condition(np.diag([1.0, 0.0]))
        assert info.value.index == 1

    def test_unit_diagonal(self, rng):
        C = _random_pd(rng, 4)
        np.testing.assert_array_equal(np.diag(scaled_matrix(C)), 1)


def _eigh_scaled(A):
    d = np.sqrt(np.diag(A).real)
    return np.linalg.eigvalsh(A / d[:, None] / d[None, :])


class TestConditionTheory:
    def test_hadamard_eigenvalue_sandwich(self, rng):
        for _ in range(60):
            n = int(rng.integers(2, 7))
            A = crandn(rng, n, n + int(rng.integers(0, 3)))
            B = crandn(rng, n, n + int(rng.integers(0, 3)))
            A, B = A @ A.conj().T, B @ B.conj().T
            ea, eb, ec = _eigh_scaled(A), _eigh_scaled(B), _eigh_scaled(A * B)
            lo = max(ea.min(), eb.min())
            hi = min(ea.max(), eb.max())
            assert np.all(ec >= lo - 1e-10) and np.all(ec <= hi + 1e-10)

    def test_scaled_condition_bound(self, rng):
        for _ in range(60):
            l, m = int(rng.integers(1, 6)), int(rng.integers(6, 16))
            R = random_triangular(rng, l, 0.5)
            lam = random_lambda(rng, l)
            w = rng.uniform(0.2, 1.5, m)
            model = SpectralModel(lam, m, R=R)
            rep = condition_report(LSProblem(model, G=np.zeros((l, m)), weights=w))
            Vw = vandermonde(lam, m) * w[None, :]
            k_rc = cond2(equilibrate_columns(R)[0])
            k_vr = cond2(equilibrate_rows(Vw)[1])
            assert rep.kappa_Cs <= min(k_rc ** 2, k_vr ** 2) * (1 + 1e-8)
            assert rep.kappa_Rc == pytest.approx(k_rc)
            assert rep.kappa_Vr == pytest.approx(k_vr)

    def test_column_scaled_S_squares(self, rng):
        for _ in range(60):
            l, m = int(rng.integers(1, 6)), int(rng.integers(6, 16))
            model = SpectralModel(random_lambda(rng, l), m, R=random_triangular(rng, l, 1.0))
            rep = condition_report(LSProblem(model, G=np.zeros((l, m))), with_S=True)
            assert rep.kappa_Sc ** 2 == pytest.approx(rep.kappa_Cs, rel=1e-6)

    def test_short_vandermonde_is_singular(self, rng):
        model = SpectralModel(random_lambda(rng, 4), 2, R=random_triangular(rng, 4, 1.0))
        rep = condition_report(LSProblem(model, G=np.zeros((4, 2))))
        assert rep.kappa_Vr == math.inf
        assert rep.kappa_Cs <= rep.kappa_Rc ** 2 * (1 + 1e-8)

    def test_example_report(self):
        rep = condition_report(LSProblem(SpectralModel(LAM_EX, 4, R=R_EX1), G=np.zeros((3, 4))))
        assert rep.kappa_Rc ** 2 > 1e12 and rep.kappa_Cs > 1e12


class TestDecisionTree:
    def test_well_conditioned_takes_first_branch(self, rng):
        model, G = _well_conditioned(rng)
        out = decision_tree_solve(LSProblem(model, G=G), tol=1e8)
        assert out.branch == BRANCH_RC and out.method is Method.NE
        assert out.condition.kappa_Cs is None
        assert out.condition.kappa_Rc ** 2 <= 1e8

    def test_second_branch(self, rng):
        # nearly parallel modes fail the first test; well separated
        # unimodular eigenvalues keep the scaled Gram benign
        R = np.array([[1.0, 1.0, 0.0], [0.0, 1e-4, 0.0], [0.0, 0.0, 1.0]])
        lam = np.exp(2j * np.pi * np.arange(3) / 3)
        problem = LSProblem(SpectralModel(lam, 12, R=R), G=crandn(rng, 3, 12))
        out = decision_tree_solve(problem, tol=1e6)
        assert out.condition.kappa_Rc ** 2 > 1e6
        assert out.branch == BRANCH_CS and out.condition.kappa_Cs <= 1e6
        assert out.method is Method.NE

    def test_second_branch_forced(self, rng):
        model, G = _well_conditioned(rng)
        calls = iter([1e9, 1.0])
        out = decision_tree_solve(LSProblem(model, G=G), tol=1e8, cond=lambda A: next(calls))
        assert out.branch == BRANCH_CS and out.method is Method.NE

    def test_example_goes_to_qr(self, rng):
        out = decision_tree_solve(LSProblem(SpectralModel(LAM_EX, 4, R=R_EX1), G=rng.standard_normal((3, 4))), tol=1e8)
        assert out.branch == BRANCH_QR and out.method is Method.QR
        assert out.condition.kappa_Rc ** 2 > 1e17

    def test_example_contrast(self):
        out = decision_tree_solve(LSProblem(SpectralModel(LAM_EX, 4, R=R_EX2), G=np.ones((3, 4))), tol=1e12)
        assert out.branch == BRANCH_QR
        e = np.ones(3)
        a_qr = seminormal_solve(out.details["r_s"], e)
        a_ne = seminormal_solve(cholesky_upper(gram_C(SpectralModel(LAM_EX, 4, R=R_EX2))), e)
        assert abs(a_qr[0] - a_ne[0]) > 1e-3 * abs(a_qr[0])

    def test_fallback_on_cholesky_failure(self, rng):
        problem = LSProblem(SpectralModel(LAM_EX, 4, R=R_EX1), G=rng.standard_normal((3, 4)))
        out = decision_tree_solve(problem, cond=lambda A: 1.0)
        assert out.method is Method.NE_FALLBACK and out.branch == BRANCH_QR
        assert any("Cholesky failed" in line for line in out.branch_log)
        assert np.all(np.isfinite(out.alpha))

    def test_weighted_qr_branch_warns(self, rng):
        model, G = _well_conditioned(rng)
        w = rng.uniform(0.5, 1.5, model.m)
        with pytest.warns(RuntimeWarning):
            out = decision_tree_solve(LSProblem(model, G=G, weights=w), cond=lambda A: 1e10)
        assert out.method is Method.NE

    def test_tol_validated(self, rng):
        model, G = _well_conditioned(rng)
        for tol in (1.0, 0.5, 1 / EPS):
            with pytest.raises(ValueError):
                decision_tree_solve(LSProblem(model, G=G), tol=tol)

    def test_default_tol(self):
        assert DEFAULT_TOL == pytest.approx(1 / (100 * math.sqrt(EPS)))

    def test_report_is_json_ready(self, rng):
        import json

        model, G = _well_conditioned(rng)
        d = decision_tree_solve(LSProblem(model, G=G)).to_dict()
        for key in ("alpha", "residual", "objective", "method", "kappa_Cs", "kappa_Rc", "kappa_Sc", "rank", "branch_log"):
            assert key in d
        json.dumps(d, allow_nan=False)


class TestPolish:
    def test_keep_all(self, rng):
        P, q = _random_pd(rng, 5), crandn(rng, 5)
        np.testing.assert_allclose(polish(P, q, np.ones(5, bool)), np.linalg.solve(P, q), rtol=1e-10)

    def test_keep_none(self, rng):
        P, q = _random_pd(rng, 4), crandn(rng, 4)
        np.testing.assert_array_equal(polish(P, q, np.zeros(4, bool)), 0)

    def test_against_augmented(self, rng):
        P, q = _random_pd(rng, 6), crandn(rng, 6)
        keep = np.array([True, False, True, False, True, False])
        a = polish(P, q, keep)
        ref = _augmented(P, q, keep)
        np.testing.assert_allclose(a, ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())
        assert np.all(a[~keep] == 0)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            polish(np.eye(2), np.ones(3), np.ones(2, bool))

    def test_not_pd(self):
        with pytest.raises(NotPositiveDefiniteError):
            polish(-np.eye(2), np.ones(2), np.ones(2, bool))
