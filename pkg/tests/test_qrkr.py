import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import LAM_EX, R_EX2, crandn, explicit_S, lapack_r, random_lambda, random_triangular
from vkrls.dense import EPS, sign_normalize
from vkrls.errors import DimensionError
from vkrls.kernels import available_backends
from vkrls.qrkr import (
    OpCounter,
    dense_qr_counter,
    real_recursive_qr,
    real_recursive_qr_with_rhs,
    recursive_qr_general,
    recursive_qr_general_with_rhs,
    recursive_qr_pow2,
    recursive_qr_pow2_with_rhs,
    stacked_qr,
    stacked_qr_blocked,
    stacked_qr_givens,
    stacked_qr_householder,
)
from vkrls.structure import SpectralModel, gram_C, real_transform

KERNELS = ["givens", "householder", "blocked"]
BACKENDS = available_backends()


def _pair(rng, l):
    return random_triangular(rng, l, 1.0), random_triangular(rng, l)


def _colwise_ok(R_S, S, factor=100):
    ref = lapack_r(S)
    l = S.shape[1]
    m = S.shape[0] // l
    for j in range(l):
        bound = factor * l * m * EPS * np.linalg.norm(S[:, j])
        if np.linalg.norm(R_S[:, j] - ref[:, j]) > bound:
            return False
    return True


class TestStackedKernels:
    @pytest.mark.parametrize("kernel", KERNELS)
    def test_zero_bottom(self, rng, kernel):
        A = random_triangular(rng, 4, 1.0)
        T = stacked_qr(A, np.zeros_like(A), kernel, block=2).T
        np.testing.assert_allclose(T, sign_normalize(A), atol=1e-15)

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_identity_pair(self, kernel):
        T = stacked_qr(np.eye(3), np.eye(3), kernel, block=2).T
        np.testing.assert_allclose(T, np.sqrt(2) * np.eye(3), atol=1e-15)

    @pytest.mark.parametrize("fn", [stacked_qr_givens, stacked_qr_householder, stacked_qr_blocked])
    def test_dense_oracle(self, rng, fn):
        A, B = _pair(rng, 4)
        np.testing.assert_allclose(fn(A, B), lapack_r(np.vstack([A, B])), atol=1e-13)

    def test_kernels_agree(self, rng):
        for _ in range(10):
            A, B = _pair(rng, 6)
            ref = stacked_qr_givens(A, B)
            np.testing.assert_allclose(stacked_qr_householder(A, B), ref, atol=1e-13)

    @pytest.mark.parametrize("block", [1, 2, 3, 7])
    def test_block_sizes(self, rng, block):
        A, B = _pair(rng, 7)
        ref = stacked_qr_householder(A, B)
        np.testing.assert_allclose(stacked_qr_blocked(A, B, block=block), ref, atol=1e-12)

    def test_ragged_blocking_dense_oracle(self, rng):
        A, B = _pair(rng, 7)
        np.testing.assert_allclose(stacked_qr_blocked(A, B, block=3), lapack_r(np.vstack([A, B])), atol=1e-12)

    def test_large_uses_blocked_by_default(self, rng):
        A, B = _pair(rng, 70)
        c = OpCounter()
        T = stacked_qr(A, B, counter=c).T
        ref = stacked_qr_householder(A, B)
        np.testing.assert_allclose(T, ref, atol=1e-11 * np.abs(ref).max())
        assert c.kernel_calls == 1

    def test_givens_rotation_count(self, rng):
        for l in (1, 3, 8):
            c = OpCounter()
            stacked_qr_givens(*_pair(rng, l), counter=c)
            assert c.rotations == l * (l + 1) // 2 and c.reflectors == 0

    def test_householder_counts(self, rng):
        c = OpCounter()
        stacked_qr_householder(*_pair(rng, 5), counter=c)
        assert c.rotations == 5 and c.reflectors == 4

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_extras_receive_q_adjoint(self, rng, kernel):
        A, B = _pair(rng, 5)
        EA, EB = crandn(rng, 5, 2), crandn(rng, 5, 2)
        res = stacked_qr(A, B, kernel, block=2, extra_top=EA, extra_bottom=EB)
        M = np.hstack([np.vstack([A, B]), np.vstack([EA, EB])])
        full = lapack_r(M[:, :5])
        Q, _ = np.linalg.qr(M[:, :5])
        ph = np.diag(full) / np.diag(Q.conj().T @ M[:, :5])
        top = (Q.conj().T @ M[:, 5:]) * ph[:, None]
        np.testing.assert_allclose(res.T, full, atol=1e-13)
        np.testing.assert_allclose(res.top, top, atol=1e-13)
        energy = np.linalg.norm(EA) ** 2 + np.linalg.norm(EB) ** 2
        got = np.linalg.norm(res.top) ** 2 + np.linalg.norm(res.bottom) ** 2
        assert got == pytest.approx(energy, rel=1e-13)

    def test_vector_extras(self, rng):
        A, B = _pair(rng, 3)
        res = stacked_qr(A, B, extra_top=np.ones(3), extra_bottom=np.ones(3))
        assert res.top.shape == (3,) and res.bottom.shape == (3,)

    def test_shape_errors(self):
        with pytest.raises(DimensionError):
            stacked_qr(np.eye(2), np.eye(3))
        with pytest.raises(ValueError):
            stacked_qr(np.eye(2), np.eye(2), kernel="nope")

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31 - 1), st.integers(1, 9), st.sampled_from(KERNELS))
    def test_gram_preserved(self, seed, l, kernel):
        r = np.random.default_rng(seed)
        A, B = random_triangular(r, l), random_triangular(r, l)
        T = stacked_qr(A, B, kernel, block=3).T
        G = A.conj().T @ A + B.conj().T @ B
        assert np.linalg.norm(T.conj().T @ T - G) <= 50 * l * EPS * np.linalg.norm(G)
        d = np.diag(T)
        assert np.all(d.imag == 0) and np.all(d.real >= 0)


class TestRecursivePow2:
    def test_p_zero(self, rng):
        R = random_triangular(rng, 3)
        np.testing.assert_array_equal(recursive_qr_pow2(R, random_lambda(rng, 3), 0).r_s, sign_normalize(R))

    def test_scalar(self):
        out = recursive_qr_pow2(np.eye(1), [1.0], 2)
        assert out.r_s[0, 0] == pytest.approx(2.0, rel=1e-15)

    def test_example_factor(self):
        T = recursive_qr_pow2(R_EX2, LAM_EX, 2).r_s
        assert T[1, 2] == pytest.approx(1.414213575017149e-01, rel=1e-6)
        assert T[2, 2] == pytest.approx(1.471869344809795e-01, rel=1e-6)
        assert T[1, 1] == pytest.approx(2.107342425544703e-08, rel=1e-4)
        np.testing.assert_allclose(T[0], [1.0, 1.0, 1.000000002980232], rtol=1e-6)

    @pytest.mark.parametrize("p", [0, 1, 3, 5])
    def test_kernel_calls(self, rng, p):
        c = OpCounter()
        out = recursive_qr_pow2(random_triangular(rng, 4), random_lambda(rng, 4), p, counter=c)
        assert out.kernel_calls == p == c.kernel_calls

    def test_monotone_trace(self, rng):
        R, lam = random_triangular(rng, 3, 1.0), random_lambda(rng, 3, 0.8, 1.1)
        out = recursive_qr_pow2(R, lam, 4, keep_levels=True)
        assert len(out.levels) == 5
        for i, T in enumerate(out.levels):
            S = explicit_S(R, lam, 1 << i)
            G = S.conj().T @ S
            assert np.linalg.norm(T.conj().T @ T - G) <= 1e-10 * np.linalg.norm(G)

    def test_rhs_forward(self, rng):
        R, lam = random_triangular(rng, 3, 1.0), random_lambda(rng, 3, 0.8, 1.1)
        a0 = crandn(rng, 3)
        S = explicit_S(R, lam, 8)
        res = recursive_qr_pow2_with_rhs(R, lam, 3, S @ a0)
        a = np.linalg.solve(res.r_s, res.gtop)
        kappa = np.linalg.cond(S)
        assert np.linalg.norm(a - a0) <= kappa * 24 * EPS * 10 * np.linalg.norm(a0)

    def test_rhs_zero(self, rng):
        res = recursive_qr_pow2_with_rhs(random_triangular(rng, 3), random_lambda(rng, 3), 2, np.zeros(12))
        np.testing.assert_array_equal(res.gtop, 0)
        assert res.tail_sq == 0

    def test_rhs_energy(self, rng):
        for p in (1, 2, 4):
            R, lam = random_triangular(rng, 3), random_lambda(rng, 3)
            g = crandn(rng, 3 << p)
            res = recursive_qr_pow2_with_rhs(R, lam, p, g)
            total = np.linalg.norm(res.gtop) ** 2 + res.tail_sq
            assert total == pytest.approx(np.linalg.norm(g) ** 2, rel=1e-12)

    def test_rhs_length_checked(self, rng):
        with pytest.raises(DimensionError):
            recursive_qr_pow2_with_rhs(np.eye(2), [1.0, 0.5], 2, np.ones(7))


class TestRecursiveGeneral:
    def test_m_one(self, rng):
        R = random_triangular(rng, 3)
        np.testing.assert_array_equal(recursive_qr_general(R, random_lambda(rng, 3), 1).r_s, sign_normalize(R))

    def test_pow2_identical(self, rng):
        R, lam = random_triangular(rng, 4), random_lambda(rng, 4)
        a = recursive_qr_general(R, lam, 16).r_s
        b = recursive_qr_pow2(R, lam, 4).r_s
        np.testing.assert_allclose(a, b, rtol=0, atol=1e-14 * np.abs(b).max())

    def test_thirteen(self, rng):
        R = random_triangular(rng, 3, 1.0)
        lam = np.exp(2j * np.pi * rng.uniform(size=3))
        S = explicit_S(R, lam, 13)
        np.testing.assert_allclose(recursive_qr_general(R, lam, 13).r_s, lapack_r(S), atol=1e-12)

    @pytest.mark.parametrize("m", [1, 2, 3, 5, 6, 7, 12, 13, 31, 33, 100])
    def test_kernel_call_count(self, rng, m):
        out = recursive_qr_general(random_triangular(rng, 2), random_lambda(rng, 2), m)
        K = m.bit_length() - 1
        assert out.kernel_calls == K + bin(m).count("1") - 1

    @pytest.mark.parametrize("kernel", KERNELS)
    def test_against_dense(self, rng, kernel):
        for m in (3, 6, 11, 20, 33):
            l = int(rng.integers(1, 6))
            R, lam = random_triangular(rng, l), random_lambda(rng, l)
            out = recursive_qr_general(R, lam, m, kernel=kernel, block=2)
            assert _colwise_ok(out.r_s, explicit_S(R, lam, m))

    def test_gram_identity(self, rng):
        for _ in range(20):
            l, m = int(rng.integers(1, 6)), int(rng.integers(1, 30))
            R, lam = random_triangular(rng, l), random_lambda(rng, l)
            T = recursive_qr_general(R, lam, m).r_s
            C = gram_C(SpectralModel(lam, m, R=R))
            assert np.linalg.norm(T.conj().T @ T - C) <= 100 * l * m * EPS * np.linalg.norm(C)

    def test_with_rhs_matches_lstsq(self, rng):
        for m in (5, 9, 22):
            R, lam = random_triangular(rng, 3, 1.0), random_lambda(rng, 3, 0.8, 1.1)
            g = crandn(rng, 3 * m)
            res = recursive_qr_general_with_rhs(R, lam, m, g)
            a = np.linalg.solve(res.r_s, res.gtop)
            S = explicit_S(R, lam, m)
            ref = np.linalg.lstsq(S, g, rcond=None)[0]
            np.testing.assert_allclose(a, ref, rtol=1e-9)
            resid = np.linalg.norm(g - S @ ref) ** 2
            assert res.tail_sq == pytest.approx(resid, rel=1e-9)

    def test_matrix_rhs(self, rng):
        R, lam = random_triangular(rng, 3), random_lambda(rng, 3)
        g = crandn(rng, 21, 2)
        res = recursive_qr_general_with_rhs(R, lam, 7, g)
        for j in range(2):
            one = recursive_qr_general_with_rhs(R, lam, 7, g[:, j])
            np.testing.assert_allclose(res.gtop[:, j], one.gtop, atol=1e-14)
            assert res.tail_sq[j] == pytest.approx(one.tail_sq, rel=1e-13)

    def test_keep_levels(self, rng):
        out = recursive_qr_general(random_triangular(rng, 2), random_lambda(rng, 2), 13, keep_levels=True)
        assert len(out.levels) == 4 and len(out.merges) == 3
        np.testing.assert_array_equal(out.merges[-1], out.r_s)

    def test_real_data_stays_real(self, rng):
        R = np.triu(rng.standard_normal((3, 3)))
        out = recursive_qr_general(R, rng.uniform(-1, 1, 3), 9)
        assert out.r_s.dtype == float

    def test_bad_lambda(self):
        with pytest.raises(DimensionError):
            recursive_qr_general(np.eye(2), [1.0], 4)
        with pytest.raises(DimensionError):
            recursive_qr_general(np.eye(2), [1.0, 2.0], 0)


class TestBackends:
    @pytest.mark.parametrize("backend", BACKENDS)
    @pytest.mark.parametrize("kernel", KERNELS)
    def test_backend_matches_oracle(self, rng, backend, kernel):
        R, lam = random_triangular(rng, 5), random_lambda(rng, 5)
        out = recursive_qr_general(R, lam, 11, kernel=kernel, block=2, backend=backend)
        assert _colwise_ok(out.r_s, explicit_S(R, lam, 11))

    @pytest.mark.skipif(len(BACKENDS) < 2, reason="compiled kernels not built")
    @pytest.mark.parametrize("kernel", ["givens", "householder"])
    @pytest.mark.parametrize("real", [True, False])
    def test_backends_agree(self, rng, kernel, real):
        A, B = _pair(rng, 6)
        if real:
            A, B = A.real.copy(), B.real.copy()
        EA, EB = crandn(rng, 6, 2), crandn(rng, 6, 2)
        if real:
            EA, EB = EA.real.copy(), EB.real.copy()
        c1, c2 = OpCounter(), OpCounter()
        a = stacked_qr(A, B, kernel, extra_top=EA, extra_bottom=EB, counter=c1, backend="python")
        b = stacked_qr(A, B, kernel, extra_top=EA, extra_bottom=EB, counter=c2, backend="cython")
        for x, y in zip(a, b):
            np.testing.assert_allclose(x, y, rtol=0, atol=1e-14 * np.abs(x).max())
        assert c1 == c2

    def test_unknown_backend(self):
        with pytest.raises(ValueError):
            stacked_qr(np.eye(2), np.eye(2), "givens", backend="fortran")


def _conj_closed(rng, n_real, n_pairs, n=None):
    mu = random_lambda(rng, n_pairs, 0.6, 1.1)
    lam = np.concatenate([rng.uniform(-1.1, 1.1, n_real), mu, mu.conj()]).astype(complex)
    perm = rng.permutation(lam.size)
    n = n or lam.size + 3
    Zc = crandn(rng, n, n_pairs)
    Z = np.hstack([rng.standard_normal((n, n_real)), Zc, Zc.conj()])[:, perm]
    return lam[perm], Z


def _complex_gram(form, R_hat, m):
    """Gram of the real-form S_hat through the complex path."""
    Pinv = np.linalg.inv(form.phi())
    Rc = lapack_r(R_hat @ Pinv)
    T = recursive_qr_general(Rc, form.lam, m).r_s
    P = form.phi()
    return P.conj().T @ (T.conj().T @ T) @ P


class TestRealPath:
    def test_all_real_identical(self, rng):
        lam = rng.uniform(-1.1, 1.1, 4)
        Z = rng.standard_normal((7, 4))
        form = real_transform(lam, Z)
        for m in (1, 4, 13):
            a = real_recursive_qr(form, m).r_s
            b = recursive_qr_general(form.R_hat, lam[form.order].real, m).r_s
            np.testing.assert_array_equal(a, b)

    def test_rotation_pair(self):
        th = np.pi / 3
        form = real_transform(np.exp([1j * th, -1j * th]))
        R_hat = np.eye(2)
        T = real_recursive_qr(form, 4, R_hat=R_hat).r_s
        assert T.dtype == float
        ref = _complex_gram(form, R_hat, 4)
        np.testing.assert_allclose(T.T @ T, ref.real, atol=1e-12 * np.abs(ref).max())
        assert np.abs(ref.imag).max() <= 1e-12

    def test_mixed_spectrum(self, rng):
        lam, Z = _conj_closed(rng, 2, 1)
        form = real_transform(lam, Z)
        T = real_recursive_qr(form, 8).r_s
        ref = _complex_gram(form, form.R_hat, 8)
        np.testing.assert_allclose(T.T @ T, ref.real, atol=1e-11 * np.abs(ref).max())

    def test_gram_against_mode_matrix(self, rng):
        for _ in range(20):
            lam, Z = _conj_closed(rng, int(rng.integers(0, 3)), int(rng.integers(1, 3)))
            m = int(rng.integers(1, 20))
            form = real_transform(lam, Z)
            T = real_recursive_qr(form, m).r_s
            Tc = recursive_qr_general(lapack_r(Z[:, form.order]), form.lam, m).r_s
            P = form.phi()
            ref = (P.conj().T @ (Tc.conj().T @ Tc) @ P)
            assert np.abs(ref.imag).max() <= 1e-10 * np.abs(ref).max()
            assert np.linalg.norm(T.T @ T - ref.real) <= 1e-10 * np.linalg.norm(ref)

    def test_bulge_rotations_bounded(self, rng):
        lam, Z = _conj_closed(rng, 1, 2)
        form = real_transform(lam, Z)
        c = OpCounter()
        out = real_recursive_qr(form, 13, counter=c)
        assert 0 < c.bulge_rotations <= form.n_pairs * out.kernel_calls

    def test_amplitudes_match_complex_solver(self, rng):
        from vkrls.solvers import qr_solve, real_qr_solve

        lam, Z = _conj_closed(rng, 1, 2)
        m = 9
        form = real_transform(lam, Z)
        a_true = np.zeros(lam.size, dtype=complex)
        # real data needs conjugate-symmetric amplitudes
        for k, j in enumerate(form.order):
            a_true[j] = rng.standard_normal() if k < form.n_real else 0
        for j in form.pair_columns:
            z = complex(*rng.standard_normal(2))
            a_true[form.order[j]] = z
            a_true[form.order[j + 1]] = np.conj(z)
        X = (Z @ (a_true[:, None] * np.vstack([lam ** i for i in range(m)]).T)).real
        X = X + 1e-3 * rng.standard_normal(X.shape)
        alpha, rho = real_qr_solve(form, m, X=X)
        q, Rz = np.linalg.qr(Z)
        ph = np.diag(Rz) / np.abs(np.diag(Rz))
        model = SpectralModel(lam, m, R=ph.conj()[:, None] * Rz)
        G = ph.conj()[:, None] * (q.conj().T @ X)
        ref = qr_solve(model, G).alpha
        np.testing.assert_allclose(alpha, ref, rtol=1e-9)
        for j in form.pair_columns:
            a1, a2 = alpha[form.order[j]], alpha[form.order[j + 1]]
            assert a2.real == a1.real and a2.imag == -a1.imag

    def test_rhs_must_be_real(self, rng):
        form = real_transform([1j, -1j])
        with pytest.raises(ValueError):
            real_recursive_qr_with_rhs(form, 2, np.ones(4, dtype=complex), R_hat=np.eye(2))


class TestCounters:
    def test_dense_baseline_linear(self, rng):
        R, lam = random_triangular(rng, 4), random_lambda(rng, 4)
        f = [dense_qr_counter(R, lam, m).flops for m in (64, 128, 256)]
        assert 1.8 < f[1] / f[0] < 2.2 and 1.8 < f[2] / f[1] < 2.2

    def test_recursive_log_growth(self, rng):
        R, lam = random_triangular(rng, 4), random_lambda(rng, 4)
        f = []
        for p in (4, 8):
            c = OpCounter()
            recursive_qr_pow2(R, lam, p, counter=c)
            f.append(c.flops)
        assert f[1] / f[0] == pytest.approx(2.0, rel=1e-12)
