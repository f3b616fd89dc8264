import numpy as np
import pytest

from vkrls.dense import EPS, sign_normalize

XI = np.sqrt(EPS)
LAM_EX = np.array([XI, 2 * XI, 0.2])
R_EX1 = np.array([[1.0, 1.0, 1.0], [0.0, XI / 2, XI], [0.0, 0.0, XI]])
R_EX2 = np.array([[1.0, 1.0, 1.0], [0.0, XI, XI], [0.0, 0.0, XI / 2]])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def random_triangular(rng, l, boost=0.0):
    R = np.triu(crandn(rng, l, l))
    return R + boost * np.eye(l)


def random_lambda(rng, l, lo=0.5, hi=1.2):
    return rng.uniform(lo, hi, l) * np.exp(2j * np.pi * rng.uniform(size=l))


def lapack_r(A):
    """Sign-normalized R from LAPACK, an oracle independent of the package."""
    return sign_normalize(np.linalg.qr(A, mode="r"))


def explicit_S(R, lam, m, w=None):
    """Block rows ``w_i R diag(lam)**i`` built by a plain loop."""
    l = R.shape[0]
    S = np.zeros((l * m, l), dtype=complex)
    D = np.ones(l, dtype=complex)
    for i in range(m):
        S[i * l:(i + 1) * l] = (1.0 if w is None else w[i]) * (R * D[None, :])
        D = D * lam
    return S


def lstsq_oracle(A, b):
    return np.linalg.lstsq(A, b, rcond=None)[0]
