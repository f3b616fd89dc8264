"""Backend selection for the stacked-triangular kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``VKRLS_PURE_PYTHON=1`` is set, the pure-Python
fallback is used. ``BACKEND`` names the active choice.
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py

_compiled = None
if os.environ.get("VKRLS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _compiled
    except ImportError:  # pragma: no cover - depends on build
        _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def available_backends() -> list[str]:
    return ["python"] + (["cython"] if _compiled is not None else [])


def _prepare(A, B, EA, EB):
    dtype = np.result_type(A, B, float)
    if EA is not None:
        dtype = np.result_type(dtype, EA, EB)
    l = A.shape[0]
    A = np.array(A, dtype=dtype, order="C")
    B = np.array(B, dtype=dtype, order="C")
    if EA is None:
        EA = np.zeros((l, 0), dtype=dtype)
        EB = np.zeros((l, 0), dtype=dtype)
    else:
        EA = np.array(EA, dtype=dtype, order="C").reshape(l, -1)
        EB = np.array(EB, dtype=dtype, order="C").reshape(l, -1)
    return A, B, EA, EB


def run_stack_kernel(kind, A, B, EA=None, EB=None, backend=None):
    """Reduce ``[A; B]`` with kernel ``kind`` ('givens' or 'householder').

    Returns ``(T, EA, EB, (rotations, reflectors, flops))`` where ``T`` is
    the (not yet sign-normalized) triangular factor and ``EA``/``EB`` are
    the transformed extra columns.
    """
    A, B, EA, EB = _prepare(A, B, EA, EB)
    backend = backend or BACKEND
    if backend == "cython":
        if _compiled is None:
            raise RuntimeError("compiled kernels are not available")
        if kind == "givens":
            stats = _compiled.givens_stack(A, B, EA, EB)
        else:
            work = np.zeros(A.shape[0] + 1, dtype=A.dtype)
            stats = _compiled.householder_stack(A, B, EA, EB, work)
    elif backend == "python":
        fn = _kernels_py.givens_stack if kind == "givens" else _kernels_py.householder_stack
        stats = fn(A, B, EA, EB)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return A, EA, EB, stats
