"""Pure-Python stacked-triangular kernels (fallback backend).

Both kernels reduce ``[A; B]`` (two upper-triangular ``l x l`` blocks)
in place so that ``A`` holds the triangular factor and ``B`` is zero.
``EA`` and ``EB`` are extra ``l x c`` columns attached to the rows of
``A`` and ``B``; they receive the same transformations. Arrays must
share one dtype (float64 or complex128). Returns
``(rotations, reflectors, flops)``.
"""

import math

import numpy as np


def _ldexp(x, e, cplx):
    if cplx:
        return complex(math.ldexp(x.real, e), math.ldexp(x.imag, e))
    return math.ldexp(x, e)


def _rot(a, b, cplx):
    if b == 0:
        return 1.0, 0.0, a
    if a == 0:
        return 0.0, 1.0, b
    # exact power-of-two scalings keep subnormal and huge inputs accurate
    ea = math.frexp(max(abs(a.real), abs(a.imag)))[1]
    e = max(ea, math.frexp(max(abs(b.real), abs(b.imag)))[1])
    a_n = _ldexp(a, -ea, cplx)
    phase = a_n / abs(a_n)
    abs_a = math.ldexp(abs(a_n), ea - e)
    b = _ldexp(b, -e, cplx)
    nrm = math.hypot(abs_a, abs(b))
    c = abs_a / nrm
    s = (phase.conjugate() if cplx else phase) * b / nrm
    return c, s, phase * math.ldexp(nrm, e)


def givens_stack(A, B, EA, EB):
    l = A.shape[0]
    ncol = EA.shape[1]
    cplx = np.iscomplexobj(A)
    nrot = 0
    flops = 0
    for j in range(l):
        for i in range(j + 1):
            b = B[i, j]
            c, s, r = _rot(A[j, j], b, cplx)
            nrot += 1
            flops += 6 * (l - j + ncol)
            if b == 0:
                continue
            sc = s.conjugate() if cplx else s
            A[j, j] = r
            B[i, j] = 0
            x = A[j, j + 1:].copy()
            y = B[i, j + 1:]
            A[j, j + 1:] = c * x + sc * y
            B[i, j + 1:] = -s * x + c * y
            if ncol:
                x = EA[j].copy()
                y = EB[i]
                EA[j] = c * x + sc * y
                EB[i] = -s * x + c * y
    return nrot, 0, flops


def householder_stack(A, B, EA, EB):
    l = A.shape[0]
    ncol = EA.shape[1]
    cplx = np.iscomplexobj(A)
    nrot = 0
    nref = 0
    flops = 0
    for j in range(l):
        if j > 0:
            x = B[: j + 1, j]
            alpha = x[0]
            sigma = math.sqrt(float(np.vdot(x[1:], x[1:]).real))
            nref += 1
            flops += 4 * (j + 1) * (l - j + ncol)
            if sigma != 0:
                nrm = math.hypot(abs(alpha), sigma)
                phase = alpha / abs(alpha) if alpha != 0 else 1.0
                rho = -phase * nrm
                v1 = alpha - rho
                w = x / v1
                w[0] = 1
                av1 = abs(v1)
                beta = 2.0 * av1 * av1 / (av1 * av1 + sigma * sigma)
                wc = w.conj()
                blk = B[: j + 1, j + 1:]
                blk -= beta * np.outer(w, wc @ blk)
                if ncol:
                    eb = EB[: j + 1]
                    eb -= beta * np.outer(w, wc @ eb)
                B[0, j] = rho
                B[1: j + 1, j] = 0
        b = B[0, j]
        c, s, r = _rot(A[j, j], b, cplx)
        nrot += 1
        flops += 6 * (l - j + ncol)
        if b == 0:
            continue
        sc = s.conjugate() if cplx else s
        A[j, j] = r
        B[0, j] = 0
        x = A[j, j + 1:].copy()
        y = B[0, j + 1:]
        A[j, j + 1:] = c * x + sc * y
        B[0, j + 1:] = -s * x + c * y
        if ncol:
            x = EA[j].copy()
            y = EB[0]
            EA[j] = c * x + sc * y
            EB[0] = -s * x + c * y
    return nrot, nref, flops
