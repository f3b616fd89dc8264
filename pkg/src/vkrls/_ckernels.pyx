# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled stacked-triangular kernels.

Same contract as the pure-Python fallback: reduce ``[A; B]`` in place,
carrying the extra columns ``EA``/``EB``. All four arrays are
C-contiguous and share the dtype (float64 or complex128).
"""

from libc.math cimport sqrt, hypot, fabs, frexp, ldexp, fmax

ctypedef fused scalar_t:
    double
    double complex


cdef inline scalar_t _conj(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return x
    else:
        return x.conjugate()


cdef inline double _abs(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return fabs(x)
    else:
        return hypot(x.real, x.imag)


cdef inline scalar_t _rdiv(scalar_t x, double d) noexcept nogil:
    # componentwise, so real data in complex storage rounds like real data
    if scalar_t is double:
        return x / d
    else:
        return (x.real / d) + 1j * (x.imag / d)


cdef inline double _big(scalar_t x) noexcept nogil:
    if scalar_t is double:
        return fabs(x)
    else:
        return fmax(fabs(x.real), fabs(x.imag))


cdef inline scalar_t _ldexp(scalar_t x, int e) noexcept nogil:
    if scalar_t is double:
        return ldexp(x, e)
    else:
        return ldexp(x.real, e) + 1j * ldexp(x.imag, e)


cdef inline scalar_t _div(scalar_t x, scalar_t y) noexcept nogil:
    # Smith's algorithm for the complex case
    cdef double ratio, den
    if scalar_t is double:
        return x / y
    else:
        if fabs(y.real) >= fabs(y.imag):
            ratio = y.imag / y.real
            den = y.real + y.imag * ratio
            return ((x.real + x.imag * ratio) / den) + 1j * ((x.imag - x.real * ratio) / den)
        ratio = y.real / y.imag
        den = y.imag + y.real * ratio
        return ((x.real * ratio + x.imag) / den) + 1j * ((x.imag * ratio - x.real) / den)


cdef inline void _rotate_rows(scalar_t[:, ::1] X, Py_ssize_t rx,
                              scalar_t[:, ::1] Y, Py_ssize_t ry,
                              Py_ssize_t start, double c, scalar_t s) noexcept nogil:
    cdef Py_ssize_t k
    cdef scalar_t x, y
    cdef scalar_t sc = _conj(s)
    for k in range(start, X.shape[1]):
        x = X[rx, k]
        y = Y[ry, k]
        X[rx, k] = c * x + sc * y
        Y[ry, k] = -s * x + c * y


cdef inline void _make_rot(scalar_t a, scalar_t b, double* c, scalar_t* s,
                           scalar_t* r) noexcept nogil:
    cdef double abs_a, nrm
    cdef int e, ea
    cdef scalar_t phase
    if b == 0:
        c[0] = 1.0
        s[0] = 0
        r[0] = a
        return
    if a == 0:
        c[0] = 0.0
        s[0] = 1
        r[0] = b
        return
    # exact power-of-two scalings keep subnormal and huge inputs accurate
    frexp(_big(a), &ea)
    frexp(_big(b), &e)
    e = ea if ea > e else e
    a = _ldexp(a, -ea)
    abs_a = _abs(a)
    phase = _rdiv(a, abs_a)
    abs_a = ldexp(abs_a, ea - e)
    b = _ldexp(b, -e)
    nrm = hypot(abs_a, _abs(b))
    c[0] = abs_a / nrm
    s[0] = _rdiv(_conj(phase) * b, nrm)
    r[0] = phase * ldexp(nrm, e)


def givens_stack(scalar_t[:, ::1] A, scalar_t[:, ::1] B,
                 scalar_t[:, ::1] EA, scalar_t[:, ::1] EB):
    cdef Py_ssize_t l = A.shape[0]
    cdef Py_ssize_t ncol = EA.shape[1]
    cdef Py_ssize_t i, j
    cdef long nrot = 0, flops = 0
    cdef double c
    cdef scalar_t s, r, b
    with nogil:
        for j in range(l):
            for i in range(j + 1):
                b = B[i, j]
                nrot += 1
                flops += 6 * (l - j + ncol)
                if b == 0:
                    continue
                _make_rot(A[j, j], b, &c, &s, &r)
                A[j, j] = r
                B[i, j] = 0
                _rotate_rows(A, j, B, i, j + 1, c, s)
                if ncol:
                    _rotate_rows(EA, j, EB, i, 0, c, s)
    return nrot, 0, flops


cdef void _reflect(scalar_t[:, ::1] X, Py_ssize_t nrows, Py_ssize_t start,
                   scalar_t* w, double beta) noexcept nogil:
    # X[:nrows, start:] -= beta * w (w^H X[:nrows, start:])
    cdef Py_ssize_t i, k
    cdef scalar_t acc
    for k in range(start, X.shape[1]):
        acc = 0
        for i in range(nrows):
            acc = acc + _conj(w[i]) * X[i, k]
        acc = acc * beta
        if acc != 0:
            for i in range(nrows):
                X[i, k] = X[i, k] - w[i] * acc


def householder_stack(scalar_t[:, ::1] A, scalar_t[:, ::1] B,
                      scalar_t[:, ::1] EA, scalar_t[:, ::1] EB,
                      scalar_t[::1] work):
    cdef Py_ssize_t l = A.shape[0]
    cdef Py_ssize_t ncol = EA.shape[1]
    cdef Py_ssize_t i, j
    cdef long nrot = 0, nref = 0, flops = 0
    cdef double c, sigma, nrm, av1, beta, abs_alpha
    cdef scalar_t s, r, b, alpha, phase, rho, v1
    cdef scalar_t* w = &work[0]
    with nogil:
        for j in range(l):
            if j > 0:
                nref += 1
                flops += 4 * (j + 1) * (l - j + ncol)
                alpha = B[0, j]
                sigma = 0.0
                for i in range(1, j + 1):
                    sigma += _abs(B[i, j]) * _abs(B[i, j])
                sigma = sqrt(sigma)
                if sigma != 0:
                    abs_alpha = _abs(alpha)
                    nrm = hypot(abs_alpha, sigma)
                    if alpha != 0:
                        phase = _rdiv(alpha, abs_alpha)
                    else:
                        phase = 1
                    rho = -phase * nrm
                    v1 = alpha - rho
                    w[0] = 1
                    for i in range(1, j + 1):
                        w[i] = _div(B[i, j], v1)
                    av1 = _abs(v1)
                    beta = 2.0 * av1 * av1 / (av1 * av1 + sigma * sigma)
                    _reflect(B, j + 1, j + 1, w, beta)
                    if ncol:
                        _reflect(EB, j + 1, 0, w, beta)
                    B[0, j] = rho
                    for i in range(1, j + 1):
                        B[i, j] = 0
            b = B[0, j]
            nrot += 1
            flops += 6 * (l - j + ncol)
            if b == 0:
                continue
            _make_rot(A[j, j], b, &c, &s, &r)
            A[j, j] = r
            B[0, j] = 0
            _rotate_rows(A, j, B, 0, j + 1, c, s)
            if ncol:
                _rotate_rows(EA, j, EB, 0, 0, c, s)
    return nrot, nref, flops
