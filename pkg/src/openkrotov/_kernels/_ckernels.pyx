# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled propagation kernels.

Same algorithms and signatures as ``_pykernels``; matrix products go through
BLAS ``zgemm`` from scipy, everything else is plain loops without the GIL.
"""
import numpy as np

from libc.math cimport ceil, log2, fabs, fmin, fmax
from libc.stdlib cimport malloc, free
from libc.string cimport memcpy
from scipy.linalg.cython_blas cimport zgemm, zgemv
from cython.parallel cimport prange

ctypedef double complex cplx

cdef double TAYLOR_TOL = 2.0 ** -56
cdef double THETA = 0.5
cdef int MAX_DEGREE = 30


cdef inline void _matmul(cplx* a, cplx* b, cplx* c, int n) noexcept nogil:
    # Row-major c = a @ b, i.e. column-major c^T = b^T a^T.
    cdef char tr = b'N'
    cdef cplx one = 1.0
    cdef cplx zero = 0.0
    zgemm(&tr, &tr, &n, &n, &n, &one, b, &n, a, &n, &zero, c, &n)


cdef void _expm(const cplx* a, cplx* out, cplx* scaled, cplx* tmp, int n) noexcept nogil:
    cdef int i, j, k, m, s
    cdef int nn = n * n
    cdef double norm = 0.0, col, an, tail, scale
    cdef cplx* swap
    cdef cplx* res = out
    cdef cplx* work = tmp
    for j in range(n):
        col = 0.0
        for i in range(n):
            col += abs(a[i * n + j])
        if col > norm:
            norm = col
    s = 0
    if norm > THETA:
        s = <int>ceil(log2(norm / THETA))
    scale = 1.0
    for k in range(s):
        scale *= 0.5
    an = norm * scale
    m = 1
    tail = an * an / 2.0
    while tail > TAYLOR_TOL and m < MAX_DEGREE:
        m += 1
        tail *= an / (m + 1)
    for i in range(nn):
        scaled[i] = a[i] * scale
    # Horner: res = I + scaled/m, then res = I + scaled @ res / k.
    for i in range(nn):
        res[i] = scaled[i] / m
    for i in range(n):
        res[i * n + i] += 1.0
    for k in range(m - 1, 0, -1):
        _matmul(scaled, res, work, n)
        for i in range(nn):
            work[i] = work[i] / k
        for i in range(n):
            work[i * n + i] += 1.0
        swap = res
        res = work
        work = swap
    for k in range(s):
        _matmul(res, res, work, n)
        swap = res
        res = work
        work = swap
    if res != out:
        memcpy(out, res, nn * sizeof(cplx))


cdef inline void _matvec(const cplx* p, const cplx* x, cplx* y, int n) noexcept nogil:
    # Row-major y = p @ x; the buffer of p read column-major is p^T.
    cdef char tr = b'T'
    cdef cplx one = 1.0
    cdef cplx zero = 0.0
    cdef int inc = 1
    zgemv(&tr, &n, &n, &one, <cplx*>p, &n, <cplx*>x, &inc, &zero, y, &inc)


cdef inline void _matvec_t(const cplx* p, const cplx* x, cplx* y, int n) noexcept nogil:
    # Row-major y = p^T @ x.
    cdef char tr = b'N'
    cdef cplx one = 1.0
    cdef cplx zero = 0.0
    cdef int inc = 1
    zgemv(&tr, &n, &n, &one, <cplx*>p, &n, <cplx*>x, &inc, &zero, y, &inc)


cdef void _step(const cplx* l0, const cplx* lcs, double* u, int nc, double dt, int n,
                cplx* gen, cplx* out, cplx* w1, cplx* w2) noexcept nogil:
    cdef int i, j
    cdef int nn = n * n
    for i in range(nn):
        gen[i] = l0[i]
    for j in range(nc):
        for i in range(nn):
            gen[i] = gen[i] + u[j] * lcs[j * nn + i]
    for i in range(nn):
        gen[i] = gen[i] * dt
    _expm(gen, out, w1, w2, n)


def expm(a):
    """Matrix exponential by scaling and squaring of a truncated Taylor series."""
    cdef const cplx[:, ::1] av = np.ascontiguousarray(a, dtype=complex)
    cdef int n = av.shape[0]
    out = np.empty((n, n), dtype=complex)
    cdef cplx[:, ::1] ov = out
    cdef cplx* w1 = <cplx*>malloc(n * n * sizeof(cplx))
    cdef cplx* w2 = <cplx*>malloc(n * n * sizeof(cplx))
    if w1 == NULL or w2 == NULL:
        free(w1)
        free(w2)
        raise MemoryError()
    with nogil:
        _expm(&av[0, 0], &ov[0, 0], w1, w2, n)
    free(w1)
    free(w2)
    return out


def forward(l0, lcs, samples, double dt, states0, int num_threads=1):
    """Propagate every row of `states0`; returns ``(states, props)``."""
    cdef const cplx[:, ::1] l0v = np.ascontiguousarray(l0, dtype=complex)
    cdef const cplx[:, :, ::1] lcv = np.ascontiguousarray(lcs, dtype=complex)
    cdef const double[:, ::1] uv = np.ascontiguousarray(samples, dtype=float)
    cdef const cplx[:, ::1] s0 = np.ascontiguousarray(states0, dtype=complex)
    cdef int nc = uv.shape[0]
    cdef int nsteps = uv.shape[1]
    cdef int n_states = s0.shape[0]
    cdef int n = s0.shape[1]
    states = np.empty((nsteps + 1, n_states, n), dtype=complex)
    props = np.empty((nsteps, n, n), dtype=complex)
    cdef cplx[:, :, ::1] st = states
    cdef cplx[:, :, ::1] pr = props
    cdef int i, j, m
    cdef bint same
    cdef double* u = <double*>malloc((nc + 1) * sizeof(double))
    cdef cplx* work = <cplx*>malloc(3 * n * n * sizeof(cplx))
    if u == NULL or work == NULL:
        free(u)
        free(work)
        raise MemoryError()
    st[0, :, :] = s0
    cdef const cplx* lc_ptr = &lcv[0, 0, 0] if nc > 0 else NULL
    with nogil:
        for i in range(nsteps):
            same = i > 0
            for j in range(nc):
                u[j] = uv[j, i]
                if i > 0 and uv[j, i] != uv[j, i - 1]:
                    same = False
            if same:
                memcpy(&pr[i, 0, 0], &pr[i - 1, 0, 0], n * n * sizeof(cplx))
            else:
                _step(&l0v[0, 0], lc_ptr, u, nc, dt, n, work, &pr[i, 0, 0],
                      work + n * n, work + 2 * n * n)
            for m in prange(n_states, num_threads=num_threads, schedule='static'):
                _matvec(&pr[i, 0, 0], &st[i, m, 0], &st[i + 1, m, 0], n)
    free(u)
    free(work)
    return states, props


def backward(props, costates_final, int num_threads=1):
    """Propagate co-states from T to 0 with the adjoint maps ``P_i^+``."""
    cdef const cplx[:, :, ::1] pr = np.ascontiguousarray(props, dtype=complex)
    cdef const cplx[:, ::1] sT = np.ascontiguousarray(costates_final, dtype=complex)
    cdef int nsteps = pr.shape[0]
    cdef int n_states = sT.shape[0]
    cdef int n = sT.shape[1]
    costates = np.empty((nsteps + 1, n_states, n), dtype=complex)
    cdef cplx[:, :, ::1] cs = costates
    cdef int i, m, k
    cdef int nn = n * n
    # P^+ x = conj(P)^T x: conjugate each propagator once, then plain products
    cdef cplx* pc = <cplx*>malloc(nn * sizeof(cplx))
    if pc == NULL:
        raise MemoryError()
    cs[nsteps, :, :] = sT
    with nogil:
        for i in range(nsteps - 1, -1, -1):
            for k in range(nn):
                pc[k] = (&pr[i, 0, 0])[k].conjugate()
            for m in prange(n_states, num_threads=num_threads, schedule='static'):
                _matvec_t(pc, &cs[i + 1, m, 0], &cs[i, m, 0], n)
    free(pc)
    return costates


def sweep(l0, lcs, cmts, samples, shape, double inv_lambda, double u_max,
          costates, states0, double dt, int num_threads=1):
    """One sequential Krotov sweep; returns ``(new_samples, raw_update, states, props)``."""
    cdef const cplx[:, ::1] l0v = np.ascontiguousarray(l0, dtype=complex)
    cdef const cplx[:, :, ::1] lcv = np.ascontiguousarray(lcs, dtype=complex)
    cdef const cplx[:, :, ::1] cmv = np.ascontiguousarray(cmts, dtype=complex)
    cdef const double[:, ::1] uv = np.ascontiguousarray(samples, dtype=float)
    cdef const double[::1] sv = np.ascontiguousarray(shape, dtype=float)
    cdef const cplx[:, :, ::1] cs = np.ascontiguousarray(costates, dtype=complex)
    cdef const cplx[:, ::1] s0 = np.ascontiguousarray(states0, dtype=complex)
    cdef int nc = uv.shape[0]
    cdef int nsteps = uv.shape[1]
    cdef int n_states = s0.shape[0]
    cdef int n = s0.shape[1]
    new = np.empty((nc, nsteps), dtype=float)
    raw = np.empty((nc, nsteps), dtype=float)
    states = np.empty((nsteps + 1, n_states, n), dtype=complex)
    props = np.empty((nsteps, n, n), dtype=complex)
    cdef double[:, ::1] nv = new
    cdef double[:, ::1] rv = raw
    cdef cplx[:, :, ::1] st = states
    cdef cplx[:, :, ::1] pr = props
    cdef int i, j, m, k
    cdef double grad, du, val
    cdef cplx acc
    cdef double* u = <double*>malloc((nc + 1) * sizeof(double))
    cdef cplx* work = <cplx*>malloc((3 * n * n + n) * sizeof(cplx))
    if u == NULL or work == NULL:
        free(u)
        free(work)
        raise MemoryError()
    cdef cplx* vec = work + 3 * n * n
    st[0, :, :] = s0
    cdef const cplx* lc_ptr = &lcv[0, 0, 0] if nc > 0 else NULL
    with nogil:
        for i in range(nsteps):
            for j in range(nc):
                grad = 0.0
                for m in range(n_states):
                    _matvec(&cmv[j, 0, 0], &st[i, m, 0], vec, n)
                    acc = 0.0
                    for k in range(n):
                        acc = acc + cs[i, m, k].conjugate() * vec[k]
                    grad += acc.imag
                du = sv[i] * inv_lambda * grad
                rv[j, i] = du
                val = fmin(fmax(uv[j, i] + du, -u_max), u_max)
                nv[j, i] = val
                u[j] = val
            _step(&l0v[0, 0], lc_ptr, u, nc, dt, n, work, &pr[i, 0, 0],
                  work + n * n, work + 2 * n * n)
            for m in prange(n_states, num_threads=num_threads, schedule='static'):
                _matvec(&pr[i, 0, 0], &st[i, m, 0], &st[i + 1, m, 0], n)
    free(u)
    free(work)
    return new, raw, states, props
