# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: fused CSR Chebyshev recurrence, Miller Bessel recurrence, RK4 spin-field stepping.

Semantics match ``dickecr._fallback`` exactly; see the Python versions for the
algorithm descriptions.
"""

import numpy as np
from libc.math cimport fabs, cos, sin, sqrt



cdef inline void _matvec_real(const long long* indptr, const int* indices, const double* d,
                              const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, p, col
    cdef double ar, ai, v
    for i in range(n):
        ar = 0.0
        ai = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            col = 2 * indices[p]
            v = d[p]
            ar += v * x[col]
            ai += v * x[col + 1]
        y[2 * i] = ar
        y[2 * i + 1] = ai


cdef inline void _matvec_complex(const long long* indptr, const int* indices, const double* d,
                                 const double* x, double* y, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, p, col
    cdef double ar, ai, vr, vi, xr, xi
    for i in range(n):
        ar = 0.0
        ai = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            col = 2 * indices[p]
            vr = d[2 * p]
            vi = d[2 * p + 1]
            xr = x[col]
            xi = x[col + 1]
            ar += vr * xr - vi * xi
            ai += vr * xi + vi * xr
        y[2 * i] = ar
        y[2 * i + 1] = ai


def chebyshev_series(const long long[::1] indptr, const int[::1] indices, data,
                     psi, coeffs, double scale, double shift):
    """Return sum_k coeffs[k] T_k((H - shift)/scale) psi.

    ``data`` may be real (float64) or complex (complex128); real Hamiltonians
    take a cheaper inner loop. Vectors are handled as interleaved (re, im)
    doubles.
    """
    cdef Py_ssize_t n = indptr.shape[0] - 1
    psi_c = np.ascontiguousarray(psi, dtype=np.complex128)
    coeffs_c = np.ascontiguousarray(coeffs, dtype=np.complex128)
    cdef Py_ssize_t nc = coeffs_c.shape[0]
    cdef bint real_h = np.asarray(data).dtype.kind == "f"
    if real_h:
        d_arr = np.ascontiguousarray(data, dtype=np.float64)
    else:
        d_arr = np.ascontiguousarray(data, dtype=np.complex128).view(np.float64)
    cdef const double[::1] dv = d_arr
    out_arr = np.empty(n, dtype=np.complex128)
    work = np.zeros((3, 2 * n), dtype=np.float64)
    work[0] = psi_c.view(np.float64)
    cdef double[::1] outv = out_arr.view(np.float64)
    cdef double[:, ::1] wv = work
    cdef const double[::1] cf = coeffs_c.view(np.float64)

    cdef double* out = &outv[0]
    cdef double* prev = &wv[0, 0]
    cdef double* cur = &wv[1, 0]
    cdef double* hx = &wv[2, 0]
    cdef double* tmp
    cdef double* src
    cdef const long long* ip = &indptr[0]
    cdef const int* ix = &indices[0] if indices.shape[0] else NULL
    cdef const double* dp = &dv[0] if dv.shape[0] else NULL
    cdef double inv = 1.0 / scale
    cdef double cr, ci, tr, ti
    cdef Py_ssize_t i, k, m2 = 2 * n

    cr = cf[0]
    ci = cf[1]
    for i in range(n):
        out[2 * i] = cr * prev[2 * i] - ci * prev[2 * i + 1]
        out[2 * i + 1] = cr * prev[2 * i + 1] + ci * prev[2 * i]
    if nc == 1:
        return out_arr
    with nogil:
        for k in range(1, nc):
            src = prev if k == 1 else cur
            if real_h:
                _matvec_real(ip, ix, dp, src, hx, n)
            else:
                _matvec_complex(ip, ix, dp, src, hx, n)
            cr = cf[2 * k]
            ci = cf[2 * k + 1]
            if k == 1:
                for i in range(m2):
                    cur[i] = (hx[i] - shift * prev[i]) * inv
                tmp = cur
            else:
                # T_k = 2 Ht T_{k-1} - T_{k-2}, stored over T_{k-2}
                for i in range(m2):
                    prev[i] = 2.0 * (hx[i] - shift * cur[i]) * inv - prev[i]
                tmp = prev
                prev = cur
                cur = tmp
            for i in range(n):
                tr = tmp[2 * i]
                ti = tmp[2 * i + 1]
                out[2 * i] += cr * tr - ci * ti
                out[2 * i + 1] += cr * ti + ci * tr
    return out_arr


cdef double SMALL_ARG = 1e-5


def bessel_j_sequence(double x, int n):
    """J_0(x) .. J_n(x) by normalized downward (Miller) recurrence, x >= 0."""
    cdef Py_ssize_t k, i, start
    cdef double big = 1e250, bj, bjp, bjm, norm, ax = fabs(x)
    res_arr = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] res = res_arr
    cdef double term, q
    if ax < SMALL_ARG:
        # two-term power series; the recurrence would overflow at tiny x
        q = 0.25 * ax * ax
        term = 1.0
        for k in range(n + 1):
            res[k] = term * (1.0 - q / (k + 1))
            term *= 0.5 * ax / (k + 1)
        return res_arr
    start = _start_order(ax, n)
    bjp = 0.0
    bj = 1e-300
    norm = 0.0
    for k in range(start, 0, -1):
        # J_{k-1} = (2k/x) J_k - J_{k+1}
        bjm = (2.0 * k / ax) * bj - bjp
        bjp = bj
        bj = bjm
        if k - 1 <= n:
            res[k - 1] = bj
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm += 2.0 * bj
        if fabs(bj) > big:
            bj /= big
            bjp /= big
            norm /= big
            for i in range(min(n, k - 1), n + 1):
                res[i] /= big
    norm += bj
    for i in range(n + 1):
        res[i] /= norm
    return res_arr


cdef Py_ssize_t _start_order(double x, int n):
    cdef double top = x if x > n else n
    cdef Py_ssize_t s = <Py_ssize_t>(top + 40.0 + 12.0 * top ** (1.0 / 3.0))
    if s % 2:
        s += 1
    return s


cdef inline void _spin_field_rhs(double t, const double* y, double* dy, double delta, double omega,
                                 double lam, double a0r, double a0i, int driven) noexcept nogil:
    cdef double bx, ar, ai, c, s
    if driven:
        c = cos(omega * t)
        s = sin(omega * t)
        ar = a0r * c + a0i * s
        ai = a0i * c - a0r * s
        # free field, no back-reaction
        dy[3] = omega * y[4]
        dy[4] = -omega * y[3]
    else:
        ar = y[3]
        ai = y[4]
        # i d(alpha)/dt = omega alpha + lam Jx
        dy[3] = omega * ai
        dy[4] = -(omega * ar + lam * y[0])
    bx = 2.0 * lam * ar
    # dJ/dt = B x J with B = (bx, 0, -delta)
    dy[0] = delta * y[1]
    dy[1] = -delta * y[0] - bx * y[2]
    dy[2] = bx * y[1]


def rk4_spin_field(double[::1] y0, double delta, double omega, double lam, double a0r, double a0i,
                   bint driven, double dt, long n_steps, long stride):
    """Fixed-step RK4 of the SCA (driven=False) or driven-atom (driven=True) equations.

    State layout (Jx, Jy, Jz, Re alpha, Im alpha). Returns the states at steps
    0, stride, 2*stride, ... as an array of shape (n_records, 5).
    """
    cdef long n_rec = n_steps // stride + 1
    out_arr = np.empty((n_rec, 5), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double y[5]
    cdef double k1[5]
    cdef double k2[5]
    cdef double k3[5]
    cdef double k4[5]
    cdef double tmp[5]
    cdef long step, r = 0
    cdef int i
    cdef double t, h2 = 0.5 * dt
    for i in range(5):
        y[i] = y0[i]
        out[0, i] = y[i]
    r = 1
    with nogil:
        for step in range(n_steps):
            t = step * dt
            _spin_field_rhs(t, y, k1, delta, omega, lam, a0r, a0i, driven)
            for i in range(5):
                tmp[i] = y[i] + h2 * k1[i]
            _spin_field_rhs(t + h2, tmp, k2, delta, omega, lam, a0r, a0i, driven)
            for i in range(5):
                tmp[i] = y[i] + h2 * k2[i]
            _spin_field_rhs(t + h2, tmp, k3, delta, omega, lam, a0r, a0i, driven)
            for i in range(5):
                tmp[i] = y[i] + dt * k3[i]
            _spin_field_rhs(t + dt, tmp, k4, delta, omega, lam, a0r, a0i, driven)
            for i in range(5):
                y[i] = y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
            if (step + 1) % stride == 0:
                for i in range(5):
                    out[r, i] = y[i]
                r += 1
    return out_arr
