# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels; contract identical to _kernels_py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt, fabs, fmax, fmin

cnp.import_array()


cdef inline double _F_node(double* v, int m, double lp, double lm, double q) nogil:
    cdef double sp = 0.0, sm = 0.0, x
    cdef int k
    for k in range(m):
        x = v[k]
        if x > 0.0:
            sp += x * x
        elif x < 0.0:
            sm += x * x
    sp = sqrt(sp)
    sm = sqrt(sm)
    cdef double out = 0.0
    if sp > 0.0:
        out += lp * pow(sp, q + 1.0)
    if sm > 0.0:
        out += lm * pow(sm, q + 1.0)
    return out / (1.0 + q)


cdef inline void _f_node(double* v, int m, double lp, double lm, double q,
                         double* out) nogil:
    cdef double sp = 0.0, sm = 0.0, x, cp = 0.0, cm = 0.0
    cdef int k
    for k in range(m):
        x = v[k]
        if x > 0.0:
            sp += x * x
        elif x < 0.0:
            sm += x * x
    sp = sqrt(sp)
    sm = sqrt(sm)
    if sp > 0.0:
        cp = lp * pow(sp, q - 1.0)
    if sm > 0.0:
        cm = lm * pow(sm, q - 1.0)
    for k in range(m):
        x = v[k]
        out[k] = 0.0
        if x > 0.0:
            out[k] = cp * x
        elif x < 0.0:
            out[k] = cm * x   # -(cm * (-x)) for the negative part


def energy(cnp.ndarray v, cnp.ndarray lamp, cnp.ndarray lamm, double q, double h):
    v = np.ascontiguousarray(v, dtype=np.float64)
    lamp = np.ascontiguousarray(lamp, dtype=np.float64)
    lamm = np.ascontiguousarray(lamm, dtype=np.float64)
    if v.ndim == 3:
        return _energy_2d(v, lamp, lamm, q, h)
    if v.ndim == 4:
        return _energy_3d(v, lamp, lamm, q, h)
    raise ValueError("expected dims + (m,) array")


cdef double _energy_2d(double[:, :, ::1] v, double[:, ::1] lamp, double[:, ::1] lamm,
                       double q, double h):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], m = v.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double dirich = 0.0, fsum = 0.0, d
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for k in range(m):
                    if i + 1 < nx:
                        d = v[i + 1, j, k] - v[i, j, k]
                        dirich += d * d
                    if j + 1 < ny:
                        d = v[i, j + 1, k] - v[i, j, k]
                        dirich += d * d
                fsum += _F_node(&v[i, j, 0], m, lamp[i, j], lamm[i, j], q)
    return (dirich / (h * h) + 2.0 * fsum) * h * h


cdef double _energy_3d(double[:, :, :, ::1] v, double[:, :, ::1] lamp,
                       double[:, :, ::1] lamm, double q, double h):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2], m = v.shape[3]
    cdef Py_ssize_t i, j, l, k
    cdef double dirich = 0.0, fsum = 0.0, d
    with nogil:
        for i in range(nx):
            for j in range(ny):
                for l in range(nz):
                    for k in range(m):
                        if i + 1 < nx:
                            d = v[i + 1, j, l, k] - v[i, j, l, k]
                            dirich += d * d
                        if j + 1 < ny:
                            d = v[i, j + 1, l, k] - v[i, j, l, k]
                            dirich += d * d
                        if l + 1 < nz:
                            d = v[i, j, l + 1, k] - v[i, j, l, k]
                            dirich += d * d
                    fsum += _F_node(&v[i, j, l, 0], m, lamp[i, j, l], lamm[i, j, l], q)
    return (dirich / (h * h) + 2.0 * fsum) * h * h * h


def residual(cnp.ndarray v, cnp.ndarray lamp, cnp.ndarray lamm, double q, double h):
    v = np.ascontiguousarray(v, dtype=np.float64)
    lamp = np.ascontiguousarray(lamp, dtype=np.float64)
    lamm = np.ascontiguousarray(lamm, dtype=np.float64)
    out = np.zeros_like(v)
    if v.ndim == 3:
        _residual_2d(v, lamp, lamm, q, h, out)
    elif v.ndim == 4:
        _residual_3d(v, lamp, lamm, q, h, out)
    else:
        raise ValueError("expected dims + (m,) array")
    return out


cdef void _residual_2d(double[:, :, ::1] v, double[:, ::1] lamp, double[:, ::1] lamm,
                       double q, double h, double[:, :, ::1] out):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], m = v.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double h2 = h * h
    cdef double fv[16]
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                _f_node(&v[i, j, 0], <int>m, lamp[i, j], lamm[i, j], q, fv)
                for k in range(m):
                    out[i, j, k] = -(v[i + 1, j, k] + v[i - 1, j, k]
                                     + v[i, j + 1, k] + v[i, j - 1, k]
                                     - 4.0 * v[i, j, k]) / h2 + fv[k]


cdef void _residual_3d(double[:, :, :, ::1] v, double[:, :, ::1] lamp,
                       double[:, :, ::1] lamm, double q, double h,
                       double[:, :, :, ::1] out):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2], m = v.shape[3]
    cdef Py_ssize_t i, j, l, k
    cdef double h2 = h * h
    cdef double fv[16]
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for l in range(1, nz - 1):
                    _f_node(&v[i, j, l, 0], <int>m, lamp[i, j, l], lamm[i, j, l], q, fv)
                    for k in range(m):
                        out[i, j, l, k] = -(v[i + 1, j, l, k] + v[i - 1, j, l, k]
                                            + v[i, j + 1, l, k] + v[i, j - 1, l, k]
                                            + v[i, j, l + 1, k] + v[i, j, l - 1, k]
                                            - 6.0 * v[i, j, l, k]) / h2 + fv[k]


cdef inline double _node_solve(double s, double lp, double lm, double q,
                               double h2, double two_n) nogil:
    # solve two_n*w + h2*(lp*max(w,0)^q - lm*max(-w,0)^q) = s
    cdef double w = s / two_n
    cdef double lo = -fabs(s) / two_n - 1.0
    cdef double hi = fabs(s) / two_n + 1.0
    cdef double phi, dphi, wn, mag
    cdef int it
    for it in range(80):
        if w > 0.0:
            phi = two_n * w + h2 * lp * pow(w, q) - s
        elif w < 0.0:
            phi = two_n * w - h2 * lm * pow(-w, q) - s
        else:
            phi = -s
        if phi > 0.0:
            hi = fmin(hi, w)
        elif phi < 0.0:
            lo = fmax(lo, w)
        else:
            return w
        mag = fabs(w)
        if mag < 1e-300:
            mag = 1e-300
        if w >= 0.0:
            dphi = two_n + h2 * q * lp * pow(mag, q - 1.0)
        else:
            dphi = two_n + h2 * q * lm * pow(mag, q - 1.0)
        wn = w - phi / dphi
        if wn <= lo or wn >= hi or wn != wn:
            wn = 0.5 * (lo + hi)
        if fabs(wn - w) <= 1e-300 + 1e-16 * fabs(w):
            return wn
        w = wn
    return w


def jacobi_sweep(cnp.ndarray v, cnp.ndarray lamp, cnp.ndarray lamm, double q,
                 double h, double omega):
    if v.dtype != np.float64 or not v.flags.c_contiguous:
        raise ValueError("jacobi_sweep needs a contiguous float64 array")
    lamp = np.ascontiguousarray(lamp, dtype=np.float64)
    lamm = np.ascontiguousarray(lamm, dtype=np.float64)
    if v.shape[v.ndim - 1] != 1:
        raise ValueError("jacobi_sweep requires m == 1")
    if v.ndim == 3:
        _jacobi_2d(v, lamp, lamm, q, h, omega)
    elif v.ndim == 4:
        _jacobi_3d(v, lamp, lamm, q, h, omega)
    else:
        raise ValueError("expected dims + (1,) array")
    return v


cdef void _jacobi_2d(double[:, :, ::1] v, double[:, ::1] lamp, double[:, ::1] lamm,
                     double q, double h, double omega):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1]
    cdef Py_ssize_t i, j
    cdef double h2 = h * h, s, w
    new = np.empty((nx - 2, ny - 2))
    cdef double[:, ::1] nv = new
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                s = v[i + 1, j, 0] + v[i - 1, j, 0] + v[i, j + 1, 0] + v[i, j - 1, 0]
                nv[i - 1, j - 1] = _node_solve(s, lamp[i, j], lamm[i, j], q, h2, 4.0)
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                v[i, j, 0] = (1.0 - omega) * v[i, j, 0] + omega * nv[i - 1, j - 1]


cdef void _jacobi_3d(double[:, :, :, ::1] v, double[:, :, ::1] lamp,
                     double[:, :, ::1] lamm, double q, double h, double omega):
    cdef Py_ssize_t nx = v.shape[0], ny = v.shape[1], nz = v.shape[2]
    cdef Py_ssize_t i, j, l
    cdef double h2 = h * h, s
    new = np.empty((nx - 2, ny - 2, nz - 2))
    cdef double[:, :, ::1] nv = new
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for l in range(1, nz - 1):
                    s = (v[i + 1, j, l, 0] + v[i - 1, j, l, 0]
                         + v[i, j + 1, l, 0] + v[i, j - 1, l, 0]
                         + v[i, j, l + 1, 0] + v[i, j, l - 1, 0])
                    nv[i - 1, j - 1, l - 1] = _node_solve(
                        s, lamp[i, j, l], lamm[i, j, l], q, h2, 6.0)
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for l in range(1, nz - 1):
                    v[i, j, l, 0] = ((1.0 - omega) * v[i, j, l, 0]
                                     + omega * nv[i - 1, j - 1, l - 1])
