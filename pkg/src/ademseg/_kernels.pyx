# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels; must agree with ``_pykernels`` bit for bit."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs
from libc.stdint cimport int64_t

cnp.import_array()


def window_stats(const unsigned char[:, ::1] img, int radius, bint clamp, double s_threshold):
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1]
    cdef Py_ssize_t y, x, yy, xx, sy, sx
    cdef int dy, dx
    cdef int64_t total, total_sq, n, v, center, num
    cdef int count
    mean_arr = np.empty((h, w), dtype=np.float64)
    sigma_arr = np.empty((h, w), dtype=np.float64)
    ncn_arr = np.empty((h, w), dtype=np.int32)
    cdef double[:, ::1] mean = mean_arr
    cdef double[:, ::1] sigma = sigma_arr
    cdef int[:, ::1] ncn = ncn_arr

    with nogil:
        for y in range(h):
            for x in range(w):
                center = img[y, x]
                total = 0
                total_sq = 0
                n = 0
                count = 0
                for dy in range(-radius, radius + 1):
                    yy = y + dy
                    if yy < 0 or yy >= h:
                        if not clamp:
                            continue
                        sy = 0 if yy < 0 else h - 1
                    else:
                        sy = yy
                    for dx in range(-radius, radius + 1):
                        xx = x + dx
                        if xx < 0 or xx >= w:
                            if not clamp:
                                continue
                            sx = 0 if xx < 0 else w - 1
                        else:
                            sx = xx
                        v = img[sy, sx]
                        total = total + v
                        total_sq = total_sq + v * v
                        n = n + 1
                        if (dy != 0 or dx != 0) and fabs(<double>(v - center)) < s_threshold:
                            count = count + 1
                num = n * total_sq - total * total
                mean[y, x] = <double>total / <double>n
                sigma[y, x] = sqrt(<double>num) / <double>n
                ncn[y, x] = count
    return mean_arr, sigma_arr, ncn_arr


cdef inline double _membership(double a, double b, double c, double d, double x) noexcept nogil:
    if b <= x and x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


cdef inline void _clipped(double a, double b, double c, double d, double h,
                          double* area, double* moment) noexcept nogil:
    cdef double bp, cp, la, ra, ta
    if h <= 0.0:
        area[0] = 0.0
        moment[0] = 0.0
        return
    bp = a + h * (b - a)
    cp = d - h * (d - c)
    la = 0.5 * h * (bp - a)
    ra = h * (cp - bp)
    ta = 0.5 * h * (d - cp)
    area[0] = la + ra + ta
    moment[0] = la * (a + (bp - a) * (2.0 / 3.0)) + ra * (0.5 * (bp + cp)) + ta * (cp + (d - cp) / 3.0)


def fuzzy_weights(const double[:, ::1] sigma, const double[:, ::1] ncn,
                  const double[:, ::1] sets, const double[::1] domains):
    cdef Py_ssize_t h = sigma.shape[0], w = sigma.shape[1]
    cdef Py_ssize_t y, x
    cdef double s, q, s_small, s_great, n_small, n_mod, n_great
    cdef double d_small, d_great, a1, m1, a2, m2, t1, t2
    p_arr = np.empty((h, w), dtype=np.float64)
    ds_arr = np.empty((h, w), dtype=np.float64)
    dg_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] p = p_arr
    cdef double[:, ::1] ds = ds_arr
    cdef double[:, ::1] dg = dg_arr
    cdef double sig_lo = domains[0], sig_hi = domains[1]
    cdef double ncn_lo = domains[2], ncn_hi = domains[3]

    with nogil:
        for y in range(h):
            for x in range(w):
                s = sigma[y, x]
                if s < sig_lo:
                    s = sig_lo
                elif s > sig_hi:
                    s = sig_hi
                q = ncn[y, x]
                if q < ncn_lo:
                    q = ncn_lo
                elif q > ncn_hi:
                    q = ncn_hi
                s_small = _membership(sets[0, 0], sets[0, 1], sets[0, 2], sets[0, 3], s)
                s_great = _membership(sets[1, 0], sets[1, 1], sets[1, 2], sets[1, 3], s)
                n_small = _membership(sets[2, 0], sets[2, 1], sets[2, 2], sets[2, 3], q)
                n_mod = _membership(sets[3, 0], sets[3, 1], sets[3, 2], sets[3, 3], q)
                n_great = _membership(sets[4, 0], sets[4, 1], sets[4, 2], sets[4, 3], q)
                t1 = s_great if s_great < n_great else n_great
                t2 = s_great if s_great < n_mod else n_mod
                d_small = t1 if t1 > t2 else t2
                t1 = s_great if s_great < n_small else n_small
                d_great = s_small if s_small > t1 else t1
                _clipped(sets[5, 0], sets[5, 1], sets[5, 2], sets[5, 3], d_small, &a1, &m1)
                _clipped(sets[6, 0], sets[6, 1], sets[6, 2], sets[6, 3], d_great, &a2, &m2)
                if a1 + a2 > 0.0:
                    p[y, x] = (m1 + m2) / (a1 + a2)
                else:
                    p[y, x] = 0.5
                ds[y, x] = d_small
                dg[y, x] = d_great
    return p_arr, ds_arr, dg_arr
