# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; semantic twin of ``_pure``.

The per-sample control loop spends most of its time in the fuzzy geometry and
the plant integrator, so these are the only pieces compiled. Signatures and
results must match ``_pure`` exactly (see tests/test_kernels.py).
"""

from libc.math cimport sin, NAN

import numpy as np

BACKEND = "native"


cdef inline double _mf_eval(double b1, double u1, double u2, double b2, double x) nogil:
    if x < b1 or x > b2:
        return 0.0
    if u1 <= x <= u2:
        return 1.0
    if x < u1:
        return (x - b1) / (u1 - b1)
    return (b2 - x) / (b2 - u2)


def mf_eval(double b1, double u1, double u2, double b2, double x):
    return _mf_eval(b1, u1, u2, b2, x)


def fuzzify(const double[::1] corners, Py_ssize_t n, double x):
    out_arr = np.zeros(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j
    if x <= corners[0]:
        out[0] = 1.0
        return out_arr
    if x >= corners[4 * n - 1]:
        out[n - 1] = 1.0
        return out_arr
    for i in range(n):
        j = 4 * i
        out[i] = _mf_eval(corners[j], corners[j + 1], corners[j + 2], corners[j + 3], x)
    return out_arr


def infer(const long[::1] rules0, Py_ssize_t n1, Py_ssize_t n2,
          const double[::1] deg1, const double[::1] deg2, Py_ssize_t n_out):
    out_arr = np.zeros(n_out)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double d1, v
    for i in range(n1):
        d1 = deg1[i]
        for j in range(n2):
            v = deg2[j]
            if d1 < v:
                v = d1
            k = rules0[i * n2 + j]
            if v > out[k]:
                out[k] = v
    return out_arr


cdef inline (double, double) _clipped(double b1, double u1, double u2, double b2,
                                      double h) nogil:
    cdef double x1, x2, base, roof, area, l1s, l2s, den, com
    if h <= 0.0:
        return 0.0, NAN
    if h >= 1.0 and u1 == u2:
        area = 0.5 * (b2 - b1)
        if area <= 0.0:
            return 0.0, NAN
        return area, (b1 + u1 + b2) / 3.0
    x1 = (u1 - b1) * h + b1
    x2 = (u2 - b2) * (h - 1.0) + u2
    base = b2 - b1
    roof = x2 - x1
    area = 0.5 * (base + roof) * h
    if area <= 0.0:
        return 0.0, NAN
    l1s = (x1 - b1) * (x1 - b1) + h * h
    l2s = (b2 - x2) * (b2 - x2) + h * h
    den = 6.0 * (base * base - roof * roof)
    com = b1 + 0.5 * base
    if den != 0.0:
        com += (2.0 * roof + base) * (l1s - l2s) / den
    return area, com


def clipped_shape(double b1, double u1, double u2, double b2, double h):
    cdef (double, double) r = _clipped(b1, u1, u2, b2, h)
    return r[0], r[1]


cdef inline (double, double) _intersection(double jb1, double ju1, double ju2, double jb2,
                                           double kb1, double ku1, double ku2, double kb2,
                                           double hj, double hk) nogil:
    cdef double gx, gy, m1, c1, m2, c2, roof_h, x1, x2, base, roof, area, l1s, l2s, den, com
    if jb2 <= kb1 or hj <= 0.0 or hk <= 0.0:
        return 0.0, NAN
    if ku1 == kb1:
        gx = kb1
        gy = (jb2 - gx) / (jb2 - ju2)
    else:
        m1 = 1.0 / (ku1 - kb1)
        c1 = 1.0 - m1 * ku1
        m2 = -1.0 / (jb2 - ju2)
        c2 = -m2 * jb2
        gx = (c2 - c1) / (m1 - m2)
        gy = 1.0 - (gx - ju2) / (jb2 - ju2)
    roof_h = hj if hj < hk else hk
    if roof_h >= gy:
        area = 0.5 * (jb2 - kb1) * gy
        if area <= 0.0:
            return 0.0, NAN
        return area, (kb1 + gx + jb2) / 3.0
    x1 = (ku1 - kb1) * roof_h + kb1
    x2 = (ju2 - jb2) * (roof_h - 1.0) + ju2
    base = jb2 - kb1
    roof = x2 - x1
    area = 0.5 * (base + roof) * roof_h
    if area <= 0.0:
        return 0.0, NAN
    l1s = (x1 - kb1) * (x1 - kb1) + roof_h * roof_h
    l2s = (jb2 - x2) * (jb2 - x2) + roof_h * roof_h
    den = 6.0 * (base * base - roof * roof)
    com = kb1 + 0.5 * base
    if den != 0.0:
        com += (2.0 * roof + base) * (l1s - l2s) / den
    return area, com


def intersection_shape(double jb1, double ju1, double ju2, double jb2,
                       double kb1, double ku1, double ku2, double kb2,
                       double hj, double hk):
    cdef (double, double) r = _intersection(jb1, ju1, ju2, jb2, kb1, ku1, ku2, kb2, hj, hk)
    return r[0], r[1]


def union_centroid(const double[::1] corners, Py_ssize_t n, const double[::1] y_inf):
    cdef double num = 0.0, den = 0.0
    cdef Py_ssize_t i, j
    cdef (double, double) r
    for i in range(n):
        j = 4 * i
        r = _clipped(corners[j], corners[j + 1], corners[j + 2], corners[j + 3], y_inf[i])
        if r[0] > 0.0:
            num += r[0] * r[1]
            den += r[0]
    for i in range(n - 1):
        j = 4 * i
        r = _intersection(corners[j], corners[j + 1], corners[j + 2], corners[j + 3],
                          corners[j + 4], corners[j + 5], corners[j + 6], corners[j + 7],
                          y_inf[i], y_inf[i + 1])
        if r[0] > 0.0:
            num -= r[0] * r[1]
            den -= r[0]
    return num, den


def pendulum_rk4(double theta, double omega, double ankle, double u_cmd, double dt,
                 double g_over_l, double stiff_over_i, double tau_max_over_i,
                 double damping, double inv_servo_tc, double accel_bias):
    cdef double k1t, k1o, k1a, k2t, k2o, k2a, k3t, k3o, k3a, k4t, k4o, k4a, sixth

    k1t, k1o, k1a = _deriv(theta, omega, ankle, u_cmd, g_over_l, stiff_over_i,
                           tau_max_over_i, damping, inv_servo_tc, accel_bias)
    k2t, k2o, k2a = _deriv(theta + 0.5 * dt * k1t, omega + 0.5 * dt * k1o,
                           ankle + 0.5 * dt * k1a, u_cmd, g_over_l, stiff_over_i,
                           tau_max_over_i, damping, inv_servo_tc, accel_bias)
    k3t, k3o, k3a = _deriv(theta + 0.5 * dt * k2t, omega + 0.5 * dt * k2o,
                           ankle + 0.5 * dt * k2a, u_cmd, g_over_l, stiff_over_i,
                           tau_max_over_i, damping, inv_servo_tc, accel_bias)
    k4t, k4o, k4a = _deriv(theta + dt * k3t, omega + dt * k3o,
                           ankle + dt * k3a, u_cmd, g_over_l, stiff_over_i,
                           tau_max_over_i, damping, inv_servo_tc, accel_bias)
    sixth = dt / 6.0
    return (theta + sixth * (k1t + 2.0 * k2t + 2.0 * k3t + k4t),
            omega + sixth * (k1o + 2.0 * k2o + 2.0 * k3o + k4o),
            ankle + sixth * (k1a + 2.0 * k2a + 2.0 * k3a + k4a))


cdef inline (double, double, double) _deriv(double th, double om, double al, double u_cmd,
                                            double g_over_l, double stiff_over_i,
                                            double tau_max_over_i, double damping,
                                            double inv_servo_tc, double accel_bias) nogil:
    cdef double tau = stiff_over_i * (al - th)
    if tau > tau_max_over_i:
        tau = tau_max_over_i
    elif tau < -tau_max_over_i:
        tau = -tau_max_over_i
    return (om,
            g_over_l * sin(th) + tau - damping * om + accel_bias,
            (u_cmd - al) * inv_servo_tc)
