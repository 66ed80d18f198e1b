"""Pure-Python hot kernels: trapezoid geometry, max-min inference, pendulum RK4.

This is the fallback twin of the compiled module ``_native``. Both expose the
same functions with identical semantics; ``_kernels/__init__`` picks one at
import time. Keep the two implementations in lockstep (tests/test_kernels.py
checks them against each other).
"""

import math

import numpy as np

BACKEND = "pure"


def mf_eval(b1, u1, u2, b2, x):
    """Trapezoid membership degree at x.

    Zero outside [b1, b2], 1 on the core [u1, u2], linear on the ramps. A
    zero-width ramp (b1 == u1 or u2 == b2) takes the core value at its corner.
    """
    if x < b1 or x > b2:
        return 0.0
    if u1 <= x <= u2:
        return 1.0
    if x < u1:
        return (x - b1) / (u1 - b1)
    return (b2 - x) / (b2 - u2)


def fuzzify(corners, n, x):
    """Degrees of all n memberships at x, saturating outside the hull.

    ``corners`` is a flat (b1, u1, u2, b2) * n float64 array. At or beyond the
    hull edges the outermost membership is fully active so the result is never
    the all-zero vector for covering partitions.
    """
    out = np.zeros(n)
    if x <= corners[0]:
        out[0] = 1.0
        return out
    if x >= corners[4 * n - 1]:
        out[n - 1] = 1.0
        return out
    for i in range(n):
        j = 4 * i
        out[i] = mf_eval(corners[j], corners[j + 1], corners[j + 2], corners[j + 3], x)
    return out


def infer(rules0, n1, n2, deg1, deg2, n_out):
    """Max-min composition: y[k] = max over cells mapping to k of min(d1, d2).

    ``rules0`` is the flattened n1 x n2 rule grid with 0-based output indices.
    """
    out = np.zeros(n_out)
    for i in range(n1):
        d1 = deg1[i]
        row = i * n2
        for j in range(n2):
            v = deg2[j]
            if d1 < v:
                v = d1
            k = rules0[row + j]
            if v > out[k]:
                out[k] = v
    return out


def clipped_shape(b1, u1, u2, b2, h):
    """Area and x-centroid of a trapezoid membership clipped at height h.

    Returns (0.0, nan) for an empty shape. Full-height triangles use the
    base/2 and corner-average formulas; everything else is the generic
    clipped-trapezoid geometry (legs from the ramp intersections at y = h,
    centroid from the trapezoid centroid identity).
    """
    if h <= 0.0:
        return 0.0, math.nan
    if h >= 1.0 and u1 == u2:
        area = 0.5 * (b2 - b1)
        if area <= 0.0:
            return 0.0, math.nan
        return area, (b1 + u1 + b2) / 3.0
    x1 = (u1 - b1) * h + b1
    x2 = (u2 - b2) * (h - 1.0) + u2
    base = b2 - b1
    roof = x2 - x1
    area = 0.5 * (base + roof) * h
    if area <= 0.0:
        return 0.0, math.nan
    l1s = (x1 - b1) * (x1 - b1) + h * h
    l2s = (b2 - x2) * (b2 - x2) + h * h
    den = 6.0 * (base * base - roof * roof)
    com = b1 + 0.5 * base
    if den != 0.0:
        com += (2.0 * roof + base) * (l1s - l2s) / den
    return area, com


def intersection_shape(jb1, ju1, ju2, jb2, kb1, ku1, ku2, kb2, hj, hk):
    """Area and x-centroid of the overlap of two adjacent clipped memberships.

    Membership j must precede membership k and overlap it only on the facing
    ramps (falling ramp of j against rising ramp of k). The overlap of the
    unclipped pair is then the triangle with base [kb1, jb2] and apex G; the
    clip at min(hj, hk) either keeps the whole triangle or cuts a trapezoid.
    """
    if jb2 <= kb1 or hj <= 0.0 or hk <= 0.0:
        return 0.0, math.nan
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
            return 0.0, math.nan
        return area, (kb1 + gx + jb2) / 3.0
    x1 = (ku1 - kb1) * roof_h + kb1
    x2 = (ju2 - jb2) * (roof_h - 1.0) + ju2
    base = jb2 - kb1
    roof = x2 - x1
    area = 0.5 * (base + roof) * roof_h
    if area <= 0.0:
        return 0.0, math.nan
    l1s = (x1 - kb1) * (x1 - kb1) + roof_h * roof_h
    l2s = (jb2 - x2) * (jb2 - x2) + roof_h * roof_h
    den = 6.0 * (base * base - roof * roof)
    com = kb1 + 0.5 * base
    if den != 0.0:
        com += (2.0 * roof + base) * (l1s - l2s) / den
    return area, com


def union_centroid(corners, n, y_inf):
    """Moment and area of the clipped-membership union by inclusion-exclusion.

    Returns (numerator, denominator) of the union centroid: individual clipped
    shapes summed, adjacent pairwise intersections subtracted. The caller
    decides what a near-zero denominator means.
    """
    num = 0.0
    den = 0.0
    for i in range(n):
        j = 4 * i
        area, com = clipped_shape(
            corners[j], corners[j + 1], corners[j + 2], corners[j + 3], y_inf[i]
        )
        if area > 0.0:
            num += area * com
            den += area
    for i in range(n - 1):
        j = 4 * i
        area, com = intersection_shape(
            corners[j], corners[j + 1], corners[j + 2], corners[j + 3],
            corners[j + 4], corners[j + 5], corners[j + 6], corners[j + 7],
            y_inf[i], y_inf[i + 1],
        )
        if area > 0.0:
            num -= area * com
            den -= area
    return num, den


def pendulum_rk4(theta, omega, ankle, u_cmd, dt, g_over_l, stiff_over_i,
                 tau_max_over_i, damping, inv_servo_tc, accel_bias):
    """One fixed-step RK4 update of the ankle-servo inverted pendulum.

    All angles in radians. The ankle joint tracks u_cmd through a first-order
    lag; the joint applies a position-servo torque stiff_over_i * (ankle -
    theta), saturated at +-tau_max_over_i (both already divided by the body
    inertia).
    """

    def _deriv(th, om, al):
        tau = stiff_over_i * (al - th)
        if tau > tau_max_over_i:
            tau = tau_max_over_i
        elif tau < -tau_max_over_i:
            tau = -tau_max_over_i
        return (
            om,
            g_over_l * math.sin(th) + tau - damping * om + accel_bias,
            (u_cmd - al) * inv_servo_tc,
        )

    k1 = _deriv(theta, omega, ankle)
    k2 = _deriv(theta + 0.5 * dt * k1[0], omega + 0.5 * dt * k1[1], ankle + 0.5 * dt * k1[2])
    k3 = _deriv(theta + 0.5 * dt * k2[0], omega + 0.5 * dt * k2[1], ankle + 0.5 * dt * k2[2])
    k4 = _deriv(theta + dt * k3[0], omega + dt * k3[1], ankle + dt * k3[2])
    sixth = dt / 6.0
    return (
        theta + sixth * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        omega + sixth * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ankle + sixth * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
    )
