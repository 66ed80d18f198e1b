"""Shared fixtures and the numeric union-centroid oracle used across tests."""

import numpy as np
import pytest

from pitchstab.fuzzy import MFPartition, TrapezoidMF

trapezoid = getattr(np, "trapezoid", None) or np.trapz  # numpy < 2 fallback


@pytest.fixture
def table1_model():
    from pitchstab.statespace import identified_model

    return identified_model()


@pytest.fixture
def default_sched():
    from pitchstab.fuzzy import default_scheduler

    return default_scheduler()


def numeric_union_centroid(mfs, y_inf, dx=1e-4):
    """Grid-based centroid of the union of clipped memberships.

    Independent of the analytic geometry: evaluates every membership on a
    uniform grid, clips, takes the pointwise max, and integrates with the
    trapezoid rule. Returns (area, centroid); centroid is nan for zero area.
    """
    corners = [(mf.b1, mf.u1, mf.u2, mf.b2) if isinstance(mf, TrapezoidMF) else tuple(mf)
               for mf in mfs]
    lo = min(c[0] for c in corners)
    hi = max(c[3] for c in corners)
    if hi <= lo:
        return 0.0, float("nan")
    xs = np.arange(lo, hi + dx, dx)
    union = np.zeros_like(xs)
    for (b1, u1, u2, b2), h in zip(corners, y_inf):
        if h <= 0.0:
            continue
        rise = np.ones_like(xs) if u1 == b1 else (xs - b1) / (u1 - b1)
        fall = np.ones_like(xs) if b2 == u2 else (b2 - xs) / (b2 - u2)
        mu = np.minimum(np.minimum(rise, fall), 1.0)
        mu[(xs < b1) | (xs > b2)] = 0.0
        np.maximum(union, np.minimum(mu, h), out=union)
    area = float(trapezoid(union, xs))
    if area <= 0.0:
        return 0.0, float("nan")
    centroid = float(trapezoid(xs * union, xs) / area)
    return area, centroid


def random_partition(rng, min_mfs=2, max_mfs=5, span=4.0):
    """Random partition satisfying the ramp-confined adjacency contract.

    Walks left to right: each membership may overlap its predecessor only on
    the facing ramps. Mixes triangles, trapezoids and zero-width ramps.
    """
    n = int(rng.integers(min_mfs, max_mfs + 1))
    mfs = []
    prev = None
    cursor = float(rng.uniform(-span, 0.0))
    for _ in range(n):
        if prev is None:
            b1 = cursor
        elif rng.random() < 0.7:
            b1 = float(rng.uniform(prev.u2, prev.b2))
        else:
            b1 = prev.b2 + float(rng.uniform(0.0, 0.4))
        floor = prev.b2 if prev is not None else b1
        if rng.random() < 0.2 and b1 >= floor:
            u1 = b1
        else:
            u1 = max(b1, floor) + float(rng.uniform(0.01, 0.8))
        u2 = u1 if rng.random() < 0.5 else u1 + float(rng.uniform(0.0, 0.8))
        b2 = u2 + float(rng.uniform(0.05, 1.2))
        mf = TrapezoidMF(b1, u1, u2, b2)
        mfs.append(mf)
        prev = mf
    return MFPartition(name="random", units="x", mfs=tuple(mfs))


def random_activation(rng, n):
    """Inference vector mixing exact 0, exact 1 and interior clip levels."""
    choices = rng.random(n)
    y = np.where(choices < 0.25, 0.0, np.where(choices > 0.8, 1.0, rng.random(n)))
    return y.astype(float)
