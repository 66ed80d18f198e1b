"""Discrete-time LQR design, the saturated control law, and the quadratic cost.

The control Riccati equation is solved by fixed-point iteration with a
residual certificate, mirroring the filter-side solver. The scheduled-gain
tables elsewhere in the package store the Medium/High design results as
literal constants; the Zero entry is a literal zero by design, not the
Q11 = 0 solution (which would retain a small velocity gain).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .statespace import StateSpaceModel, spectral_radius

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 10000
RESIDUAL_LIMIT = 1e-9


@dataclass(frozen=True)
class CostPair:
    """State cost q (symmetric PSD) and input cost r (symmetric PD)."""

    q: np.ndarray
    r: np.ndarray

    def __post_init__(self):
        q = np.atleast_2d(np.asarray(self.q, dtype=float))
        r = np.atleast_2d(np.asarray(self.r, dtype=float))
        for name, m in (("q", q), ("r", r)):
            if m.shape[0] != m.shape[1]:
                raise ValidationError(f"{name} must be square, got {m.shape}")
            if not np.allclose(m, m.T, atol=1e-12):
                raise ValidationError(f"{name} must be symmetric")
        if np.linalg.eigvalsh(q).min() < -1e-12:
            raise ValidationError("q must be positive semidefinite")
        if np.linalg.eigvalsh(r).min() <= 0:
            raise ValidationError("r must be positive definite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)


@dataclass(frozen=True)
class ControlDesign:
    k: np.ndarray
    p_riccati: np.ndarray
    closed_loop_radius: float


def default_cost(q11: float = 40.0) -> CostPair:
    """Shipped tuning: q = diag(q11, 1), r = 1; q11 is the single angle-cost knob."""
    return CostPair(q=np.diag([float(q11), 1.0]), r=np.array([[1.0]]))


def riccati_residual(model: StateSpaceModel, cost: CostPair, p: np.ndarray) -> float:
    """Frobenius norm of the control Riccati defect at p."""
    a, b = model.a, model.b
    s = b.T @ p @ b + cost.r
    defect = a.T @ p @ a - p - (a.T @ p @ b) @ np.linalg.solve(s, b.T @ p @ a) + cost.q
    return float(np.linalg.norm(defect, "fro"))


def solve_control_riccati(model: StateSpaceModel, cost: CostPair) -> np.ndarray:
    """Fixed-point solve of the control Riccati equation from P0 = q.

    Same convergence contract as the filter solver: 1e-12 step tolerance,
    10000-iteration cap, residual below 1e-9 on return.
    """
    if cost.q.shape[0] != model.n or cost.r.shape[0] != model.m:
        raise ValidationError("cost dimensions do not match the model")
    with np.errstate(over="ignore", invalid="ignore"):
        return _iterate_control(model, cost, cost.q.copy())


def _iterate_control(model, cost, p):
    a, b = model.a, model.b
    for _ in range(RICCATI_MAX_ITER):
        s = b.T @ p @ b + cost.r
        try:
            gain_term = (a.T @ p @ b) @ np.linalg.solve(s, b.T @ p @ a)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("input-weighted term became singular") from exc
        p_next = a.T @ p @ a + cost.q - gain_term
        if not np.isfinite(p_next).all():
            raise NumericalError("Riccati iteration diverged (system likely unstabilizable)")
        p_next = 0.5 * (p_next + p_next.T)
        if np.linalg.norm(p_next - p, "fro") < RICCATI_TOL:
            if riccati_residual(model, cost, p_next) >= RESIDUAL_LIMIT:
                raise NumericalError("Riccati iteration stalled above the residual limit")
            return p_next
        p = p_next
    raise NumericalError(
        f"Riccati non-convergence after {RICCATI_MAX_ITER} iterations"
    )


def control_gain(model: StateSpaceModel, p_riccati: np.ndarray, cost: CostPair) -> np.ndarray:
    """State-feedback gain K = (B' P B + R)^-1 B' P A."""
    a, b = model.a, model.b
    s = b.T @ p_riccati @ b + cost.r
    try:
        return np.linalg.solve(s, b.T @ p_riccati @ a)
    except np.linalg.LinAlgError as exc:
        # unreachable with r positive definite and p PSD; kept as a guard
        raise NumericalError("B'PB + R is singular") from exc


def design_controller(model: StateSpaceModel, cost: CostPair) -> ControlDesign:
    """Solve the Riccati equation and package gain + stability certificate."""
    p = solve_control_riccati(model, cost)
    k = control_gain(model, p, cost)
    radius = spectral_radius(model.a - model.b @ k)
    if radius >= 1.0:
        raise NumericalError(f"control closed loop not Schur stable (radius {radius:.4f})")
    return ControlDesign(k=k, p_riccati=p, closed_loop_radius=radius)


def control_law(k: np.ndarray, x_hat, u_limit: float) -> np.ndarray:
    """u = clamp(-K x, +-u_limit); a delta on the neutral ankle posture, degrees."""
    k = np.atleast_2d(np.asarray(k, dtype=float))
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    if k.shape[1] != x_hat.shape[0]:
        raise ValidationError(f"gain has {k.shape[1]} cols, state has {x_hat.shape[0]}")
    if u_limit < 0:
        raise ValidationError("u_limit must be nonnegative")
    return np.clip(-(k @ x_hat), -u_limit, u_limit)


def quadratic_cost(states, inputs, cost: CostPair) -> float:
    """Finite-trace cost: 0.5 * sum(x' Q x + u' R u)."""
    xs = np.asarray(states, dtype=float)
    us = np.asarray(inputs, dtype=float)
    if xs.ndim == 1:
        xs = xs[:, None]
    if us.ndim == 1:
        us = us[:, None]
    if len(xs) != len(us):
        raise ValidationError("state and input sequences differ in length")
    total = np.einsum("ki,ij,kj->", xs, cost.q, xs) + np.einsum("ki,ij,kj->", us, cost.r, us)
    return 0.5 * float(total)
