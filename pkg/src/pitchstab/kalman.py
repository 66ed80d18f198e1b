"""Steady-state discrete Kalman filter design and per-step estimation.

The filter runs the predictor form with a fixed precomputed gain: the robot's
loop cannot afford (and does not need) time-varying covariance propagation.
The filter Riccati equation is solved by fixed-point iteration; the returned
solution always carries a residual certificate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError, ValidationError
from .statespace import StateSpaceModel, spectral_radius

RICCATI_TOL = 1e-12
RICCATI_MAX_ITER = 10000
RESIDUAL_LIMIT = 1e-9


def _check_symmetric(mat: np.ndarray, name: str) -> np.ndarray:
    m = np.atleast_2d(np.asarray(mat, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"{name} must be square, got {m.shape}")
    if not np.allclose(m, m.T, atol=1e-12):
        raise ValidationError(f"{name} must be symmetric")
    return m


@dataclass(frozen=True)
class CovariancePair:
    """Process-noise covariance vd (PSD) and measurement-noise covariance vn (PD)."""

    vd: np.ndarray
    vn: np.ndarray

    def __post_init__(self):
        vd = _check_symmetric(self.vd, "vd")
        vn = _check_symmetric(self.vn, "vn")
        if np.linalg.eigvalsh(vd).min() < -1e-12:
            raise ValidationError("vd must be positive semidefinite")
        if np.linalg.eigvalsh(vn).min() <= 0:
            raise ValidationError("vn must be positive definite")
        object.__setattr__(self, "vd", vd)
        object.__setattr__(self, "vn", vn)


@dataclass(frozen=True)
class FilterDesign:
    kf: np.ndarray
    p_riccati: np.ndarray
    closed_loop_radius: float


def default_covariances(vn22: float = 35.0) -> CovariancePair:
    """Shipped tuning: vd = I and vn = diag(1e-6, vn22).

    The angle channel of the IMU is trusted almost completely; vn22 is the
    single knob for how much the noisy gyro channel is trusted. Larger vn22
    shifts trust toward the model.
    """
    return CovariancePair(vd=np.eye(2), vn=np.diag([1e-6, float(vn22)]))


def riccati_residual(model: StateSpaceModel, cov: CovariancePair, p: np.ndarray) -> float:
    """Frobenius norm of the filter Riccati defect at p."""
    a, c = model.a, model.c
    s = cov.vn + c @ p @ c.T
    rhs = a @ p @ a.T + cov.vd - (a @ p @ c.T) @ np.linalg.solve(s, c @ p @ a.T)
    return float(np.linalg.norm(rhs - p, "fro"))


def solve_filter_riccati(model: StateSpaceModel, cov: CovariancePair) -> np.ndarray:
    """Fixed-point solve of the filter Riccati equation from P0 = vd.

    Iterates P <- A P A' + Vd - A P C' (Vn + C P C')^-1 C P A' until
    successive iterates differ by less than 1e-12 (Frobenius), capped at
    10000 sweeps. Non-convergence is the detectability failure detector.
    """
    if cov.vd.shape[0] != model.n or cov.vn.shape[0] != model.p:
        raise ValidationError("covariance dimensions do not match the model")
    with np.errstate(over="ignore", invalid="ignore"):
        return _iterate_filter(model, cov, cov.vd.copy())


def _iterate_filter(model, cov, p):
    a, c = model.a, model.c
    for _ in range(RICCATI_MAX_ITER):
        s = cov.vn + c @ p @ c.T
        try:
            gain_term = (a @ p @ c.T) @ np.linalg.solve(s, c @ p @ a.T)
        except np.linalg.LinAlgError as exc:
            raise NumericalError("innovation covariance became singular") from exc
        p_next = a @ p @ a.T + cov.vd - gain_term
        if not np.isfinite(p_next).all():
            raise NumericalError("Riccati iteration diverged (system likely undetectable)")
        p_next = 0.5 * (p_next + p_next.T)
        if np.linalg.norm(p_next - p, "fro") < RICCATI_TOL:
            if riccati_residual(model, cov, p_next) >= RESIDUAL_LIMIT:
                raise NumericalError("Riccati iteration stalled above the residual limit")
            return p_next
        p = p_next
    raise NumericalError(
        f"Riccati non-convergence after {RICCATI_MAX_ITER} iterations"
    )


def filter_gain(model: StateSpaceModel, p_riccati: np.ndarray, cov: CovariancePair) -> np.ndarray:
    """Steady-state gain Kf = A P C' (Vn + C P C')^-1."""
    a, c = model.a, model.c
    s = cov.vn + c @ p_riccati @ c.T
    try:
        return a @ p_riccati @ c.T @ np.linalg.inv(s)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("innovation covariance is singular") from exc


def design_filter(model: StateSpaceModel, cov: CovariancePair) -> FilterDesign:
    """Solve the Riccati equation and package gain + stability certificate."""
    p = solve_filter_riccati(model, cov)
    kf = filter_gain(model, p, cov)
    radius = spectral_radius(model.a - kf @ model.c)
    if radius >= 1.0:
        raise NumericalError(f"estimator closed loop not Schur stable (radius {radius:.4f})")
    return FilterDesign(kf=kf, p_riccati=p, closed_loop_radius=radius)


def filter_step(design: FilterDesign, model: StateSpaceModel, x_hat, u, y) -> np.ndarray:
    """Predictor update: x[k+1] = A x + B u + Kf (y - C x)."""
    x_hat = np.asarray(x_hat, dtype=float).reshape(-1)
    u = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not (np.isfinite(x_hat).all() and np.isfinite(u).all() and np.isfinite(y).all()):
        raise ValidationError("filter_step inputs must be finite")
    innovation = y - model.c @ x_hat
    return model.a @ x_hat + model.b @ u + design.kf @ innovation
