"""Non-recursive least-squares identification of a discrete state-space model.

Works on full-state measurements (C = I): each logged sample pair gives one
regression row [x_k, u_k] with target x_{k+1}, and the stacked system is
solved in one shot. Model fit is scored with the VAF percentage.

Note on VAF: the formula is a ratio of raw second moments, not mean-removed
variances, despite the name. It is implemented as printed, so vaf(y, 2*y) = 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientExcitationError, ValidationError
from .statespace import StateSpaceModel, TimeSeries

RCOND_FLOOR = 1e-12
JITTER_TOLERANCE = 0.01


@dataclass(frozen=True)
class RegressionSystem:
    """Stacked least-squares problem: psi (N x (n+m)) against y (N x n).

    The container accepts any N >= 1 (a 2-sample log gives one row);
    solvability (N >= n+m plus conditioning) is enforced by identify.
    """

    psi: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        if len(self.psi) != len(self.y):
            raise ValidationError("psi and y row counts differ")


@dataclass(frozen=True)
class IdentificationResult:
    model: StateSpaceModel
    residual_rms: np.ndarray
    condition_estimate: float


def build_regression(data: TimeSeries, n: int) -> RegressionSystem:
    """Stack [x_k, u_k] rows against x_{k+1} targets (N = len(data) - 1 rows)."""
    m = data.inputs.shape[1]
    if data.outputs.shape[1] != n:
        raise ValidationError(
            f"outputs have {data.outputs.shape[1]} channels, expected full state n={n}"
        )
    if len(data) < 2:
        raise ValidationError("need at least 2 samples for one regression row")
    psi = np.hstack([data.outputs[:-1], data.inputs[:-1]])
    y = data.outputs[1:]
    return RegressionSystem(psi=psi, y=y)


def identify(data: TimeSeries, n: int) -> IdentificationResult:
    """Least-squares fit of (A, B) from logged data; C is identity.

    The normal equations are solved through an orthogonal factorization of psi
    (numerically equivalent, better conditioned than forming psi' psi). Data
    that leaves the problem near-singular raises InsufficientExcitationError.
    """
    reg = build_regression(data, n)
    m = data.inputs.shape[1]
    if len(reg.psi) < n + m:
        raise ValidationError(
            f"need at least {n + m + 1} samples to identify {n} states "
            f"with {m} inputs, got {len(data)}"
        )
    sv = np.linalg.svd(reg.psi, compute_uv=False)
    if sv[0] == 0.0 or (sv[-1] / sv[0]) ** 2 < RCOND_FLOOR:
        raise InsufficientExcitationError(
            "regression matrix is numerically rank deficient; input does not excite the system"
        )
    condition = float((sv[0] / sv[-1]) ** 2)
    theta, *_ = np.linalg.lstsq(reg.psi, reg.y, rcond=None)
    residual = reg.y - reg.psi @ theta
    residual_rms = np.sqrt(np.mean(residual**2, axis=0))
    a = theta[:n].T
    b = theta[n:].T
    model = StateSpaceModel(a=a, b=b, c=np.eye(n), sample_rate=data.sample_rate)
    return IdentificationResult(
        model=model, residual_rms=residual_rms, condition_estimate=condition
    )


def vaf(measured, estimated) -> float:
    """Variance-accounted-for percentage: max(0, (1 - sum||e||^2 / sum||y||^2) * 100)."""
    y = np.asarray(measured, dtype=float)
    y_hat = np.asarray(estimated, dtype=float)
    if y.ndim == 1:
        y = y[:, None]
    if y_hat.ndim == 1:
        y_hat = y_hat[:, None]
    if y.shape != y_hat.shape:
        raise ValidationError(f"shape mismatch: measured {y.shape} vs estimated {y_hat.shape}")
    if y.size == 0:
        raise ValidationError("empty sequences")
    denom = float(np.sum(y**2))
    if denom == 0.0:
        raise ValidationError("measured sequence is identically zero; VAF undefined")
    ratio = float(np.sum((y - y_hat) ** 2)) / denom
    return max(0.0, (1.0 - ratio) * 100.0)


def prbs(n_samples: int, rng: np.random.Generator, low: float = -1.0, high: float = 1.0,
         hold: int = 1) -> np.ndarray:
    """Pseudo-random binary input sequence, persistently exciting for identification."""
    if n_samples < 1:
        raise ValidationError("n_samples must be positive")
    if hold < 1:
        raise ValidationError("hold must be >= 1")
    n_switches = (n_samples + hold - 1) // hold
    levels = rng.choice([low, high], size=n_switches)
    return np.repeat(levels, hold)[:n_samples].reshape(-1, 1)


def load_timeseries_csv(path) -> TimeSeries:
    """Load a `t,u,theta,theta_dot` CSV; the rate comes from the median step.

    Timestamps must be strictly increasing and the grid uniform to within a
    1% jitter tolerance.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "u", "theta", "theta_dot"]:
            raise ValidationError(
                f"{path}: expected header 't,u,theta,theta_dot', got {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValidationError(f"{path}:{lineno}: expected 4 columns, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise ValidationError(f"{path}:{lineno}: non-numeric value in {row}") from None
    if len(rows) < 2:
        raise ValidationError(f"{path}: need at least 2 data rows")
    data = np.array(rows)
    t = data[:, 0]
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise ValidationError(f"{path}: time column must be strictly increasing")
    dt = float(np.median(dts))
    if np.any(np.abs(dts - dt) > JITTER_TOLERANCE * dt):
        raise ValidationError(
            f"{path}: time grid jitter exceeds {JITTER_TOLERANCE:.0%} of the median step"
        )
    return TimeSeries(sample_rate=1.0 / dt, inputs=data[:, 1:2], outputs=data[:, 2:4])
