"""Damped capture-point estimation and the stepping trigger.

The capture point is where the foot must land to bring the robot to rest.
It is computed from the Kalman pitch-rate estimate, never the raw gyro, and
the estimate is exponentially damped toward zero while the rate holds steady
(within 10% call over call) to cancel estimator drift at large lean angles.

An alternative formulation expresses the capture point through the CoM
position and a natural-frequency-scaled linear velocity. It is deliberately
not implemented: the CoM position relative to the support is not measurable
on this robot, so the rate-only form below is used, with any constant
contribution folded into the calibration offset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError


@dataclass(frozen=True)
class CapturePointParams:
    """CoM height and gravity for the inverted-pendulum time constant, plus a
    calibration offset added to every estimate (meters)."""

    z_com: float = 0.25
    g: float = 9.81
    x_offset: float = 0.0

    def __post_init__(self):
        if not self.z_com > 0:
            raise ValidationError("z_com must be positive")
        if not self.g > 0:
            raise ValidationError("g must be positive")


@dataclass(frozen=True)
class CapturePointState:
    """Damping bookkeeping between calls: previous rate estimate and the
    consecutive-steady counter."""

    theta_dot_last: float = 0.0
    counter_gyro: int = 0

    def __post_init__(self):
        if self.counter_gyro < 0:
            raise ValidationError("counter_gyro must be nonnegative")


@dataclass(frozen=True)
class StepCommand:
    active: bool
    amplitude_x: float


def capture_point_step(state: CapturePointState, params: CapturePointParams,
                       theta_dot_hat: float) -> tuple:
    """One capture-point update; returns (x_cp meters, new state).

    The steady counter increments when the rate estimate changed by less than
    10% relative to the previous call and resets otherwise; a zero previous
    estimate counts as changed so the relative test never divides by zero.
    The damped rate theta_dot * exp(-counter) feeds the capture formula
    x_cp = rate * z * sqrt(z / g) + offset.
    """
    if not math.isfinite(theta_dot_hat):
        raise ValidationError("theta_dot_hat must be finite")
    if state.theta_dot_last == 0.0:
        counter = 0
    elif abs((theta_dot_hat - state.theta_dot_last) / state.theta_dot_last) < 0.1:
        counter = state.counter_gyro + 1
    else:
        counter = 0
    theta_dot_cp = theta_dot_hat * math.exp(-counter)
    x_cp = theta_dot_cp * params.z_com * math.sqrt(params.z_com / params.g) + params.x_offset
    return x_cp, CapturePointState(theta_dot_last=theta_dot_hat, counter_gyro=counter)


def stepping_command(x_cp: float, support_threshold: float, max_step: float) -> StepCommand:
    """Discrete trigger: step only when the capture point leaves the region
    the ankle strategy can cover, clamping the amplitude to the reachable
    step length."""
    if not support_threshold > 0 or not max_step > 0:
        raise ValidationError("thresholds must be positive")
    if abs(x_cp) <= support_threshold:
        return StepCommand(active=False, amplitude_x=0.0)
    return StepCommand(active=True, amplitude_x=max(-max_step, min(max_step, x_cp)))
