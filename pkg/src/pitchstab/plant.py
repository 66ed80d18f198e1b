"""Simulated robot plant: the identified linear model or a nonlinear
inverted pendulum with a position-servo ankle, plus disturbance injection and
noisy gyro emulation.

The nonlinear plant is not a hardware replica. It exists to give the gain
scheduler something genuinely nonlinear to fight: an unstable pendulum whose
ankle servo holds a commanded lean through a stiffness-limited, torque-
saturated joint. With zero command the servo stiffness is below the gravity
stiffness, so the bare plant diverges from any nonzero angle; the feedback
loop provides the missing stiffness until the torque limit (the foot's
center-of-pressure bound) cuts it off at large angles. Defaults are chosen
for a kid-size robot scale and are not measured values.

States are sensor-native: theta in degrees, theta_dot in rad/s; the nonlinear
plant carries the achieved ankle angle (degrees) as a third state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import impl
from .errors import NumericalError, ValidationError
from .statespace import (
    DIVERGENCE_LIMIT,
    StateSpaceModel,
    StateVector,
    identified_model,
    step as linear_step,
)

GRAVITY = 9.81
_DEG = math.pi / 180.0


@dataclass(frozen=True)
class NonlinearParams:
    """Pendulum and ankle-servo constants (SI units)."""

    com_mass: float = 2.5
    com_height: float = 0.25
    ankle_stiffness: float = 4.375
    servo_time_constant: float = 0.05
    ankle_torque_limit: float = 1.4715
    viscous_damping: float = 0.46875
    sample_rate: float = 41.664

    def __post_init__(self):
        for name in ("com_mass", "com_height", "ankle_stiffness", "servo_time_constant",
                     "ankle_torque_limit", "sample_rate"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.viscous_damping < 0:
            raise ValidationError("viscous_damping must be nonnegative")

    @property
    def inertia(self) -> float:
        return self.com_mass * self.com_height**2

    @property
    def gravity_stiffness(self) -> float:
        """Destabilizing gravity torque per radian over inertia: g / l."""
        return GRAVITY / self.com_height


@dataclass(frozen=True)
class PlantConfig:
    mode: str = "linear"
    model: Optional[StateSpaceModel] = None
    nonlinear: Optional[NonlinearParams] = None
    gyro_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("linear", "nonlinear"):
            raise ValidationError(f"mode must be 'linear' or 'nonlinear', got '{self.mode}'")
        if self.gyro_noise_std < 0:
            raise ValidationError("gyro_noise_std must be nonnegative")
        if self.mode == "linear" and self.model is None:
            object.__setattr__(self, "model", identified_model())
        if self.mode == "nonlinear" and self.nonlinear is None:
            object.__setattr__(self, "nonlinear", NonlinearParams())

    @property
    def sample_rate(self) -> float:
        if self.mode == "linear":
            return self.model.sample_rate
        return self.nonlinear.sample_rate

    @property
    def inertia_proxy(self) -> float:
        """Rotational inertia used to convert impulse energy into rate change."""
        if self.mode == "nonlinear":
            return self.nonlinear.inertia
        return NonlinearParams().inertia


@dataclass(frozen=True)
class DisturbanceEvent:
    """Impulse (kinetic energy transferred at an instant) or constant
    (angular-acceleration bias held for a duration)."""

    kind: str
    at_time: float
    energy: float = 0.0
    efficiency: float = 0.5
    direction: float = 1.0
    accel_bias: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind not in ("impulse", "constant"):
            raise ValidationError(f"kind must be 'impulse' or 'constant', got '{self.kind}'")
        if self.at_time < 0:
            raise ValidationError("at_time must be nonnegative")
        if self.kind == "impulse":
            if self.energy < 0:
                raise ValidationError("impulse energy must be nonnegative")
            if not 0 < self.efficiency <= 1:
                raise ValidationError("efficiency must be in (0, 1]")
            if self.direction not in (-1.0, 1.0):
                raise ValidationError("direction must be -1 or +1")
        else:
            if self.duration < 0:
                raise ValidationError("duration must be nonnegative")


def initial_state(config: PlantConfig, x0) -> np.ndarray:
    """Full plant state from an initial (theta deg, theta_dot rad/s) pair."""
    theta, theta_dot = float(x0[0]), float(x0[1])
    if config.mode == "linear":
        return np.array([theta, theta_dot])
    return np.array([theta, theta_dot, 0.0])


def plant_step(config: PlantConfig, true_state, u_command: float, dt: float,
               accel_bias: float = 0.0) -> np.ndarray:
    """Advance the true state by one sample.

    Linear mode is the exact state-space step. Nonlinear mode integrates the
    pendulum/servo continuous dynamics with one fixed-step RK4 update;
    accel_bias (rad/s^2) models a sustained external push.
    """
    state = np.asarray(true_state, dtype=float)
    if not dt > 0:
        raise ValidationError("dt must be positive")
    if config.mode == "linear":
        nxt = linear_step(config.model, state, u_command)
    else:
        p = config.nonlinear
        theta, omega, ankle = impl.pendulum_rk4(
            state[0] * _DEG, state[1], state[2] * _DEG, float(u_command) * _DEG, dt,
            p.gravity_stiffness, p.ankle_stiffness / p.inertia,
            p.ankle_torque_limit / p.inertia, p.viscous_damping / p.inertia,
            1.0 / p.servo_time_constant, float(accel_bias),
        )
        nxt = np.array([theta / _DEG, omega, ankle / _DEG])
    if not np.isfinite(nxt).all() or np.abs(nxt).max() > DIVERGENCE_LIMIT:
        raise NumericalError("plant state diverged")
    return nxt


def inject_disturbance(event: DisturbanceEvent, true_state, inertia_proxy: float) -> np.ndarray:
    """Apply an impulse event to the state: delta theta_dot = dir * sqrt(2 eta KE / I).

    Constant events do not change the state here; their bias enters
    plant_step over the event duration.
    """
    state = np.asarray(true_state, dtype=float).copy()
    if event.kind == "impulse":
        if not inertia_proxy > 0:
            raise ValidationError("inertia_proxy must be positive")
        state[1] += event.direction * math.sqrt(
            2.0 * event.efficiency * event.energy / inertia_proxy
        )
    return state


def sense(true_state, gyro_noise_std: float, rng: np.random.Generator) -> StateVector:
    """Measurement model: exact angle, gyro rate with additive Gaussian noise."""
    state = np.asarray(true_state, dtype=float)
    noise = rng.normal(0.0, gyro_noise_std) if gyro_noise_std > 0 else 0.0
    return StateVector(theta=float(state[0]), theta_dot=float(state[1]) + noise)


def pendulum_kinetic_energy(mass: float, length: float, amplitude_deg: float) -> float:
    """Impact energy of a pendulum released from rest: m g L (1 - cos theta)."""
    if not mass > 0 or not length > 0:
        raise ValidationError("mass and length must be positive")
    return mass * GRAVITY * length * (1.0 - math.cos(amplitude_deg * _DEG))


def _expm(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Taylor core.

    Adequate for the small, well-scaled matrices used here (discretizing the
    plant linearization); not a general-purpose expm.
    """
    norm = np.linalg.norm(m, 1)
    squarings = max(0, int(math.ceil(math.log2(norm))) + 1) if norm > 0 else 0
    a = m / (2.0**squarings)
    result = np.eye(m.shape[0])
    term = np.eye(m.shape[0])
    for k in range(1, 25):
        term = term @ a / k
        result = result + term
        if np.linalg.norm(term, 1) < 1e-18 * max(1.0, np.linalg.norm(result, 1)):
            break
    for _ in range(squarings):
        result = result @ result
    return result


def linearized_model(params: NonlinearParams) -> StateSpaceModel:
    """Small-angle discrete model of the nonlinear plant in sensor units.

    Zero-order-hold discretization of the (theta deg, theta_dot rad/s)
    linearization with the servo lag neglected (ankle == command). This is
    the simulated analogue of identifying the plant the controller runs on,
    and is what the Kalman filter is designed against in nonlinear scenarios.
    """
    kappa = params.ankle_stiffness / params.inertia
    damping = params.viscous_damping / params.inertia
    ac = np.array(
        [
            [0.0, 1.0 / _DEG],
            [-(kappa - params.gravity_stiffness) * _DEG, -damping],
        ]
    )
    bc = np.array([[0.0], [kappa * _DEG]])
    aug = np.zeros((3, 3))
    aug[:2, :2] = ac
    aug[:2, 2:] = bc
    disc = _expm(aug / params.sample_rate)
    return StateSpaceModel(
        a=disc[:2, :2], b=disc[:2, 2:], c=np.eye(2), sample_rate=params.sample_rate
    )


def design_model(config: PlantConfig) -> StateSpaceModel:
    """The model the estimator is designed against for this plant."""
    if config.mode == "linear":
        return config.model
    return linearized_model(config.nonlinear)
