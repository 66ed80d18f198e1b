"""Pitch-axis stabilization toolkit for a position-controlled humanoid.

Pipeline pieces, each usable on its own: least-squares system identification
(sysid), steady-state Kalman filtering (kalman), discrete LQR design (lqr),
Mamdani fuzzy gain scheduling with exact centroid defuzzification (fuzzy),
capture-point stepping (capture), a simulated plant (plant), and a
closed-loop experiment harness (harness). The hot kernels run on a compiled
extension when available, with a pure-Python fallback selected at import
(see pitchstab.kernel_backend).
"""

from ._kernels import BACKEND as kernel_backend
from .errors import InsufficientExcitationError, NumericalError, ValidationError
from .statespace import (
    StateSpaceModel,
    StateVector,
    TimeSeries,
    dc_gain,
    identified_model,
    load_model,
    save_model,
    simulate,
    spectral_radius,
    step,
)

__version__ = "0.1.0"

__all__ = [
    "InsufficientExcitationError",
    "NumericalError",
    "StateSpaceModel",
    "StateVector",
    "TimeSeries",
    "ValidationError",
    "dc_gain",
    "identified_model",
    "kernel_backend",
    "load_model",
    "save_model",
    "simulate",
    "spectral_radius",
    "step",
]
