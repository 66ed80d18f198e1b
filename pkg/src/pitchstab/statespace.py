"""Discrete-time state-space types, stepping, and stability diagnostics.

Unit convention used throughout the package: the pitch angle theta is in
degrees, the pitch rate theta_dot in rad/s, and the ankle command in degrees.
The identification absorbs the cross-unit scaling into A and B, so the model
operates directly on sensor-native units.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import NumericalError, ValidationError

DIVERGENCE_LIMIT = 1e9


class StateVector(NamedTuple):
    """CoM pitch state: angle in degrees, angular velocity in rad/s."""

    theta: float
    theta_dot: float


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete model x[k+1] = A x[k] + B u[k], y[k] = C x[k] at a fixed rate."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    sample_rate: float

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        c = np.atleast_2d(np.asarray(self.c, dtype=float))
        if a.shape[0] != a.shape[1]:
            raise ValidationError(f"a must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValidationError(f"b has {b.shape[0]} rows, expected {a.shape[0]}")
        if c.shape[1] != a.shape[0]:
            raise ValidationError(f"c has {c.shape[1]} cols, expected {a.shape[0]}")
        if not np.isfinite(a).all() or not np.isfinite(b).all() or not np.isfinite(c).all():
            raise ValidationError("model matrices must be finite")
        if not self.sample_rate > 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        a.setflags(write=False)
        b.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", c)

    @property
    def n(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate


@dataclass(frozen=True)
class TimeSeries:
    """Logged input/output records on a uniform grid (inputs N x m, outputs N x p)."""

    sample_rate: float
    inputs: np.ndarray = field(repr=False)
    outputs: np.ndarray = field(repr=False)

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        y = np.asarray(self.outputs, dtype=float)
        if u.ndim == 1:
            u = u[:, None]
        if y.ndim == 1:
            y = y[:, None]
        if len(u) != len(y):
            raise ValidationError(f"inputs ({len(u)}) and outputs ({len(y)}) differ in length")
        if len(u) < 1:
            raise ValidationError("time series is empty")
        if not self.sample_rate > 0:
            raise ValidationError("sample_rate must be positive")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "outputs", y)

    def __len__(self) -> int:
        return len(self.inputs)


def identified_model() -> StateSpaceModel:
    """The shipped identified pitch model (2 states, full-state output, 41.664 Hz).

    Known identification artifact: the rate channel keeps a small nonzero
    steady-state value (~-0.04 rad/s per degree of constant input); it is a
    property of the fitted data, deliberately left as-is.
    """
    return StateSpaceModel(
        a=np.array([[0.995, 0.021], [-0.584, 0.879]]),
        b=np.array([[0.013], [1.416]]),
        c=np.eye(2),
        sample_rate=41.664,
    )


def step(model: StateSpaceModel, x, u) -> np.ndarray:
    """One transition: A x + B u."""
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.atleast_1d(np.asarray(u, dtype=float)).reshape(-1)
    if x.shape[0] != model.n:
        raise ValidationError(f"state has {x.shape[0]} entries, model expects {model.n}")
    if u.shape[0] != model.m:
        raise ValidationError(f"input has {u.shape[0]} entries, model expects {model.m}")
    return model.a @ x + model.b @ u


def simulate(model: StateSpaceModel, x0, u_seq) -> TimeSeries:
    """Roll the model forward over an input sequence; outputs[k] = C x[k].

    Aborts with NumericalError when any state magnitude exceeds the divergence
    limit (the model is blowing up, so downstream numbers would be garbage).
    """
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim == 1:
        u_seq = u_seq[:, None]
    if u_seq.size == 0:
        raise ValidationError("input sequence is empty")
    if u_seq.shape[1] != model.m:
        raise ValidationError(f"input rows have {u_seq.shape[1]} entries, model expects {model.m}")
    x = np.asarray(x0, dtype=float).reshape(-1)
    if x.shape[0] != model.n:
        raise ValidationError(f"x0 has {x.shape[0]} entries, model expects {model.n}")
    n_steps = len(u_seq)
    outputs = np.empty((n_steps, model.p))
    for k in range(n_steps):
        outputs[k] = model.c @ x
        x = model.a @ x + model.b @ u_seq[k]
        if not np.isfinite(x).all() or np.abs(x).max() > DIVERGENCE_LIMIT:
            raise NumericalError(f"simulation diverged at step {k + 1}")
    return TimeSeries(sample_rate=model.sample_rate, inputs=u_seq, outputs=outputs)


def dc_gain(model: StateSpaceModel) -> np.ndarray:
    """Steady-state output per unit constant input: C (I - A)^-1 B."""
    eye_minus_a = np.eye(model.n) - model.a
    try:
        sol = np.linalg.solve(eye_minus_a, model.b)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("I - A is singular; no finite DC gain") from exc
    return model.c @ sol


def spectral_radius(matrix) -> float:
    """Largest eigenvalue magnitude of a square matrix."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    if m.shape[0] != m.shape[1]:
        raise ValidationError(f"matrix must be square, got {m.shape}")
    return float(np.abs(np.linalg.eigvals(m)).max())


def save_model(model: StateSpaceModel, path) -> None:
    """Write the model as row-major JSON; see load_model for the schema."""
    doc = {
        "a": model.a.tolist(),
        "b": model.b.tolist(),
        "c": model.c.tolist(),
        "sample_rate_hz": model.sample_rate,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_model(path) -> StateSpaceModel:
    """Read a model JSON: {"a": [[...]], "b": [[...]], "c": [[...]], "sample_rate_hz": ...}.

    Angles are degrees, rates rad/s, inputs degrees (see module docstring).
    """
    with open(path) as fh:
        doc = json.load(fh)
    for key in ("a", "b", "c", "sample_rate_hz"):
        if key not in doc:
            raise ValidationError(f"model file missing field '{key}'")
    return StateSpaceModel(
        a=np.array(doc["a"], dtype=float),
        b=np.array(doc["b"], dtype=float),
        c=np.array(doc["c"], dtype=float),
        sample_rate=float(doc["sample_rate_hz"]),
    )
