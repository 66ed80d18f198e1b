"""Closed-loop experiment runner and transient/robustness metrics.

Loop order per control cycle: sense -> filter estimate -> schedule gains ->
control law -> (optional capture-point step) -> plant step. The control
applied at cycle k uses the estimate built from measurements up to cycle
k - 1 (predictor-form filter), so nothing ever leaks backward in time.

The fixed-gain mode uses the Medium tuning constants (the Q11 = 40 design),
which is exactly what the fuzzy schedule outputs when only its Medium rule
fires, so fixed-vs-fuzzy comparisons isolate the scheduling.

Stepping surrogate: an active step command shifts the pendulum pivot by the
commanded amplitude, i.e. the lean angle is recomputed from the reduced CoM
offset while the rate is preserved. A real robot would hand the amplitude to
its gait engine; gait generation is out of scope here.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .capture import CapturePointParams, CapturePointState, capture_point_step, stepping_command
from .errors import NumericalError, ValidationError
from .fuzzy import GainScheduler, MEDIUM_GAINS, default_scheduler, scheduler_from_dict
from .kalman import CovariancePair, default_covariances, design_filter, filter_step
from .lqr import control_law
from .plant import (
    DisturbanceEvent,
    NonlinearParams,
    PlantConfig,
    design_model,
    initial_state,
    inject_disturbance,
    plant_step,
    sense,
)
from .statespace import StateSpaceModel, load_model

CONTROLLER_MODES = ("none", "lqr_fixed", "lqr_fuzzy")


@dataclass(frozen=True)
class CaptureConfig:
    enabled: bool = False
    params: CapturePointParams = field(default_factory=CapturePointParams)
    support_threshold: float = 0.05
    max_step: float = 0.08
    min_step_interval: float = 0.6

    def __post_init__(self):
        if self.enabled and (self.support_threshold <= 0 or self.max_step <= 0):
            raise ValidationError("capture thresholds must be positive")
        if self.min_step_interval < 0:
            raise ValidationError("min_step_interval must be nonnegative")


@dataclass(frozen=True)
class ScenarioConfig:
    plant: PlantConfig = field(default_factory=PlantConfig)
    controller: str = "lqr_fixed"
    fixed_gains: tuple = MEDIUM_GAINS
    u_limit: float = 30.0
    vn22: float = 35.0
    vn_override: Optional[tuple] = None  # full 2x2 measurement covariance
    neutral_offset: float = 0.0
    fall_threshold: float = 45.0
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    disturbances: tuple = ()
    duration: float = 8.0
    x0: tuple = (0.0, 0.0)
    seed: int = 0
    scheduler_factory: Callable[[], GainScheduler] = default_scheduler

    def __post_init__(self):
        if self.controller not in CONTROLLER_MODES:
            raise ValidationError(
                f"controller must be one of {CONTROLLER_MODES}, got '{self.controller}'"
            )
        if not self.duration > 0:
            raise ValidationError("duration must be positive")
        if self.u_limit < 0:
            raise ValidationError("u_limit must be nonnegative")
        if not self.fall_threshold > 0:
            raise ValidationError("fall_threshold must be positive")
        for ev in self.disturbances:
            if not isinstance(ev, DisturbanceEvent):
                raise ValidationError("disturbances must be DisturbanceEvent instances")


@dataclass
class SimTrace:
    """Per-cycle records on the plant's uniform time grid, plus the outcome."""

    t: np.ndarray
    theta_true: np.ndarray
    theta_dot_true: np.ndarray
    theta_meas: np.ndarray
    theta_dot_meas: np.ndarray
    theta_hat: np.ndarray
    theta_dot_hat: np.ndarray
    u: np.ndarray
    k_theta: np.ndarray
    k_theta_dot: np.ndarray
    x_cp: np.ndarray
    step_active: np.ndarray
    disturbance: np.ndarray
    outcome: str

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class TransientMetrics:
    """Disturbance-response summary on the angle channel.

    rise_time / settling_time are None when the trace never crosses the
    corresponding thresholds (undefined, not zero).
    """

    rise_time: Optional[float]
    settling_time: Optional[float]
    max_overshoot: float
    steady_state_error: float
    robustness_delta: float


def run_scenario(config: ScenarioConfig) -> SimTrace:
    """Execute the closed loop at the plant sample rate.

    A fall (|theta| beyond the threshold) truncates the trace after the
    offending sample and marks the outcome.
    """
    plant_cfg = config.plant
    dt = 1.0 / plant_cfg.sample_rate
    n_steps = max(1, int(round(config.duration * plant_cfg.sample_rate)))
    rng = np.random.default_rng(config.seed)

    model = design_model(plant_cfg)
    if config.vn_override is not None:
        cov = CovariancePair(vd=np.eye(2), vn=np.array(config.vn_override, dtype=float))
    else:
        cov = default_covariances(config.vn22)
    filt = design_filter(model, cov)

    scheduler = config.scheduler_factory() if config.controller == "lqr_fuzzy" else None
    fixed_k = np.array([config.fixed_gains], dtype=float)

    cp_state = CapturePointState()
    next_step_time = 0.0

    state = initial_state(plant_cfg, config.x0)
    x_hat = np.zeros(2)

    cols = {
        name: np.empty(n_steps)
        for name in ("t", "theta_true", "theta_dot_true", "theta_meas", "theta_dot_meas",
                     "theta_hat", "theta_dot_hat", "u", "k_theta", "k_theta_dot", "x_cp")
    }
    step_active = np.zeros(n_steps, dtype=np.int8)
    disturbed = np.zeros(n_steps, dtype=np.int8)
    outcome = "stood"

    pending = sorted(config.disturbances, key=lambda ev: ev.at_time)
    pending_idx = 0
    active_constants: list = []

    n_recorded = n_steps
    for k in range(n_steps):
        t = k * dt

        hit = False
        while pending_idx < len(pending) and pending[pending_idx].at_time <= t:
            ev = pending[pending_idx]
            if ev.kind == "impulse":
                state = inject_disturbance(ev, state, plant_cfg.inertia_proxy)
                hit = True
            else:
                active_constants.append(ev)
            pending_idx += 1
        accel_bias = 0.0
        for ev in active_constants:
            if ev.at_time <= t < ev.at_time + ev.duration:
                accel_bias += ev.accel_bias
                hit = True
        disturbed[k] = 1 if hit else 0

        y = sense(state, plant_cfg.gyro_noise_std, rng)

        if config.controller == "none":
            gains = (0.0, 0.0)
            u_delta = 0.0
        else:
            if config.controller == "lqr_fuzzy":
                gains = scheduler.schedule_gains(x_hat[0], x_hat[1])
                k_mat = np.array([gains], dtype=float)
            else:
                gains = config.fixed_gains
                k_mat = fixed_k
            u_delta = float(control_law(k_mat, x_hat, config.u_limit)[0])
        u_applied = config.neutral_offset + u_delta

        x_cp = math.nan
        stepped = 0
        if config.capture.enabled:
            x_cp, cp_state = capture_point_step(cp_state, config.capture.params, x_hat[1])
            cmd = stepping_command(x_cp, config.capture.support_threshold,
                                   config.capture.max_step)
            if cmd.active and t >= next_step_time:
                z = config.capture.params.z_com
                rel = z * math.sin(state[0] * math.pi / 180.0) - cmd.amplitude_x
                state = state.copy()
                state[0] = math.asin(max(-1.0, min(1.0, rel / z))) * 180.0 / math.pi
                next_step_time = t + config.capture.min_step_interval
                stepped = 1
        step_active[k] = stepped

        cols["t"][k] = t
        cols["theta_true"][k] = state[0]
        cols["theta_dot_true"][k] = state[1]
        cols["theta_meas"][k] = y.theta
        cols["theta_dot_meas"][k] = y.theta_dot
        cols["theta_hat"][k] = x_hat[0]
        cols["theta_dot_hat"][k] = x_hat[1]
        cols["u"][k] = u_applied
        cols["k_theta"][k] = gains[0]
        cols["k_theta_dot"][k] = gains[1]
        cols["x_cp"][k] = x_cp

        x_hat = filter_step(filt, model, x_hat, u_applied, (y.theta, y.theta_dot))
        state = plant_step(plant_cfg, state, u_applied, dt, accel_bias=accel_bias)

        if abs(state[0]) > config.fall_threshold:
            outcome = "fell"
            n_recorded = k + 1
            break

    return SimTrace(
        t=cols["t"][:n_recorded],
        theta_true=cols["theta_true"][:n_recorded],
        theta_dot_true=cols["theta_dot_true"][:n_recorded],
        theta_meas=cols["theta_meas"][:n_recorded],
        theta_dot_meas=cols["theta_dot_meas"][:n_recorded],
        theta_hat=cols["theta_hat"][:n_recorded],
        theta_dot_hat=cols["theta_dot_hat"][:n_recorded],
        u=cols["u"][:n_recorded],
        k_theta=cols["k_theta"][:n_recorded],
        k_theta_dot=cols["k_theta_dot"][:n_recorded],
        x_cp=cols["x_cp"][:n_recorded],
        step_active=step_active[:n_recorded],
        disturbance=disturbed[:n_recorded],
        outcome=outcome,
    )


def _first_crossing(t: np.ndarray, y: np.ndarray, level: float, rising: bool) -> Optional[float]:
    """Linearly interpolated time of the first crossing of `level`."""
    for i in range(1, len(y)):
        a, b = y[i - 1], y[i]
        crossed = (a < level <= b) if rising else (a > level >= b)
        if b == level and a == level:
            continue
        if crossed:
            if b == a:
                return float(t[i])
            frac = (level - a) / (b - a)
            return float(t[i - 1] + frac * (t[i] - t[i - 1]))
    return None


def transient_metrics(trace: SimTrace, settle_band: float = 0.02) -> TransientMetrics:
    """Disturbance-response numbers on the angle channel.

    Final value is the mean of the last 5% of samples (noisy traces have no
    exact final value). The rise levels are 10%/90% of the excursion from the
    post-disturbance extremum to the final value, searched from the extremum
    onward. Settling time is the first instant after which the response stays
    inside the band around the final value, referenced to the disturbance
    onset. Overshoot is the recovery's largest swing past the final value
    (|y_max - y_final| for a downward excursion); the robustness delta is the
    gap between the final value and the excursion extremum.
    """
    if len(trace) < 2:
        raise ValidationError("trace too short for metrics")
    t = trace.t
    y = trace.theta_true

    onset_idx = int(np.argmax(trace.disturbance)) if trace.disturbance.any() else 0
    onset_time = float(t[onset_idx])

    tail = max(1, int(math.ceil(0.05 * len(y))))
    y_final = float(np.mean(y[-tail:]))

    post = slice(onset_idx, len(y))
    y_post = y[post]
    t_post = t[post]
    ext_rel = int(np.argmax(np.abs(y_post - y_final)))
    y_ext = float(y_post[ext_rel])

    rise_time = None
    span = y_final - y_ext
    if span != 0.0:
        lvl10 = y_ext + 0.1 * span
        lvl90 = y_ext + 0.9 * span
        seg_t = t_post[ext_rel:]
        seg_y = y_post[ext_rel:]
        rising = span > 0
        t10 = _first_crossing(seg_t, seg_y, lvl10, rising)
        t90 = _first_crossing(seg_t, seg_y, lvl90, rising)
        if t10 is not None and t90 is not None and t90 >= t10:
            rise_time = t90 - t10

    band = settle_band * abs(y_final)
    settling_time = None
    if band > 0:
        outside = np.abs(y_post - y_final) > band
        if not outside.any():
            settling_time = 0.0
        elif not outside[-1]:
            last_out = int(np.where(outside)[0][-1])
            lo, hi = y_final - band, y_final + band
            a, b = y_post[last_out], y_post[last_out + 1]
            level = hi if a > hi else lo
            frac = (level - a) / (b - a) if b != a else 1.0
            t_enter = float(t_post[last_out] + frac * (t_post[last_out + 1] - t_post[last_out]))
            settling_time = t_enter - onset_time

    recovery = y_post[ext_rel:]
    if y_ext <= y_final:
        overshoot = max(0.0, float(np.max(recovery)) - y_final)
    else:
        overshoot = max(0.0, y_final - float(np.min(recovery)))
    return TransientMetrics(
        rise_time=rise_time,
        settling_time=settling_time,
        max_overshoot=overshoot,
        steady_state_error=abs(y_final),
        robustness_delta=abs(y_final - y_ext),
    )


def tolerance_search(make_scenario: Callable[[float], ScenarioConfig], lo: float, hi: float,
                     *, trials: int = 1, pass_fraction: float = 1.0,
                     resolution: float = 0.01, seed0: int = 0) -> float:
    """Largest disturbance magnitude the scenario family survives.

    Bisection between lo and hi assuming monotone difficulty. Each level runs
    `trials` seeded scenarios and passes when the stood fraction reaches
    `pass_fraction`. Raises when even `lo` fails.
    """
    if hi <= lo:
        raise ValidationError("need hi > lo")
    if trials < 1:
        raise ValidationError("trials must be >= 1")

    def passes(magnitude: float) -> bool:
        stood = 0
        for i in range(trials):
            cfg = make_scenario(magnitude)
            cfg = replace(cfg, seed=seed0 + i)
            if run_scenario(cfg).outcome == "stood":
                stood += 1
        return stood / trials >= pass_fraction

    if not passes(lo):
        raise NumericalError(
            f"tolerance search: even the bottom magnitude {lo} fails"
        )
    if passes(hi):
        return hi
    good, bad = lo, hi
    while bad - good > resolution:
        mid = 0.5 * (good + bad)
        if passes(mid):
            good = mid
        else:
            bad = mid
    return good


TRACE_COLUMNS = ("t", "theta_true", "theta_dot_true", "theta_meas", "theta_dot_meas",
                 "theta_hat", "theta_dot_hat", "u", "k_theta", "k_theta_dot", "x_cp",
                 "step_active", "disturbance")


def write_trace_csv(trace: SimTrace, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i in range(len(trace)):
            writer.writerow(
                [repr(float(getattr(trace, c)[i])) for c in TRACE_COLUMNS[:11]]
                + [int(trace.step_active[i]), int(trace.disturbance[i])]
            )


def metrics_to_dict(metrics: TransientMetrics, outcome: str) -> dict:
    return {
        "rise_time_s": metrics.rise_time,
        "settling_time_s": metrics.settling_time,
        "max_overshoot_deg": metrics.max_overshoot,
        "steady_state_error_deg": metrics.steady_state_error,
        "robustness_delta_deg": metrics.robustness_delta,
        "outcome": outcome,
    }


def write_metrics_json(metrics: TransientMetrics, outcome: str, path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics_to_dict(metrics, outcome), fh, indent=2)
        fh.write("\n")


_SCENARIO_KEYS = {"plant", "controller", "fixed_gains", "u_limit", "vn22", "vn",
                  "neutral_offset", "fall_threshold", "capture_point",
                  "disturbances", "duration", "x0", "seed", "fuzzy_config"}
_PLANT_KEYS = {"mode", "model", "nonlinear", "gyro_noise_std", "seed"}
_CAPTURE_KEYS = {"enabled", "z_com", "g", "x_offset", "support_threshold",
                 "max_step", "min_step_interval"}
_EVENT_KEYS = {"kind", "at_time", "energy", "efficiency", "direction",
               "accel_bias", "duration"}


def _reject_unknown(doc: dict, allowed: set, where: str) -> None:
    unknown = set(doc) - allowed
    if unknown:
        raise ValidationError(f"{where}: unknown field(s) {sorted(unknown)}")


def scenario_from_dict(doc: dict, base_dir=None) -> ScenarioConfig:
    """Build a ScenarioConfig from the scenario JSON structure.

    Unknown fields are rejected with a diagnostic naming them; model and
    fuzzy-config paths inside the document resolve relative to `base_dir`
    when given, else the working directory.
    """
    import os

    def _resolve(path):
        if base_dir is not None and not os.path.isabs(path):
            return os.path.join(base_dir, path)
        return path

    _reject_unknown(doc, _SCENARIO_KEYS, "scenario")
    plant_doc = doc.get("plant", {})
    _reject_unknown(plant_doc, _PLANT_KEYS, "plant")
    mode = plant_doc.get("mode", "linear")
    model: Optional[StateSpaceModel] = None
    if "model" in plant_doc and plant_doc["model"] is not None:
        model = load_model(_resolve(plant_doc["model"]))
    nonlinear = None
    if "nonlinear" in plant_doc and plant_doc["nonlinear"] is not None:
        nl = plant_doc["nonlinear"]
        known = {f: nl[f] for f in ("com_mass", "com_height", "ankle_stiffness",
                                    "servo_time_constant", "ankle_torque_limit",
                                    "viscous_damping", "sample_rate") if f in nl}
        unknown = set(nl) - set(known)
        if unknown:
            raise ValidationError(f"plant.nonlinear: unknown fields {sorted(unknown)}")
        nonlinear = NonlinearParams(**known)
    plant_cfg = PlantConfig(
        mode=mode,
        model=model,
        nonlinear=nonlinear,
        gyro_noise_std=float(plant_doc.get("gyro_noise_std", 0.0)),
        seed=int(plant_doc.get("seed", 0)),
    )

    cap_doc = doc.get("capture_point", {})
    _reject_unknown(cap_doc, _CAPTURE_KEYS, "capture_point")
    capture = CaptureConfig(
        enabled=bool(cap_doc.get("enabled", False)),
        params=CapturePointParams(
            z_com=float(cap_doc.get("z_com", 0.25)),
            g=float(cap_doc.get("g", 9.81)),
            x_offset=float(cap_doc.get("x_offset", 0.0)),
        ),
        support_threshold=float(cap_doc.get("support_threshold", 0.02)),
        max_step=float(cap_doc.get("max_step", 0.08)),
        min_step_interval=float(cap_doc.get("min_step_interval", 0.6)),
    )

    events = []
    for i, ev in enumerate(doc.get("disturbances", [])):
        _reject_unknown(ev, _EVENT_KEYS, f"disturbances[{i}]")
        kind = ev.get("kind")
        if kind == "impulse":
            events.append(DisturbanceEvent(
                kind="impulse",
                at_time=float(ev.get("at_time", 0.0)),
                energy=float(ev.get("energy", 0.0)),
                efficiency=float(ev.get("efficiency", 0.5)),
                direction=float(ev.get("direction", 1.0)),
            ))
        elif kind == "constant":
            events.append(DisturbanceEvent(
                kind="constant",
                at_time=float(ev.get("at_time", 0.0)),
                accel_bias=float(ev.get("accel_bias", 0.0)),
                duration=float(ev.get("duration", 0.0)),
            ))
        else:
            raise ValidationError(f"disturbances[{i}].kind: expected 'impulse' or 'constant'")

    factory = default_scheduler
    if "fuzzy_config" in doc and doc["fuzzy_config"] is not None:
        with open(_resolve(doc["fuzzy_config"])) as fh:
            fuzzy_doc = json.load(fh)
        scheduler_from_dict(fuzzy_doc)  # validate eagerly for a load-time diagnostic
        factory = lambda: scheduler_from_dict(fuzzy_doc)  # noqa: E731

    return ScenarioConfig(
        plant=plant_cfg,
        controller=doc.get("controller", "lqr_fixed"),
        fixed_gains=tuple(doc.get("fixed_gains", MEDIUM_GAINS)),
        u_limit=float(doc.get("u_limit", 30.0)),
        vn22=float(doc.get("vn22", 35.0)),
        vn_override=(tuple(map(tuple, doc["vn"])) if doc.get("vn") is not None else None),
        neutral_offset=float(doc.get("neutral_offset", 0.0)),
        fall_threshold=float(doc.get("fall_threshold", 45.0)),
        capture=capture,
        disturbances=tuple(events),
        duration=float(doc.get("duration", 8.0)),
        x0=tuple(doc.get("x0", (0.0, 0.0))),
        seed=int(doc.get("seed", 0)),
        scheduler_factory=factory,
    )


def load_scenario(path) -> ScenarioConfig:
    import os

    with open(path) as fh:
        doc = json.load(fh)
    return scenario_from_dict(doc, base_dir=os.path.dirname(os.path.abspath(path)))
