"""Two parallel Mamdani fuzzy systems scheduling the state-feedback gains.

Both systems share the same two inputs (CoM pitch angle in degrees, pitch
rate in rad/s) and produce one gain each: the angle gain and the velocity
gain. Inference is max-min over a rule grid; defuzzification is the exact
analytic centroid of the union of clipped output memberships, computed by
inclusion-exclusion (individual clipped shapes minus adjacent-pair
intersections).

Rule-grid orientation: the 4-membership angle partition drives the rows, the
3-membership velocity partition the columns. The tuning tables carry the
axis labels the other way around, but that labeling is dimensionally
impossible for the given membership sets (a 4-row grid cannot be driven by a
3-membership input), so the grid is bound by cardinality.

Partition geometry contract: adjacent memberships may overlap only on their
facing ramps (u2[i] <= b1[i+1] and b2[i] <= u1[i+1]). That is what makes the
pairwise inclusion-exclusion exact, and it also implies non-adjacent
memberships are disjoint. All shipped tables satisfy it.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ._kernels import impl
from .errors import ValidationError

DEGENERATE_AREA = 1e-12

MEDIUM_GAINS = (2.743, 0.506)


@dataclass(frozen=True)
class TrapezoidMF:
    """Trapezoid corners b1 <= u1 <= u2 <= b2; triangle when u1 == u2."""

    b1: float
    u1: float
    u2: float
    b2: float

    def __post_init__(self):
        corners = (self.b1, self.u1, self.u2, self.b2)
        if not all(math.isfinite(c) for c in corners):
            raise ValidationError(f"membership corners must be finite, got {corners}")
        if not (self.b1 <= self.u1 <= self.u2 <= self.b2):
            raise ValidationError(f"membership corners out of order: {corners}")

    @property
    def is_triangle(self) -> bool:
        return self.u1 == self.u2


class ClippedShape(NamedTuple):
    """Area and x-centroid of a clipped membership; centroid is nan when empty."""

    area: float
    centroid_x: float


@dataclass(frozen=True)
class MFPartition:
    """Ordered membership functions over one variable.

    Enforces the ramp-confined adjacency contract (see module docstring).
    """

    name: str
    units: str
    mfs: tuple
    _corners: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mfs = tuple(self.mfs)
        if not mfs:
            raise ValidationError(f"{self.name}: partition needs at least one membership")
        for i, mf in enumerate(mfs):
            if not isinstance(mf, TrapezoidMF):
                raise ValidationError(f"{self.name}[{i}]: not a TrapezoidMF")
        for i in range(len(mfs) - 1):
            a, b = mfs[i], mfs[i + 1]
            if b.b1 < a.b1:
                raise ValidationError(f"{self.name}[{i + 1}]: memberships not sorted by b1")
            if a.u2 > b.b1:
                raise ValidationError(
                    f"{self.name}[{i}]: core reaches into the next membership "
                    f"(u2={a.u2} > next b1={b.b1}); overlap must stay on the ramps"
                )
            if a.b2 > b.u1:
                raise ValidationError(
                    f"{self.name}[{i}]: support reaches past the next core start "
                    f"(b2={a.b2} > next u1={b.u1}); overlap must stay on the ramps"
                )
        corners = np.array(
            [c for mf in mfs for c in (mf.b1, mf.u1, mf.u2, mf.b2)], dtype=float
        )
        corners.setflags(write=False)
        object.__setattr__(self, "mfs", mfs)
        object.__setattr__(self, "_corners", corners)

    def __len__(self) -> int:
        return len(self.mfs)

    @property
    def hull(self) -> tuple:
        return self.mfs[0].b1, self.mfs[-1].b2

    def covers_hull(self) -> bool:
        """True when adjacent supports strictly overlap, so no interior point
        of the hull has all-zero degrees."""
        return all(
            self.mfs[i].b2 > self.mfs[i + 1].b1 for i in range(len(self.mfs) - 1)
        )


@dataclass(frozen=True)
class RuleTable:
    """N1 x N2 grid of 1-based output membership indices."""

    grid: np.ndarray
    _flat0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        grid = np.atleast_2d(np.asarray(self.grid, dtype=np.int64))
        if grid.size == 0:
            raise ValidationError("rule grid is empty")
        if grid.min() < 1:
            raise ValidationError(f"rule indices are 1-based; found {grid.min()}")
        flat0 = np.ascontiguousarray(grid.reshape(-1) - 1)
        grid.setflags(write=False)
        flat0.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "_flat0", flat0)

    @property
    def shape(self) -> tuple:
        return self.grid.shape

    @property
    def n_outputs_min(self) -> int:
        return int(self.grid.max())


def mf_eval(mf: TrapezoidMF, x: float) -> float:
    """Membership degree of x: ramps, core, zero outside the support."""
    return float(impl.mf_eval(mf.b1, mf.u1, mf.u2, mf.b2, float(x)))


def fuzzify(partition: MFPartition, x: float) -> np.ndarray:
    """Degree vector for x; out-of-hull values saturate the edge membership."""
    return np.asarray(impl.fuzzify(partition._corners, len(partition), float(x)))


def infer(rules: RuleTable, deg1, deg2, n_outputs: int) -> np.ndarray:
    """Max-min inference over the rule grid."""
    deg1 = np.ascontiguousarray(deg1, dtype=float)
    deg2 = np.ascontiguousarray(deg2, dtype=float)
    n1, n2 = rules.shape
    if deg1.shape != (n1,) or deg2.shape != (n2,):
        raise ValidationError(
            f"degree vectors {deg1.shape}/{deg2.shape} do not match rule grid {rules.shape}"
        )
    if n_outputs < rules.n_outputs_min:
        raise ValidationError(
            f"rule grid references output {rules.n_outputs_min} but only "
            f"{n_outputs} outputs exist"
        )
    return np.asarray(impl.infer(rules._flat0, n1, n2, deg1, deg2, n_outputs))


def clipped_shape(mf: TrapezoidMF, h: float) -> ClippedShape:
    """Area and centroid of the membership clipped at height h in [0, 1]."""
    if not 0.0 <= h <= 1.0:
        raise ValidationError(f"clip height must be in [0, 1], got {h}")
    return ClippedShape(*impl.clipped_shape(mf.b1, mf.u1, mf.u2, mf.b2, float(h)))


def intersection_shape(mf_j: TrapezoidMF, mf_j1: TrapezoidMF, h_j: float,
                       h_j1: float) -> ClippedShape:
    """Area and centroid of the overlap of two adjacent clipped memberships.

    mf_j must precede mf_j1 in partition order; non-overlapping supports give
    an empty shape.
    """
    for name, h in (("h_j", h_j), ("h_j1", h_j1)):
        if not 0.0 <= h <= 1.0:
            raise ValidationError(f"{name} must be in [0, 1], got {h}")
    return ClippedShape(
        *impl.intersection_shape(
            mf_j.b1, mf_j.u1, mf_j.u2, mf_j.b2,
            mf_j1.b1, mf_j1.u1, mf_j1.u2, mf_j1.b2,
            float(h_j), float(h_j1),
        )
    )


def defuzzify(partition: MFPartition, y_inf, fallback: float) -> float:
    """Centroid of the union of clipped memberships; fallback when empty.

    Inclusion-exclusion over individual shapes minus adjacent intersections.
    A union area at or below 1e-12 returns the caller's fallback (hold-last
    semantics: a balance controller must always emit a defined gain).
    """
    y = np.ascontiguousarray(y_inf, dtype=float)
    if y.shape != (len(partition),):
        raise ValidationError(
            f"inference vector has shape {y.shape}, partition has {len(partition)} memberships"
        )
    if y.min() < 0.0 or y.max() > 1.0:
        raise ValidationError("inference degrees must lie in [0, 1]")
    num, den = impl.union_centroid(partition._corners, len(partition), y)
    if den <= DEGENERATE_AREA:
        return float(fallback)
    return float(num / den)


class GainScheduler:
    """Maps (theta, theta_dot) to the scheduled gains (K_theta, K_theta_dot).

    Carries the hold-last fallback gains as per-run mutable state; use one
    instance per simulation run. Everything else is immutable shared config.
    """

    def __init__(self, angle_partition: MFPartition, velocity_partition: MFPartition,
                 angle_gain_partition: MFPartition, velocity_gain_partition: MFPartition,
                 angle_gain_rules: RuleTable, velocity_gain_rules: RuleTable,
                 initial_gains: tuple = MEDIUM_GAINS):
        expected = (len(angle_partition), len(velocity_partition))
        for name, rules in (("angle_gain_rules", angle_gain_rules),
                            ("velocity_gain_rules", velocity_gain_rules)):
            if rules.shape != expected:
                raise ValidationError(
                    f"{name}: grid is {rules.shape[0]}x{rules.shape[1]} but the "
                    f"angle partition has {expected[0]} and the velocity "
                    f"partition {expected[1]} memberships"
                )
        if angle_gain_rules.n_outputs_min > len(angle_gain_partition):
            raise ValidationError("angle_gain_rules reference a missing output membership")
        if velocity_gain_rules.n_outputs_min > len(velocity_gain_partition):
            raise ValidationError("velocity_gain_rules reference a missing output membership")
        for p in (angle_partition, velocity_partition):
            if not p.covers_hull():
                raise ValidationError(
                    f"{p.name}: input partition leaves gaps inside its hull"
                )
        self.angle_partition = angle_partition
        self.velocity_partition = velocity_partition
        self.angle_gain_partition = angle_gain_partition
        self.velocity_gain_partition = velocity_gain_partition
        self.angle_gain_rules = angle_gain_rules
        self.velocity_gain_rules = velocity_gain_rules
        self.last_gains = (float(initial_gains[0]), float(initial_gains[1]))

    def schedule_gains(self, theta: float, theta_dot: float) -> tuple:
        """One scheduling pass: fuzzify both inputs once, infer and defuzzify
        each gain system, update the hold-last fallback."""
        deg_angle = fuzzify(self.angle_partition, theta)
        deg_vel = fuzzify(self.velocity_partition, theta_dot)
        y_angle = infer(self.angle_gain_rules, deg_angle, deg_vel,
                        len(self.angle_gain_partition))
        y_vel = infer(self.velocity_gain_rules, deg_angle, deg_vel,
                      len(self.velocity_gain_partition))
        k_theta = defuzzify(self.angle_gain_partition, y_angle, self.last_gains[0])
        k_theta_dot = defuzzify(self.velocity_gain_partition, y_vel, self.last_gains[1])
        self.last_gains = (k_theta, k_theta_dot)
        return self.last_gains


def _partition_from_rows(name: str, units: str, rows) -> MFPartition:
    mfs = []
    for i, row in enumerate(rows):
        if len(row) != 4:
            raise ValidationError(f"{name}[{i}]: expected 4 corners, got {len(row)}")
        try:
            mfs.append(TrapezoidMF(*[float(v) for v in row]))
        except ValidationError as exc:
            raise ValidationError(f"{name}[{i}]: {exc}") from None
    try:
        return MFPartition(name=name, units=units, mfs=tuple(mfs))
    except ValidationError as exc:
        raise ValidationError(f"{name}: {exc}") from None


_CONFIG_KEYS = ("angle_mfs", "velocity_mfs", "angle_gain_mfs", "velocity_gain_mfs",
                "angle_gain_rules", "velocity_gain_rules")


def scheduler_from_dict(doc: dict) -> GainScheduler:
    """Build a scheduler from the JSON config structure (1-based rule indices)."""
    for key in _CONFIG_KEYS:
        if key not in doc:
            raise ValidationError(f"fuzzy config missing field '{key}'")
    return GainScheduler(
        angle_partition=_partition_from_rows("angle_mfs", "deg", doc["angle_mfs"]),
        velocity_partition=_partition_from_rows("velocity_mfs", "rad/s", doc["velocity_mfs"]),
        angle_gain_partition=_partition_from_rows("angle_gain_mfs", "deg/deg",
                                                  doc["angle_gain_mfs"]),
        velocity_gain_partition=_partition_from_rows("velocity_gain_mfs", "deg/(rad/s)",
                                                     doc["velocity_gain_mfs"]),
        angle_gain_rules=RuleTable(np.array(doc["angle_gain_rules"])),
        velocity_gain_rules=RuleTable(np.array(doc["velocity_gain_rules"])),
    )


def scheduler_to_dict(sched: GainScheduler) -> dict:
    return {
        "angle_mfs": [[mf.b1, mf.u1, mf.u2, mf.b2] for mf in sched.angle_partition.mfs],
        "velocity_mfs": [[mf.b1, mf.u1, mf.u2, mf.b2] for mf in sched.velocity_partition.mfs],
        "angle_gain_mfs": [[mf.b1, mf.u1, mf.u2, mf.b2]
                           for mf in sched.angle_gain_partition.mfs],
        "velocity_gain_mfs": [[mf.b1, mf.u1, mf.u2, mf.b2]
                              for mf in sched.velocity_gain_partition.mfs],
        "angle_gain_rules": sched.angle_gain_rules.grid.tolist(),
        "velocity_gain_rules": sched.velocity_gain_rules.grid.tolist(),
    }


def load_scheduler(path) -> GainScheduler:
    with open(path) as fh:
        doc = json.load(fh)
    return scheduler_from_dict(doc)


def save_scheduler(sched: GainScheduler, path) -> None:
    with open(path, "w") as fh:
        json.dump(scheduler_to_dict(sched), fh, indent=2)
        fh.write("\n")


def default_scheduler() -> GainScheduler:
    """The shipped tuning.

    Angle rows: NegativeHigh, Negative, Positive, PositiveHigh. Velocity
    columns: Negative, Average, Positive. Gain memberships: Zero, Medium,
    High, with Medium/High centered on the Q11 = 40 / Q11 = 75 LQR designs
    and Zero a literal zero gain. Every row maps uniformly across velocity
    columns: far-from-upright angles get High, slightly-negative Medium, and
    the small-positive band around the standing lean gets Zero so the robot
    settles instead of fighting its own posture.
    """
    return scheduler_from_dict(
        {
            "angle_mfs": [
                [-90.0, -45.0, -21.0, -11.0],
                [-21.0, -11.0, 0.0, 3.0],
                [0.0, 3.0, 7.0, 10.0],
                [7.0, 10.0, 45.0, 90.0],
            ],
            "velocity_mfs": [
                [-7.0, -3.0, -0.7, -0.5],
                [-0.7, -0.5, 0.5, 0.7],
                [0.5, 0.7, 3.0, 7.0],
            ],
            "angle_gain_mfs": [
                [0.0, 0.0, 0.0, 1.68],
                [1.68, 2.743, 2.743, 3.806],
                [2.743, 3.806, 3.806, 4.869],
            ],
            "velocity_gain_mfs": [
                [0.0, 0.0, 0.0, 0.486],
                [0.486, 0.506, 0.506, 0.526],
                [0.506, 0.526, 0.526, 0.546],
            ],
            "angle_gain_rules": [[3, 3, 3], [2, 2, 2], [1, 1, 1], [3, 3, 3]],
            "velocity_gain_rules": [[3, 3, 3], [2, 2, 2], [1, 1, 1], [2, 2, 2]],
        }
    )
