"""Deterministic kinematic workcell simulation.

Stands in for real hardware: a point TCP moving through a scene of
axis-aligned boxes, each optionally pierced by a rectangular through-hole.
Touching a solid region halts motion at the surface and makes the force
sensor report a fixed contact force; readings pass through a running-average
filter over the last `filter_window` samples. Everything is seeded and
single-threaded, so identical call sequences produce bit-identical states.

The joint-to-pose mapping is pluggable. The default model maps joints 1-3 to
the TCP position and joints 4-6 to ZYX Euler orientation, which is trivially
invertible and keeps motion in joint space and Cartesian space identical.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Protocol

from .model import Direction, Frame, SpeedLevel


class WorkcellConfigError(ValueError):
    """A workcell description violates its schema or invariants."""


class BitOutOfRange(IndexError):
    """An I/O write addressed a bit at or beyond the configured bit count."""


# ---------------------------------------------------------------------------
# Geometry


@dataclass(frozen=True)
class Pose:
    """Position in meters plus ZYX Euler orientation in radians."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        object.__setattr__(self, "orientation", tuple(float(c) for c in self.orientation))


IDENTITY_POSE = Pose((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))


def rotation_matrix(orientation) -> tuple[tuple[float, float, float], ...]:
    """Rows of Rz(yaw) @ Ry(pitch) @ Rx(roll) for orientation (roll, pitch, yaw)."""
    roll, pitch, yaw = orientation
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return (
        (cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr),
        (sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr),
        (-sp, cp * sr, cp * cr),
    )


class HoleAxis(Enum):
    X = "x"
    Y = "y"
    Z = "z"


_AXIS_INDEX = {HoleAxis.X: 0, HoleAxis.Y: 1, HoleAxis.Z: 2}
# Cross-section axes for a hole along each axis, in (u, v) order.
_CROSS_AXES = {HoleAxis.X: (1, 2), HoleAxis.Y: (0, 2), HoleAxis.Z: (0, 1)}


@dataclass(frozen=True)
class Hole:
    axis: HoleAxis
    center: tuple[float, float]
    half_extents: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "half_extents", tuple(float(c) for c in self.half_extents))


@dataclass(frozen=True)
class Obstacle:
    """Axis-aligned box, solid except for an optional rectangular through-hole."""

    box_min: tuple[float, float, float]
    box_max: tuple[float, float, float]
    hole: Optional[Hole] = None

    def __post_init__(self):
        object.__setattr__(self, "box_min", tuple(float(c) for c in self.box_min))
        object.__setattr__(self, "box_max", tuple(float(c) for c in self.box_max))

    def validate(self) -> None:
        for lo, hi in zip(self.box_min, self.box_max):
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise WorkcellConfigError("obstacle box min must be strictly below max")
        if self.hole is None:
            return
        u, v = _CROSS_AXES[self.hole.axis]
        for axis, c, h in zip((u, v), self.hole.center, self.hole.half_extents):
            if not (math.isfinite(h) and h > 0):
                raise WorkcellConfigError("hole half-extents must be positive")
            if c - h < self.box_min[axis] or c + h > self.box_max[axis]:
                raise WorkcellConfigError("hole must lie within the obstacle face")

    def contains_solid(self, point) -> bool:
        """True when the point is inside the box but outside the hole prism."""
        for lo, hi, p in zip(self.box_min, self.box_max, point):
            if p < lo or p > hi:
                return False
        if self.hole is not None:
            u, v = _CROSS_AXES[self.hole.axis]
            cu, cv = self.hole.center
            hu, hv = self.hole.half_extents
            if abs(point[u] - cu) <= hu and abs(point[v] - cv) <= hv:
                return False
        return True


# ---------------------------------------------------------------------------
# Configuration

DEFAULT_SPEED_MAP = {
    SpeedLevel.VERY_FAST: 0.5,
    SpeedLevel.FAST: 0.25,
    SpeedLevel.NORMAL: 0.1,
    SpeedLevel.SLOW: 0.05,
    SpeedLevel.VERY_SLOW: 0.01,
}

DEFAULT_SPEED = SpeedLevel.NORMAL

_SPEED_ORDER = (
    SpeedLevel.VERY_FAST,
    SpeedLevel.FAST,
    SpeedLevel.NORMAL,
    SpeedLevel.SLOW,
    SpeedLevel.VERY_SLOW,
)


@dataclass(frozen=True)
class WorkcellConfig:
    dof: int = 6
    home_joints: tuple[float, ...] = (0.0,) * 6
    bit_count: int = 8
    obstacles: tuple[Obstacle, ...] = ()
    contact_force: float = 50.0
    noise_sigma: float = 0.5
    filter_window: int = 5
    dt: float = 0.008
    speed_map: dict[SpeedLevel, float] = field(
        default_factory=lambda: dict(DEFAULT_SPEED_MAP)
    )
    perturbation_radius: float = 0.01
    rng_seed: int = 0
    tool_transform: Pose = IDENTITY_POSE

    def __post_init__(self):
        object.__setattr__(self, "home_joints", tuple(float(j) for j in self.home_joints))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))

    def validate(self) -> None:
        if self.dof < 1:
            raise WorkcellConfigError("dof must be positive")
        if len(self.home_joints) != self.dof:
            raise WorkcellConfigError("home_joints length must equal dof")
        if self.bit_count < 1:
            raise WorkcellConfigError("bit_count must be positive")
        if not (math.isfinite(self.contact_force) and self.contact_force > 0):
            raise WorkcellConfigError("contact_force must be positive")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise WorkcellConfigError("noise_sigma must be non-negative")
        if self.filter_window < 1:
            raise WorkcellConfigError("filter_window must be positive")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise WorkcellConfigError("dt must be positive")
        if not (math.isfinite(self.perturbation_radius) and self.perturbation_radius >= 0):
            raise WorkcellConfigError("perturbation_radius must be non-negative")
        if self.rng_seed < 0 or self.rng_seed > 0xFFFFFFFFFFFFFFFF:
            raise WorkcellConfigError("rng_seed must fit in 64 unsigned bits")
        missing = [s.value for s in _SPEED_ORDER if s not in self.speed_map]
        if missing:
            raise WorkcellConfigError(f"speed_map missing levels: {missing}")
        values = [self.speed_map[s] for s in _SPEED_ORDER]
        if any(not (math.isfinite(v) and v > 0) for v in values):
            raise WorkcellConfigError("speed values must be positive")
        if any(slower >= faster for slower, faster in zip(values[1:], values)):
            raise WorkcellConfigError(
                "speed_map must strictly decrease from very_fast to very_slow"
            )
        for obs in self.obstacles:
            obs.validate()


_CONFIG_KEYS = {
    "dof",
    "home_joints",
    "bit_count",
    "obstacles",
    "contact_force",
    "noise_sigma",
    "filter_window",
    "dt",
    "speed_map",
    "perturbation_radius",
    "rng_seed",
    "tool_transform",
}


def _pose_from_dict(raw) -> Pose:
    if not isinstance(raw, dict):
        raise WorkcellConfigError("pose must be an object with position/orientation")
    unknown = set(raw) - {"position", "orientation"}
    if unknown:
        raise WorkcellConfigError(f"unknown pose keys: {sorted(unknown)}")
    return Pose(
        tuple(raw.get("position", (0.0, 0.0, 0.0))),
        tuple(raw.get("orientation", (0.0, 0.0, 0.0))),
    )


def _obstacle_from_dict(raw) -> Obstacle:
    if not isinstance(raw, dict):
        raise WorkcellConfigError("obstacle must be an object")
    unknown = set(raw) - {"box", "hole"}
    if unknown:
        raise WorkcellConfigError(f"unknown obstacle keys: {sorted(unknown)}")
    box = raw.get("box")
    if not isinstance(box, dict) or set(box) != {"min", "max"}:
        raise WorkcellConfigError("obstacle box must have exactly min and max")
    hole = None
    if raw.get("hole") is not None:
        h = raw["hole"]
        if not isinstance(h, dict) or set(h) != {"axis", "center", "half_extents"}:
            raise WorkcellConfigError(
                "hole must have exactly axis, center, and half_extents"
            )
        try:
            axis = HoleAxis(h["axis"])
        except ValueError:
            raise WorkcellConfigError(f"unknown hole axis: {h['axis']!r}") from None
        hole = Hole(axis, tuple(h["center"]), tuple(h["half_extents"]))
    return Obstacle(tuple(box["min"]), tuple(box["max"]), hole)


def workcell_config_from_dict(raw: dict) -> WorkcellConfig:
    """Build and validate a config from parsed JSON; unknown keys are rejected."""
    if not isinstance(raw, dict):
        raise WorkcellConfigError("workcell config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise WorkcellConfigError(f"unknown workcell config keys: {sorted(unknown)}")
    kwargs = {}
    for key in ("dof", "bit_count", "contact_force", "noise_sigma",
                "filter_window", "dt", "perturbation_radius", "rng_seed"):
        if key in raw:
            kwargs[key] = raw[key]
    if "home_joints" in raw:
        kwargs["home_joints"] = tuple(raw["home_joints"])
    if "obstacles" in raw:
        kwargs["obstacles"] = tuple(_obstacle_from_dict(o) for o in raw["obstacles"])
    if "speed_map" in raw:
        sm = {}
        for key, value in raw["speed_map"].items():
            try:
                sm[SpeedLevel(key)] = float(value)
            except ValueError:
                raise WorkcellConfigError(f"unknown speed level: {key!r}") from None
        kwargs["speed_map"] = sm
    if "tool_transform" in raw:
        kwargs["tool_transform"] = _pose_from_dict(raw["tool_transform"])
    try:
        config = WorkcellConfig(**kwargs)
    except TypeError as exc:
        raise WorkcellConfigError(str(exc)) from None
    config.validate()
    return config


def load_workcell_config(path) -> WorkcellConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise WorkcellConfigError(f"invalid JSON in {path}: {exc}") from None
    return workcell_config_from_dict(raw)


# ---------------------------------------------------------------------------
# Kinematics


class KinematicModel(Protocol):
    def fk(self, joints: tuple[float, ...]) -> Pose: ...

    def ik(self, pose: Pose) -> tuple[float, ...]: ...


class TranslationEulerModel:
    """Trivially invertible joint map: joints 1-3 position, joints 4-6 Euler."""

    dof = 6

    def fk(self, joints) -> Pose:
        return Pose(tuple(joints[0:3]), tuple(joints[3:6]))

    def ik(self, pose: Pose) -> tuple[float, ...]:
        return pose.position + pose.orientation


def fk(joints) -> Pose:
    return TranslationEulerModel().fk(joints)


def ik(pose: Pose) -> tuple[float, ...]:
    return TranslationEulerModel().ik(pose)


# ---------------------------------------------------------------------------
# State and sensing


@dataclass(frozen=True)
class SensorReading:
    raw: float
    filtered: float
    at: float


class WorkcellState:
    """Mutable snapshot of the simulated cell; single writer at a time."""

    __slots__ = ("joints", "io_bits", "clock", "force_history", "in_contact")

    def __init__(self, joints, bit_count: int, filter_window: int):
        self.joints: tuple[float, ...] = tuple(joints)
        self.io_bits: list[bool] = [False] * bit_count
        self.clock: float = 0.0
        self.force_history: deque[float] = deque(maxlen=filter_window)
        self.in_contact: bool = False

    def bits(self) -> tuple[bool, ...]:
        return tuple(self.io_bits)


class Workcell:
    """Config + kinematic model + mutable state, with the simulation verbs."""

    def __init__(self, config: WorkcellConfig, model: Optional[KinematicModel] = None):
        config.validate()
        self.config = config
        self.model = model if model is not None else TranslationEulerModel()
        model_dof = getattr(self.model, "dof", config.dof)
        if model_dof != config.dof:
            raise WorkcellConfigError(
                f"kinematic model expects {model_dof} joints, config says {config.dof}"
            )
        self.state = WorkcellState(config.home_joints, config.bit_count, config.filter_window)

    # -- poses ----------------------------------------------------------------

    def tcp_pose(self) -> Pose:
        return self.model.fk(self.state.joints)

    def speed_value(self, level: SpeedLevel) -> float:
        return self.config.speed_map[level]

    # -- motion -----------------------------------------------------------

    def step_motion(self, target: Pose, speed: float, dt: Optional[float] = None):
        """Advance one control cycle toward `target`.

        Moves the TCP along the straight position segment by at most
        speed*dt, halting at the first solid surface on the way. The
        orientation interpolates in lockstep with position progress and
        snaps for pure rotations. Returns (contact, meters advanced).
        """
        state = self.state
        if dt is None:
            dt = self.config.dt
        pose = self.model.fk(state.joints)
        px, py, pz = pose.position
        tx, ty, tz = target.position
        dx, dy, dz = tx - px, ty - py, tz - pz
        dist = math.sqrt(dx * dx + dy * dy + dz * dz)

        if dist <= 1e-15:
            state.joints = self.model.ik(Pose(target.position, target.orientation))
            state.clock += dt
            state.in_contact = False
            return False, 0.0

        step = min(speed * dt, dist)
        ux, uy, uz = dx / dist, dy / dist, dz / dist
        hit = self._first_hit((px, py, pz), (ux, uy, uz), step)
        if hit is None:
            advanced = step
            contact = False
        else:
            advanced = max(0.0, hit)
            contact = True

        if not contact and advanced >= dist - 1e-15:
            new_pose = Pose(target.position, target.orientation)
        else:
            frac = advanced / dist
            o0 = pose.orientation
            o1 = target.orientation
            new_pose = Pose(
                (px + ux * advanced, py + uy * advanced, pz + uz * advanced),
                (
                    o0[0] + (o1[0] - o0[0]) * frac,
                    o0[1] + (o1[1] - o0[1]) * frac,
                    o0[2] + (o1[2] - o0[2]) * frac,
                ),
            )
        state.joints = self.model.ik(new_pose)
        state.clock += dt
        state.in_contact = contact
        return contact, advanced

    def _first_hit(self, origin, unit_dir, length):
        """Distance along the segment to the first solid surface, or None."""
        best = None
        for obs in self.config.obstacles:
            hit = _segment_hit(origin, unit_dir, length, obs)
            if hit is not None and (best is None or hit < best):
                best = hit
        return best

    # -- sensing ----------------------------------------------------------

    def read_force(self, rng) -> SensorReading:
        """Sample the force sensor and push the raw value through the filter."""
        state = self.state
        raw = self.config.contact_force if state.in_contact else 0.0
        raw += rng.gauss(0.0, self.config.noise_sigma)
        state.force_history.append(raw)
        filtered = sum(state.force_history) / len(state.force_history)
        return SensorReading(raw, filtered, state.clock)

    def filtered_force(self) -> float:
        history = self.state.force_history
        if not history:
            return 0.0
        return sum(history) / len(history)

    # -- I/O -----------------------------------------------------------------

    def set_io(self, bit: int, level: bool) -> None:
        if bit < 0 or bit >= self.config.bit_count:
            raise BitOutOfRange(
                f"bit {bit} outside 0..{self.config.bit_count - 1}"
            )
        self.state.io_bits[bit] = bool(level)

    # -- frames ----------------------------------------------------------

    def direction_vector(self, direction: Direction, frame: Frame):
        """Unit vector for a symbolic direction, expressed in base coordinates."""
        if frame is Frame.BASE:
            rows = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
        else:
            rows = rotation_matrix(self.tcp_pose().orientation)
            if frame is Frame.TOOLMOUNT:
                tool = rotation_matrix(self.config.tool_transform.orientation)
                # Flange orientation: R_tcp composed with the inverse (i.e.
                # transpose) of the tool rotation.
                rows = tuple(
                    tuple(
                        sum(rows[i][k] * tool[j][k] for k in range(3))
                        for j in range(3)
                    )
                    for i in range(3)
                )
        axis, sign = _DIRECTION_AXES[direction]
        vec = (rows[0][axis] * sign, rows[1][axis] * sign, rows[2][axis] * sign)
        norm = math.sqrt(vec[0] ** 2 + vec[1] ** 2 + vec[2] ** 2)
        return (vec[0] / norm, vec[1] / norm, vec[2] / norm)


_DIRECTION_AXES = {
    Direction.FORWARD: (0, 1.0),
    Direction.X: (0, 1.0),
    Direction.BACKWARDS: (0, -1.0),
    Direction.LEFT: (1, 1.0),
    Direction.Y: (1, 1.0),
    Direction.RIGHT: (1, -1.0),
    Direction.UP: (2, 1.0),
    Direction.Z: (2, 1.0),
    Direction.DOWN: (2, -1.0),
}


def _segment_hit(origin, unit_dir, length, obs: Obstacle):
    """Entry distance of a segment into an obstacle's solid region, or None.

    Solid region is the box minus the hole prism. Zero-length grazing
    contacts (sliding exactly on a face while leaving) do not count.
    """
    r0 = -math.inf
    r1 = math.inf
    for axis in range(3):
        o = origin[axis]
        d = unit_dir[axis]
        lo = obs.box_min[axis] - o
        hi = obs.box_max[axis] - o
        if abs(d) < 1e-15:
            if lo > 0.0 or hi < 0.0:
                return None
        else:
            ta = lo / d
            tb = hi / d
            if ta > tb:
                ta, tb = tb, ta
            if ta > r0:
                r0 = ta
            if tb < r1:
                r1 = tb
            if r0 > r1:
                return None
    enter = max(r0, 0.0)
    exit_ = min(r1, length)
    if exit_ <= enter:
        return None

    if obs.hole is None:
        return enter

    u, v = _CROSS_AXES[obs.hole.axis]
    cu, cv = obs.hole.center
    hu, hv = obs.hole.half_extents

    pu = origin[u] + unit_dir[u] * enter
    pv = origin[v] + unit_dir[v] * enter
    if abs(pu - cu) > hu or abs(pv - cv) > hv:
        return enter

    # Entered through the aperture; find where the ray leaves the hole
    # cross-section. Still inside the box at that point means hitting the
    # channel's side wall.
    g1 = math.inf
    for axis, c, h in ((u, cu, hu), (v, cv, hv)):
        o = origin[axis]
        d = unit_dir[axis]
        if abs(d) < 1e-15:
            continue
        ta = (c - h - o) / d
        tb = (c + h - o) / d
        if ta > tb:
            ta, tb = tb, ta
        if tb < g1:
            g1 = tb
    if g1 < exit_:
        return g1
    return None
