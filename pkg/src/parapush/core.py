"""Shared domain types for the pushing world: states, actions, scenes, trajectories.

All types are immutable value objects, safe to copy and share across workers.
The flat-vector layout produced by :func:`state_to_vector` is a contract the
learned model depends on; see the function docstring.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Pusher speed cap in m/s.  A 1 s action then moves the pusher by at most
# ~2 slider radii, which keeps single pushes in the regime the models target.
MAX_PUSHER_SPEED = 0.1

PUSHER_DIM = 4   # x, y, vx, vy
SLIDER_DIM = 6   # x, y, theta, vx, vy, omega

Vec2 = tuple[float, float]


def wrap_angle(theta: float) -> float:
    """Wrap an angle to [-pi, pi).  Identity (bit-exact) for in-range inputs."""
    w = math.remainder(theta, math.tau)
    if w == math.pi:
        w = -math.pi
    return w


def _check_finite(name: str, *values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {values}")


@dataclass(frozen=True, slots=True)
class PusherState:
    """Planar pose and velocity of the velocity-controlled pusher."""

    position: Vec2
    velocity: Vec2 = (0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        _check_finite("pusher position", *self.position)
        _check_finite("pusher velocity", *self.velocity)


@dataclass(frozen=True, slots=True)
class SliderState:
    """Planar pose and velocity of one slider disc.

    Orientation is stored wrapped to [-pi, pi).  It is kept in the state for
    fidelity but excluded from position-based error metrics.
    """

    position: Vec2
    orientation: float = 0.0
    linear_velocity: Vec2 = (0.0, 0.0)
    angular_velocity: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))
        object.__setattr__(
            self, "linear_velocity",
            (float(self.linear_velocity[0]), float(self.linear_velocity[1])),
        )
        _check_finite("slider position", *self.position)
        _check_finite("slider velocity", *self.linear_velocity)
        _check_finite("slider orientation", self.orientation)
        _check_finite("slider angular velocity", self.angular_velocity)
        object.__setattr__(self, "orientation", wrap_angle(float(self.orientation)))
        object.__setattr__(self, "angular_velocity", float(self.angular_velocity))


@dataclass(frozen=True, slots=True)
class SystemState:
    """Pusher plus all sliders.  Slider count must match the scene config."""

    pusher: PusherState
    sliders: tuple[SliderState, ...]

    def __post_init__(self):
        object.__setattr__(self, "sliders", tuple(self.sliders))
        if len(self.sliders) < 1:
            raise ValueError("SystemState requires at least one slider")


@dataclass(frozen=True, slots=True)
class ControlAction:
    """A pusher velocity command held for a fixed duration."""

    velocity: Vec2
    duration: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "velocity", (float(self.velocity[0]), float(self.velocity[1])))
        object.__setattr__(self, "duration", float(self.duration))
        _check_finite("action velocity", *self.velocity)
        if not (self.duration > 0.0 and math.isfinite(self.duration)):
            raise ValueError(f"action duration must be positive, got {self.duration}")
        speed = math.hypot(*self.velocity)
        if speed > MAX_PUSHER_SPEED * (1.0 + 1e-9):
            raise ValueError(f"action speed {speed:.4f} exceeds cap {MAX_PUSHER_SPEED}")


@dataclass(frozen=True, slots=True)
class ControlSequence:
    """An ordered sequence of N control actions."""

    actions: tuple[ControlAction, ...]

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(self.actions))
        if len(self.actions) < 1:
            raise ValueError("ControlSequence requires at least one action")

    def __len__(self) -> int:
        return len(self.actions)

    def __iter__(self):
        return iter(self.actions)

    def __getitem__(self, i):
        return self.actions[i]

    @staticmethod
    def constant(velocity: Vec2, n_actions: int, duration: float = 1.0) -> "ControlSequence":
        return ControlSequence(tuple(ControlAction(velocity, duration) for _ in range(n_actions)))

    @staticmethod
    def zeros(n_actions: int, duration: float = 1.0) -> "ControlSequence":
        return ControlSequence.constant((0.0, 0.0), n_actions, duration)


@dataclass(frozen=True, slots=True)
class Rect:
    """Axis-aligned rectangle, (xmin, ymin) to (xmax, ymax), meters."""

    xmin: float
    ymin: float
    xmax: float
    ymax: float

    def __post_init__(self):
        if not (self.xmax > self.xmin and self.ymax > self.ymin):
            raise ValueError("degenerate rectangle")

    def contains(self, point: Vec2) -> bool:
        return self.xmin <= point[0] <= self.xmax and self.ymin <= point[1] <= self.ymax

    def shrunk(self, margin: float) -> "Rect":
        return Rect(self.xmin + margin, self.ymin + margin, self.xmax - margin, self.ymax - margin)


_DEFAULT_PARKED = ((0.52, 0.52), (0.52, -0.52), (-0.52, 0.52), (-0.52, -0.52))


@dataclass(frozen=True, slots=True)
class SceneConfig:
    """Fixed world shared by every propagator: geometry, bounds, goal.

    ``parked_positions`` are on-table poses outside the sampling workspace
    where inactive sliders sit; the learned model expects inactive sliders
    exactly there.  The workspace is ``table_bounds`` shrunk by
    ``workspace_margin``.
    """

    num_sliders: int = 4
    pusher_radius: float = 0.0145
    slider_radii: tuple[float, ...] = (0.0512, 0.0512, 0.0512, 0.0512)
    table_bounds: Rect = field(default_factory=lambda: Rect(-0.6, -0.6, 0.6, 0.6))
    goal_center: Vec2 = (0.3, 0.3)
    goal_radius: float = 0.06
    goal_slider_index: int = 0
    parked_positions: tuple[Vec2, ...] = _DEFAULT_PARKED
    workspace_margin: float = 0.2

    def __post_init__(self):
        if self.num_sliders < 1:
            raise ValueError("need at least one slider")
        if len(self.slider_radii) != self.num_sliders:
            raise ValueError("slider_radii length must equal num_sliders")
        if len(self.parked_positions) < self.num_sliders:
            raise ValueError("need a parked position per slider")
        if not (0 <= self.goal_slider_index < self.num_sliders):
            raise ValueError("goal_slider_index out of range")
        if self.pusher_radius <= 0 or any(r <= 0 for r in self.slider_radii):
            raise ValueError("radii must be positive")
        ws = self.workspace()
        r_max = max(self.slider_radii)
        for i, p in enumerate(self.parked_positions):
            if ws.contains(p):
                raise ValueError(f"parked position {i} lies inside the active workspace")
            for q in self.parked_positions[:i]:
                if math.hypot(p[0] - q[0], p[1] - q[1]) < 2.0 * r_max:
                    raise ValueError("parked positions overlap")

    def workspace(self) -> Rect:
        return self.table_bounds.shrunk(self.workspace_margin)

    @property
    def state_dim(self) -> int:
        return PUSHER_DIM + SLIDER_DIM * self.num_sliders


def default_scene(num_sliders: int = 4, **overrides) -> SceneConfig:
    """Standard desk-scale scene: 1.2 m square table, 5.12 cm sliders."""
    if num_sliders > len(_DEFAULT_PARKED) and "parked_positions" not in overrides:
        raise ValueError("pass explicit parked_positions for more than 4 sliders")
    kwargs = dict(
        num_sliders=num_sliders,
        slider_radii=(0.0512,) * num_sliders,
        parked_positions=_DEFAULT_PARKED,
    )
    kwargs.update(overrides)
    return SceneConfig(**kwargs)


@dataclass(frozen=True, slots=True)
class Trajectory:
    """Sequence of N+1 states; index 0 is the rollout's initial state."""

    states: tuple[SystemState, ...]

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        if len(self.states) < 1:
            raise ValueError("empty trajectory")

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i):
        return self.states[i]

    def __iter__(self):
        return iter(self.states)

    @property
    def final(self) -> SystemState:
        return self.states[-1]


def state_to_vector(s: SystemState, cfg: SceneConfig) -> np.ndarray:
    """Flatten a state: pusher x, y, vx, vy, then per slider x, y, theta, vx, vy, omega.

    Length 4 + 6 * num_sliders (28 for 4 sliders).  The layout is a contract:
    the learned model's inputs and outputs are indexed against it.
    """
    if len(s.sliders) != cfg.num_sliders:
        raise ValueError(
            f"state has {len(s.sliders)} sliders, scene expects {cfg.num_sliders}")
    out = np.empty(cfg.state_dim, dtype=np.float64)
    out[0:2] = s.pusher.position
    out[2:4] = s.pusher.velocity
    for i, sl in enumerate(s.sliders):
        base = PUSHER_DIM + SLIDER_DIM * i
        out[base + 0] = sl.position[0]
        out[base + 1] = sl.position[1]
        out[base + 2] = sl.orientation
        out[base + 3] = sl.linear_velocity[0]
        out[base + 4] = sl.linear_velocity[1]
        out[base + 5] = sl.angular_velocity
    return out


def vector_to_state(v: np.ndarray, cfg: SceneConfig) -> SystemState:
    """Inverse of :func:`state_to_vector`.  Orientations are re-wrapped."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (cfg.state_dim,):
        raise ValueError(f"expected vector of length {cfg.state_dim}, got shape {v.shape}")
    pusher = PusherState((v[0], v[1]), (v[2], v[3]))
    sliders = []
    for i in range(cfg.num_sliders):
        base = PUSHER_DIM + SLIDER_DIM * i
        sliders.append(SliderState(
            position=(v[base], v[base + 1]),
            orientation=v[base + 2],
            linear_velocity=(v[base + 3], v[base + 4]),
            angular_velocity=v[base + 5],
        ))
    return SystemState(pusher, tuple(sliders))


def orientation_indices(cfg: SceneConfig) -> list[int]:
    """Indices of orientation entries in the flat state vector."""
    return [PUSHER_DIM + SLIDER_DIM * i + 2 for i in range(cfg.num_sliders)]
