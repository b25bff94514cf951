"""Kinematic coarse propagator: the slider travels with the pusher velocity
for the in-contact fraction of the path, plus a contact-angle spin term.

Single evaluation per step, no substepping.  Defined for single-object
pushing; in multi-object scenes only the slider with the largest swept
contact length is updated, which exists so the engine can run but carries no
multi-object accuracy claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

from .core import (ControlAction, ControlSequence, PusherState, SceneConfig,
                   SliderState, SystemState, Trajectory, wrap_angle)
from .geometry import contact_point_and_angle, ray_disc_interval


@dataclass(frozen=True, slots=True)
class AnalyticalParams:
    """Tuning for the kinematic model; k_omega scales induced spin."""

    k_omega: float = 0.5

    def __post_init__(self):
        if self.k_omega <= 0.0:
            raise ValueError("k_omega must be positive")


def analytical_coarse_step(s: SystemState, u: ControlAction, cfg: SceneConfig,
                           params: AnalyticalParams = AnalyticalParams()) -> SystemState:
    """One coarse step: pusher moves kinematically; the touched slider's pose
    advances by [ux, uy, omega] * contact_fraction * duration."""
    n = cfg.num_sliders
    if len(s.sliders) != n:
        raise ValueError(f"state has {len(s.sliders)} sliders, scene expects {n}")

    ux, uy = u.velocity
    dt = u.duration
    start = s.pusher.position
    motion = (ux * dt, uy * dt)
    length = math.hypot(*motion)

    pusher = PusherState((start[0] + motion[0], start[1] + motion[1]), (ux, uy))

    # pick the slider the path overlaps most (fixed start poses)
    best_i, best_contact, best_entry = -1, 0.0, 0.0
    for i, sl in enumerate(s.sliders):
        interval = ray_disc_interval(start, motion, sl.position,
                                     cfg.pusher_radius + cfg.slider_radii[i])
        if interval is None:
            continue
        lo, hi = interval
        if hi - lo > best_contact:
            best_i, best_contact, best_entry = i, hi - lo, lo

    if best_i < 0 or length == 0.0:
        return SystemState(pusher, s.sliders)

    p_c = best_contact / length
    slider = s.sliders[best_i]

    # spin evaluated once, at the first-contact pusher position
    inv_len = 1.0 / length
    entry = (start[0] + motion[0] * best_entry * inv_len,
             start[1] + motion[1] * best_entry * inv_len)
    r_c, theta = contact_point_and_angle(entry, slider.position, u.velocity,
                                         cfg.slider_radii[best_i])
    r_norm = math.hypot(*r_c)
    speed = math.hypot(ux, uy)
    omega = params.k_omega * speed * math.sin(theta) / r_norm if r_norm > 1e-12 else 0.0

    moved = SliderState(
        position=(slider.position[0] + ux * p_c * dt,
                  slider.position[1] + uy * p_c * dt),
        orientation=wrap_angle(slider.orientation + omega * p_c * dt),
        linear_velocity=(ux, uy) if p_c > 0.0 else slider.linear_velocity,
        angular_velocity=omega if p_c > 0.0 else slider.angular_velocity,
    )
    sliders = tuple(moved if i == best_i else sl for i, sl in enumerate(s.sliders))
    return SystemState(pusher, sliders)


def analytical_rollout(s0: SystemState, seq: ControlSequence, cfg: SceneConfig,
                       params: AnalyticalParams = AnalyticalParams()) -> Trajectory:
    states = [s0]
    for u in seq:
        states.append(analytical_coarse_step(states[-1], u, cfg, params))
    return Trajectory(tuple(states))


def analytical_propagator(cfg: SceneConfig,
                          params: AnalyticalParams = AnalyticalParams()
                          ) -> Callable[[SystemState, ControlAction], SystemState]:
    """Picklable single-step propagator closure over a fixed scene."""
    return partial(analytical_coarse_step, cfg=cfg, params=params)
