"""Fine propagator: a deterministic 2D disc-contact simulator.

Advances the world in small fixed substeps.  Per substep the pusher moves
kinematically (it pushes, it is never pushed), overlaps are removed by
iterative projection with restitution-free impulses plus Coulomb-style
tangential damping, table friction decelerates each slider toward rest, and
velocities integrate positions semi-implicitly.

The inner loop is deliberately plain scalar Python: states are tiny and the
call overhead of array libraries would dominate at this size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

from .core import (ControlAction, ControlSequence, PusherState, SceneConfig,
                   SliderState, SystemState, Trajectory, wrap_angle)
from .geometry import penetration_depth


class SimulationBlowupError(RuntimeError):
    """A non-finite state was produced; parameters or inputs are unstable."""


class CrowdedWorkspaceError(RuntimeError):
    """Rejection sampling could not place all discs without overlap."""


@dataclass(frozen=True, slots=True)
class FineParams:
    """Substep integrator parameters.

    ``contact_friction`` is the Coulomb ratio capping tangential contact
    impulses against normal ones; the remaining knobs are the substep size,
    table-friction decelerations and the projection solver budget.
    """

    substep: float = 0.001
    slider_mass: float = 0.2
    linear_friction_decel: float = 1.0
    angular_friction_decel: float = 5.0
    restitution: float = 0.0
    contact_stiffness_iterations: int = 8
    penetration_tolerance: float = 1e-4
    contact_friction: float = 0.3

    def __post_init__(self):
        if self.substep <= 0.0:
            raise ValueError("substep must be positive")
        if not (0.0 <= self.restitution <= 1.0):
            raise ValueError("restitution must lie in [0, 1]")
        if self.contact_stiffness_iterations < 1:
            raise ValueError("need at least one projection iteration")
        if self.slider_mass <= 0.0 or self.penetration_tolerance <= 0.0:
            raise ValueError("mass and penetration tolerance must be positive")
        if self.contact_friction < 0.0:
            raise ValueError("contact friction must be non-negative")


def fine_step(s: SystemState, u: ControlAction, cfg: SceneConfig,
              params: FineParams = FineParams()) -> SystemState:
    """Advance the system by one control interval.

    Deterministic: identical inputs produce bit-identical outputs.  The
    returned pusher state is exactly position + velocity * duration with
    velocity equal to the command.
    """
    n = cfg.num_sliders
    if len(s.sliders) != n:
        raise ValueError(f"state has {len(s.sliders)} sliders, scene expects {n}")

    ux, uy = u.velocity
    duration = u.duration
    n_sub = max(1, math.ceil(duration / params.substep))
    dt = duration / n_sub

    px, py = s.pusher.position
    rp = cfg.pusher_radius
    radii = cfg.slider_radii
    sx = [sl.position[0] for sl in s.sliders]
    sy = [sl.position[1] for sl in s.sliders]
    sth = [sl.orientation for sl in s.sliders]
    svx = [sl.linear_velocity[0] for sl in s.sliders]
    svy = [sl.linear_velocity[1] for sl in s.sliders]
    som = [sl.angular_velocity for sl in s.sliders]

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    iters = params.contact_stiffness_iterations
    mu = params.contact_friction
    e = params.restitution
    lin_dv = params.linear_friction_decel * dt
    ang_dv = params.angular_friction_decel * dt

    for _ in range(n_sub):
        # (1) pusher moves kinematically
        px += ux * dt
        py += uy * dt

        # (2) projection solver: displace sliders out of overlap, kill the
        # approaching normal velocity, damp tangential slip
        for _ in range(iters):
            projected = False
            for i in range(n):
                ri = radii[i]
                dx = sx[i] - px
                dy = sy[i] - py
                rsum = rp + ri
                d2 = dx * dx + dy * dy
                if d2 >= rsum * rsum:
                    continue
                projected = True
                d = math.sqrt(d2)
                if d < 1e-12:
                    nx, ny = 1.0, 0.0
                else:
                    nx, ny = dx / d, dy / d
                pen = rsum - d
                sx[i] += nx * pen
                sy[i] += ny * pen
                rvx = svx[i] - ux
                rvy = svy[i] - uy
                vn = rvx * nx + rvy * ny
                if vn < 0.0:
                    dvn = -(1.0 + e) * vn
                    svx[i] += dvn * nx
                    svy[i] += dvn * ny
                    tvx = rvx - vn * nx
                    tvy = rvy - vn * ny
                    tv = math.hypot(tvx, tvy)
                    if tv > 1e-12:
                        dvt = min(mu * dvn, tv)
                        tx, ty = tvx / tv, tvy / tv
                        svx[i] -= dvt * tx
                        svy[i] -= dvt * ty
                        # surface drag spins the disc: contact sits at -n * r_i
                        som[i] += 2.0 * dvt * (nx * ty - ny * tx) / ri
            for i, j in pairs:
                dx = sx[j] - sx[i]
                dy = sy[j] - sy[i]
                rsum = radii[i] + radii[j]
                d2 = dx * dx + dy * dy
                if d2 >= rsum * rsum:
                    continue
                projected = True
                d = math.sqrt(d2)
                if d < 1e-12:
                    nx, ny = 1.0, 0.0
                else:
                    nx, ny = dx / d, dy / d
                half = 0.5 * (rsum - d)
                sx[i] -= nx * half
                sy[i] -= ny * half
                sx[j] += nx * half
                sy[j] += ny * half
                rvx = svx[j] - svx[i]
                rvy = svy[j] - svy[i]
                vn = rvx * nx + rvy * ny
                if vn < 0.0:
                    dvn = -(1.0 + e) * vn
                    svx[i] -= 0.5 * dvn * nx
                    svy[i] -= 0.5 * dvn * ny
                    svx[j] += 0.5 * dvn * nx
                    svy[j] += 0.5 * dvn * ny
                    tvx = rvx - vn * nx
                    tvy = rvy - vn * ny
                    tv = math.hypot(tvx, tvy)
                    if tv > 1e-12:
                        dvt = min(mu * dvn, tv)
                        tx, ty = tvx / tv, tvy / tv
                        svx[i] += 0.5 * dvt * tx
                        svy[i] += 0.5 * dvt * ty
                        svx[j] -= 0.5 * dvt * tx
                        svy[j] -= 0.5 * dvt * ty
                        cr = nx * ty - ny * tx
                        som[i] += dvt * cr / radii[i]
                        som[j] += dvt * cr / radii[j]
            if not projected:
                break

        # (3) table friction pulls linear and angular speed toward zero
        for i in range(n):
            sp = math.hypot(svx[i], svy[i])
            if sp > 0.0:
                scale = max(0.0, sp - lin_dv) / sp
                svx[i] *= scale
                svy[i] *= scale
            w = som[i]
            if w > 0.0:
                som[i] = max(0.0, w - ang_dv)
            elif w < 0.0:
                som[i] = min(0.0, w + ang_dv)

        # (4) semi-implicit position update
        for i in range(n):
            sx[i] += svx[i] * dt
            sy[i] += svy[i] * dt
            sth[i] += som[i] * dt

    values = sx + sy + sth + svx + svy + som
    if not all(map(math.isfinite, values)):
        raise SimulationBlowupError(
            f"non-finite state after fine step (duration {duration}, substep {params.substep})")

    pusher = PusherState((s.pusher.position[0] + ux * duration,
                          s.pusher.position[1] + uy * duration), (ux, uy))
    sliders = tuple(
        SliderState((sx[i], sy[i]), wrap_angle(sth[i]), (svx[i], svy[i]), som[i])
        for i in range(n))
    return SystemState(pusher, sliders)


def fine_rollout(s0: SystemState, seq: ControlSequence, cfg: SceneConfig,
                 params: FineParams = FineParams()) -> Trajectory:
    """Serial composition of fine steps; returns all N+1 states."""
    states = [s0]
    for u in seq:
        states.append(fine_step(states[-1], u, cfg, params))
    return Trajectory(tuple(states))


def fine_propagator(cfg: SceneConfig,
                    params: FineParams = FineParams()) -> Callable[[SystemState, ControlAction], SystemState]:
    """Picklable single-step propagator closure over a fixed scene."""
    return partial(fine_step, cfg=cfg, params=params)


def max_penetration(s: SystemState, cfg: SceneConfig) -> float:
    """Largest pairwise disc overlap in a state (pusher-slider and slider-slider)."""
    worst = 0.0
    for i, sl in enumerate(s.sliders):
        worst = max(worst, penetration_depth(
            s.pusher.position, cfg.pusher_radius, sl.position, cfg.slider_radii[i]))
        for j in range(i + 1, cfg.num_sliders):
            worst = max(worst, penetration_depth(
                sl.position, cfg.slider_radii[i],
                s.sliders[j].position, cfg.slider_radii[j]))
    return worst


_SAMPLE_ATTEMPTS = 10_000


def sample_valid_state(rng_seed, cfg: SceneConfig,
                       active: int | None = None) -> SystemState:
    """Rejection-sample a penetration-free rest state.

    Pusher and the first ``active`` sliders are placed uniformly in the
    workspace and resampled until no pair of discs overlaps; the remaining
    sliders sit at their parked positions.  All velocities are zero.
    """
    rng = np.random.default_rng(rng_seed)
    if active is None:
        active = cfg.num_sliders
    if not (1 <= active <= cfg.num_sliders):
        raise ValueError(f"active slider count {active} out of range")
    ws = cfg.workspace()

    for _ in range(_SAMPLE_ATTEMPTS):
        xs = rng.uniform(ws.xmin, ws.xmax, size=active + 1)
        ys = rng.uniform(ws.ymin, ws.ymax, size=active + 1)
        centers = [(float(xs[k]), float(ys[k])) for k in range(active + 1)]
        radii = [cfg.pusher_radius] + [cfg.slider_radii[i] for i in range(active)]
        positions = centers + [cfg.parked_positions[i] for i in range(active, cfg.num_sliders)]
        radii += [cfg.slider_radii[i] for i in range(active, cfg.num_sliders)]
        ok = True
        for a in range(len(positions)):
            for b in range(a + 1, len(positions)):
                if penetration_depth(positions[a], radii[a], positions[b], radii[b]) > 0.0:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            continue
        # parked sliders keep a fixed zero orientation so the network always
        # sees the exact training-time values for inactive objects
        thetas = rng.uniform(-math.pi, math.pi, size=active)
        pusher = PusherState(centers[0])
        sliders = tuple(
            SliderState(positions[1 + i], float(thetas[i]) if i < active else 0.0)
            for i in range(cfg.num_sliders))
        return SystemState(pusher, sliders)

    raise CrowdedWorkspaceError(
        f"could not place {active} sliders plus pusher in {ws} "
        f"after {_SAMPLE_ATTEMPTS} attempts")
