"""Learned coarse propagator: wraps a trained network as a single-evaluation
step model, and generates training data from the fine simulator.

Data generation draws rejection-sampled rest states and random actions.  Half
of the samples are contact-biased: the pusher is re-placed within one
action's reach of a random slider and the action aims at a point within one
slider diameter of that slider's center.  Direction-only aiming cannot
produce contact-rich data here because the speed cap (0.1 m/s for 1 s)
reaches only a fraction of the workspace.

Rest-state inputs (zero velocities) are deliberate: they leave the network
insensitive to its velocity inputs, which keeps autoregressive rollouts and
Parareal correction sweeps stable when those inputs drift out of
distribution.  Training on velocity-carrying chained states measurably
worsens both (the model starts trusting inputs that corrections corrupt), so
``chain_fraction`` defaults to zero.
"""

from __future__ import annotations

import csv
import json
import math
from functools import partial
from typing import Callable

import numpy as np

from .core import (MAX_PUSHER_SPEED, PUSHER_DIM, SLIDER_DIM, ControlAction,
                   ControlSequence, PusherState, SceneConfig, SliderState,
                   SystemState, Trajectory, state_to_vector, wrap_angle)
from .fine_physics import FineParams, fine_step, sample_valid_state
from .geometry import penetration_depth
from .neural_net import ACTION_DIM, NetworkModel, Sample, forward


def learned_coarse_step(m: NetworkModel, s: SystemState, u: ControlAction,
                        cfg: SceneConfig) -> SystemState:
    """One network evaluation: sliders advance by the predicted state change,
    the pusher moves kinematically (never predicted)."""
    vec = state_to_vector(s, cfg)
    if m.input_dim != cfg.state_dim + ACTION_DIM:
        raise ValueError(
            f"model expects input dim {m.input_dim}, scene needs {cfg.state_dim + ACTION_DIM}")
    if m.output_dim != SLIDER_DIM * cfg.num_sliders:
        raise ValueError(
            f"model output dim {m.output_dim} does not match {SLIDER_DIM * cfg.num_sliders}")
    delta = forward(m, np.concatenate([vec, u.velocity]))

    sliders = []
    for i, sl in enumerate(s.sliders):
        d = delta[SLIDER_DIM * i: SLIDER_DIM * (i + 1)]
        sliders.append(SliderState(
            position=(sl.position[0] + d[0], sl.position[1] + d[1]),
            orientation=wrap_angle(sl.orientation + d[2]),
            linear_velocity=(sl.linear_velocity[0] + d[3], sl.linear_velocity[1] + d[4]),
            angular_velocity=sl.angular_velocity + d[5],
        ))
    pusher = PusherState(
        (s.pusher.position[0] + u.velocity[0] * u.duration,
         s.pusher.position[1] + u.velocity[1] * u.duration),
        u.velocity)
    return SystemState(pusher, tuple(sliders))


def autoregressive_rollout(m: NetworkModel, s0: SystemState, seq: ControlSequence,
                           cfg: SceneConfig) -> Trajectory:
    """Multi-step prediction by feeding each prediction back as the next input."""
    states = [s0]
    for u in seq:
        states.append(learned_coarse_step(m, states[-1], u, cfg))
    return Trajectory(tuple(states))


def learned_propagator(m: NetworkModel, cfg: SceneConfig
                       ) -> Callable[[SystemState, ControlAction], SystemState]:
    """Picklable single-step propagator closure over a fixed model and scene."""
    return partial(learned_coarse_step, m, cfg=cfg)


# ---------------------------------------------------------------------------
# dataset generation

def _uniform_action(rng: np.random.Generator) -> tuple[float, float]:
    angle = rng.uniform(0.0, 2.0 * math.pi)
    speed = MAX_PUSHER_SPEED * rng.uniform(0.0, 1.0)
    return (speed * math.cos(angle), speed * math.sin(angle))

def _aimed_state_and_action(rng: np.random.Generator, state: SystemState,
                            cfg: SceneConfig, active: int):
    """Re-place the pusher within reach of a random active slider and aim the
    action at a jittered point near that slider.  None if placement fails."""
    target = int(rng.integers(active))
    t_pos = state.sliders[target].position
    r_mink = cfg.pusher_radius + cfg.slider_radii[target]
    speed = MAX_PUSHER_SPEED * rng.uniform(0.3, 1.0)
    reach = speed * 1.0

    for _ in range(50):
        phi = rng.uniform(0.0, 2.0 * math.pi)
        d_start = r_mink + rng.uniform(0.0, 0.85) * reach
        px = t_pos[0] + d_start * math.cos(phi)
        py = t_pos[1] + d_start * math.sin(phi)
        if not cfg.table_bounds.contains((px, py)):
            continue
        clear = all(
            penetration_depth((px, py), cfg.pusher_radius,
                              sl.position, cfg.slider_radii[i]) == 0.0
            for i, sl in enumerate(state.sliders))
        if not clear:
            continue
        # aim within one slider diameter of the target center
        jr = 2.0 * cfg.slider_radii[target] * math.sqrt(rng.uniform())
        ja = rng.uniform(0.0, 2.0 * math.pi)
        aim = (t_pos[0] + jr * math.cos(ja), t_pos[1] + jr * math.sin(ja))
        dx, dy = aim[0] - px, aim[1] - py
        norm = math.hypot(dx, dy)
        if norm < 1e-9:
            continue
        velocity = (speed * dx / norm, speed * dy / norm)
        return SystemState(PusherState((px, py)), state.sliders), velocity
    return None


def _generate_range(rng_seed: int, lo: int, hi: int, cfg: SceneConfig,
                    params: FineParams, active: int | None,
                    aim_fraction: float, chain_fraction: float) -> list[Sample]:
    out = []
    for i in range(lo, hi):
        # i-th child of SeedSequence(rng_seed): stable regardless of chunking
        rng = np.random.default_rng(np.random.SeedSequence(rng_seed, spawn_key=(i,)))
        state = sample_valid_state(rng, cfg, active)
        n_active = active if active is not None else cfg.num_sliders
        velocity = None
        if rng.random() < aim_fraction:
            aimed = _aimed_state_and_action(rng, state, cfg, n_active)
            if aimed is not None:
                state, velocity = aimed
        if velocity is None:
            velocity = _uniform_action(rng)
        action = ControlAction(velocity, 1.0)
        nxt = fine_step(state, action, cfg, params)

        if rng.random() < chain_fraction:
            # record the follow-up transition instead: its input state is one
            # push deep (sliders touching, velocities nonzero), the regime
            # autoregressive queries and Parareal sweeps actually visit
            speed = MAX_PUSHER_SPEED * rng.uniform(0.3, 1.0)
            heading = math.atan2(velocity[1], velocity[0]) + rng.normal(0.0, 0.35)
            velocity = (speed * math.cos(heading), speed * math.sin(heading))
            action = ControlAction(velocity, 1.0)
            state = nxt
            nxt = fine_step(state, action, cfg, params)

        out.append(Sample(
            state=state_to_vector(state, cfg),
            action=np.asarray(velocity, dtype=np.float64),
            next_state_fine=state_to_vector(nxt, cfg),
        ))
    return out


def generate_dataset(num_samples: int, cfg: SceneConfig,
                     params: FineParams = FineParams(), rng_seed: int = 0,
                     active: int | None = None, aim_fraction: float = 0.5,
                     chain_fraction: float = 0.0, pool=None) -> list[Sample]:
    """Draw one-step transitions from the fine model, deterministic per seed.

    ``aim_fraction`` of the samples are contact-biased; ``chain_fraction``
    record the second push of a two-push chain so that mid-push states (in
    contact, moving) are represented.  Per-sample seeds derive from a
    spawning seed sequence, so results are identical whether samples are
    generated serially or chunked over a pool.
    """
    if num_samples < 1:
        raise ValueError("need at least one sample")
    if pool is None or getattr(pool, "size", 1) <= 1:
        return _generate_range(rng_seed, 0, num_samples, cfg, params, active,
                               aim_fraction, chain_fraction)
    chunk = max(1, math.ceil(num_samples / (pool.size * 4)))
    tasks = [
        (rng_seed, lo, min(lo + chunk, num_samples), cfg, params, active,
         aim_fraction, chain_fraction)
        for lo in range(0, num_samples, chunk)
    ]
    results = pool.starmap(_generate_range, tasks)
    return [sample for part in results for sample in part]


def displacement_stats(samples: list[Sample], cfg: SceneConfig,
                       threshold: float = 1e-3) -> dict:
    """Fraction of samples where any slider moved more than ``threshold``."""
    moved = 0
    max_disp = 0.0
    for s in samples:
        disp = 0.0
        for i in range(cfg.num_sliders):
            base = PUSHER_DIM + SLIDER_DIM * i
            dx = s.next_state_fine[base] - s.state[base]
            dy = s.next_state_fine[base + 1] - s.state[base + 1]
            disp = max(disp, math.hypot(dx, dy))
        if disp > threshold:
            moved += 1
        max_disp = max(max_disp, disp)
    return {
        "samples": len(samples),
        "contact_fraction": moved / len(samples),
        "max_displacement_m": max_disp,
    }


# ---------------------------------------------------------------------------
# dataset file format: CSV with one row per sample

def state_column_names(cfg: SceneConfig) -> list[str]:
    names = ["px", "py", "pvx", "pvy"]
    for i in range(cfg.num_sliders):
        names += [f"s{i}{c}" for c in ("x", "y", "th", "vx", "vy", "om")]
    return names


def save_dataset(path, samples: list[Sample], cfg: SceneConfig,
                 metadata: dict | None = None) -> None:
    """Write the dataset CSV: a config comment line, a header, then one row
    per sample (state, action, next state) at full float precision."""
    cols = state_column_names(cfg)
    header = cols + ["ax", "ay"] + [f"next_{c}" for c in cols]
    meta = {"num_sliders": cfg.num_sliders, "samples": len(samples)}
    if metadata:
        meta.update(metadata)
    with open(path, "w", newline="") as f:
        f.write(f"# config: {json.dumps(meta, sort_keys=True)}\n")
        writer = csv.writer(f)
        writer.writerow(header)
        for s in samples:
            row = [repr(float(v)) for v in (*s.state, *s.action, *s.next_state_fine)]
            writer.writerow(row)


def load_dataset(path) -> tuple[list[Sample], dict]:
    """Read a dataset CSV written by :func:`save_dataset`."""
    meta = {}
    samples = []
    with open(path, newline="") as f:
        first = f.readline()
        if first.startswith("#"):
            _, _, payload = first.partition(":")
            meta = json.loads(payload)
            header = f.readline()
        else:
            header = first
        width = len(header.strip().split(","))
        state_dim = (width - ACTION_DIM) // 2
        for row in csv.reader(f):
            if not row:
                continue
            vals = np.asarray([float(v) for v in row], dtype=np.float64)
            samples.append(Sample(
                state=vals[:state_dim],
                action=vals[state_dim:state_dim + ACTION_DIM],
                next_state_fine=vals[state_dim + ACTION_DIM:],
            ))
    return samples, meta
