"""Sampling-based trajectory optimization and the receding-horizon loop.

The optimizer is a cross-entropy-style elite sampler: perturb the incumbent
sequence with Gaussian velocity noise, roll every candidate through the
predictive model, and re-center on the elite average.  It is derivative-free
(the predictive model is never differentiated) and never returns a sequence
costlier than its input.  Violations add cost but do not truncate rollouts,
keeping the sampled cost landscape continuous.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import (MAX_PUSHER_SPEED, ControlAction, ControlSequence,
                   SceneConfig, SystemState, Trajectory, state_to_vector)

RolloutModel = Callable[[SystemState, ControlSequence], Trajectory]
WorldStep = Callable[[SystemState, ControlAction], SystemState]


@dataclass(frozen=True, slots=True)
class CostParams:
    """Weights: goal-object distance, obstacle displacement, drop/intrusion
    violations, and control effort."""

    w_goal: float = 1.0
    w_obstacle: float = 0.5
    w_drop: float = 1000.0
    w_action: float = 0.01

    def __post_init__(self):
        if min(self.w_goal, self.w_obstacle, self.w_drop, self.w_action) < 0:
            raise ValueError("cost weights must be non-negative")


@dataclass(frozen=True, slots=True)
class OptimizerConfig:
    num_candidates: int = 32
    noise_std: float = 0.03
    elites: int = 4
    refine_rounds: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if min(self.num_candidates, self.elites, self.refine_rounds) < 1:
            raise ValueError("optimizer sizes must be positive")
        if self.noise_std <= 0:
            raise ValueError("noise_std must be positive")
        if self.elites > self.num_candidates:
            raise ValueError("elites cannot exceed num_candidates")


def _serial_rollout(s0: SystemState, seq: ControlSequence, prop) -> Trajectory:
    states = [s0]
    for u in seq:
        states.append(prop(states[-1], u))
    return Trajectory(tuple(states))


def make_serial_rollout(prop) -> RolloutModel:
    """Predictive model that simply composes a single-step propagator."""
    from functools import partial
    return partial(_serial_rollout, prop=prop)


def _parareal_rollout(s0, seq, coarse, fine, cfg, k, worker_count, pool):
    from .parareal import parareal_run
    result = parareal_run(s0, seq, coarse, fine, cfg, iterations=k,
                          worker_count=worker_count, pool=pool,
                          compute_reference=False)
    return result.iterations[-1]


def make_parareal_rollout(coarse, fine, cfg: SceneConfig, k: int,
                          worker_count: int = 4, pool=None) -> RolloutModel:
    """Predictive model that runs k Parareal iterations (production mode)."""
    from functools import partial
    return partial(_parareal_rollout, coarse=coarse, fine=fine, cfg=cfg, k=k,
                   worker_count=worker_count, pool=pool)


def violation_count(state: SystemState, cfg: SceneConfig) -> int:
    """Sliders off the table plus non-goal sliders inside the goal region."""
    count = 0
    for i, sl in enumerate(state.sliders):
        if not cfg.table_bounds.contains(sl.position):
            count += 1
        elif i != cfg.goal_slider_index:
            d = math.hypot(sl.position[0] - cfg.goal_center[0],
                           sl.position[1] - cfg.goal_center[1])
            if d <= cfg.goal_radius:
                count += 1
    return count


def goal_reached(state: SystemState, cfg: SceneConfig) -> bool:
    sl = state.sliders[cfg.goal_slider_index]
    return math.hypot(sl.position[0] - cfg.goal_center[0],
                      sl.position[1] - cfg.goal_center[1]) <= cfg.goal_radius


def trajectory_cost(t: Trajectory, seq: ControlSequence, cfg: SceneConfig,
                    cp: CostParams = CostParams()) -> float:
    """Weighted sum: final goal distance, obstacle displacement, violation
    count along the trajectory, and control effort."""
    goal_idx = cfg.goal_slider_index
    final = t.final.sliders[goal_idx].position
    goal_dist = math.hypot(final[0] - cfg.goal_center[0], final[1] - cfg.goal_center[1])

    obstacle = 0.0
    for i in range(cfg.num_sliders):
        if i == goal_idx:
            continue
        p0 = t[0].sliders[i].position
        p1 = t.final.sliders[i].position
        obstacle += math.hypot(p1[0] - p0[0], p1[1] - p0[1])

    violations = sum(violation_count(s, cfg) for s in t.states[1:])
    effort = sum(v[0] * v[0] + v[1] * v[1]
                 for v in (u.velocity for u in seq))
    return (cp.w_goal * goal_dist + cp.w_obstacle * obstacle
            + cp.w_drop * violations + cp.w_action * effort)


def _clip_speed(v: np.ndarray, cap: float = MAX_PUSHER_SPEED) -> np.ndarray:
    speed = math.hypot(v[0], v[1])
    if speed > cap:
        return v * (cap / speed)
    return v


def _to_sequence(arr: np.ndarray, template: ControlSequence) -> ControlSequence:
    return ControlSequence(tuple(
        ControlAction((float(a[0]), float(a[1])), u.duration)
        for a, u in zip(arr, template)))


def optimize(s0: SystemState, initial_seq: ControlSequence, rollout: RolloutModel,
             cfg: SceneConfig, cp: CostParams,
             oc: OptimizerConfig) -> tuple[ControlSequence, float]:
    """Elite resampling around the incumbent sequence.

    Returns the best evaluated sequence and its cost; never worse than the
    initial sequence, deterministic per rng_seed.
    """
    rng = np.random.default_rng(oc.rng_seed)
    n = len(initial_seq)

    def evaluate(seq: ControlSequence) -> float:
        return trajectory_cost(rollout(s0, seq), seq, cfg, cp)

    incumbent = np.array([u.velocity for u in initial_seq], dtype=np.float64)
    best_seq = initial_seq
    best_cost = evaluate(initial_seq)

    for _ in range(oc.refine_rounds):
        noise = rng.normal(0.0, oc.noise_std, size=(oc.num_candidates, n, 2))
        noise[0] = 0.0  # keep the incumbent itself in the pool
        cands = incumbent[None, :, :] + noise
        for c in range(oc.num_candidates):
            for a in range(n):
                cands[c, a] = _clip_speed(cands[c, a])
        costs = np.empty(oc.num_candidates)
        for c in range(oc.num_candidates):
            seq_c = _to_sequence(cands[c], initial_seq)
            costs[c] = evaluate(seq_c)
            if costs[c] < best_cost:
                best_cost = float(costs[c])
                best_seq = seq_c
        elite_idx = np.argsort(costs, kind="stable")[:oc.elites]
        incumbent = cands[elite_idx].mean(axis=0)
        for a in range(n):
            incumbent[a] = _clip_speed(incumbent[a])

    return best_seq, best_cost


@dataclass(frozen=True, slots=True)
class MpcStepRecord:
    step: int
    state: np.ndarray           # observed state after executing the action
    action: tuple[float, float]  # executed action velocity
    cost: float                  # planned cost of the chosen sequence
    predict_wall_clock_s: float
    success_flag: bool


@dataclass(slots=True)
class EpisodeResult:
    success: bool
    failed: bool
    reason: str
    steps: int
    records: list[MpcStepRecord]
    total_predict_s: float
    final_state: SystemState


def _initial_sequence(mode: str, state: SystemState, cfg: SceneConfig,
                      horizon: int, duration: float) -> ControlSequence:
    if mode == "zero":
        return ControlSequence.zeros(horizon, duration)
    if mode == "aim":
        # constant push from the pusher toward the goal slider
        target = state.sliders[cfg.goal_slider_index].position
        dx = target[0] - state.pusher.position[0]
        dy = target[1] - state.pusher.position[1]
        norm = math.hypot(dx, dy)
        if norm < 1e-9:
            return ControlSequence.zeros(horizon, duration)
        speed = 0.8 * MAX_PUSHER_SPEED
        v = (speed * dx / norm, speed * dy / norm)
        return ControlSequence.constant(v, horizon, duration)
    raise ValueError(f"unknown initial sequence mode {mode!r}")


def mpc_episode(s0: SystemState, cfg: SceneConfig, cp: CostParams,
                oc: OptimizerConfig, rollout: RolloutModel, world_step: WorldStep,
                max_steps: int = 25, horizon: int = 4, action_duration: float = 1.0,
                world_noise_std: float = 0.0, initial_seq_mode: str = "zero",
                rng_seed: int = 0) -> EpisodeResult:
    """Receding-horizon control: optimize, execute the first action through
    the world, observe, repeat until success, violation, or step budget.

    The world is the fine propagator; optional Gaussian noise perturbs
    executed actions (never observations) to emulate push uncertainty.
    """
    rng = np.random.default_rng(rng_seed)
    state = s0
    records: list[MpcStepRecord] = []
    total_predict = 0.0
    success = failed = False
    reason = "step budget exhausted"

    for step in range(max_steps):
        if goal_reached(state, cfg):
            success, reason = True, "goal reached"
            break
        if violation_count(state, cfg) > 0:
            failed, reason = True, "violation"
            break

        opt_seed = int(rng.integers(0, 2**31 - 1))
        init = _initial_sequence(initial_seq_mode, state, cfg, horizon, action_duration)
        t0 = time.perf_counter()
        seq, cost = optimize(state, init, rollout, cfg, cp,
                             replace(oc, rng_seed=opt_seed))
        predict_s = time.perf_counter() - t0
        total_predict += predict_s

        action = seq[0]
        if world_noise_std > 0.0:
            noisy = _clip_speed(np.asarray(action.velocity) +
                                rng.normal(0.0, world_noise_std, 2))
            action = ControlAction((float(noisy[0]), float(noisy[1])), action.duration)
        state = world_step(state, action)
        records.append(MpcStepRecord(
            step=step,
            state=state_to_vector(state, cfg),
            action=action.velocity,
            cost=cost,
            predict_wall_clock_s=predict_s,
            success_flag=goal_reached(state, cfg),
        ))
    else:
        if goal_reached(state, cfg):
            success, reason = True, "goal reached"

    return EpisodeResult(
        success=success,
        failed=failed,
        reason=reason,
        steps=len(records),
        records=records,
        total_predict_s=total_predict,
        final_state=state,
    )


def write_episode_logs(path, episodes: list[EpisodeResult],
                       metadata: dict | None = None) -> None:
    """JSON-lines log: a metadata record, then one record per MPC step."""
    with open(path, "w") as f:
        meta = {"type": "meta", "episodes": len(episodes)}
        if metadata:
            meta.update(metadata)
        f.write(json.dumps(meta, sort_keys=True) + "\n")
        for ep_idx, ep in enumerate(episodes):
            for rec in ep.records:
                f.write(json.dumps({
                    "episode": ep_idx,
                    "step": rec.step,
                    "state": rec.state.tolist(),
                    "action": list(rec.action),
                    "cost": rec.cost,
                    "predict_wall_clock_s": rec.predict_wall_clock_s,
                    "success_flag": rec.success_flag,
                }) + "\n")
