"""Reproducible experiment drivers: convergence studies, timing benches, and
MPC batches.  Everything is seeded and emits CSV/JSON-lines with an embedded
configuration record, so runs can be regenerated bit-for-bit.
"""

from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass

import numpy as np

from .coarse_analytical import AnalyticalParams, analytical_propagator
from .coarse_learned import learned_propagator
from .core import (MAX_PUSHER_SPEED, ControlAction, ControlSequence,
                   PusherState, SceneConfig, SliderState, SystemState,
                   Trajectory, default_scene)
from .fine_physics import (FineParams, fine_propagator, fine_rollout,
                           sample_valid_state)
from .geometry import penetration_depth
from .neural_net import NetworkModel
from .parareal import parareal_run
from .planner import (CostParams, EpisodeResult, OptimizerConfig,
                      make_parareal_rollout, make_serial_rollout, mpc_episode)
from .workers import WorkerPool


# ---------------------------------------------------------------------------
# seeded scenes

def sample_push_case(seed: int, cfg: SceneConfig, params: FineParams,
                     n_actions: int, active: int | None = None,
                     min_displacement: float = 1e-3, max_tries: int = 60
                     ) -> tuple[SystemState, ControlSequence, Trajectory]:
    """Random state plus a random control sequence that makes contact.

    The pusher starts within one action's reach of a random active slider
    (placement bias keeps rejection cheap), but the sequence itself is
    unbiased: a uniformly random initial heading with a random-walk drift and
    random speeds.  Sequences whose fine rollout moves no slider beyond
    ``min_displacement`` are rejected and resampled, so accepted cases make
    contact at least once.  Returns the fine reference trajectory along with
    the case.
    """
    n_active = active if active is not None else cfg.num_sliders
    for attempt in range(max_tries):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(attempt,)))
        state = sample_valid_state(rng, cfg, active)

        target = int(rng.integers(n_active))
        t_pos = state.sliders[target].position
        r_mink = cfg.pusher_radius + cfg.slider_radii[target]
        placed = None
        for _ in range(50):
            phi = rng.uniform(0.0, 2.0 * math.pi)
            d_start = r_mink + rng.uniform(0.02, 0.9) * MAX_PUSHER_SPEED
            px = t_pos[0] + d_start * math.cos(phi)
            py = t_pos[1] + d_start * math.sin(phi)
            if not cfg.table_bounds.contains((px, py)):
                continue
            if all(penetration_depth((px, py), cfg.pusher_radius, sl.position,
                                     cfg.slider_radii[i]) == 0.0
                   for i, sl in enumerate(state.sliders)):
                placed = (px, py)
                break
        if placed is None:
            continue
        state = SystemState(PusherState(placed), state.sliders)

        heading = rng.uniform(0.0, 2.0 * math.pi)
        actions = []
        for _ in range(n_actions):
            speed = MAX_PUSHER_SPEED * rng.uniform(0.3, 1.0)
            actions.append(ControlAction((speed * math.cos(heading),
                                          speed * math.sin(heading)), 1.0))
            heading += rng.normal(0.0, 0.35)
        seq = ControlSequence(tuple(actions))

        reference = fine_rollout(state, seq, cfg, params)
        moved = max(
            math.hypot(reference.final.sliders[i].position[0] - state.sliders[i].position[0],
                       reference.final.sliders[i].position[1] - state.sliders[i].position[1])
            for i in range(cfg.num_sliders))
        if moved >= min_displacement:
            return state, seq, reference
    raise RuntimeError(f"no contact-making case found for seed {seed}")


# ---------------------------------------------------------------------------
# convergence experiments

@dataclass(frozen=True, slots=True)
class ConvergenceRow:
    scene_id: int
    iteration: int
    slider_index: int
    rms_m: float
    wall_clock_s: float


def run_convergence(coarse_kinds: list[str], scenes: int, n_actions: int,
                    cfg: SceneConfig, params: FineParams, iterations: int,
                    seed: int, active: int | None = None,
                    model: NetworkModel | None = None,
                    analytical_params: AnalyticalParams = AnalyticalParams(),
                    worker_count: int = 1, pool: WorkerPool | None = None):
    """Parareal convergence over seeded random scenes, same scenes per model.

    Returns (rows, per_model_totals) where per_model_totals maps the model
    name to an array of shape (scenes, iterations + 1) of total RMS values.
    """
    for kind in coarse_kinds:
        if kind not in ("analytical", "learned"):
            raise ValueError(f"unknown coarse model {kind!r}")
        if kind == "learned" and model is None:
            raise ValueError("learned coarse model requires trained weights")

    fine = fine_propagator(cfg, params)
    props = {
        kind: (analytical_propagator(cfg, analytical_params) if kind == "analytical"
               else learned_propagator(model, cfg))
        for kind in coarse_kinds
    }

    rows: list[ConvergenceRow] = []
    totals = {kind: np.zeros((scenes, iterations + 1)) for kind in coarse_kinds}
    for scene_id in range(scenes):
        s0, seq, reference = sample_push_case(
            seed + scene_id, cfg, params, n_actions, active)
        for kind in coarse_kinds:
            result = parareal_run(s0, seq, props[kind], fine, cfg,
                                  iterations=iterations,
                                  worker_count=worker_count, pool=pool,
                                  reference=reference)
            wall = result.wall_clock
            iter_walls = [wall["coarse_initial"]] + [
                f + c for f, c in zip(wall["fine_phase"], wall["correction"])]
            for k in range(iterations + 1):
                totals[kind][scene_id, k] = result.rms_vs_fine[k]
                for i in range(cfg.num_sliders):
                    rows.append(ConvergenceRow(
                        scene_id=scene_id, iteration=k, slider_index=i,
                        rms_m=result.rms_per_slider[k][i],
                        wall_clock_s=iter_walls[k]))
    return rows, totals


def convergence_summary(totals: dict[str, np.ndarray]) -> str:
    lines = ["median total RMS (m) per iteration:"]
    for kind, arr in totals.items():
        med = np.median(arr, axis=0)
        entries = "  ".join(f"k={k}: {v:.3e}" for k, v in enumerate(med))
        lines.append(f"  {kind:<11} {entries}")
    return "\n".join(lines)


def write_convergence_csv(path, rows: list[ConvergenceRow], config: dict,
                          model_column: dict[int, str] | None = None) -> None:
    with open(path, "w", newline="") as f:
        f.write(f"# config: {json.dumps(config, sort_keys=True, default=str)}\n")
        writer = csv.writer(f)
        writer.writerow(["scene_id", "iteration", "slider_index", "rms_m",
                         "wall_clock_s"])
        for r in rows:
            writer.writerow([r.scene_id, r.iteration, r.slider_index,
                             repr(float(r.rms_m)), repr(float(r.wall_clock_s))])


# ---------------------------------------------------------------------------
# timing benches

def contact_rich_case(cfg: SceneConfig) -> tuple[SystemState, ControlAction]:
    """Deterministic head-on push on slider 0 with the rest parked or idle."""
    sliders = [SliderState((0.05, 0.0))]
    for i in range(1, cfg.num_sliders):
        sliders.append(SliderState(cfg.parked_positions[i]))
    state = SystemState(PusherState((-0.02, 0.0)), tuple(sliders))
    return state, ControlAction((0.1, 0.0), 1.0)


def _time_call(fn, repeats: int) -> float:
    fn()  # warm-up
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_single_step(cfg: SceneConfig, params: FineParams,
                      model: NetworkModel | None = None,
                      repeats: int = 5) -> dict:
    """Best-of-N wall-clock of one fine step vs one evaluation of each coarse
    model, on the same contact-rich state."""
    state, action = contact_rich_case(cfg)
    fine = fine_propagator(cfg, params)
    ana = analytical_propagator(cfg)

    out = {"fine_step_s": _time_call(lambda: fine(state, action), repeats)}
    # cheap models need inner loops for a resolvable measurement
    inner = 50
    t = _time_call(lambda: [ana(state, action) for _ in range(inner)], repeats)
    out["analytical_step_s"] = t / inner
    out["fine_over_analytical"] = out["fine_step_s"] / out["analytical_step_s"]
    if model is not None:
        learned = learned_propagator(model, cfg)
        t = _time_call(lambda: [learned(state, action) for _ in range(inner)], repeats)
        out["learned_step_s"] = t / inner
        out["fine_over_learned"] = out["fine_step_s"] / out["learned_step_s"]
    return out


def bench_parareal(cfg: SceneConfig, params: FineParams, coarse, seed: int,
                   n_actions: int = 4, iterations: int = 1,
                   worker_count: int = 4, pool: WorkerPool | None = None,
                   repeats: int = 3) -> dict:
    """Wall-clock of a K-iteration Parareal run against the serial fine
    rollout of the same scene."""
    s0, seq, _ = sample_push_case(seed, cfg, params, n_actions,
                                  active=1 if cfg.num_sliders == 1 else None)
    fine = fine_propagator(cfg, params)
    if pool is not None:
        pool.warm_up()

    serial = _time_call(lambda: fine_rollout(s0, seq, cfg, params), repeats)
    parareal = _time_call(
        lambda: parareal_run(s0, seq, coarse, fine, cfg, iterations=iterations,
                             worker_count=worker_count, pool=pool,
                             compute_reference=False), repeats)
    return {
        "serial_fine_s": serial,
        "parareal_s": parareal,
        "ratio": parareal / serial,
        "workers": worker_count,
        "iterations": iterations,
        "n_actions": n_actions,
    }


# ---------------------------------------------------------------------------
# MPC batches

def mpc_scene(seed: int, num_obstacles: int = 3) -> tuple[SceneConfig, SystemState]:
    """Solvable seeded pushing task: pusher behind the goal slider, goal region
    down the push corridor, obstacles placed clear of the corridor."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
    phi = rng.uniform(0.0, 2.0 * math.pi)
    d = (math.cos(phi), math.sin(phi))
    slider_start = (-0.18 * d[0], -0.18 * d[1])
    goal_center = (0.15 * d[0], 0.15 * d[1])
    gap = 0.02
    pusher = (slider_start[0] - (0.0657 + gap) * d[0],
              slider_start[1] - (0.0657 + gap) * d[1])

    cfg = default_scene(1 + num_obstacles, goal_center=goal_center,
                        goal_radius=0.06, goal_slider_index=0)
    ws = cfg.workspace()

    def seg_dist(p):
        # distance from p to the corridor segment slider_start -> goal_center
        ax, ay = slider_start
        bx, by = goal_center
        vx, vy = bx - ax, by - ay
        t = ((p[0] - ax) * vx + (p[1] - ay) * vy) / (vx * vx + vy * vy)
        t = min(1.0, max(0.0, t))
        return math.hypot(p[0] - (ax + t * vx), p[1] - (ay + t * vy))

    obstacles = []
    for _ in range(10_000):
        if len(obstacles) == num_obstacles:
            break
        p = (float(rng.uniform(ws.xmin, ws.xmax)), float(rng.uniform(ws.ymin, ws.ymax)))
        if seg_dist(p) < 0.16:
            continue
        if math.hypot(p[0] - pusher[0], p[1] - pusher[1]) < 0.12:
            continue
        if any(math.hypot(p[0] - q[0], p[1] - q[1]) < 0.13 for q in obstacles):
            continue
        obstacles.append(p)
    if len(obstacles) < num_obstacles:
        raise RuntimeError("could not place obstacles clear of the corridor")

    sliders = (SliderState(slider_start),) + tuple(SliderState(p) for p in obstacles)
    return cfg, SystemState(PusherState(pusher), sliders)


def make_rollout_model(predictor: str, cfg: SceneConfig, params: FineParams,
                       model: NetworkModel | None = None, k: int = 1,
                       worker_count: int = 4, pool: WorkerPool | None = None):
    """Predictive models selectable by name for the MPC loop."""
    fine = fine_propagator(cfg, params)
    if predictor == "fine":
        return make_serial_rollout(fine)
    if predictor == "analytical":
        return make_serial_rollout(analytical_propagator(cfg))
    if predictor == "learned":
        if model is None:
            raise ValueError("learned predictor requires trained weights")
        return make_serial_rollout(learned_propagator(model, cfg))
    if predictor == "parareal-analytical":
        return make_parareal_rollout(analytical_propagator(cfg), fine, cfg, k,
                                     worker_count, pool)
    if predictor == "parareal-learned":
        if model is None:
            raise ValueError("learned predictor requires trained weights")
        return make_parareal_rollout(learned_propagator(model, cfg), fine, cfg,
                                     k, worker_count, pool)
    raise ValueError(f"unknown predictor {predictor!r}")


def run_mpc_batch(predictor: str, episodes: int, params: FineParams,
                  cp: CostParams, oc: OptimizerConfig,
                  model: NetworkModel | None = None, k: int = 1,
                  worker_count: int = 4, pool: WorkerPool | None = None,
                  world_noise_std: float = 0.0, max_steps: int = 25,
                  seed: int = 0, initial_seq_mode: str = "aim",
                  horizon: int = 4) -> tuple[list[EpisodeResult], dict]:
    """Seeded MPC episodes on generated scenes; same seeds give the same
    scenes for every predictor."""
    results = []
    for ep in range(episodes):
        cfg, s0 = mpc_scene(seed + ep)
        rollout = make_rollout_model(predictor, cfg, params, model, k,
                                     worker_count, pool)
        world = fine_propagator(cfg, params)
        results.append(mpc_episode(
            s0, cfg, cp, oc, rollout, world, max_steps=max_steps,
            horizon=horizon, world_noise_std=world_noise_std,
            initial_seq_mode=initial_seq_mode, rng_seed=seed + ep))
    summary = {
        "predictor": predictor,
        "episodes": episodes,
        "successes": sum(r.success for r in results),
        "failures": sum(r.failed for r in results),
        "mean_steps": float(np.mean([r.steps for r in results])),
        "total_predict_s": float(sum(r.total_predict_s for r in results)),
    }
    return results, summary
