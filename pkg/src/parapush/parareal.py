"""Parallel-in-time prediction: serial coarse sweeps corrected by concurrent
fine evaluations.

Each iteration evaluates the fine model on every pending time slice (these
run concurrently on a worker pool), then sweeps serially, replacing each
state with coarse(new) + fine(old) - coarse(old).  The plus/minus act on the
flat state vector with shortest-angle arithmetic on orientation entries.
When the two coarse inputs are bit-identical the correction collapses to the
fine value exactly, which is what makes the exactness prefix bit-true in
floating point; converged leading slices are copied forward instead of
recomputed.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import (ControlSequence, PUSHER_DIM, SLIDER_DIM, SceneConfig,
                   SystemState, Trajectory, orientation_indices,
                   state_to_vector, vector_to_state, wrap_angle)
from .workers import WorkerPool, get_pool

Propagator = Callable[..., SystemState]


@dataclass(slots=True)
class PararealResult:
    """Per-iteration trajectories with convergence and timing diagnostics.

    ``iterations[0]`` is the pure coarse rollout; ``iterations[k]`` the k-th
    corrected trajectory.  RMS lists align with ``iterations`` and are empty
    when no fine reference was computed.
    """

    iterations: list[Trajectory]
    rms_vs_fine: list[float]
    rms_per_slider: list[list[float]]
    wall_clock: dict
    reference: Trajectory | None


def rms_error(a: Trajectory, b: Trajectory, cfg: SceneConfig) -> tuple[float, list[float]]:
    """RMS of slider position differences over time indices 1..N.

    Positions only: orientations are metric-irrelevant for cylinders and the
    pusher is identical under every propagator.  Returns the total plus a
    per-slider breakdown.
    """
    if len(a) != len(b):
        raise ValueError(f"trajectory lengths differ: {len(a)} vs {len(b)}")
    n_steps = len(a) - 1
    if n_steps < 1:
        raise ValueError("need at least one step to compare")
    sq = np.zeros(cfg.num_sliders)
    for sa, sb in zip(a.states[1:], b.states[1:]):
        for i in range(cfg.num_sliders):
            dx = sa.sliders[i].position[0] - sb.sliders[i].position[0]
            dy = sa.sliders[i].position[1] - sb.sliders[i].position[1]
            sq[i] += dx * dx + dy * dy
    per_slider = np.sqrt(sq / n_steps)
    total = float(np.sqrt(sq.sum() / (n_steps * cfg.num_sliders)))
    return total, per_slider.tolist()


def _rollout_vectors(prop: Propagator, s0_vec: np.ndarray, seq: ControlSequence,
                     cfg: SceneConfig) -> list[np.ndarray]:
    vecs = [s0_vec]
    state = vector_to_state(s0_vec, cfg)
    for u in seq:
        state = prop(state, u)
        vecs.append(state_to_vector(state, cfg))
    return vecs


def _combine(c_new: np.ndarray, f_old: np.ndarray, c_old: np.ndarray,
             orient_idx: Sequence[int]) -> np.ndarray:
    """coarse(new) + fine(old) - coarse(old), with wrapped angle arithmetic."""
    out = c_new + f_old - c_old
    for i in orient_idx:
        delta = wrap_angle(f_old[i] - c_old[i])
        out[i] = wrap_angle(c_new[i] + delta)
    return out


def parareal_run(s0: SystemState, seq: ControlSequence, coarse: Propagator,
                 fine: Propagator, cfg: SceneConfig, iterations: int,
                 worker_count: int = 1, pool: WorkerPool | None = None,
                 compute_reference: bool = True,
                 reference: Trajectory | None = None) -> PararealResult:
    """Run ``iterations`` corrections of the coarse initial guess.

    Fine evaluations within one iteration run concurrently, at most
    ``worker_count`` at a time; results are deterministic and bit-identical
    for any worker count.  ``compute_reference=False`` (production mode)
    skips the serial fine reference and the RMS diagnostics unless a
    precomputed ``reference`` is supplied.
    """
    n_actions = len(seq)
    if not (1 <= iterations <= n_actions):
        raise ValueError(f"iteration count must lie in [1, {n_actions}], got {iterations}")
    if pool is None and worker_count > 1:
        pool = get_pool(worker_count)
    orient_idx = orientation_indices(cfg)

    t_start = time.perf_counter()
    wall = {"fine_phase": [], "correction": []}

    t0 = time.perf_counter()
    s0_vec = state_to_vector(s0, cfg)
    trajectories = [_rollout_vectors(coarse, s0_vec, seq, cfg)]
    wall["coarse_initial"] = time.perf_counter() - t0

    wall["reference"] = None
    if reference is None and compute_reference:
        t0 = time.perf_counter()
        reference = Trajectory(tuple(
            vector_to_state(v, cfg)
            for v in _rollout_vectors(fine, s0_vec, seq, cfg)))
        wall["reference"] = time.perf_counter() - t0

    for kappa in range(1, iterations + 1):
        prev = trajectories[-1]
        # leading slices are already exact: copy instead of recomputing
        prefix = max(kappa - 1, 1)
        slices = range(prefix - 1, n_actions)

        t0 = time.perf_counter()
        tasks = [(vector_to_state(prev[n], cfg), seq[n]) for n in slices]
        if pool is not None:
            fine_states = pool.starmap(fine, tasks)
        else:
            fine_states = [fine(s, u) for s, u in tasks]
        fine_vecs = {n: state_to_vector(st, cfg)
                     for n, st in zip(slices, fine_states)}
        wall["fine_phase"].append(time.perf_counter() - t0)

        t0 = time.perf_counter()
        new = [prev[n] for n in range(prefix)]
        for n in slices:
            if np.array_equal(new[n], prev[n]):
                new.append(fine_vecs[n].copy())
            else:
                state_new = vector_to_state(new[n], cfg)
                state_old = vector_to_state(prev[n], cfg)
                c_new = state_to_vector(coarse(state_new, seq[n]), cfg)
                c_old = state_to_vector(coarse(state_old, seq[n]), cfg)
                new.append(_combine(c_new, fine_vecs[n], c_old, orient_idx))
        trajectories.append(new)
        wall["correction"].append(time.perf_counter() - t0)

    wall["total"] = time.perf_counter() - t_start

    iter_trajs = [
        Trajectory(tuple(vector_to_state(v, cfg) for v in vecs))
        for vecs in trajectories
    ]
    rms_total: list[float] = []
    rms_slider: list[list[float]] = []
    if reference is not None:
        for traj in iter_trajs:
            total, per_slider = rms_error(traj, reference, cfg)
            rms_total.append(total)
            rms_slider.append(per_slider)

    return PararealResult(
        iterations=iter_trajs,
        rms_vs_fine=rms_total,
        rms_per_slider=rms_slider,
        wall_clock=wall,
        reference=reference,
    )


@dataclass(slots=True)
class SpeedupReport:
    """Wall-clock comparison of Parareal iterations against the serial fine
    rollout they approximate."""

    serial_fine_s: float
    coarse_rollout_s: float
    per_iteration_s: list[float]
    cumulative_s: list[float]
    speedup_at_k: list[float]

    def as_table(self) -> str:
        lines = [
            f"serial fine rollout: {self.serial_fine_s:.4f} s",
            f"coarse rollout (iteration 0): {self.coarse_rollout_s:.6f} s",
            "  k   iter_s    cum_s   speedup",
        ]
        for k, (it, cum, sp) in enumerate(
                zip(self.per_iteration_s, self.cumulative_s, self.speedup_at_k), start=1):
            lines.append(f"  {k}  {it:7.4f}  {cum:7.4f}  {sp:8.2f}x")
        lines.append("speedup is governed almost entirely by the iteration count; "
                     "the coarse sweeps are comparatively free")
        return "\n".join(lines)


def speedup_report(result: PararealResult, serial_fine_s: float) -> SpeedupReport:
    """Summarize measured timings from a run against a serial fine baseline."""
    wall = result.wall_clock
    per_iter = [f + c for f, c in zip(wall["fine_phase"], wall["correction"])]
    cumulative = []
    acc = wall["coarse_initial"]
    for it in per_iter:
        acc += it
        cumulative.append(acc)
    speedups = [serial_fine_s / c if c > 0 else float("inf") for c in cumulative]
    return SpeedupReport(
        serial_fine_s=serial_fine_s,
        coarse_rollout_s=wall["coarse_initial"],
        per_iteration_s=per_iter,
        cumulative_s=cumulative,
        speedup_at_k=speedups,
    )
