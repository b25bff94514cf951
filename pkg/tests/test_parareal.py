import math

import numpy as np
import pytest

from parapush.coarse_analytical import analytical_propagator
from parapush.core import (ControlAction, ControlSequence, PusherState,
                           SliderState, SystemState, default_scene,
                           state_to_vector)
from parapush.fine_physics import (FineParams, fine_propagator, fine_rollout,
                                   sample_valid_state)
from parapush.parareal import parareal_run, rms_error, speedup_report
from parapush.workers import WorkerPool

CFG1 = default_scene(1)
PARAMS = FineParams()


def push_scene(seed=0, n_actions=4):
    """A seeded single-slider scene whose sequence makes contact."""
    rng = np.random.default_rng(seed)
    s0 = SystemState(
        PusherState((-0.12, float(rng.uniform(-0.02, 0.02)))),
        (SliderState((0.0, 0.0)),))
    actions = []
    heading = rng.uniform(-0.4, 0.4)
    for _ in range(n_actions):
        speed = rng.uniform(0.05, 0.1)
        actions.append(ControlAction((speed * math.cos(heading),
                                      speed * math.sin(heading)), 1.0))
        heading += rng.uniform(-0.5, 0.5)
    return s0, ControlSequence(tuple(actions))


def traj_equal(a, b):
    return all(sa == sb for sa, sb in zip(a.states, b.states))


def test_coarse_equals_fine_converges_in_one_iteration():
    # with identical propagators the correction telescopes immediately
    s0, seq = push_scene(3)
    fine = fine_propagator(CFG1, PARAMS)
    result = parareal_run(s0, seq, fine, fine, CFG1, iterations=1)
    assert traj_equal(result.iterations[1], result.reference)
    assert result.rms_vs_fine[1] == 0.0


def test_full_iteration_count_reproduces_fine_exactly():
    for seed in (0, 1, 2):
        s0, seq = push_scene(seed, n_actions=4)
        result = parareal_run(s0, seq, analytical_propagator(CFG1),
                              fine_propagator(CFG1, PARAMS), CFG1, iterations=4)
        assert result.rms_vs_fine[4] <= 1e-9
        assert traj_equal(result.iterations[4], result.reference)


def test_exactness_prefix_is_bit_identical():
    s0, seq = push_scene(11, n_actions=4)
    result = parareal_run(s0, seq, analytical_propagator(CFG1),
                          fine_propagator(CFG1, PARAMS), CFG1, iterations=4)
    ref_vecs = [state_to_vector(s, CFG1) for s in result.reference]
    for k, traj in enumerate(result.iterations):
        for n in range(min(k, 4) + 1):
            got = state_to_vector(traj[n], CFG1)
            assert np.array_equal(got, ref_vecs[n]), (k, n)


def test_worker_count_does_not_change_results():
    s0, seq = push_scene(21, n_actions=4)
    outs = []
    for workers in (1, 2, 4):
        pool = WorkerPool(workers)
        try:
            result = parareal_run(s0, seq, analytical_propagator(CFG1),
                                  fine_propagator(CFG1, PARAMS), CFG1,
                                  iterations=2, worker_count=workers, pool=pool)
        finally:
            pool.shutdown()
        outs.append(result)
    base = outs[0]
    for other in outs[1:]:
        for ta, tb in zip(base.iterations, other.iterations):
            assert traj_equal(ta, tb)


def test_error_decreases_with_iterations():
    # median trend over a handful of seeded scenes
    ratios = []
    for seed in range(10):
        s0, seq = push_scene(seed + 100, n_actions=4)
        result = parareal_run(s0, seq, analytical_propagator(CFG1),
                              fine_propagator(CFG1, PARAMS), CFG1, iterations=4)
        assert result.rms_vs_fine[0] >= result.rms_vs_fine[4]
        ratios.append([result.rms_vs_fine[k] for k in range(5)])
    medians = np.median(np.asarray(ratios), axis=0)
    assert all(medians[k + 1] <= medians[k] + 1e-15 for k in range(4))


def test_iteration_zero_is_the_coarse_rollout():
    from parapush.coarse_analytical import analytical_rollout
    s0, seq = push_scene(7)
    result = parareal_run(s0, seq, analytical_propagator(CFG1),
                          fine_propagator(CFG1, PARAMS), CFG1, iterations=1)
    assert traj_equal(result.iterations[0], analytical_rollout(s0, seq, CFG1))


def test_iteration_count_bounds_enforced():
    s0, seq = push_scene(1, n_actions=4)
    fine = fine_propagator(CFG1, PARAMS)
    coarse = analytical_propagator(CFG1)
    with pytest.raises(ValueError):
        parareal_run(s0, seq, coarse, fine, CFG1, iterations=0)
    with pytest.raises(ValueError):
        parareal_run(s0, seq, coarse, fine, CFG1, iterations=5)


def test_production_mode_skips_reference():
    s0, seq = push_scene(2)
    result = parareal_run(s0, seq, analytical_propagator(CFG1),
                          fine_propagator(CFG1, PARAMS), CFG1, iterations=1,
                          compute_reference=False)
    assert result.reference is None
    assert result.rms_vs_fine == []
    assert result.wall_clock["reference"] is None


def test_precomputed_reference_is_reused():
    s0, seq = push_scene(2)
    ref = fine_rollout(s0, seq, CFG1, PARAMS)
    result = parareal_run(s0, seq, analytical_propagator(CFG1),
                          fine_propagator(CFG1, PARAMS), CFG1, iterations=1,
                          reference=ref)
    assert result.reference is ref
    assert len(result.rms_vs_fine) == 2


def test_rms_error_identical_trajectories():
    s0, seq = push_scene(5)
    t = fine_rollout(s0, seq, CFG1, PARAMS)
    total, per_slider = rms_error(t, t, CFG1)
    assert total == 0.0 and per_slider == [0.0]


def _shift_slider(traj, cfg, offsets):
    """Displace slider 0 by offsets[n] at each time index n >= 1."""
    states = [traj[0]]
    for state, off in zip(traj.states[1:], offsets):
        sl = state.sliders[0]
        moved = SliderState((sl.position[0] + off, sl.position[1]),
                            sl.orientation, sl.linear_velocity, sl.angular_velocity)
        states.append(SystemState(state.pusher, (moved,) + state.sliders[1:]))
    from parapush.core import Trajectory
    return Trajectory(tuple(states))


def test_rms_error_constant_offset():
    s0, seq = push_scene(6, n_actions=4)
    t = fine_rollout(s0, seq, CFG1, PARAMS)
    shifted = _shift_slider(t, CFG1, [0.01] * 4)
    total, per_slider = rms_error(t, shifted, CFG1)
    assert total == pytest.approx(0.01, abs=1e-12)
    assert per_slider[0] == pytest.approx(0.01, abs=1e-12)


def test_rms_error_hand_value():
    # offsets 0.03 and 0.04 over two steps: sqrt((9+16)e-4 / 2) = 0.0354
    s0, seq = push_scene(6, n_actions=2)
    t = fine_rollout(s0, seq, CFG1, PARAMS)
    shifted = _shift_slider(t, CFG1, [0.03, 0.04])
    total, _ = rms_error(t, shifted, CFG1)
    assert total == pytest.approx(math.sqrt((0.03 ** 2 + 0.04 ** 2) / 2), abs=1e-12)


def test_rms_error_length_mismatch():
    s0, seq = push_scene(6, n_actions=2)
    t2 = fine_rollout(s0, seq, CFG1, PARAMS)
    s0b, seq4 = push_scene(6, n_actions=4)
    t4 = fine_rollout(s0b, seq4, CFG1, PARAMS)
    with pytest.raises(ValueError):
        rms_error(t2, t4, CFG1)


def test_speedup_report_structure():
    s0, seq = push_scene(8)
    result = parareal_run(s0, seq, analytical_propagator(CFG1),
                          fine_propagator(CFG1, PARAMS), CFG1, iterations=2)
    serial_s = result.wall_clock["reference"]
    report = speedup_report(result, serial_s)
    assert len(report.per_iteration_s) == 2
    assert report.cumulative_s[-1] >= report.cumulative_s[0]
    assert "speedup" in report.as_table()


def test_multi_slider_parareal_converges_at_full_count():
    cfg = default_scene(4)
    s0 = sample_valid_state(33, cfg)
    sliders = list(s0.sliders)
    sliders[0] = SliderState((0.0, 0.0))
    s0 = SystemState(PusherState((-0.1, 0.01)), tuple(sliders))
    seq = ControlSequence.constant((0.08, 0.0), 4)
    result = parareal_run(s0, seq, analytical_propagator(cfg),
                          fine_propagator(cfg, PARAMS), cfg, iterations=4)
    assert result.rms_vs_fine[4] <= 1e-9
