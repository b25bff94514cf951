"""A complete model-predictive control episode.

The task: push the goal slider into the goal region without dropping any
object off the table or knocking an obstacle into the goal.  Each MPC step
optimizes a 4-action sequence with the elite sampler, executes only the
first action in the (fine-model) world, observes, and re-plans.
"""

import math

from parapush import (CostParams, FineParams, OptimizerConfig, default_scene,
                      fine_propagator)
from parapush.experiments import mpc_scene
from parapush.planner import goal_reached, make_serial_rollout, mpc_episode

cfg, s0 = mpc_scene(seed=5)
params = FineParams()
prop = fine_propagator(cfg, params)

print(f"goal: slider 0 -> within {cfg.goal_radius} m of "
      f"({cfg.goal_center[0]:.3f}, {cfg.goal_center[1]:.3f})")
print(f"pusher starts at ({s0.pusher.position[0]:.3f}, {s0.pusher.position[1]:.3f}); "
      f"3 obstacle sliders on the table\n")

result = mpc_episode(
    s0, cfg, CostParams(),
    OptimizerConfig(num_candidates=16, refine_rounds=2, elites=4, rng_seed=0),
    make_serial_rollout(prop), prop,
    max_steps=20, initial_seq_mode="aim", rng_seed=5)

goal = cfg.goal_center
for rec in result.records:
    x, y = rec.state[4], rec.state[5]
    dist = math.hypot(x - goal[0], y - goal[1])
    print(f"step {rec.step:>2}: action ({rec.action[0]:+.3f}, {rec.action[1]:+.3f})"
          f"  goal slider at ({x:+.3f}, {y:+.3f})  distance {dist:.3f}"
          f"  planned cost {rec.cost:.3f}")

print(f"\noutcome: {result.reason} after {result.steps} steps "
      f"({result.total_predict_s:.1f} s spent planning)")
assert goal_reached(result.final_state, cfg) == result.success
