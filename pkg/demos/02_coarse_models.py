"""Compare the coarse propagators against the fine simulator, one step at a
time.

The analytical model moves the slider with the pusher velocity for the
in-contact fraction of the path; a trained network predicts the state change
directly.  Pass a weight file to include the learned model:

    python demos/02_coarse_models.py [weights.json]
"""

import math
import sys

from parapush import (ControlAction, PusherState, SliderState, SystemState,
                      analytical_coarse_step, default_scene, fine_step,
                      learned_coarse_step, load_model)

cfg = default_scene(4)
model = load_model(sys.argv[1]) if len(sys.argv) > 1 else None

# slider 0 in the open, others parked out of the way
sliders = [SliderState((0.05, 0.0))] + [SliderState(cfg.parked_positions[i])
                                        for i in range(1, 4)]

cases = {
    "head-on push": (PusherState((-0.03, 0.0)), ControlAction((0.1, 0.0), 1.0)),
    "glancing push": (PusherState((-0.03, 0.045)), ControlAction((0.1, 0.0), 1.0)),
    "near miss": (PusherState((-0.03, 0.075)), ControlAction((0.1, 0.0), 1.0)),
}

for name, (pusher, action) in cases.items():
    state = SystemState(pusher, tuple(sliders))
    fine = fine_step(state, action, cfg).sliders[0].position
    ana = analytical_coarse_step(state, action, cfg).sliders[0].position
    print(f"\n{name}: slider starts at (0.050, 0.000)")
    print(f"  fine       -> ({fine[0]:.4f}, {fine[1]:.4f})")
    err = math.hypot(ana[0] - fine[0], ana[1] - fine[1])
    print(f"  analytical -> ({ana[0]:.4f}, {ana[1]:.4f})   off by {err * 1000:.1f} mm")
    if model is not None:
        net = learned_coarse_step(model, state, action, cfg).sliders[0].position
        err = math.hypot(net[0] - fine[0], net[1] - fine[1])
        print(f"  learned    -> ({net[0]:.4f}, {net[1]:.4f})   off by {err * 1000:.1f} mm")

print("\nThe analytical model is exact for head-on pushes but drags the slider")
print("along the pusher direction on glancing contact, where the true motion")
print("follows the contact normal.")
