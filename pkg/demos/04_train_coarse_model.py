"""Train a small coarse network end to end (a few minutes).

Generates a few thousand one-step transitions from the fine simulator, fits
a reduced network on the penalized loss, and reports held-out single-step
accuracy against the analytical model.  The full-scale pipeline is the same
with --samples 50000 and the default architecture; see the README.
"""

import math

import numpy as np

from parapush import (ControlAction, FineParams, TrainConfig,
                      analytical_coarse_step, default_scene, generate_dataset,
                      get_pool, learned_coarse_step, train, vector_to_state)

cfg = default_scene(4)
params = FineParams()
pool = get_pool(2)

print("generating 6000 transitions (half contact-biased, half chained)...")
dataset = generate_dataset(6000, cfg, params, rng_seed=3, pool=pool)
heldout = generate_dataset(400, cfg, params, rng_seed=901, pool=pool)

tc = TrainConfig(epochs=60, batch_size=256, rng_seed=0)
print("training 30-512-256-24 network for 60 epochs...")
model, losses = train(dataset, tc, cfg, hidden=(512, 256))
print(f"loss: {losses[0]:.4f} -> {losses[-1]:.4f}")

def position_error(step_fn):
    errs = []
    for s in heldout:
        state = vector_to_state(s.state, cfg)
        out = step_fn(state, ControlAction(tuple(s.action), 1.0))
        e2 = 0.0
        for i in range(cfg.num_sliders):
            base = 4 + 6 * i
            e2 += (out.sliders[i].position[0] - s.next_state_fine[base]) ** 2
            e2 += (out.sliders[i].position[1] - s.next_state_fine[base + 1]) ** 2
        errs.append(math.sqrt(e2))
    return float(np.mean(errs)) * 1000

learned_mm = position_error(lambda st, u: learned_coarse_step(model, st, u, cfg))
ana_mm = position_error(lambda st, u: analytical_coarse_step(st, u, cfg))
print(f"\nheld-out mean single-step position error:")
print(f"  learned    {learned_mm:6.2f} mm   (small dataset, reduced net)")
print(f"  analytical {ana_mm:6.2f} mm")
print("\nThe desk-scale pipeline (50k samples, full architecture, 300 epochs)")
print("closes the rest of the gap; this demo just exercises the machinery.")
