"""Push a disc around with the fine contact simulator.

The fine model advances the world in 1 ms substeps: the pusher moves
kinematically, overlaps are projected out with friction impulses, and table
friction brings the sliders to rest.  This script pushes one slider head-on,
then gives it a glancing blow, printing the resulting motion.
"""

from parapush import (ControlAction, ControlSequence, FineParams, PusherState,
                      SliderState, SystemState, default_scene, fine_rollout,
                      max_penetration)

cfg = default_scene(1)
params = FineParams()

state = SystemState(PusherState((-0.10, 0.0)), (SliderState((0.0, 0.0)),))
seq = ControlSequence((
    ControlAction((0.08, 0.0), 1.0),    # approach and push head-on
    ControlAction((0.08, 0.0), 1.0),    # keep pushing
    ControlAction((0.0, 0.05), 1.0),    # slide away sideways
))

traj = fine_rollout(state, seq, cfg, params)

print(f"{'step':>4} {'pusher x':>9} {'pusher y':>9} {'slider x':>9} "
      f"{'slider y':>9} {'slider speed':>12} {'overlap':>8}")
for n, s in enumerate(traj):
    sl = s.sliders[0]
    speed = (sl.linear_velocity[0] ** 2 + sl.linear_velocity[1] ** 2) ** 0.5
    print(f"{n:>4} {s.pusher.position[0]:>9.4f} {s.pusher.position[1]:>9.4f} "
          f"{sl.position[0]:>9.4f} {sl.position[1]:>9.4f} {speed:>12.4f} "
          f"{max_penetration(s, cfg):>8.1e}")

print("\nThe slider rides in front of the pusher while in contact (steps 1-2),")
print("then coasts to rest under table friction once the pusher turns away.")
