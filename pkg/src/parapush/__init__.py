"""Time-parallel physics prediction for planar pushing.

A cheap coarse propagator (analytical or learned) is corrected toward an
expensive fine disc-contact simulator via Parareal iterations; the resulting
predictive model drives a sampling-based trajectory optimizer in a
model-predictive control loop.
"""

from .core import (MAX_PUSHER_SPEED, ControlAction, ControlSequence,
                   PusherState, Rect, SceneConfig, SliderState, SystemState,
                   Trajectory, default_scene, state_to_vector, vector_to_state,
                   wrap_angle)
from .geometry import (ContactSplit, contact_point_and_angle,
                       penetration_depth, swept_contact_split)
from .fine_physics import (CrowdedWorkspaceError, FineParams,
                           SimulationBlowupError, fine_propagator,
                           fine_rollout, fine_step, max_penetration,
                           sample_valid_state)
from .coarse_analytical import (AnalyticalParams, analytical_coarse_step,
                                analytical_propagator, analytical_rollout)
from .neural_net import (NetworkModel, Sample, TrainConfig,
                         TrainingDivergedError, forward, load_model,
                         loss_and_gradient, save_model, train)
from .coarse_learned import (autoregressive_rollout, generate_dataset,
                             learned_coarse_step, learned_propagator,
                             load_dataset, save_dataset)
from .parareal import (PararealResult, SpeedupReport, parareal_run, rms_error,
                       speedup_report)
from .planner import (CostParams, EpisodeResult, OptimizerConfig,
                      mpc_episode, optimize, trajectory_cost,
                      write_episode_logs)
from .workers import WorkerPool, get_pool

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
