"""gapcross: a sagittal-plane quadruped gap-crossing laboratory.

Oscillator-based rhythm generation, pattern formation with 2-link inverse
kinematics, planar articulated physics with gap terrain, a from-scratch PPO
learner, and gait metrics (success rate, cost of transport, Froude number,
body angular velocity).
"""

from .oscillators import (OscillatorState, RgParams, SupraspinalDrive,
                          reset_rg, step_rg)
from .kinematics import (FootOffsets, FootTarget, LegGeometry, PfParams,
                         foot_target, forward_kinematics, inverse_kinematics)
from .terrain import TerrainSpec, generate_terrain
from .dynamics import (PhysicsFault, PlanarSim, RobotModel, SimState,
                       fall_check, pd_torque, step_physics)
from .env import (ActionConfig, CycleEvents, GapEnv, ObsConfig, RewardWeights,
                  StepResult, TerrainConfig, build_observation, compute_reward,
                  scale_action)

__version__ = "0.1.0"
