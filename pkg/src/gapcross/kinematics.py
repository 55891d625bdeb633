"""Pattern-formation layer: oscillator state -> foot targets -> joint angles.

Foot targets live in each leg's hip frame (x forward, z up, origin at the
hip). Link angles are measured from straight down, positive swinging the
foot forward; the knee uses the bent-backward branch (knee angle in
[-pi, 0]), fixed globally so joint trajectories stay continuous.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .oscillators import N_LIMBS, OscillatorState


@dataclass
class PfParams:
    """Foot-trajectory shape constants (all meters)."""

    l_step: float = 0.05   # half step length scale
    h: float = 0.25        # nominal leg length
    l_clrnc: float = 0.05  # max swing ground clearance
    l_pntr: float = 0.01   # max stance ground penetration

    def __post_init__(self):
        if min(self.l_step, self.h, self.l_clrnc, self.l_pntr) <= 0:
            raise ValueError("pattern-formation constants must be > 0")
        if self.l_clrnc >= self.h or self.l_pntr >= self.h:
            raise ValueError("clearance/penetration must be smaller than leg length")


@dataclass
class FootOffsets:
    """Oscillation set-point offsets per limb, hip frame (m)."""

    x: np.ndarray = field(default_factory=lambda: np.zeros(N_LIMBS))
    z: np.ndarray = field(default_factory=lambda: np.zeros(N_LIMBS))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.z = np.asarray(self.z, dtype=float)


@dataclass
class FootTarget:
    """Desired foot positions per limb in the hip frames (m)."""

    x: np.ndarray
    z: np.ndarray


@dataclass
class LegGeometry:
    """Planar leg geometry. Defaults approximate a small quadruped
    (thigh = shank = 0.2 m, hips +-0.18 m from the base origin)."""

    l1: float = 0.2
    l2: float = 0.2
    hip_x: np.ndarray = field(
        default_factory=lambda: np.array([0.18, 0.18, -0.18, -0.18]))
    hip_limits: tuple = (-2.2, 2.2)
    knee_limits: tuple = (-2.7, 0.0)
    workspace_eps: float = 1e-6

    def __post_init__(self):
        self.hip_x = np.asarray(self.hip_x, dtype=float)
        if self.l1 <= 0 or self.l2 <= 0:
            raise ValueError("link lengths must be > 0")

    def joint_limit_arrays(self):
        lo = np.tile([self.hip_limits[0], self.knee_limits[0]], N_LIMBS)
        hi = np.tile([self.hip_limits[1], self.knee_limits[1]], N_LIMBS)
        return lo, hi


def foot_target(osc: OscillatorState, off: FootOffsets, pf: PfParams,
                osc_x: bool = True, osc_z: bool = True) -> FootTarget:
    """Foot targets from oscillator state and set-point offsets.

    x = x_off - l_step*r*cos(theta)
    z = z_off - h + l_clrnc*sin(theta)   if sin(theta) > 0
      = z_off - h + l_pntr*sin(theta)    otherwise

    osc_x/osc_z drop the oscillatory term of one axis (used by the
    action-space cases where the rhythm drives only x or only z).
    """
    out_x = np.empty(N_LIMBS)
    out_z = np.empty(N_LIMBS)
    _kernels.pf_targets(osc.r, osc.theta, off.x, off.z,
                        pf.l_step, pf.h, pf.l_clrnc, pf.l_pntr,
                        osc_x, osc_z, out_x, out_z)
    return FootTarget(x=out_x, z=out_z)


def inverse_kinematics(x: float, z: float, geom: LegGeometry) -> tuple:
    """Joint angles (hip, knee) reaching hip-frame target (x, z).

    Unreachable targets are radially clamped to the workspace annulus
    before solving; NaN input is a hard error.
    """
    if not (np.isfinite(x) and np.isfinite(z)):
        raise ValueError("non-finite IK target")
    return _kernels.leg_ik(float(x), float(z), geom.l1, geom.l2,
                           geom.workspace_eps)


def forward_kinematics(hip: float, knee: float, geom: LegGeometry) -> tuple:
    """Hip-frame foot position (x, z) for joint angles (hip, knee)."""
    return _kernels.leg_fk(float(hip), float(knee), geom.l1, geom.l2)
