"""Sagittal-plane articulated quadruped dynamics.

The robot is a rigid base (x, z, pitch) with four independently actuated
2-link legs hanging from hips at base-frame offsets (hip_x, 0); front and
hind left/right pairs share a hip station but keep their own joints, so the
model has 11 generalized coordinates and 8 actuated joints. Ground contact
is a clamped spring-damper along the normal plus anchored Coulomb friction
at each point foot. Integration is semi-implicit Euler.

Lateral quantities (y, roll, yaw) do not exist in this backend; the reward
terms that consume them evaluate to zero by construction.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import (
    P_ALPHA, P_CLRNC, P_C1, P_C2, P_DN, P_DT, P_DTAN, P_G, P_GAP_FLOOR, P_H,
    P_I1, P_I2, P_IB, P_IK_EPS, P_KD, P_KN, P_KP, P_KT, P_L1, P_L2, P_LSTEP,
    P_M1, P_M2, P_MB, P_MUF, P_OMEGA_SCALE, P_OSCX, P_OSCZ, P_PNTR, P_SIZE,
    P_TAULIM, NQ,
)
from .kinematics import LegGeometry
from .terrain import TerrainSpec

FALL_HEIGHT = 0.15


@dataclass
class RobotModel:
    """Masses, inertias, gains, and contact constants.

    Defaults give a 12 kg robot (base 9 kg + 4 x 0.75 kg legs) with
    Kp = 100, Kd = 2 joint PD gains and a 33.5 N*m torque limit.
    """

    base_mass: float = 9.0
    base_inertia: float = 0.15
    thigh_mass: float = 0.5
    shank_mass: float = 0.25
    kp: float = 100.0
    kd: float = 2.0
    torque_limit: float = 33.5
    friction: float = 0.8
    contact_kn: float = 1e4
    contact_dn: float = 100.0
    tangential_kt: float = 1e4
    tangential_dt: float = 100.0
    gravity: float = 9.81
    geometry: LegGeometry = field(default_factory=LegGeometry)

    def __post_init__(self):
        if min(self.base_mass, self.thigh_mass, self.shank_mass) <= 0:
            raise ValueError("masses must be > 0")

    @property
    def total_mass(self) -> float:
        return self.base_mass + 4 * (self.thigh_mass + self.shank_mass)

    def link_inertias(self):
        # uniform rods about their COM
        g = self.geometry
        return (self.thigh_mass * g.l1 ** 2 / 12.0,
                self.shank_mass * g.l2 ** 2 / 12.0)


@dataclass
class SimState:
    """Planar robot state.

    q = [x, z, pitch, hip0, knee0, ..., hip3, knee3] and its rate qd.
    Foot positions/velocities are derived quantities refreshed by the
    stepper; contact[i] is True iff normal_force[i] > 0. friction_anchor
    carries the tangential stiction anchor between steps.
    """

    q: np.ndarray
    qd: np.ndarray
    foot_pos: np.ndarray = field(default_factory=lambda: np.zeros((4, 2)))
    foot_vel: np.ndarray = field(default_factory=lambda: np.zeros((4, 2)))
    contact: np.ndarray = field(default_factory=lambda: np.zeros(4, dtype=np.bool_))
    normal_force: np.ndarray = field(default_factory=lambda: np.zeros(4))
    tangent_force: np.ndarray = field(default_factory=lambda: np.zeros(4))
    friction_anchor: np.ndarray = field(default_factory=lambda: np.zeros(4))
    time: float = 0.0

    def copy(self) -> "SimState":
        return SimState(self.q.copy(), self.qd.copy(), self.foot_pos.copy(),
                        self.foot_vel.copy(), self.contact.copy(),
                        self.normal_force.copy(), self.tangent_force.copy(),
                        self.friction_anchor.copy(), self.time)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.q).all() and np.isfinite(self.qd).all())

    @property
    def base_x(self) -> float:
        return float(self.q[0])

    @property
    def base_z(self) -> float:
        return float(self.q[1])

    @property
    def pitch(self) -> float:
        return float(self.q[2])

    @property
    def pitch_rate(self) -> float:
        return float(self.qd[2])

    @property
    def joints(self) -> np.ndarray:
        return self.q[3:]

    @property
    def joint_rates(self) -> np.ndarray:
        return self.qd[3:]


def build_param_vector(model: RobotModel, dt: float = 1e-3, alpha: float = 50.0,
                       omega_scale: float = 2.0 * np.pi, l_step: float = 0.05,
                       h: float = 0.25, l_clrnc: float = 0.05,
                       l_pntr: float = 0.01, osc_x: bool = True,
                       osc_z: bool = True,
                       gap_floor: float = -1.0) -> np.ndarray:
    """Pack model + loop constants into the kernel parameter vector."""
    g = model.geometry
    i1, i2 = model.link_inertias()
    P = np.zeros(P_SIZE)
    P[P_DT] = dt
    P[P_ALPHA] = alpha
    P[P_OMEGA_SCALE] = omega_scale
    P[P_LSTEP] = l_step
    P[P_H] = h
    P[P_CLRNC] = l_clrnc
    P[P_PNTR] = l_pntr
    P[P_OSCX] = 1.0 if osc_x else 0.0
    P[P_OSCZ] = 1.0 if osc_z else 0.0
    P[P_L1] = g.l1
    P[P_L2] = g.l2
    P[P_IK_EPS] = g.workspace_eps
    P[P_KP] = model.kp
    P[P_KD] = model.kd
    P[P_TAULIM] = model.torque_limit
    P[P_MB] = model.base_mass
    P[P_IB] = model.base_inertia
    P[P_M1] = model.thigh_mass
    P[P_I1] = i1
    P[P_C1] = g.l1 / 2.0
    P[P_M2] = model.shank_mass
    P[P_I2] = i2
    P[P_C2] = g.l2 / 2.0
    P[P_G] = model.gravity
    P[P_KN] = model.contact_kn
    P[P_DN] = model.contact_dn
    P[P_KT] = model.tangential_kt
    P[P_DTAN] = model.tangential_dt
    P[P_MUF] = model.friction
    P[P_GAP_FLOOR] = gap_floor
    return P


class PhysicsFault(RuntimeError):
    """Raised when integration produces a non-finite state."""


class PlanarSim:
    """One simulator instance (owns nothing mutable beyond caches)."""

    def __init__(self, model: RobotModel | None = None):
        self.model = model or RobotModel()
        self._P = build_param_vector(self.model)
        self._M_ang = _kernels.mass_matrix_const(self._P)

    def step(self, state: SimState, torque: np.ndarray, terrain: TerrainSpec,
             dt: float = 1e-3) -> SimState:
        """One integration step; returns the new state.

        Raises PhysicsFault if the state leaves the finite domain (the env
        converts this into episode termination with failure).
        """
        if not state.is_finite():
            raise PhysicsFault("non-finite input state")
        out = state.copy()
        P = self._P
        if dt != P[P_DT]:
            P = P.copy()
            P[P_DT] = dt
        fault = _kernels.dyn_step(
            out.q, out.qd, np.asarray(torque, dtype=float),
            self.model.geometry.hip_x, terrain.edges(), P, self._M_ang,
            out.contact, out.friction_anchor, out.foot_pos, out.foot_vel,
            out.normal_force, out.tangent_force)
        out.time = state.time + dt
        if fault:
            raise PhysicsFault("integration diverged (non-finite state)")
        return out

    def com(self, state: SimState) -> np.ndarray:
        """Whole-body center of mass in the world frame."""
        m = self.model
        g = m.geometry
        x, z, pitch = state.q[0], state.q[1], state.q[2]
        cp, sp = np.cos(pitch), np.sin(pitch)
        total = m.base_mass * np.array([x, z])
        for leg in range(4):
            hip = np.array([x + cp * g.hip_x[leg], z + sp * g.hip_x[leg]])
            a1 = pitch + state.q[3 + 2 * leg]
            a2 = a1 + state.q[4 + 2 * leg]
            e1 = np.array([np.sin(a1), -np.cos(a1)])
            e2 = np.array([np.sin(a2), -np.cos(a2)])
            total += m.thigh_mass * (hip + 0.5 * g.l1 * e1)
            total += m.shank_mass * (hip + g.l1 * e1 + 0.5 * g.l2 * e2)
        return total / m.total_mass

    def mechanical_energy(self, state: SimState) -> float:
        """Kinetic + gravitational potential energy (potential zero at z=0)."""
        m = self.model
        g = m.geometry
        i1, i2 = m.link_inertias()
        x, z, pitch = state.q[0], state.q[1], state.q[2]
        vx, vz, phid = state.qd[0], state.qd[1], state.qd[2]
        cp, sp = np.cos(pitch), np.sin(pitch)
        ke = 0.5 * m.base_mass * (vx ** 2 + vz ** 2) + 0.5 * m.base_inertia * phid ** 2
        pe = m.base_mass * m.gravity * z
        for leg in range(4):
            ux, uz = cp * g.hip_x[leg], sp * g.hip_x[leg]
            hv = np.array([vx - phid * uz, vz + phid * ux])
            a1 = pitch + state.q[3 + 2 * leg]
            a2 = a1 + state.q[4 + 2 * leg]
            ad1 = phid + state.qd[3 + 2 * leg]
            ad2 = ad1 + state.qd[4 + 2 * leg]
            e1 = np.array([np.sin(a1), -np.cos(a1)])
            f1 = np.array([np.cos(a1), np.sin(a1)])
            e2 = np.array([np.sin(a2), -np.cos(a2)])
            f2 = np.array([np.cos(a2), np.sin(a2)])
            v1 = hv + 0.5 * g.l1 * ad1 * f1
            v2 = hv + g.l1 * ad1 * f1 + 0.5 * g.l2 * ad2 * f2
            ke += 0.5 * m.thigh_mass * v1 @ v1 + 0.5 * i1 * ad1 ** 2
            ke += 0.5 * m.shank_mass * v2 @ v2 + 0.5 * i2 * ad2 ** 2
            p1 = np.array([x + ux, z + uz]) + 0.5 * g.l1 * e1
            p2 = np.array([x + ux, z + uz]) + g.l1 * e1 + 0.5 * g.l2 * e2
            pe += m.gravity * (m.thigh_mass * p1[1] + m.shank_mass * p2[1])
        return float(ke + pe)


def pd_torque(q_des: np.ndarray, q: np.ndarray, qdot: np.ndarray,
              model: RobotModel) -> np.ndarray:
    """Joint torques tau = Kp*(q_des - q) - Kd*qdot, clamped to the limit."""
    out = np.empty(8)
    _kernels.pd_tau(np.asarray(q_des, dtype=float), np.asarray(q, dtype=float),
                    np.asarray(qdot, dtype=float), model.kp, model.kd,
                    model.torque_limit, out)
    return out


def step_physics(state: SimState, torque: np.ndarray, terrain: TerrainSpec,
                 model: RobotModel | None = None, dt: float = 1e-3) -> SimState:
    """Convenience one-shot stepper (builds a PlanarSim per call)."""
    return PlanarSim(model).step(state, torque, terrain, dt)


def fall_check(state: SimState, min_height: float = FALL_HEIGHT) -> bool:
    """True when the body height has dropped below the fall threshold
    (strict inequality: exactly min_height is not a fall)."""
    return state.base_z < min_height
