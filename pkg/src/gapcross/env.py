"""Gap-crossing MDP: action decoding, observation assembly, reward, and the
100 Hz control loop over 1 kHz substeps.

Action cases (which drive channels the policy modulates, and which
oscillatory terms feed the foot targets):

    case  action channels          osc_x  osc_z  terrain
    1     mu, omega                yes    yes    flat
    2     mu, omega                yes    yes    gaps
    3     mu, omega, x_off         no     yes    gaps
    4     mu, omega, x_off         yes    yes    gaps
    5     x_off, z_off             yes*   yes*   gaps
    6     mu, omega, x_off, z_off  yes    yes    gaps

Case 5 keeps the underlying rhythm running at fixed mu = 1, omega = 2.5 Hz
(*the alternative reading, a fully frozen oscillator, is available via
frozen_cpg=True, which clears both osc gates).

Observation = proprioceptive block (pitch, base velocities, pitch rate,
joint positions/velocities, contact booleans, previous action, oscillator
states r/rdot/theta/theta_dot) followed by the enabled exteroceptive blocks
in fixed order: front-feet gap distances (4), all-feet gap distances (8),
base gap distances (2), per-foot ground clearance (4), per-foot in-gap
booleans (4). Gap distances are signed x-distances to the start and end of
the next gap whose end lies ahead of the reference point, clamped to +-2 m
(+2 when no gap remains).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._kernels import P_DT, P_OSCX, P_OSCZ
from .dynamics import (FALL_HEIGHT, RobotModel, SimState, build_param_vector,
                       fall_check)
from .kinematics import PfParams
from .oscillators import (N_LIMBS, OscillatorState, RgParams, reset_rg)
from .terrain import TerrainSpec, generate_terrain

MU_RANGE = (0.5, 4.0)
OMEGA_RANGE = (0.0, 5.0)
OFFSET_RANGE = (-0.07, 0.07)
GAP_DIST_CLAMP = 2.0
CLEARANCE_CLAMP = 1.0
FRONT_LEGS = (0, 1)   # FR, FL
HIND_LEGS = (2, 3)    # RR, RL


@dataclass
class ActionConfig:
    """Which drive channels the policy controls, their limits, and which
    oscillatory terms feed the foot targets."""

    use_mu: bool = True
    use_omega: bool = True
    use_x_off: bool = False
    use_z_off: bool = False
    osc_x: bool = True
    osc_z: bool = True
    mu_range: tuple = MU_RANGE
    omega_range: tuple = OMEGA_RANGE
    offset_range: tuple = OFFSET_RANGE
    mu_default: float = 1.0
    omega_default: float = 2.5  # midpoint of the training range

    def __post_init__(self):
        if not (self.use_mu or self.use_omega or self.use_x_off or self.use_z_off):
            raise ValueError("at least one action channel must be enabled")

    @property
    def dim(self) -> int:
        return 4 * sum([self.use_mu, self.use_omega, self.use_x_off, self.use_z_off])

    @classmethod
    def from_case(cls, case: int, frozen_cpg: bool = False) -> "ActionConfig":
        if case in (1, 2):
            return cls(use_mu=True, use_omega=True)
        if case == 3:
            return cls(use_mu=True, use_omega=True, use_x_off=True, osc_x=False)
        if case == 4:
            return cls(use_mu=True, use_omega=True, use_x_off=True)
        if case == 5:
            return cls(use_mu=False, use_omega=False, use_x_off=True,
                       use_z_off=True, osc_x=not frozen_cpg, osc_z=not frozen_cpg)
        if case == 6:
            return cls(use_mu=True, use_omega=True, use_x_off=True, use_z_off=True)
        raise ValueError(f"unknown action case: {case}")


@dataclass
class ObsConfig:
    """Exteroceptive feature toggles; the proprioceptive block is always on."""

    front_feet_gap_dist: bool = False
    all_feet_gap_dist: bool = False
    base_gap_dist: bool = False
    feet_ground_clearance: bool = False
    gap_contact_booleans: bool = False

    @classmethod
    def from_combo(cls, combo: int) -> "ObsConfig":
        """Canonical 16-combination table: ids 1..15 are the bitmask over
        (front-feet dists, base dist, clearance, in-gap booleans) with
        id 1 = front-feet distances only; id 16 is proprioceptive-only."""
        if not 1 <= combo <= 16:
            raise ValueError("combo id must be in 1..16")
        if combo == 16:
            return cls()
        return cls(front_feet_gap_dist=bool(combo & 1),
                   base_gap_dist=bool(combo & 2),
                   feet_ground_clearance=bool(combo & 4),
                   gap_contact_booleans=bool(combo & 8))

    @property
    def extero_dim(self) -> int:
        return (4 * self.front_feet_gap_dist + 8 * self.all_feet_gap_dist
                + 2 * self.base_gap_dist + 4 * self.feet_ground_clearance
                + 4 * self.gap_contact_booleans)

    def layout(self, action_dim: int) -> list[tuple[str, int]]:
        """Named (block, size) layout of the observation vector."""
        blocks = [("pitch", 1), ("base_velocity", 2), ("pitch_rate", 1),
                  ("joint_pos", 8), ("joint_vel", 8), ("contact", 4),
                  ("prev_action", action_dim), ("osc_r", 4), ("osc_r_dot", 4),
                  ("osc_theta", 4), ("osc_theta_dot", 4)]
        if self.front_feet_gap_dist:
            blocks.append(("front_feet_gap_dist", 4))
        if self.all_feet_gap_dist:
            blocks.append(("all_feet_gap_dist", 8))
        if self.base_gap_dist:
            blocks.append(("base_gap_dist", 2))
        if self.feet_ground_clearance:
            blocks.append(("feet_ground_clearance", 4))
        if self.gap_contact_booleans:
            blocks.append(("gap_contact_booleans", 4))
        return blocks

    def obs_dim(self, action_dim: int) -> int:
        return sum(size for _, size in self.layout(action_dim))


@dataclass
class RewardWeights:
    """Reward coefficients; signs are part of the values (the penalty
    coefficients are negative)."""

    alpha1: float = 2.0
    d_max: float = 0.03      # rewarded forward distance cap per control cycle
    s_gap: float = 3.0
    n_gap: float = -0.03
    alpha3: float = -0.05
    alpha4: float = -0.02
    alpha5: float = -0.00008

    def __post_init__(self):
        if self.d_max <= 0:
            raise ValueError("d_max must be > 0")


@dataclass
class CycleEvents:
    """What happened during one control cycle."""

    gaps_crossed: int = 0
    foot_in_gap: bool = False


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    breakdown: dict
    done: bool
    info: dict


@dataclass
class TerrainConfig:
    mode: str = "standard"          # flat | standard | challenging | single_gap
    n_gaps: int = 7
    gap_width_range: tuple = (0.14, 0.20)
    first_gap_range: tuple = (1.25, 2.25)

    def sample(self, rng: np.random.Generator) -> TerrainSpec:
        if self.mode == "flat":
            return generate_terrain(0, "flat", rng)
        if self.mode == "single_gap":
            return generate_terrain(1, "standard", rng,
                                    gap_width_range=self.gap_width_range,
                                    first_gap_range=self.first_gap_range)
        return generate_terrain(self.n_gaps, self.mode, rng,
                                gap_width_range=self.gap_width_range,
                                first_gap_range=self.first_gap_range)


def scale_action(raw: np.ndarray, cfg: ActionConfig):
    """Map a raw [-1, 1]^k vector to (SupraspinalDrive, FootOffsets).

    Out-of-range components are clamped before the affine map; disabled
    channels hold their defaults (mu = 1, omega = 2.5 Hz, offsets = 0).
    """
    from .kinematics import FootOffsets
    from .oscillators import SupraspinalDrive
    mu = np.empty(N_LIMBS)
    om = np.empty(N_LIMBS)
    xo = np.empty(N_LIMBS)
    zo = np.empty(N_LIMBS)
    decode_action(np.asarray(raw, dtype=float), cfg, mu, om, xo, zo)
    return SupraspinalDrive(mu=mu, omega=om), FootOffsets(x=xo, z=zo)


def decode_action(raw: np.ndarray, cfg: ActionConfig, mu: np.ndarray,
                  om: np.ndarray, xo: np.ndarray, zo: np.ndarray) -> None:
    """In-place action decode shared by scale_action and the env."""
    if raw.shape != (cfg.dim,):
        raise ValueError(f"action must have shape ({cfg.dim},), got {raw.shape}")
    raw = np.clip(raw, -1.0, 1.0)
    i = 0

    def affine(seg, lo, hi):
        return lo + (seg + 1.0) * 0.5 * (hi - lo)

    if cfg.use_mu:
        mu[:] = affine(raw[i:i + 4], *cfg.mu_range)
        i += 4
    else:
        mu[:] = cfg.mu_default
    if cfg.use_omega:
        om[:] = affine(raw[i:i + 4], *cfg.omega_range)
        i += 4
    else:
        om[:] = cfg.omega_default
    if cfg.use_x_off:
        xo[:] = affine(raw[i:i + 4], *cfg.offset_range)
        i += 4
    else:
        xo[:] = 0.0
    if cfg.use_z_off:
        zo[:] = affine(raw[i:i + 4], *cfg.offset_range)
    else:
        zo[:] = 0.0


def _gap_distances(x_ref: float, gap_arr: np.ndarray, ends: np.ndarray,
                   out: np.ndarray, j: int) -> None:
    idx = np.searchsorted(ends, x_ref, side='right')
    if idx >= ends.shape[0]:
        out[j] = GAP_DIST_CLAMP
        out[j + 1] = GAP_DIST_CLAMP
    else:
        out[j] = min(max(gap_arr[idx, 0] - x_ref, -GAP_DIST_CLAMP), GAP_DIST_CLAMP)
        out[j + 1] = min(max(gap_arr[idx, 1] - x_ref, -GAP_DIST_CLAMP), GAP_DIST_CLAMP)


def build_observation(sim: SimState, cpg: OscillatorState,
                      prev_action: np.ndarray, terrain: TerrainSpec,
                      cfg: ObsConfig, out: np.ndarray | None = None) -> np.ndarray:
    """Assemble the observation vector (see module docstring for layout)."""
    k = prev_action.shape[0]
    n = cfg.obs_dim(k)
    if out is None:
        out = np.empty(n)
    out[0] = sim.q[2]
    out[1] = sim.qd[0]
    out[2] = sim.qd[1]
    out[3] = sim.qd[2]
    out[4:12] = sim.q[3:]
    out[12:20] = sim.qd[3:]
    out[20:24] = sim.contact
    out[24:24 + k] = prev_action
    j = 24 + k
    out[j:j + 4] = cpg.r
    out[j + 4:j + 8] = cpg.r_dot
    out[j + 8:j + 12] = cpg.theta
    out[j + 12:j + 16] = cpg.theta_dot
    j += 16
    if cfg.extero_dim:
        gap_arr = np.asarray(terrain.gaps, dtype=float).reshape(-1, 2)
        ends = gap_arr[:, 1] if gap_arr.size else np.empty(0)
        if cfg.front_feet_gap_dist:
            for leg in FRONT_LEGS:
                _gap_distances(sim.foot_pos[leg, 0], gap_arr, ends, out, j)
                j += 2
        if cfg.all_feet_gap_dist:
            for leg in range(N_LIMBS):
                _gap_distances(sim.foot_pos[leg, 0], gap_arr, ends, out, j)
                j += 2
        if cfg.base_gap_dist:
            _gap_distances(sim.base_x, gap_arr, ends, out, j)
            j += 2
        if cfg.feet_ground_clearance:
            for leg in range(N_LIMBS):
                clr = sim.foot_pos[leg, 1] - terrain.height(sim.foot_pos[leg, 0])
                out[j] = min(clr, CLEARANCE_CLAMP)
                j += 1
        if cfg.gap_contact_booleans:
            for leg in range(N_LIMBS):
                kind, _ = terrain.query(sim.foot_pos[leg, 0])
                out[j] = 1.0 if (kind == "gap" and sim.foot_pos[leg, 1] < 0.0) else 0.0
                j += 1
    return out


def compute_reward(prev: SimState, cur: SimState, torques: np.ndarray,
                   events: CycleEvents,
                   weights: RewardWeights) -> tuple[float, dict]:
    """Per-control-cycle reward and its exact breakdown.

    reward = alpha1*min(dx, d_max) + s_gap*crossed + n_gap*foot_in_gap
             + alpha3*|y| + alpha4*|pitch| + alpha5*|tau . (qd_t - qd_{t-1})|

    The lateral term is identically zero in the sagittal backend; it is kept
    in the breakdown for layout stability. The scalar reward is the sum of
    the breakdown values in this exact order, so the two match bitwise.
    """
    w = weights
    dx = cur.base_x - prev.base_x
    breakdown = {
        "forward": w.alpha1 * min(dx, w.d_max),
        "gap_bonus": w.s_gap * events.gaps_crossed,
        "gap_penalty": w.n_gap * (1.0 if events.foot_in_gap else 0.0),
        "lateral": w.alpha3 * 0.0,
        "orientation": w.alpha4 * abs(cur.pitch),
        "power": w.alpha5 * abs(float(np.dot(torques,
                                             cur.joint_rates - prev.joint_rates))),
    }
    reward = 0.0
    for key in ("forward", "gap_bonus", "gap_penalty", "lateral",
                "orientation", "power"):
        reward += breakdown[key]
    return reward, breakdown


class GapEnv:
    """Single-instance gap-crossing environment (one per rollout worker)."""

    CONTROL_DT = 0.01
    N_SUBSTEPS = 10

    def __init__(self, action_cfg: ActionConfig | None = None,
                 obs_cfg: ObsConfig | None = None,
                 reward_weights: RewardWeights | None = None,
                 rg_params: RgParams | None = None,
                 pf_params: PfParams | None = None,
                 model: RobotModel | None = None,
                 terrain_cfg: TerrainConfig | None = None,
                 episode_seconds: float = 10.0,
                 cpg_init_mode: str = "trot",
                 seed: int | None = None):
        self.action_cfg = action_cfg or ActionConfig()
        self.obs_cfg = obs_cfg or ObsConfig()
        self.reward_weights = reward_weights or RewardWeights()
        self.rg_params = rg_params or RgParams()
        self.pf_params = pf_params or PfParams()
        self.model = model or RobotModel()
        self.terrain_cfg = terrain_cfg or TerrainConfig()
        self.episode_seconds = episode_seconds
        self.max_cycles = int(round(episode_seconds / self.CONTROL_DT))
        self.cpg_init_mode = cpg_init_mode
        self.rng = np.random.default_rng(seed)

        self.action_dim = self.action_cfg.dim
        self.obs_dim = self.obs_cfg.obs_dim(self.action_dim)

        pf = self.pf_params
        self._P = build_param_vector(
            self.model, dt=self.rg_params.dt, alpha=self.rg_params.alpha,
            omega_scale=self.rg_params.omega_convention.scale,
            l_step=pf.l_step, h=pf.h, l_clrnc=pf.l_clrnc, l_pntr=pf.l_pntr,
            osc_x=self.action_cfg.osc_x, osc_z=self.action_cfg.osc_z)
        self._M_ang = _kernels.mass_matrix_const(self._P)
        lo, hi = self.model.geometry.joint_limit_arrays()
        self._jlim_lo, self._jlim_hi = lo, hi

        # drive buffers (held constant within a control cycle)
        self._mu = np.empty(N_LIMBS)
        self._om = np.empty(N_LIMBS)
        self._xo = np.empty(N_LIMBS)
        self._zo = np.empty(N_LIMBS)
        self._tau_last = np.zeros(8)
        self._in_gap = np.zeros(N_LIMBS, dtype=np.bool_)
        self._max_contact_x = np.full(N_LIMBS, -1e18)
        self._obs = np.empty(self.obs_dim)
        self.record_drive = False

        self.terrain: TerrainSpec | None = None
        self.state: SimState | None = None
        self.cpg: OscillatorState | None = None

    # -- episode management ------------------------------------------------

    def reset(self, seed: int | None = None) -> np.ndarray:
        """Regenerate terrain, stand the robot at the origin, reset the CPG."""
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.terrain = self.terrain_cfg.sample(self.rng)
        self._gap_edges = self.terrain.edges()
        self.cpg = reset_rg(self.cpg_init_mode, rng=self.rng)
        self.state = self._nominal_stand()
        self.prev_action = np.zeros(self.action_dim)
        self._prev_joint_rates = self.state.joint_rates.copy()
        self.n_cycles = 0
        self._crossed = np.zeros(self.terrain.n_gaps, dtype=np.bool_)
        self._hind_landed = np.zeros((self.terrain.n_gaps, 2), dtype=np.bool_)
        self.episode_energy = 0.0
        self._sum_abs_pitch_rate = 0.0
        self._start_x = self.state.base_x
        self.done = False
        return build_observation(self.state, self.cpg, self.prev_action,
                                 self.terrain, self.obs_cfg, self._obs).copy()

    def _nominal_stand(self) -> SimState:
        """Stand pose: base at (0, h), joints matching the CPG's initial
        foot targets so the first cycle starts without a command jump."""
        from .kinematics import FootOffsets, foot_target, inverse_kinematics
        q = np.zeros(_kernels.NQ)
        q[1] = self.pf_params.h
        ft = foot_target(self.cpg, FootOffsets(), self.pf_params,
                         osc_x=self.action_cfg.osc_x, osc_z=self.action_cfg.osc_z)
        for leg in range(N_LIMBS):
            hip, knee = inverse_kinematics(ft.x[leg], ft.z[leg],
                                           self.model.geometry)
            q[3 + 2 * leg] = min(max(hip, self._jlim_lo[2 * leg]),
                                 self._jlim_hi[2 * leg])
            q[4 + 2 * leg] = min(max(knee, self._jlim_lo[2 * leg + 1]),
                                 self._jlim_hi[2 * leg + 1])
        return SimState(q=q, qd=np.zeros(_kernels.NQ))

    # -- stepping ------------------------------------------------------------

    def step(self, raw_action: np.ndarray) -> StepResult:
        if self.state is None or self.done:
            raise RuntimeError("call reset() before step()")
        raw = np.clip(np.asarray(raw_action, dtype=float), -1.0, 1.0)
        decode_action(raw, self.action_cfg, self._mu, self._om, self._xo, self._zo)

        prev = self.state.copy()
        st, cpg = self.state, self.cpg
        fault, energy = _kernels.control_cycle(
            self.N_SUBSTEPS, st.q, st.qd, cpg.r, cpg.r_dot, cpg.theta,
            cpg.theta_dot, self._mu, self._om, self._xo, self._zo,
            self.rg_params.w, self.rg_params.phi,
            self.model.geometry.hip_x, self._gap_edges, self._P, self._M_ang,
            self._jlim_lo, self._jlim_hi, st.contact, st.friction_anchor,
            st.foot_pos, st.foot_vel, st.normal_force, st.tangent_force,
            self._tau_last, self._in_gap, self._max_contact_x)
        self.n_cycles += 1
        st.time = self.n_cycles * self.CONTROL_DT

        if fault:
            # restore the last valid state so the final observation is finite
            self.state = prev
            self.cpg = reset_rg(self.cpg_init_mode)  # placeholder finite CPG
            self.done = True
            obs = build_observation(self.state, self.cpg, raw, self.terrain,
                                    self.obs_cfg, self._obs).copy()
            breakdown = {k: 0.0 for k in ("forward", "gap_bonus", "gap_penalty",
                                          "lateral", "orientation", "power")}
            info = self._make_info(reason="fault", events=[])
            return StepResult(obs, 0.0, breakdown, True, info)

        events_idx = self._update_gap_events()
        events = CycleEvents(gaps_crossed=len(events_idx),
                             foot_in_gap=bool(self._in_gap.any()))
        reward, breakdown = compute_reward(prev, st, self._tau_last, events,
                                           self.reward_weights)
        self._prev_joint_rates = st.joint_rates.copy()
        self.episode_energy += energy
        self._sum_abs_pitch_rate += abs(st.pitch_rate)

        reason = None
        if fall_check(st):
            reason = "fall"
        elif self.n_cycles >= self.max_cycles:
            reason = "timeout"
        self.done = reason is not None
        self.prev_action = raw
        obs = build_observation(st, cpg, raw, self.terrain, self.obs_cfg,
                                self._obs).copy()
        if not np.isfinite(obs).all():
            raise RuntimeError("non-finite observation")  # state was finite
        info = self._make_info(reason=reason, events=events_idx)
        return StepResult(obs, reward, breakdown, self.done, info)

    def _update_gap_events(self) -> list[int]:
        """Gap g counts as crossed the first time both hind feet have touched
        ground at or beyond its end."""
        fired = []
        for g in range(self.terrain.n_gaps):
            if self._crossed[g]:
                continue
            end = self.terrain.gaps[g][1]
            for i, leg in enumerate(HIND_LEGS):
                if self._max_contact_x[leg] >= end:
                    self._hind_landed[g, i] = True
            if self._hind_landed[g].all():
                self._crossed[g] = True
                fired.append(g)
        return fired

    def _make_info(self, reason, events) -> dict:
        info = {
            "time": self.state.time,
            "events": events,
            "reason": reason,
            "gaps_crossed": int(self._crossed.sum()),
            "n_gaps": self.terrain.n_gaps,
        }
        if self.record_drive:
            info["drive"] = (self._mu.copy(), self._om.copy(),
                             self._xo.copy(), self._zo.copy())
            info["tau"] = self._tau_last.copy()
            info["energy"] = self.episode_energy
        if reason is not None:
            info["episode"] = {
                "return": None,  # filled by the rollout layer
                "length": self.n_cycles,
                "duration": self.state.time,
                "gaps_crossed": int(self._crossed.sum()),
                "n_gaps": self.terrain.n_gaps,
                "fall": reason == "fall",
                "fault": reason == "fault",
                "distance": self.state.base_x - self._start_x,
                "energy": self.episode_energy,
                "mean_abs_pitch_rate": (self._sum_abs_pitch_rate
                                        / max(self.n_cycles, 1)),
            }
        return info
