"""Run configuration: INI-style files with sections, strict key checking.

Every run is reproducible from its resolved config snapshot plus nothing
else: the snapshot embeds all constants (including defaults) and the seed.
Unknown sections or keys are hard errors naming the offender, because silent
hyperparameter typos are the standard way RL reproductions go wrong.
"""

import configparser
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .dynamics import RobotModel
from .env import (ActionConfig, GapEnv, ObsConfig, RewardWeights,
                  TerrainConfig)
from .kinematics import LegGeometry, PfParams
from .oscillators import RgParams
from .ppo import PpoConfig

ENV_OUT_ROOT = "GAPCROSS_OUT"


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# section -> key -> (type caster, default)
SCHEMA = {
    "run": {
        "seed": (int, 0),
        "workers": (int, 1),
        "n_envs": (int, 16),
        "out_dir": (str, ""),
        "case": (int, 4),
        "obs_combo": (int, 16),
        "frozen_cpg": (_bool, False),
        "episode_seconds": (float, 10.0),
        "cpg_init_mode": (str, "trot"),
        "checkpoint_every": (int, 50),
    },
    "ppo": {
        "batch_size": (int, 4096),
        "minibatch_size": (int, 128),
        "sgd_iters": (int, 10),
        "gamma": (float, 0.99),
        "lam": (float, 0.95),
        "clip": (float, 0.2),
        "entropy_coef": (float, 0.01),
        "lr": (float, 1e-4),
        "kl_target": (float, 0.01),
        "total_samples": (int, 35_000_000),
        "value_coef": (float, 0.5),
        "init_log_std": (float, 0.0),
        "net_dtype": (str, "float32"),
    },
    "cpg": {
        "alpha": (float, 50.0),
        "dt": (float, 1e-3),
        "omega_convention": (str, "cycles_per_second"),
    },
    "pf": {
        "l_step": (float, 0.05),
        "h": (float, 0.25),
        "l_clrnc": (float, 0.05),
        "l_pntr": (float, 0.01),
    },
    "robot": {
        "base_mass": (float, 9.0),
        "base_inertia": (float, 0.15),
        "thigh_mass": (float, 0.5),
        "shank_mass": (float, 0.25),
        "kp": (float, 100.0),
        "kd": (float, 2.0),
        "torque_limit": (float, 33.5),
        "friction": (float, 0.8),
        "contact_kn": (float, 1e4),
        "contact_dn": (float, 100.0),
        "tangential_kt": (float, 1e4),
        "tangential_dt": (float, 100.0),
        "gravity": (float, 9.81),
        "l1": (float, 0.2),
        "l2": (float, 0.2),
        "hip_x_front": (float, 0.18),
        "hip_x_rear": (float, -0.18),
    },
    "terrain": {
        "mode": (str, "standard"),
        "n_gaps": (int, 7),
        "gap_width_min": (float, 0.14),
        "gap_width_max": (float, 0.20),
        "first_gap_min": (float, 1.25),
        "first_gap_max": (float, 2.25),
    },
    "reward": {
        "alpha1": (float, 2.0),
        "d_max": (float, 0.03),
        "s_gap": (float, 3.0),
        "n_gap": (float, -0.03),
        "alpha3": (float, -0.05),
        "alpha4": (float, -0.02),
        "alpha5": (float, -0.00008),
    },
    "action": {
        # explicit overrides of the case's flags; "default" keeps the case value
        "use_mu": (str, "default"),
        "use_omega": (str, "default"),
        "use_x_off": (str, "default"),
        "use_z_off": (str, "default"),
        "osc_x": (str, "default"),
        "osc_z": (str, "default"),
    },
    "obs": {
        "front_feet_gap_dist": (str, "default"),
        "all_feet_gap_dist": (str, "default"),
        "base_gap_dist": (str, "default"),
        "feet_ground_clearance": (str, "default"),
        "gap_contact_booleans": (str, "default"),
    },
}


@dataclass
class RunConfig:
    """Fully resolved configuration for one run."""

    values: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = {s: {k: d for k, (_, d) in keys.items()}
                  for s, keys in SCHEMA.items()}
        for sec, kv in self.values.items():
            merged[sec].update(kv)
        self.values = merged

    def __getitem__(self, pair):
        sec, key = pair
        return self.values[sec][key]

    # -- component builders ---------------------------------------------------

    def action_config(self) -> ActionConfig:
        cfg = ActionConfig.from_case(self["run", "case"],
                                     frozen_cpg=self["run", "frozen_cpg"])
        for key in ("use_mu", "use_omega", "use_x_off", "use_z_off",
                    "osc_x", "osc_z"):
            v = self["action", key]
            if v != "default":
                setattr(cfg, key, _bool(v))
        cfg.__post_init__()
        return cfg

    def obs_config(self) -> ObsConfig:
        cfg = ObsConfig.from_combo(self["run", "obs_combo"])
        for key in ("front_feet_gap_dist", "all_feet_gap_dist", "base_gap_dist",
                    "feet_ground_clearance", "gap_contact_booleans"):
            v = self["obs", key]
            if v != "default":
                setattr(cfg, key, _bool(v))
        return cfg

    def terrain_config(self) -> TerrainConfig:
        mode = self["terrain", "mode"]
        if self["run", "case"] == 1:
            mode = "flat"
        return TerrainConfig(
            mode=mode, n_gaps=self["terrain", "n_gaps"],
            gap_width_range=(self["terrain", "gap_width_min"],
                             self["terrain", "gap_width_max"]),
            first_gap_range=(self["terrain", "first_gap_min"],
                             self["terrain", "first_gap_max"]))

    def robot_model(self) -> RobotModel:
        r = self.values["robot"]
        geom = LegGeometry(l1=r["l1"], l2=r["l2"],
                           hip_x=np.array([r["hip_x_front"], r["hip_x_front"],
                                           r["hip_x_rear"], r["hip_x_rear"]]))
        return RobotModel(
            base_mass=r["base_mass"], base_inertia=r["base_inertia"],
            thigh_mass=r["thigh_mass"], shank_mass=r["shank_mass"],
            kp=r["kp"], kd=r["kd"], torque_limit=r["torque_limit"],
            friction=r["friction"], contact_kn=r["contact_kn"],
            contact_dn=r["contact_dn"], tangential_kt=r["tangential_kt"],
            tangential_dt=r["tangential_dt"], gravity=r["gravity"],
            geometry=geom)

    def rg_params(self) -> RgParams:
        return RgParams(alpha=self["cpg", "alpha"], dt=self["cpg", "dt"],
                        omega_convention=self["cpg", "omega_convention"])

    def pf_params(self) -> PfParams:
        p = self.values["pf"]
        return PfParams(l_step=p["l_step"], h=p["h"], l_clrnc=p["l_clrnc"],
                        l_pntr=p["l_pntr"])

    def reward_weights(self) -> RewardWeights:
        return RewardWeights(**self.values["reward"])

    def ppo_config(self) -> PpoConfig:
        return PpoConfig(**self.values["ppo"])

    def env_factory(self):
        action_cfg = self.action_config()
        obs_cfg = self.obs_config()
        reward = self.reward_weights()
        rg = self.rg_params()
        pf = self.pf_params()
        model = self.robot_model()
        terrain = self.terrain_config()
        episode_seconds = self["run", "episode_seconds"]
        init_mode = self["run", "cpg_init_mode"]

        def factory():
            return GapEnv(action_cfg=action_cfg, obs_cfg=obs_cfg,
                          reward_weights=reward, rg_params=rg, pf_params=pf,
                          model=model, terrain_cfg=terrain,
                          episode_seconds=episode_seconds,
                          cpg_init_mode=init_mode)
        return factory

    def out_dir(self, override: str | None = None) -> str:
        if override:
            return override
        if self["run", "out_dir"]:
            return self["run", "out_dir"]
        root = os.environ.get(ENV_OUT_ROOT, "runs")
        return os.path.join(root, f"run_seed{self['run', 'seed']}")

    # -- serialization --------------------------------------------------------

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        for sec in SCHEMA:
            cp[sec] = {}
            for key in SCHEMA[sec]:
                v = self.values[sec][key]
                cp[sec][key] = repr(v) if isinstance(v, float) else str(v)
        buf = io.StringIO()
        buf.write("# gapcross run config v1\n")
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed config: {exc}") from exc
        values: dict = {}
        for sec in cp.sections():
            if sec not in SCHEMA:
                raise ConfigError(f"unknown config section: [{sec}]")
            values[sec] = {}
            for key, raw in cp[sec].items():
                if key not in SCHEMA[sec]:
                    raise ConfigError(f"unknown key '{key}' in section [{sec}]")
                caster = SCHEMA[sec][key][0]
                try:
                    values[sec][key] = caster(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"bad value for [{sec}] {key}: {raw!r} ({exc})") from exc
        return cls(values)

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        with open(path) as fh:
            return cls.from_text(fh.read())

    def override(self, sec: str, key: str, value) -> None:
        if sec not in SCHEMA or key not in SCHEMA[sec]:
            raise ConfigError(f"unknown key '{key}' in section [{sec}]")
        self.values[sec][key] = value
