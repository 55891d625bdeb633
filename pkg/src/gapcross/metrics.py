"""Rollout evaluation and gait metrics.

Success rate is the fraction of gaps crossed out of gaps encountered,
aggregated over rollouts. Cost of transport uses the mechanical-work
definition CoT = integral(sum_j |tau_j qdot_j|) / (m g d_forward); during
simulation the integral is accumulated exactly at the 1 kHz substep, while
`cost_of_transport` integrates a recorded trace by the trapezoid rule (so
the value is invariant under linear-interpolation resampling). Froude number
is v^2/(g h) with h the nominal leg length; body angular velocity averages
(|wx| + |wy| + |wz|)/3 per sample, which in this sagittal backend reduces to
|pitch rate|/3 (the denominator keeps all three axes for comparability).
"""

from dataclasses import dataclass, field

import numpy as np

from .env import GapEnv
from .nets import MlpParams, mlp_forward
from .rollout import RunningNorm

MIN_COT_DISTANCE = 0.01  # CoT denominator floor (keeps metrics finite)


@dataclass
class RolloutRecord:
    seed: int
    gaps_crossed: int
    n_gaps: int
    distance: float
    duration: float
    length: int
    energy: float
    mean_abs_pitch_rate: float
    fall: bool
    fault: bool
    ep_return: float

    @property
    def mean_velocity(self) -> float:
        return self.distance / self.duration if self.duration > 0 else 0.0


@dataclass
class EvalReport:
    success_rate: float            # percent, NaN on gapless terrain
    cot: float
    cot_std: float
    froude: float
    froude_std: float
    mean_body_angular_velocity: float
    mean_body_angular_velocity_std: float
    mean_velocity: float
    mean_return: float
    n_rollouts: int
    records: list = field(default_factory=list)

    def summary_rows(self) -> list[tuple[str, float]]:
        return [("success_rate_pct", self.success_rate),
                ("cot", self.cot), ("cot_std", self.cot_std),
                ("froude", self.froude), ("froude_std", self.froude_std),
                ("mean_body_angular_velocity", self.mean_body_angular_velocity),
                ("mean_body_angular_velocity_std",
                 self.mean_body_angular_velocity_std),
                ("mean_velocity", self.mean_velocity),
                ("mean_return", self.mean_return),
                ("n_rollouts", float(self.n_rollouts))]


def success_rate(rollouts) -> float:
    """Percent of encountered gaps crossed, pooled over rollouts.

    Accepts RolloutRecords or (crossed, total) pairs. NaN if no gaps were
    encountered (flat terrain).
    """
    crossed = total = 0
    for r in rollouts:
        if isinstance(r, RolloutRecord):
            crossed += r.gaps_crossed
            total += r.n_gaps
        else:
            crossed += r[0]
            total += r[1]
    return 100.0 * crossed / total if total else float("nan")


def froude(mean_velocity: float, h: float, gravity: float = 9.81) -> float:
    """Froude number v^2 / (g h)."""
    return mean_velocity ** 2 / (gravity * h)


def cot_from_energy(energy: float, mass: float, gravity: float,
                    distance: float) -> float:
    return energy / (mass * gravity * max(distance, MIN_COT_DISTANCE))


@dataclass
class Trace:
    """Recorded episode time series (control-tick sampling)."""

    times: np.ndarray
    torques: np.ndarray       # (T, 8)
    joint_rates: np.ndarray   # (T, 8)
    base: np.ndarray          # (T, 3) x, z, pitch
    base_vel: np.ndarray      # (T, 3) vx, vz, pitch_rate
    foot_pos: np.ndarray      # (T, 4, 2)
    cpg: np.ndarray           # (T, 16) r, r_dot, theta, theta_dot
    actions: np.ndarray       # (T, k) raw [-1, 1]
    drive: np.ndarray         # (T, 16) mu, omega, x_off, z_off
    reward: np.ndarray        # (T,)
    breakdown: np.ndarray     # (T, 6)
    contact: np.ndarray       # (T, 4)
    mass: float = 12.0
    gravity: float = 9.81


def cost_of_transport(trace: Trace) -> float:
    """Trapezoid-rule CoT over a recorded trace."""
    power = np.sum(np.abs(trace.torques * trace.joint_rates), axis=1)
    trapezoid = getattr(np, "trapezoid", np.trapz)
    energy = float(trapezoid(power, trace.times))
    distance = float(trace.base[-1, 0] - trace.base[0, 0])
    return cot_from_energy(energy, trace.mass, trace.gravity, distance)


def mean_body_angular_velocity(trace_or_rates) -> float:
    """Mean of (|wx|+|wy|+|wz|)/3 over samples; sagittal: |pitch rate|/3."""
    rates = (trace_or_rates.base_vel[:, 2]
             if isinstance(trace_or_rates, Trace) else
             np.asarray(trace_or_rates, dtype=float))
    if rates.size == 0:
        return 0.0
    return float(np.sum(np.abs(rates)) / (3.0 * rates.size))


class Policy:
    """Callable policy for evaluation: deterministic (tanh of the Gaussian
    mean) by default, stochastic with a generator."""

    def __init__(self, params: MlpParams, norm: RunningNorm | None = None,
                 rng: np.random.Generator | None = None):
        self.params = params
        self.norm = norm
        self.rng = rng

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        x = self.norm.normalize(obs) if self.norm is not None else obs
        mean, log_std, _ = mlp_forward(self.params, x)
        if self.rng is None:
            return np.asarray(mean, dtype=np.float64)
        u = np.arctanh(np.clip(mean, -0.999999, 0.999999))
        u = u + np.exp(log_std) * self.rng.standard_normal(mean.shape[-1])
        return np.tanh(np.asarray(u, dtype=np.float64))


def run_episode(env: GapEnv, policy, seed: int | None = None,
                record: bool = False):
    """One episode; returns (RolloutRecord, Trace | None)."""
    obs = env.reset(seed=seed)
    env.record_drive = record
    rows = [] if record else None
    ep_return = 0.0
    info = {}
    while True:
        action = np.asarray(policy(obs), dtype=np.float64)
        res = env.step(action)
        ep_return += res.reward
        if record:
            st = env.state
            rows.append((
                st.time, env._tau_last.copy(), st.joint_rates.copy(),
                np.array([st.base_x, st.base_z, st.pitch]),
                np.array([st.qd[0], st.qd[1], st.pitch_rate]),
                st.foot_pos.copy(),
                np.concatenate([env.cpg.r, env.cpg.r_dot, env.cpg.theta,
                                env.cpg.theta_dot]),
                action.copy(),
                np.concatenate(res.info["drive"]),
                res.reward,
                np.array([res.breakdown[k] for k in
                          ("forward", "gap_bonus", "gap_penalty", "lateral",
                           "orientation", "power")]),
                st.contact.astype(float).copy(),
            ))
        obs = res.observation
        if res.done:
            info = res.info
            break
    ep = info["episode"]
    rec = RolloutRecord(
        seed=-1 if seed is None else seed,
        gaps_crossed=ep["gaps_crossed"], n_gaps=ep["n_gaps"],
        distance=ep["distance"], duration=ep["duration"],
        length=ep["length"], energy=ep["energy"],
        mean_abs_pitch_rate=ep["mean_abs_pitch_rate"],
        fall=ep["fall"], fault=ep["fault"], ep_return=ep_return)
    trace = None
    if record:
        cols = list(zip(*rows))
        trace = Trace(
            times=np.array(cols[0]), torques=np.stack(cols[1]),
            joint_rates=np.stack(cols[2]), base=np.stack(cols[3]),
            base_vel=np.stack(cols[4]), foot_pos=np.stack(cols[5]),
            cpg=np.stack(cols[6]), actions=np.stack(cols[7]),
            drive=np.stack(cols[8]), reward=np.array(cols[9]),
            breakdown=np.stack(cols[10]), contact=np.stack(cols[11]),
            mass=env.model.total_mass, gravity=env.model.gravity)
    env.record_drive = False
    return rec, trace


def rollout_seeds(base_seed: int, n: int) -> list[int]:
    """Deterministic per-rollout seeds derived from a base seed."""
    ss = np.random.SeedSequence(base_seed)
    return [int(s) for s in ss.generate_state(n, dtype=np.uint32)]


def evaluate(policy, env_factory, n_rollouts: int, seed: int = 0) -> EvalReport:
    """Run n deterministic-seeded rollouts and aggregate the four metrics."""
    env = env_factory()
    records = []
    for s in rollout_seeds(seed, n_rollouts):
        rec, _ = run_episode(env, policy, seed=s)
        records.append(rec)
    h = env.pf_params.h
    g = env.model.gravity
    mass = env.model.total_mass
    cots = np.array([cot_from_energy(r.energy, mass, g, r.distance)
                     for r in records])
    froudes = np.array([froude(r.mean_velocity, h, g) for r in records])
    omegas = np.array([r.mean_abs_pitch_rate / 3.0 for r in records])
    vels = np.array([r.mean_velocity for r in records])
    rets = np.array([r.ep_return for r in records])
    return EvalReport(
        success_rate=success_rate(records),
        cot=float(cots.mean()), cot_std=float(cots.std()),
        froude=float(froudes.mean()), froude_std=float(froudes.std()),
        mean_body_angular_velocity=float(omegas.mean()),
        mean_body_angular_velocity_std=float(omegas.std()),
        mean_velocity=float(vels.mean()),
        mean_return=float(rets.mean()),
        n_rollouts=n_rollouts, records=records)
