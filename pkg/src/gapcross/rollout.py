"""Experience collection: logical env streams, observation normalization,
and optional worker processes.

Determinism contract: results depend only on (root seed, number of env
streams), never on how streams are distributed over processes. Each stream
owns an environment (seeded by stream index) and an action-noise generator;
segments are concatenated in stream order.
"""

import json
import multiprocessing as mp
from dataclasses import dataclass

import numpy as np

from .nets import MlpParams, action_logp, sample_actions, _forward_full
from .ppo import RolloutBuffer, gae


class RunningNorm:
    """Running mean/variance (parallel Chan merge), float64 state."""

    def __init__(self, dim: int, clip: float = 10.0, eps: float = 1e-8):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = eps
        self.clip = clip
        self.eps = eps

    def update(self, batch: np.ndarray) -> None:
        batch = np.asarray(batch, dtype=np.float64).reshape(-1, self.mean.shape[0])
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        delta = b_mean - self.mean
        tot = self.count + n
        self.mean = self.mean + delta * (n / tot)
        self.var = (self.var * self.count + b_var * n
                    + delta ** 2 * self.count * n / tot) / tot
        self.count = tot

    def normalize(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mean) / np.sqrt(self.var + self.eps)
        return np.clip(z, -self.clip, self.clip)

    def snapshot(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(),
                "count": self.count}

    def load(self, snap: dict) -> None:
        self.mean = np.asarray(snap["mean"], dtype=np.float64).copy()
        self.var = np.asarray(snap["var"], dtype=np.float64).copy()
        self.count = float(snap["count"])


@dataclass
class EpisodeRecord:
    env_index: int
    end_sample: int       # stream-local sample counter at episode end
    ep_return: float
    length: int
    duration: float
    gaps_crossed: int
    n_gaps: int
    fall: bool
    fault: bool
    distance: float
    energy: float
    mean_abs_pitch_rate: float


def stream_seed(root_seed: int, env_index: int, lane: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([root_seed, env_index, lane]))


class EnvStream:
    """One environment plus its action-noise generator and counters."""

    def __init__(self, env_factory, root_seed: int, env_index: int):
        self.env_index = env_index
        self.env = env_factory()
        self.env.rng = stream_seed(root_seed, env_index, 0)
        self.noise_rng = stream_seed(root_seed, env_index, 1)
        self.last_obs = self.env.reset()
        self.ep_return = 0.0
        self.samples = 0

    def get_state(self) -> dict:
        env = self.env
        st = env.state
        return {
            "q": st.q, "qd": st.qd, "foot_pos": st.foot_pos,
            "foot_vel": st.foot_vel, "contact": st.contact,
            "normal_force": st.normal_force, "tangent_force": st.tangent_force,
            "friction_anchor": st.friction_anchor, "time": st.time,
            "cpg_r": env.cpg.r, "cpg_r_dot": env.cpg.r_dot,
            "cpg_theta": env.cpg.theta, "cpg_theta_dot": env.cpg.theta_dot,
            "gaps": np.asarray(env.terrain.gaps, dtype=np.float64).reshape(-1, 2),
            "terrain_meta": json.dumps({
                "total_length": env.terrain.total_length,
                "mode": env.terrain.mode, "gap_floor": env.terrain.gap_floor}),
            "prev_action": env.prev_action,
            "prev_joint_rates": env._prev_joint_rates,
            "n_cycles": env.n_cycles,
            "crossed": env._crossed, "hind_landed": env._hind_landed,
            "episode_energy": env.episode_energy,
            "sum_abs_pitch_rate": env._sum_abs_pitch_rate,
            "start_x": env._start_x,
            "last_obs": self.last_obs,
            "ep_return": self.ep_return,
            "samples": self.samples,
            "env_rng": json.dumps(self.env.rng.bit_generator.state),
            "noise_rng": json.dumps(self.noise_rng.bit_generator.state),
        }

    def set_state(self, s: dict) -> None:
        from .dynamics import SimState
        from .oscillators import OscillatorState
        from .terrain import TerrainSpec
        env = self.env
        meta = json.loads(str(s["terrain_meta"]))
        env.terrain = TerrainSpec(
            gaps=[tuple(g) for g in np.asarray(s["gaps"]).reshape(-1, 2)],
            total_length=meta["total_length"], mode=meta["mode"],
            gap_floor=meta["gap_floor"])
        env._gap_edges = env.terrain.edges()
        env.state = SimState(
            q=np.array(s["q"]), qd=np.array(s["qd"]),
            foot_pos=np.array(s["foot_pos"]), foot_vel=np.array(s["foot_vel"]),
            contact=np.array(s["contact"], dtype=np.bool_),
            normal_force=np.array(s["normal_force"]),
            tangent_force=np.array(s["tangent_force"]),
            friction_anchor=np.array(s["friction_anchor"]),
            time=float(s["time"]))
        env.cpg = OscillatorState(np.array(s["cpg_r"]), np.array(s["cpg_r_dot"]),
                                  np.array(s["cpg_theta"]),
                                  np.array(s["cpg_theta_dot"]))
        env.prev_action = np.array(s["prev_action"])
        env._prev_joint_rates = np.array(s["prev_joint_rates"])
        env.n_cycles = int(s["n_cycles"])
        env._crossed = np.array(s["crossed"], dtype=np.bool_)
        env._hind_landed = np.array(s["hind_landed"], dtype=np.bool_).reshape(-1, 2)
        env.episode_energy = float(s["episode_energy"])
        env._sum_abs_pitch_rate = float(s["sum_abs_pitch_rate"])
        env._start_x = float(s["start_x"])
        env.done = False
        self.last_obs = np.array(s["last_obs"])
        self.ep_return = float(s["ep_return"])
        self.samples = int(s["samples"])
        self.env.rng.bit_generator.state = json.loads(str(s["env_rng"]))
        self.noise_rng.bit_generator.state = json.loads(str(s["noise_rng"]))


class StreamSet:
    """Steps a list of env streams in lockstep with batched policy forwards."""

    def __init__(self, env_factory, root_seed: int, env_indices):
        self.streams = [EnvStream(env_factory, root_seed, i) for i in env_indices]

    def collect(self, params: MlpParams, norm_snap: dict, horizon: int):
        ns = len(self.streams)
        env0 = self.streams[0].env
        obs_dim, act_dim = env0.obs_dim, env0.action_dim
        dtype = params.dtype
        mean_n = norm_snap["mean"]
        scale_n = np.sqrt(norm_snap["var"] + 1e-8)
        clip_n = norm_snap.get("clip", 10.0)

        obs_buf = np.empty((horizon, ns, obs_dim))
        u_buf = np.empty((horizon, ns, act_dim), dtype=dtype)
        logp_buf = np.empty((horizon, ns), dtype=dtype)
        rew_buf = np.empty((horizon, ns))
        val_buf = np.empty((horizon + 1, ns))
        done_buf = np.zeros((horizon, ns), dtype=np.bool_)
        episodes = []

        # policy forwards run per stream on (1, obs_dim) matrices: BLAS
        # results vary in the last ulp with batch shape, and per-stream
        # evaluation is what makes collection independent of how streams
        # are grouped into workers
        for t in range(horizon):
            for i, s in enumerate(self.streams):
                xn = np.clip((s.last_obs - mean_n) / scale_n, -clip_n, clip_n)
                f = _forward_full(params, xn.astype(dtype)[None])
                noise = s.noise_rng.standard_normal(act_dim).astype(dtype)
                u = sample_actions(f["mean"], f["log_std"], noise)
                obs_buf[t, i] = s.last_obs
                u_buf[t, i] = u[0]
                logp_buf[t, i] = action_logp(u, f["mean"], f["log_std"])[0]
                val_buf[t, i] = f["value"][0]
            for i, s in enumerate(self.streams):
                action = np.tanh(u_buf[t, i].astype(np.float64))
                res = s.env.step(action)
                rew_buf[t, i] = res.reward
                done_buf[t, i] = res.done
                s.ep_return += res.reward
                s.samples += 1
                s.last_obs = res.observation
                if res.done:
                    ep = res.info["episode"]
                    episodes.append(EpisodeRecord(
                        env_index=s.env_index, end_sample=s.samples,
                        ep_return=s.ep_return, length=ep["length"],
                        duration=ep["duration"],
                        gaps_crossed=ep["gaps_crossed"], n_gaps=ep["n_gaps"],
                        fall=ep["fall"], fault=ep["fault"],
                        distance=ep["distance"], energy=ep["energy"],
                        mean_abs_pitch_rate=ep["mean_abs_pitch_rate"]))
                    s.ep_return = 0.0
                    s.last_obs = s.env.reset()
        for i, s in enumerate(self.streams):
            xn = np.clip((s.last_obs - mean_n) / scale_n, -clip_n, clip_n)
            f = _forward_full(params, xn.astype(dtype)[None])
            val_buf[horizon, i] = f["value"][0]
        return {"obs": obs_buf, "u": u_buf, "logp": logp_buf, "rew": rew_buf,
                "val": val_buf, "done": done_buf, "episodes": episodes}

    def get_states(self):
        return [s.get_state() for s in self.streams]

    def set_states(self, states):
        for s, st in zip(self.streams, states):
            s.set_state(st)


def _worker_main(conn, env_factory, root_seed, env_indices):
    streams = StreamSet(env_factory, root_seed, env_indices)
    while True:
        msg = conn.recv()
        cmd = msg[0]
        if cmd == "collect":
            _, params, norm_snap, horizon = msg
            conn.send(streams.collect(params, norm_snap, horizon))
        elif cmd == "get_states":
            conn.send(streams.get_states())
        elif cmd == "set_states":
            streams.set_states(msg[1])
            conn.send(True)
        elif cmd == "close":
            conn.send(True)
            return


class Collector:
    """n_envs logical streams over `workers` processes (1 = in-process)."""

    def __init__(self, env_factory, root_seed: int, n_envs: int,
                 workers: int = 1):
        self.n_envs = n_envs
        self.workers = max(1, min(workers, n_envs))
        self._procs = []
        self._conns = []
        self._slices = []
        idx = np.array_split(np.arange(n_envs), self.workers)
        if self.workers == 1:
            self.streams = StreamSet(env_factory, root_seed, range(n_envs))
        else:
            ctx = mp.get_context("fork")
            for part in idx:
                parent, child = ctx.Pipe()
                p = ctx.Process(target=_worker_main,
                                args=(child, env_factory, root_seed,
                                      list(part)), daemon=True)
                p.start()
                self._procs.append(p)
                self._conns.append(parent)
                self._slices.append(part)

    def collect(self, params: MlpParams, norm: RunningNorm, horizon: int):
        snap = norm.snapshot()
        snap["clip"] = norm.clip
        if self.workers == 1:
            parts = [self.streams.collect(params, snap, horizon)]
        else:
            for conn in self._conns:
                conn.send(("collect", params, snap, horizon))
            parts = [conn.recv() for conn in self._conns]
        seg = {key: np.concatenate([p[key] for p in parts], axis=1)
               for key in ("obs", "u", "logp", "rew", "val", "done")}
        episodes = [ep for p in parts for ep in p["episodes"]]
        return seg, episodes

    def build_buffer(self, seg: dict, gamma: float, lam: float) -> RolloutBuffer:
        adv, ret = gae(seg["rew"], seg["val"], seg["done"], gamma, lam)
        T, N = seg["rew"].shape

        def flat(x):
            return x.reshape(T * N, *x.shape[2:])

        buf = RolloutBuffer(
            obs=flat(seg["obs"]), u=flat(seg["u"]),
            logp=flat(seg["logp"]).astype(np.float64),
            rewards=flat(seg["rew"]), values=flat(seg["val"][:-1]),
            dones=flat(seg["done"]))
        buf.adv = flat(adv)
        buf.ret = flat(ret)
        return buf

    def get_states(self):
        if self.workers == 1:
            return self.streams.get_states()
        out = []
        for conn in self._conns:
            conn.send(("get_states",))
        for conn in self._conns:
            out.extend(conn.recv())
        return out

    def set_states(self, states):
        if self.workers == 1:
            self.streams.set_states(states)
            return
        pos = 0
        for conn, part in zip(self._conns, self._slices):
            conn.send(("set_states", states[pos:pos + len(part)]))
            pos += len(part)
        for conn in self._conns:
            conn.recv()

    def close(self):
        for conn in self._conns:
            try:
                conn.send(("close",))
                conn.recv()
            except (BrokenPipeError, EOFError):
                pass
        for p in self._procs:
            p.join(timeout=5)
        self._procs = []
        self._conns = []

    def __del__(self):  # best effort
        try:
            self.close()
        except Exception:
            pass
