"""Training loop: batch collection, PPO updates, metrics log, checkpoints.

The metrics CSV gets one row per batch (samples, mean_return, success_rate,
kl, entropy, lr); mean_return and success_rate cover the episodes that
finished during that batch's collection and are NaN when none did. Training
is deterministic for a fixed (seed, n_envs) regardless of the worker count,
and fully resumable from a checkpoint that includes the collector state.
"""

import json
import os

import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .nets import Adam, MlpParams, PARAM_ORDER, init_params
from .ppo import PpoConfig, ppo_update
from .rollout import Collector, RunningNorm, stream_seed

METRICS_HEADER = "# gapcross metrics v1"
METRICS_COLUMNS = ("samples", "mean_return", "success_rate", "kl", "entropy", "lr")


class Trainer:
    def __init__(self, env_factory, ppo_cfg: PpoConfig, seed: int = 0,
                 n_envs: int = 16, workers: int = 1, out_dir: str | None = None,
                 config_text: str = "", checkpoint_every: int = 50):
        if ppo_cfg.batch_size % n_envs != 0:
            raise ValueError("batch_size must be divisible by n_envs")
        self.env_factory = env_factory
        self.cfg = ppo_cfg
        self.seed = seed
        self.n_envs = n_envs
        self.horizon = ppo_cfg.batch_size // n_envs
        self.out_dir = out_dir
        self.config_text = config_text
        self.checkpoint_every = checkpoint_every

        probe = env_factory()
        self.obs_dim = probe.obs_dim
        self.act_dim = probe.action_dim
        del probe

        dtype = np.dtype(ppo_cfg.net_dtype)
        self.params = init_params(self.obs_dim, self.act_dim,
                                  init_log_std=ppo_cfg.init_log_std,
                                  seed=seed, dtype=dtype)
        self.adam = Adam(self.params)
        self.norm = RunningNorm(self.obs_dim)
        self.lr = ppo_cfg.lr
        self.samples = 0
        self.batch_index = 0
        # lane 2 with an out-of-range env index keeps this stream disjoint
        # from every per-env generator
        self.update_rng = stream_seed(seed, 0x7FFFFFFF, 2)
        self.collector = Collector(env_factory, seed, n_envs, workers)
        self._metrics_rows = []
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)

    # -- core loop -----------------------------------------------------------

    def train_batch(self) -> dict:
        """Collect one batch, update once, return the metrics row."""
        seg, episodes = self.collector.collect(self.params, self.norm,
                                               self.horizon)
        buf = self.collector.build_buffer(seg, self.cfg.gamma, self.cfg.lam)
        norm_obs = self.norm.normalize(buf.obs)
        self.params, stats, self.lr = ppo_update(
            buf, self.params, self.cfg, self.adam, self.lr, self.update_rng,
            norm_obs=norm_obs)
        self.norm.update(buf.obs)  # next batch sees the refreshed statistics
        self.samples += buf.size
        self.batch_index += 1

        if episodes:
            mean_return = float(np.mean([e.ep_return for e in episodes]))
            total_gaps = sum(e.n_gaps for e in episodes)
            crossed = sum(e.gaps_crossed for e in episodes)
            success = 100.0 * crossed / total_gaps if total_gaps else float("nan")
        else:
            mean_return = float("nan")
            success = float("nan")
        row = {
            "samples": self.samples,
            "mean_return": mean_return,
            "success_rate": success,
            "kl": stats["kl"],
            "entropy": stats["entropy"],
            "lr": stats["lr"],
        }
        self._metrics_rows.append(row)
        return row

    def train(self, total_samples: int | None = None, log_every: int = 10,
              quiet: bool = True):
        total = total_samples or self.cfg.total_samples
        while self.samples < total:
            row = self.train_batch()
            if not quiet and self.batch_index % log_every == 0:
                print(f"batch {self.batch_index} samples {row['samples']} "
                      f"return {row['mean_return']:.3f} "
                      f"success {row['success_rate']:.1f} kl {row['kl']:.4f} "
                      f"lr {row['lr']:.2e}")
            if self.out_dir:
                self.write_metrics()
                if self.batch_index % self.checkpoint_every == 0:
                    self.save(os.path.join(self.out_dir, "latest.ckpt"),
                              full_state=True)
        if self.out_dir:
            self.write_metrics()
            self.save(os.path.join(self.out_dir, "final.ckpt"), full_state=True)
        return self._metrics_rows

    # -- persistence -----------------------------------------------------------

    def metrics_csv(self) -> str:
        lines = [METRICS_HEADER, ",".join(METRICS_COLUMNS)]
        for row in self._metrics_rows:
            lines.append(",".join(repr(row[c]) if isinstance(row[c], float)
                                  else str(row[c]) for c in METRICS_COLUMNS))
        return "\n".join(lines) + "\n"

    def write_metrics(self) -> None:
        path = os.path.join(self.out_dir, "metrics.csv")
        with open(path, "w") as fh:
            fh.write(self.metrics_csv())

    def save(self, path: str, full_state: bool = False) -> None:
        """Checkpoint params + normalizer (+ optimizer, RNG, and env states
        when full_state, making training resumable mid-run)."""
        arrays = {f"param_{k}": self.params[k] for k in PARAM_ORDER}
        arrays["norm_mean"] = self.norm.mean
        arrays["norm_var"] = self.norm.var
        meta = {
            "kind": "gapcross-policy",
            "obs_dim": self.obs_dim,
            "act_dim": self.act_dim,
            "net_dtype": str(self.params.dtype),
            "norm_count": self.norm.count,
            "samples": self.samples,
            "batch_index": self.batch_index,
            "lr": self.lr,
            "seed": self.seed,
            "n_envs": self.n_envs,
            "config_text": self.config_text,
            "full_state": bool(full_state),
        }
        if full_state:
            for k, v in self.adam.state_arrays().items():
                arrays[k] = v
            meta["adam_t"] = self.adam.t
            meta["update_rng"] = json.dumps(self.update_rng.bit_generator.state)
            meta["metrics_rows"] = self._metrics_rows
            for i, st in enumerate(self.collector.get_states()):
                for key, val in st.items():
                    if isinstance(val, np.ndarray):
                        arrays[f"env{i}_{key}"] = val
                    else:
                        meta.setdefault("env_scalars", {}).setdefault(
                            str(i), {})[key] = val
        save_checkpoint(path, arrays, meta)

    def load(self, path: str) -> None:
        arrays, meta = load_checkpoint(path)
        if meta["obs_dim"] != self.obs_dim or meta["act_dim"] != self.act_dim:
            raise ValueError("checkpoint dimensions do not match this trainer")
        dtype = self.params.dtype
        for k in PARAM_ORDER:
            self.params.arrays[k] = arrays[f"param_{k}"].astype(dtype)
        self.norm.load({"mean": arrays["norm_mean"], "var": arrays["norm_var"],
                        "count": meta["norm_count"]})
        self.samples = int(meta["samples"])
        self.batch_index = int(meta["batch_index"])
        self.lr = float(meta["lr"])
        if meta.get("full_state"):
            self.adam.load_state(arrays, int(meta["adam_t"]))
            self.update_rng.bit_generator.state = json.loads(meta["update_rng"])
            self._metrics_rows = list(meta.get("metrics_rows", []))
            states = []
            for i in range(self.n_envs):
                st = {k[len(f"env{i}_"):]: v for k, v in arrays.items()
                      if k.startswith(f"env{i}_")}
                st.update(meta.get("env_scalars", {}).get(str(i), {}))
                states.append(st)
            self.collector.set_states(states)

    def close(self) -> None:
        self.collector.close()


def train_loop(env_factory, config: PpoConfig, seed: int = 0,
               n_envs: int = 16, workers: int = 1, out_dir: str | None = None,
               config_text: str = "", quiet: bool = True):
    """Train to config.total_samples; returns (trainer, metrics rows)."""
    trainer = Trainer(env_factory, config, seed=seed, n_envs=n_envs,
                      workers=workers, out_dir=out_dir, config_text=config_text)
    rows = trainer.train(quiet=quiet)
    trainer.close()
    return trainer, rows


def load_policy(path: str):
    """Load (params, norm, meta) for evaluation from any checkpoint."""
    arrays, meta = load_checkpoint(path)
    dtype = np.dtype(meta["net_dtype"])
    params = MlpParams({k: arrays[f"param_{k}"].astype(dtype)
                        for k in PARAM_ORDER},
                       int(meta["obs_dim"]), int(meta["act_dim"]))
    norm = RunningNorm(int(meta["obs_dim"]))
    norm.load({"mean": arrays["norm_mean"], "var": arrays["norm_var"],
               "count": meta["norm_count"]})
    return params, norm, meta
