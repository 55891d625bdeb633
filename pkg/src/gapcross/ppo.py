"""PPO learner: GAE, on-policy buffer, and the clipped-surrogate update.

The update runs the configured number of epochs of shuffled minibatch SGD
(Adam) on clipped surrogate + value MSE - entropy bonus. The learning rate
is adapted toward the desired KL once per epoch: halved when the measured
KL (vs the rollout policy) exceeds 2x the target, multiplied by 1.5 when it
falls below half. Old log-probs are recomputed per minibatch from a snapshot of the
pre-update parameters with the same batched forward as the new ones, so the
probability ratio is exactly 1 before the first gradient step.
"""

from dataclasses import dataclass, field

import numpy as np

from .nets import (Adam, LossSpec, MlpParams, action_logp, gaussian_kl,
                   mlp_backward, policy_stats)


@dataclass
class PpoConfig:
    """Hyperparameters (defaults follow the training-setup table)."""

    batch_size: int = 4096
    minibatch_size: int = 128
    sgd_iters: int = 10
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.01
    lr: float = 1e-4
    kl_target: float = 0.01
    total_samples: int = 35_000_000
    value_coef: float = 0.5
    init_log_std: float = 0.0
    lr_min: float = 1e-5
    lr_max: float = 1e-2
    log_std_min: float = -4.0
    log_std_max: float = 0.75
    net_dtype: str = "float32"

    def loss_spec(self) -> LossSpec:
        return LossSpec(clip=self.clip, value_coef=self.value_coef,
                        entropy_coef=self.entropy_coef)


def gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
        gamma: float, lam: float):
    """Generalized advantage estimation.

    rewards, dones: (T,) or (T, N); values: (T+1,) or (T+1, N) including the
    bootstrap value of the state after the last step. A done step masks the
    next value and cuts the recursion. Returns (advantages, returns) with
    returns = advantages + values[:-1].
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones)
    if values.shape[0] != rewards.shape[0] + 1:
        raise ValueError("values must have one more step than rewards")
    not_done = 1.0 - dones.astype(np.float64)
    adv = np.zeros_like(rewards)
    acc = np.zeros(rewards.shape[1:])
    for t in range(rewards.shape[0] - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] * not_done[t] - values[t]
        acc = delta + gamma * lam * not_done[t] * acc
        adv[t] = acc
    return adv, adv + values[:-1]


@dataclass
class RolloutBuffer:
    """Flat on-policy storage for one update (capacity = batch size)."""

    obs: np.ndarray        # (B, obs_dim) raw (unnormalized) observations
    u: np.ndarray          # (B, act_dim) pre-squash actions
    logp: np.ndarray       # (B,) behavior log-probs (diagnostic, see ppo_update)
    rewards: np.ndarray    # (B,)
    values: np.ndarray     # (B,)
    dones: np.ndarray      # (B,)
    adv: np.ndarray = field(default=None)
    ret: np.ndarray = field(default=None)

    @property
    def size(self) -> int:
        return self.obs.shape[0]


def ppo_update(buffer: RolloutBuffer, params: MlpParams, config: PpoConfig,
               adam: Adam, lr: float, rng: np.random.Generator,
               norm_obs: np.ndarray | None = None):
    """One PPO update over a filled buffer. Mutates params/adam in place and
    returns (params, stats, lr).

    norm_obs: normalized observations to feed the networks (defaults to
    buffer.obs); normalization must match what the behavior policy saw.
    Advantages are normalized to zero mean / unit variance here, before the
    surrogate.
    """
    spec = config.loss_spec()
    obs = (buffer.obs if norm_obs is None else norm_obs).astype(params.dtype)
    u = buffer.u.astype(params.dtype)
    adv = buffer.adv.astype(np.float64)
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    adv = adv.astype(params.dtype)
    ret = buffer.ret.astype(params.dtype)

    adv_stats = (float(np.abs(adv.astype(np.float64).mean())),
                 float(adv.astype(np.float64).std()))
    old = params.copy()
    B = buffer.size
    mb_size = config.minibatch_size
    kls, losses, pi_losses, v_losses, clip_fracs = [], [], [], [], []
    entropy = 0.0
    for _ in range(config.sgd_iters):
        perm = rng.permutation(B)
        epoch_kls = []
        for start in range(0, B, mb_size):
            idx = perm[start:start + mb_size]
            mb_obs = obs[idx]
            mean_old, log_std_old, _ = policy_stats(old, mb_obs)
            mb = {
                "obs": mb_obs,
                "u": u[idx],
                "logp_old": action_logp(u[idx], mean_old, log_std_old),
                "adv": adv[idx],
                "ret": ret[idx],
            }
            grads, loss, aux = mlp_backward(params, mb, spec)
            epoch_kls.append(gaussian_kl(mean_old, log_std_old,
                                         aux["mean"], aux["log_std"]))
            adam.step(params, grads, lr)
            # under tanh squashing, inflating the pre-squash std is
            # behaviorally free once samples saturate, so the entropy bonus
            # would grow it without bound; project it back into a sane box
            np.clip(params.arrays["log_std"], config.log_std_min,
                    config.log_std_max, out=params.arrays["log_std"])
            losses.append(loss)
            pi_losses.append(aux["pi_loss"])
            v_losses.append(aux["v_loss"])
            clip_fracs.append(aux["clip_frac"])
            entropy = aux["entropy"]
        # KL here is measured against the rollout policy (cumulative over the
        # update); adapting once per epoch keeps the halving rule from
        # compounding across every minibatch
        kl_epoch = float(np.mean(epoch_kls))
        if kl_epoch > 2.0 * config.kl_target:
            lr = max(config.lr_min, lr * 0.5)
        elif kl_epoch < 0.5 * config.kl_target:
            lr = min(config.lr_max, lr * 1.5)
        kls.append(kl_epoch)
    stats = {
        "kl": float(np.mean(kls)),
        "loss": float(np.mean(losses)),
        "pi_loss": float(np.mean(pi_losses)),
        "v_loss": float(np.mean(v_losses)),
        "clip_frac": float(np.mean(clip_fracs)),
        "entropy": float(entropy),
        "lr": lr,
        "adv_abs_mean": adv_stats[0],
        "adv_std": adv_stats[1],
    }
    return params, stats, lr
