"""Gaussian MLP policy and value function with hand-written backprop.

Two separate trunks (2 hidden layers of 256 tanh units each): the actor
outputs a pre-squash action mean (the deployed action is tanh of a Gaussian
sample, so actions live in (-1, 1)) plus a state-independent log-std vector;
the critic outputs a scalar value. Gradients of the full PPO loss are exact
reverse-mode and are checked against central finite differences in the test
suite. The parameter dtype is configurable: float32 for training throughput,
float64 where finite-difference precision matters.
"""

import math
from dataclasses import dataclass, field

import numpy as np

HIDDEN = (256, 256)
LOG2PI = math.log(2.0 * math.pi)

PARAM_ORDER = ("pW1", "pb1", "pW2", "pb2", "pW3", "pb3", "log_std",
               "vW1", "vb1", "vW2", "vb2", "vW3", "vb3")


@dataclass
class MlpParams:
    """Flat container for actor + critic weights."""

    arrays: dict = field(default_factory=dict)
    obs_dim: int = 0
    act_dim: int = 0

    def __getitem__(self, key):
        return self.arrays[key]

    @property
    def dtype(self):
        return self.arrays["pW1"].dtype

    def copy(self) -> "MlpParams":
        return MlpParams({k: v.copy() for k, v in self.arrays.items()},
                         self.obs_dim, self.act_dim)

    def zeros_like(self) -> dict:
        return {k: np.zeros_like(v) for k, v in self.arrays.items()}

    def add_scaled(self, grads: dict, scale: float) -> None:
        for k in PARAM_ORDER:
            self.arrays[k] += scale * grads[k]

    def is_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self.arrays.values())


def init_params(obs_dim: int, act_dim: int, hidden=HIDDEN,
                init_log_std: float = 0.0, seed: int = 0,
                dtype=np.float32) -> MlpParams:
    """Seeded initialization: scaled-normal hidden layers, small policy head."""
    rng = np.random.default_rng(seed)
    h1, h2 = hidden

    def lin(fan_in, fan_out, scale=1.0):
        w = rng.normal(0.0, scale / np.sqrt(fan_in), size=(fan_out, fan_in))
        return w.astype(dtype), np.zeros(fan_out, dtype=dtype)

    arrays = {}
    arrays["pW1"], arrays["pb1"] = lin(obs_dim, h1)
    arrays["pW2"], arrays["pb2"] = lin(h1, h2)
    arrays["pW3"], arrays["pb3"] = lin(h2, act_dim, scale=0.01)
    arrays["log_std"] = np.full(act_dim, init_log_std, dtype=dtype)
    arrays["vW1"], arrays["vb1"] = lin(obs_dim, h1)
    arrays["vW2"], arrays["vb2"] = lin(h1, h2)
    arrays["vW3"], arrays["vb3"] = lin(h2, 1)
    return MlpParams(arrays, obs_dim, act_dim)


def _forward_full(params: MlpParams, X: np.ndarray) -> dict:
    """Both trunks with cached activations (X is (B, obs_dim))."""
    a = params.arrays
    pz1 = np.tanh(X @ a["pW1"].T + a["pb1"])
    pz2 = np.tanh(pz1 @ a["pW2"].T + a["pb2"])
    mean = pz2 @ a["pW3"].T + a["pb3"]
    vz1 = np.tanh(X @ a["vW1"].T + a["vb1"])
    vz2 = np.tanh(vz1 @ a["vW2"].T + a["vb2"])
    value = (vz2 @ a["vW3"].T + a["vb3"])[:, 0]
    return {"X": X, "pz1": pz1, "pz2": pz2, "mean": mean,
            "vz1": vz1, "vz2": vz2, "value": value,
            "log_std": a["log_std"]}


def mlp_forward(params: MlpParams, obs: np.ndarray):
    """(action_mean, log_std, value) for a single observation or a batch.

    action_mean is tanh-squashed, so it is bounded in (-1, 1) by
    construction; it is the deterministic (evaluation) action.
    """
    obs = np.asarray(obs, dtype=params.dtype)
    single = obs.ndim == 1
    X = obs[None] if single else obs
    f = _forward_full(params, X)
    mean = np.tanh(f["mean"])
    if single:
        return mean[0], params["log_std"].copy(), float(f["value"][0])
    return mean, params["log_std"].copy(), f["value"]


def policy_stats(params: MlpParams, obs: np.ndarray):
    """Pre-squash Gaussian mean and value for a batch (used by the learner)."""
    f = _forward_full(params, np.asarray(obs, dtype=params.dtype))
    return f["mean"], params["log_std"], f["value"]


# -- squashed-Gaussian distribution helpers ---------------------------------

def sample_actions(mean: np.ndarray, log_std: np.ndarray,
                   noise: np.ndarray) -> np.ndarray:
    """Pre-squash samples u = mean + exp(log_std) * noise."""
    return mean + np.exp(log_std) * noise


def squash_correction(u: np.ndarray) -> np.ndarray:
    """sum_j log(1 - tanh(u_j)^2), computed stably."""
    return np.sum(2.0 * (math.log(2.0) - u - np.logaddexp(0.0, -2.0 * u)),
                  axis=-1)


def gaussian_logp(u: np.ndarray, mean: np.ndarray,
                  log_std: np.ndarray) -> np.ndarray:
    """log N(u; mean, exp(log_std)) summed over action dims."""
    z = (u - mean) / np.exp(log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * LOG2PI, axis=-1)


def action_logp(u: np.ndarray, mean: np.ndarray,
                log_std: np.ndarray) -> np.ndarray:
    """Log-density of the squashed action a = tanh(u) (change of variables)."""
    return gaussian_logp(u, mean, log_std) - squash_correction(u)


def entropy_bonus(log_std: np.ndarray) -> float:
    """Entropy of the base Gaussian: strictly increasing in every log-std."""
    return float(np.sum(log_std + 0.5 * (1.0 + LOG2PI)))


def gaussian_kl(mean_old: np.ndarray, log_std_old: np.ndarray,
                mean_new: np.ndarray, log_std_new: np.ndarray) -> float:
    """Mean KL(old || new) between diagonal Gaussians over a batch."""
    var_old = np.exp(2.0 * log_std_old)
    var_new = np.exp(2.0 * log_std_new)
    per_dim = (log_std_new - log_std_old
               + (var_old + (mean_old - mean_new) ** 2) / (2.0 * var_new) - 0.5)
    return float(np.mean(np.sum(per_dim, axis=-1)))


# -- PPO loss and its exact gradient ----------------------------------------

@dataclass
class LossSpec:
    clip: float = 0.2
    value_coef: float = 0.5
    entropy_coef: float = 0.01


def ppo_loss(params: MlpParams, mb: dict, spec: LossSpec):
    """Scalar PPO loss (clipped surrogate + value MSE - entropy bonus).

    mb: obs (B,n), u (B,k) pre-squash actions, logp_old (B,), adv (B,),
    ret (B,). Returns (loss, aux) where aux carries the pieces and the new
    pre-squash means (for KL bookkeeping).
    """
    f = _forward_full(params, mb["obs"])
    log_std = f["log_std"]
    logp = action_logp(mb["u"], f["mean"], log_std)
    ratio = np.exp(logp - mb["logp_old"])
    clipped = np.clip(ratio, 1.0 - spec.clip, 1.0 + spec.clip)
    s1 = ratio * mb["adv"]
    s2 = clipped * mb["adv"]
    surrogate = np.minimum(s1, s2)
    pi_loss = -np.mean(surrogate)
    verr = f["value"] - mb["ret"]
    v_loss = np.mean(verr * verr)
    ent = entropy_bonus(log_std)
    loss = pi_loss + spec.value_coef * v_loss - spec.entropy_coef * ent
    aux = {"pi_loss": float(pi_loss), "v_loss": float(v_loss), "entropy": ent,
           "mean": f["mean"], "log_std": log_std, "ratio": ratio,
           "clip_frac": float(np.mean((np.abs(ratio - 1.0) > spec.clip))),
           "cache": f}
    return float(loss), aux


def mlp_backward(params: MlpParams, mb: dict, spec: LossSpec):
    """Exact reverse-mode gradient of the PPO loss over a minibatch.

    Returns (grads, loss, aux). The tanh-squash correction term of the
    log-density depends only on the stored pre-squash actions, so it
    contributes no parameter gradient.
    """
    loss, aux = ppo_loss(params, mb, spec)
    f = aux["cache"]
    a = params.arrays
    B = mb["obs"].shape[0]
    adv = mb["adv"]
    ratio = aux["ratio"]
    log_std = f["log_std"]
    inv_var = np.exp(-2.0 * log_std)

    # d(pi_loss)/d(logp): active only on the unclipped branch of the min
    s1 = ratio * adv
    s2 = np.clip(ratio, 1.0 - spec.clip, 1.0 + spec.clip) * adv
    active = (s1 <= s2).astype(params.dtype)
    dlogp = -(active * ratio * adv) / B

    diff = mb["u"] - f["mean"]
    # d(logp)/d(mean) = (u - mean)/sigma^2; the squash correction is
    # parameter-free, so the chain stops at the Gaussian term
    dmean = dlogp[:, None] * (diff * inv_var)
    dlog_std = np.sum(dlogp[:, None] * (diff * diff * inv_var - 1.0), axis=0)
    dlog_std -= spec.entropy_coef  # -entropy_coef * dH/dlog_std (dH = 1)

    grads = {}
    grads["log_std"] = dlog_std.astype(params.dtype)

    # actor trunk
    dz = dmean.astype(params.dtype)
    grads["pW3"] = dz.T @ f["pz2"]
    grads["pb3"] = dz.sum(axis=0)
    d2 = (dz @ a["pW3"]) * (1.0 - f["pz2"] ** 2)
    grads["pW2"] = d2.T @ f["pz1"]
    grads["pb2"] = d2.sum(axis=0)
    d1 = (d2 @ a["pW2"]) * (1.0 - f["pz1"] ** 2)
    grads["pW1"] = d1.T @ f["X"]
    grads["pb1"] = d1.sum(axis=0)

    # critic trunk
    dv = (2.0 * spec.value_coef / B) * (f["value"] - mb["ret"])
    dzv = dv[:, None].astype(params.dtype)
    grads["vW3"] = dzv.T @ f["vz2"]
    grads["vb3"] = dzv.sum(axis=0)
    d2v = (dzv @ a["vW3"]) * (1.0 - f["vz2"] ** 2)
    grads["vW2"] = d2v.T @ f["vz1"]
    grads["vb2"] = d2v.sum(axis=0)
    d1v = (d2v @ a["vW2"]) * (1.0 - f["vz1"] ** 2)
    grads["vW1"] = d1v.T @ f["X"]
    grads["vb1"] = d1v.sum(axis=0)
    return grads, loss, aux


class Adam:
    """Adaptive-moment SGD with standard defaults; the learning rate is
    supplied per step (it is KL-adapted by the learner)."""

    def __init__(self, params: MlpParams, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = params.zeros_like()
        self.v = params.zeros_like()

    def step(self, params: MlpParams, grads: dict, lr: float) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for k in PARAM_ORDER:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            mhat = self.m[k] / b1t
            vhat = self.v[k] / b2t
            params.arrays[k] -= (lr * mhat / (np.sqrt(vhat) + self.eps)).astype(
                params.dtype)

    def state_arrays(self) -> dict:
        out = {f"adam_m_{k}": self.m[k] for k in PARAM_ORDER}
        out.update({f"adam_v_{k}": self.v[k] for k in PARAM_ORDER})
        return out

    def load_state(self, arrays: dict, t: int) -> None:
        self.t = t
        for k in PARAM_ORDER:
            self.m[k] = arrays[f"adam_m_{k}"]
            self.v[k] = arrays[f"adam_v_{k}"]
