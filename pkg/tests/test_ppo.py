import numpy as np
import pytest

from gapcross.nets import (Adam, action_logp, init_params, policy_stats,
                           sample_actions)
from gapcross.ppo import PpoConfig, RolloutBuffer, gae, ppo_update


def brute_force_gae(rewards, values, dones, gamma, lam):
    """Double-loop oracle: A_t = sum_k (gamma*lam)^k delta_{t+k} with the
    product of not-done masks cutting the sum at episode ends."""
    T = len(rewards)
    not_done = 1.0 - np.asarray(dones, dtype=float)
    delta = np.array([rewards[t] + gamma * values[t + 1] * not_done[t]
                      - values[t] for t in range(T)])
    adv = np.zeros(T)
    for t in range(T):
        coeff = 1.0
        for k in range(t, T):
            adv[t] += coeff * delta[k]
            coeff *= gamma * lam * not_done[k]
            if coeff == 0.0:
                break
    return adv


def test_gae_single_step():
    for done in (0, 1):
        adv, ret = gae(np.array([1.5]), np.array([0.4, 2.0]),
                       np.array([done]), 0.9, 0.8)
        expected = 1.5 + 0.9 * 2.0 * (1 - done) - 0.4
        assert adv[0] == pytest.approx(expected, abs=1e-12)
        assert ret[0] == pytest.approx(expected + 0.4, abs=1e-12)


def test_gae_lambda_zero_is_td_residual():
    rng = np.random.default_rng(0)
    r = rng.normal(size=20)
    v = rng.normal(size=21)
    d = (rng.random(20) < 0.2).astype(float)
    adv, _ = gae(r, v, d, 0.99, 0.0)
    td = r + 0.99 * v[1:] * (1 - d) - v[:-1]
    assert np.allclose(adv, td, atol=1e-12)


def test_gae_matches_brute_force_oracle():
    rng = np.random.default_rng(42)
    worst = 0.0
    for _ in range(100):
        T = 100
        r = rng.normal(size=T)
        v = rng.normal(size=T + 1)
        d = (rng.random(T) < 0.1).astype(float)
        adv, ret = gae(r, v, d, 0.99, 0.95)
        oracle = brute_force_gae(r, v, d, 0.99, 0.95)
        worst = max(worst, np.abs(adv - oracle).max())
        assert np.allclose(ret, adv + v[:-1], atol=1e-12)
    assert worst < 1e-10


def test_gae_batched_matches_per_stream():
    rng = np.random.default_rng(1)
    T, N = 64, 5
    r = rng.normal(size=(T, N))
    v = rng.normal(size=(T + 1, N))
    d = (rng.random((T, N)) < 0.1).astype(float)
    adv2d, _ = gae(r, v, d, 0.99, 0.95)
    for j in range(N):
        adv1d, _ = gae(r[:, j], v[:, j], d[:, j], 0.99, 0.95)
        assert np.allclose(adv2d[:, j], adv1d, atol=1e-14)


def test_gae_shape_validation():
    with pytest.raises(ValueError):
        gae(np.zeros(5), np.zeros(5), np.zeros(5), 0.99, 0.95)


def make_buffer(params, rng, B):
    obs = rng.normal(size=(B, params.obs_dim))
    mean, log_std, value = policy_stats(params, obs.astype(params.dtype))
    u = sample_actions(mean, log_std,
                       rng.normal(size=mean.shape).astype(params.dtype))
    logp = action_logp(u, mean, log_std)
    rewards = rng.normal(size=B)
    dones = (rng.random(B) < 0.05).astype(float)
    buf = RolloutBuffer(obs=obs, u=np.asarray(u, dtype=np.float64),
                        logp=np.asarray(logp, dtype=np.float64),
                        rewards=rewards, values=np.asarray(value, np.float64),
                        dones=dones)
    buf.adv = rng.normal(size=B)
    buf.ret = rng.normal(size=B)
    return buf


def test_ratio_exactly_one_before_first_step():
    """With sgd_iters=1 and a minibatch covering the whole buffer, the first
    (only) minibatch sees identical old/new params: ratio is exactly 1 and
    the measured KL exactly 0."""
    from gapcross.nets import LossSpec, ppo_loss

    params = init_params(5, 3, hidden=(8, 8), seed=0, dtype=np.float32)
    rng = np.random.default_rng(0)
    buf = make_buffer(params, rng, 64)
    obs32 = buf.obs.astype(np.float32)
    mean_old, log_std_old, _ = policy_stats(params, obs32)
    mb = {"obs": obs32, "u": buf.u.astype(np.float32),
          "logp_old": action_logp(buf.u.astype(np.float32), mean_old,
                                  log_std_old),
          "adv": rng.normal(size=64).astype(np.float32),
          "ret": rng.normal(size=64).astype(np.float32)}
    _, aux = ppo_loss(params, mb, LossSpec())
    assert np.all(aux["ratio"] == 1.0)


def test_advantage_normalization_inside_update():
    params = init_params(5, 3, hidden=(16, 16), seed=1, dtype=np.float64)
    cfg = PpoConfig(batch_size=256, minibatch_size=64, sgd_iters=1)
    adam = Adam(params)
    rng = np.random.default_rng(3)
    buf = make_buffer(params, rng, 256)
    buf.adv = 100.0 + 10.0 * rng.normal(size=256)  # far from normalized
    _, stats, _ = ppo_update(buf, params, cfg, adam, cfg.lr,
                             np.random.default_rng(0))
    assert stats["adv_abs_mean"] < 1e-6
    assert abs(stats["adv_std"] - 1.0) < 1e-6


def test_ppo_update_changes_params_and_reports_stats():
    params = init_params(5, 3, hidden=(16, 16), seed=2, dtype=np.float32)
    cfg = PpoConfig(batch_size=256, minibatch_size=64, sgd_iters=3,
                    lr=1e-3)
    adam = Adam(params)
    rng = np.random.default_rng(7)
    buf = make_buffer(params, rng, 256)
    before = params["pW3"].copy()
    params, stats, lr = ppo_update(buf, params, cfg, adam, cfg.lr,
                                   np.random.default_rng(0))
    assert not np.array_equal(before, params["pW3"])
    for key in ("kl", "loss", "pi_loss", "v_loss", "entropy", "lr"):
        assert np.isfinite(stats[key])
    assert cfg.lr_min <= lr <= cfg.lr_max


def test_ppo_update_deterministic():
    def run():
        params = init_params(5, 3, hidden=(16, 16), seed=2, dtype=np.float32)
        cfg = PpoConfig(batch_size=128, minibatch_size=32, sgd_iters=2)
        adam = Adam(params)
        buf = make_buffer(params, np.random.default_rng(9), 128)
        params, stats, _ = ppo_update(buf, params, cfg, adam, cfg.lr,
                                      np.random.default_rng(1))
        return params["pW1"].copy(), stats["loss"]

    w1, l1 = run()
    w2, l2 = run()
    assert np.array_equal(w1, w2)
    assert l1 == l2


def test_table_defaults():
    cfg = PpoConfig()
    assert cfg.batch_size == 4096
    assert cfg.minibatch_size == 128
    assert cfg.sgd_iters == 10
    assert cfg.gamma == 0.99
    assert cfg.lam == 0.95
    assert cfg.clip == 0.2
    assert cfg.entropy_coef == 0.01
    assert cfg.lr == 1e-4
    assert cfg.kl_target == 0.01
