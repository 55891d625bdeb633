import numpy as np
import pytest

from gapcross.nets import (Adam, LossSpec, MlpParams, PARAM_ORDER, action_logp,
                           entropy_bonus, gaussian_kl, init_params,
                           mlp_backward, mlp_forward, policy_stats, ppo_loss,
                           sample_actions)


def make_minibatch(params, rng, B=16, logp_jitter=0.1):
    obs = rng.normal(size=(B, params.obs_dim))
    mean, log_std, _ = policy_stats(params, obs)
    u = sample_actions(mean, log_std, rng.normal(size=mean.shape))
    logp_old = action_logp(u, mean, log_std)
    if logp_jitter:
        logp_old = logp_old + rng.normal(scale=logp_jitter, size=B)
    return {"obs": obs, "u": u, "logp_old": logp_old,
            "adv": rng.normal(size=B), "ret": rng.normal(size=B)}


def finite_difference_check(params, mb, spec, h=1e-6):
    grads, _, _ = mlp_backward(params, mb, spec)
    max_rel = 0.0
    for k in PARAM_ORDER:
        arr = params.arrays[k]
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = arr[ix]
            arr[ix] = orig + h
            lp, _ = ppo_loss(params, mb, spec)
            arr[ix] = orig - h
            lm, _ = ppo_loss(params, mb, spec)
            arr[ix] = orig
            fd = (lp - lm) / (2 * h)
            rel = abs(fd - grads[k][ix]) / max(abs(fd), abs(grads[k][ix]), 1e-8)
            max_rel = max(max_rel, rel)
    return max_rel


def test_zero_params_outputs_zero():
    params = init_params(5, 3, hidden=(8, 8), dtype=np.float64)
    for k in PARAM_ORDER:
        params.arrays[k][:] = 0.0
    mean, log_std, value = mlp_forward(params, np.ones(5))
    assert np.array_equal(mean, np.zeros(3))
    assert value == 0.0
    assert np.array_equal(log_std, np.zeros(3))


def test_forward_deterministic_and_bounded():
    params = init_params(6, 4, seed=3, dtype=np.float64)
    rng = np.random.default_rng(0)
    obs = rng.normal(scale=50.0, size=(32, 6))
    m1, _, v1 = mlp_forward(params, obs)
    m2, _, v2 = mlp_forward(params, obs)
    assert np.array_equal(m1, m2) and np.array_equal(v1, v2)
    assert np.all(np.abs(m1) <= 1.0)  # tanh-squashed mean


def test_gradient_check_small_net():
    rng = np.random.default_rng(0)
    params = init_params(6, 4, hidden=(8, 8), seed=1, dtype=np.float64)
    mb = make_minibatch(params, rng)
    assert finite_difference_check(params, mb, LossSpec()) < 1e-4


def test_gradient_of_constant_loss_is_zero():
    # zero advantages, ratios exactly 1, zero value error, no entropy term:
    # the surrogate is constant so the policy gradient vanishes
    params = init_params(5, 3, hidden=(8, 8), seed=2, dtype=np.float64)
    rng = np.random.default_rng(1)
    mb = make_minibatch(params, rng, logp_jitter=0.0)
    mb["adv"] = np.zeros_like(mb["adv"])
    _, _, aux = mlp_backward(params, mb, LossSpec(entropy_coef=0.0))
    grads, _, _ = mlp_backward(params, mb, LossSpec(entropy_coef=0.0))
    for k in ("pW1", "pW2", "pW3", "pb1", "pb2", "pb3", "log_std"):
        assert np.allclose(grads[k], 0.0, atol=1e-12)


def test_gradient_scales_linearly_with_advantage():
    params = init_params(4, 2, hidden=(8, 8), seed=5, dtype=np.float64)
    rng = np.random.default_rng(2)
    mb = make_minibatch(params, rng)
    spec = LossSpec(value_coef=0.0, entropy_coef=0.0, clip=1e9)
    g1, _, _ = mlp_backward(params, mb, spec)
    mb2 = dict(mb, adv=3.0 * mb["adv"])
    g3, _, _ = mlp_backward(params, mb2, spec)
    for k in ("pW1", "pW3", "log_std"):
        assert np.allclose(g3[k], 3.0 * g1[k], rtol=1e-10, atol=1e-12)


def test_clipped_branch_zero_surrogate_gradient():
    # positive advantage with ratio pushed above 1 + clip: clipped branch
    # active, zero gradient through the policy for that sample
    params = init_params(4, 2, hidden=(8, 8), seed=7, dtype=np.float64)
    rng = np.random.default_rng(3)
    mb = make_minibatch(params, rng, B=4, logp_jitter=0.0)
    mb["logp_old"] = mb["logp_old"] - 1.0  # ratio = e > 1.2 everywhere
    mb["adv"] = np.ones(4)
    spec = LossSpec(value_coef=0.0, entropy_coef=0.0)
    grads, _, aux = mlp_backward(params, mb, spec)
    assert np.all(aux["ratio"] > 1.2)
    for k in ("pW1", "pW2", "pW3", "pb1", "pb2", "pb3"):
        assert np.allclose(grads[k], 0.0, atol=1e-12)


def test_entropy_monotone_in_log_std():
    log_std = np.array([-0.3, 0.1, 0.5])
    base = entropy_bonus(log_std)
    for j in range(3):
        bumped = log_std.copy()
        bumped[j] += 0.01
        assert entropy_bonus(bumped) > base


def test_logp_identity_recompute():
    params = init_params(6, 4, seed=9, dtype=np.float32)
    rng = np.random.default_rng(4)
    obs = rng.normal(size=(8, 6)).astype(np.float32)
    mean, log_std, _ = policy_stats(params, obs)
    u = sample_actions(mean, log_std, rng.normal(size=mean.shape).astype(np.float32))
    stored = action_logp(u, mean, log_std)
    mean2, log_std2, _ = policy_stats(params, obs)
    again = action_logp(u, mean2, log_std2)
    assert np.array_equal(stored, again)  # bitwise


def test_gaussian_kl_zero_for_identical():
    m = np.random.default_rng(0).normal(size=(10, 3))
    ls = np.array([0.1, -0.2, 0.0])
    assert gaussian_kl(m, ls, m, ls) == 0.0
    assert gaussian_kl(m, ls, m + 0.1, ls) > 0.0


def test_adam_moves_params_toward_gradient():
    params = init_params(4, 2, hidden=(8, 8), seed=11, dtype=np.float64)
    adam = Adam(params)
    grads = {k: np.ones_like(v) for k, v in params.arrays.items()}
    before = params["pW1"].copy()
    adam.step(params, grads, lr=1e-3)
    after = params["pW1"]
    assert np.all(after < before)  # positive gradient -> decrease
    assert np.allclose(before - after, 1e-3, rtol=1e-6)  # |step| ~ lr


def test_squash_correction_in_logp():
    # action_logp must equal the analytic change-of-variables density
    params = init_params(3, 2, seed=13, dtype=np.float64)
    rng = np.random.default_rng(5)
    mean = rng.normal(size=(6, 2))
    log_std = np.array([0.2, -0.4])
    u = sample_actions(mean, log_std, rng.normal(size=(6, 2)))
    lp = action_logp(u, mean, log_std)
    sigma = np.exp(log_std)
    base = -0.5 * ((u - mean) / sigma) ** 2 - np.log(sigma) - 0.5 * np.log(2 * np.pi)
    jac = np.log(1.0 - np.tanh(u) ** 2)
    expected = np.sum(base - jac, axis=1)
    assert np.allclose(lp, expected, rtol=1e-12, atol=1e-12)
