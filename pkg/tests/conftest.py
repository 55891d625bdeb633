import os

import numpy as np
import pytest

import gapcross as gc


def pytest_collection_modifyitems(config, items):
    if os.environ.get("GAPCROSS_EXTENDED") == "1":
        return
    skip = pytest.mark.skip(
        reason="extended/offline check; set GAPCROSS_EXTENDED=1 to run")
    for item in items:
        if "extended" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def flat_env():
    return gc.GapEnv(action_cfg=gc.ActionConfig.from_case(1),
                     terrain_cfg=gc.TerrainConfig(mode="flat"))


@pytest.fixture
def gap_env():
    return gc.GapEnv(action_cfg=gc.ActionConfig.from_case(4),
                     obs_cfg=gc.ObsConfig.from_combo(1),
                     terrain_cfg=gc.TerrainConfig(mode="standard", n_gaps=7))


def trot_action(env, omega_raw=0.2, mu_raw=-0.2):
    """Constant raw action that makes a bare CPG env walk."""
    a = np.zeros(env.action_dim)
    cfg = env.action_cfg
    i = 0
    if cfg.use_mu:
        a[i:i + 4] = mu_raw
        i += 4
    if cfg.use_omega:
        a[i:i + 4] = omega_raw
        i += 4
    return a
