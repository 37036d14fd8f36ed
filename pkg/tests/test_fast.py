import numpy as np
import pytest

from gmsa.baselines import ATCConfig
from gmsa.fast import TilesConfig, fast_atc, fast_gmsa, fast_tiles, level_rates, trace_length
from gmsa.refinement import GMSAConfig


def test_trace_length():
    assert trace_length(0.8, 0.0) == 1
    assert trace_length(0.5, 1.0, tol=1e-3) == 10
    with pytest.raises(ValueError):
        trace_length(1.0, 1.0)


def test_level_rates():
    r = level_rates("constant", 0.01, 2, 3)
    np.testing.assert_allclose(r, 0.01)
    r = level_rates("normalized", 0.001, 4, 4, cap=0.5)
    assert r[0] == pytest.approx(0.001)
    # alpha * ||b_j||**2 is the same for every level block
    norm2 = np.array([16.0] + [2.0 ** (4 * j) * 15 for j in range(1, 4)])
    np.testing.assert_allclose(r * norm2, 0.016)
    r = level_rates("capped", 0.1, 1, 4, cap=0.5)
    np.testing.assert_allclose(r, [0.1, 0.1, 0.1, 0.5 / 8])
    with pytest.raises(ValueError):
        level_rates("visits", 0.1, 1, 2)


@pytest.mark.parametrize("env", ["cartpole", "acrobot"])
def test_gmsa_runs_and_is_deterministic(env):
    cfg = GMSAConfig(episodes=30, seed=3, patience=20)
    a, b = fast_gmsa(env, cfg, cap=100), fast_gmsa(env, cfg, cap=100)
    assert len(a.returns) == 30 and not a.failed
    np.testing.assert_array_equal(a.returns, b.returns)
    np.testing.assert_array_equal(a.basis_size, b.basis_size)
    assert np.all(a.steps <= 100)
    assert np.all(np.diff(a.phase) >= 0)
    t = a.transcript()
    assert len(t.episodes) == 30
    assert t.episodes[5].ret == a.returns[5]


def test_gmsa_seeds_differ():
    a = fast_gmsa("cartpole", GMSAConfig(episodes=20, seed=1))
    b = fast_gmsa("cartpole", GMSAConfig(episodes=20, seed=2))
    assert not np.array_equal(a.steps, b.steps)


def test_gmsa_needs_budget_and_haar():
    with pytest.raises(ValueError):
        fast_gmsa("cartpole", GMSAConfig())
    with pytest.raises(ValueError):
        fast_gmsa("cartpole", GMSAConfig(episodes=5, basis="constant"))


@pytest.mark.parametrize("mode", ["last", "all", "grow", "grow_all"])
def test_final_training_modes(mode):
    r = fast_gmsa("cartpole", GMSAConfig(episodes=40, patience=10, final_training=mode))
    assert len(r.returns) == 40 and not r.failed


def test_cartpole_rewards_bounded_by_steps():
    r = fast_gmsa("cartpole", GMSAConfig(episodes=20))
    assert np.all(r.returns <= r.steps) and np.all(r.returns >= r.steps - 1)


def test_acrobot_returns_are_minus_steps():
    r = fast_tiles("acrobot", TilesConfig(episodes=5), cap=200)
    assert np.all(r.returns >= -r.steps) and np.all(r.returns <= -r.steps + 1)


def test_tiles_deterministic():
    a = fast_tiles("cartpole", TilesConfig(episodes=25, seed=4))
    b = fast_tiles("cartpole", TilesConfig(episodes=25, seed=4))
    np.testing.assert_array_equal(a.returns, b.returns)
    assert np.all(a.basis_size == 10 * 41**4)


def test_atc_deterministic_and_partition_grows():
    cfg = ATCConfig(episodes=60, seed=2, patience=10, eta=1e-4)
    a, b = fast_atc("cartpole", cfg), fast_atc("cartpole", cfg)
    np.testing.assert_array_equal(a.returns, b.returns)
    assert np.all(np.diff(a.basis_size) >= 0)
    assert a.basis_size[0] == 16


def test_unknown_env():
    with pytest.raises((ValueError, KeyError)):
        fast_tiles("pendulum", TilesConfig(episodes=1))
