import math

import numpy as np
import pytest

from gmsa import constants as C
from gmsa.envs import (
    Acrobot,
    CartPole,
    DyadicStepMRP,
    EnvSpec,
    acrobot_energy,
    acrobot_step,
    cartpole_step,
    chain_mdp,
    make_env,
    normalize,
)
from gmsa.envs import acrobot_rk4


class TestCartPole:
    def test_one_step_push_right(self):
        tr = cartpole_step(np.zeros(4), 1)
        x, x_dot, theta, theta_dot = tr.s_next
        assert x_dot == pytest.approx(0.195122, abs=1e-6)
        assert theta_dot == pytest.approx(-0.292683, abs=1e-6)
        assert x == pytest.approx(0.02 * x_dot)
        assert theta == pytest.approx(0.02 * theta_dot)
        assert tr.r == 1.0 and not tr.done

    def test_symmetry(self):
        a = cartpole_step(np.zeros(4), 1).s_next
        b = cartpole_step(np.zeros(4), 0).s_next
        np.testing.assert_allclose(a, -b)

    def test_upright_equilibrium_without_force(self):
        tr = cartpole_step(np.zeros(4), 1, force_mag=0.0)
        np.testing.assert_array_equal(tr.s_next, np.zeros(4))

    def test_termination_limits(self):
        assert cartpole_step(np.array([2.39, 1.0, 0.0, 0.0]), 1).done
        assert not cartpole_step(np.array([2.3, 0.0, 0.0, 0.0]), 1).done
        lim = 12 * 2 * math.pi / 360
        assert cartpole_step(np.array([0.0, 0.0, lim, 1.0]), 1).done
        tr = cartpole_step(np.array([0.0, 0.0, -lim, -1.0]), 0)
        assert tr.done and tr.r == 0.0

    def test_reset_range(self):
        s = CartPole().reset(np.random.default_rng(0))
        assert s.shape == (4,) and np.all(np.abs(s) <= C.CARTPOLE_INIT_RANGE)


class TestAcrobot:
    def test_rest_stays_at_rest(self):
        tr = acrobot_step(np.zeros(4), 1)
        np.testing.assert_allclose(tr.s_next, 0.0, atol=1e-14)
        assert tr.r == -1.0 and not tr.done

    def test_energy_conserved_small_swing(self):
        s = np.array([0.1, -0.05, 0.0, 0.0])
        e0 = acrobot_energy(s)
        for _ in range(200):
            s = acrobot_step(s, 1).s_next
        assert abs(acrobot_energy(s) - e0) < 1e-2

    def test_energy_drift_shrinks_with_step(self):
        def drift(dt):
            s = (0.1, -0.05, 0.0, 0.0)
            for _ in range(int(round(40 / dt))):
                s = acrobot_rk4(*s, 0.0, dt)
            return abs(acrobot_energy(s) - acrobot_energy((0.1, -0.05, 0.0, 0.0)))

        assert drift(0.1) / drift(0.05) > 16

    def test_rk4_fifth_order_local_error(self):
        s0 = (0.5, -0.3, 0.4, -0.2)

        def err(dt):
            one = np.array(acrobot_rk4(*s0, 1.0, dt))
            half = acrobot_rk4(*s0, 1.0, dt / 2)
            two = np.array(acrobot_rk4(*half, 1.0, dt / 2))
            return np.linalg.norm(one - two)

        ratio = err(0.1) / err(0.05)
        assert 20 < ratio < 45

    def test_goal(self):
        tr = acrobot_step(np.array([math.pi, 0.0, 0.0, 0.0]), 1)
        assert tr.done and tr.r == 0.0

    def test_velocity_clipped_and_angles_wrapped(self):
        s = np.array([3.1, 3.1, 100.0, 100.0])
        nxt = Acrobot().step(s, 2).s_next
        assert abs(nxt[2]) <= C.ACROBOT_MAX_VEL_1 and abs(nxt[3]) <= C.ACROBOT_MAX_VEL_2
        assert -math.pi <= nxt[0] < math.pi and -math.pi <= nxt[1] < math.pi


class TestSpecs:
    def test_normalize(self):
        spec = EnvSpec("t", 2, 1, (-1.0, 0.0), (1.0, 4.0), 10)
        np.testing.assert_allclose(normalize(spec, [0.0, 1.0]), [0.5, 0.25])
        np.testing.assert_allclose(normalize(spec, [5.0, -3.0]), [1.0, 0.0])

    def test_bad_bounds(self):
        with pytest.raises(ValueError):
            EnvSpec("t", 1, 1, (1.0,), (1.0,), 10)
        with pytest.raises(ValueError):
            EnvSpec("t", 1, 1, (0.0,), (math.inf,), 10)
        with pytest.raises(ValueError):
            EnvSpec("t", 2, 1, (0.0,), (1.0,), 10)

    def test_make_env(self):
        env = make_env("cartpole", cap=50)
        assert env.spec.cap == 50 and env.spec.n_actions == 2
        assert make_env("acrobot").spec.n_actions == 3
        with pytest.raises(ValueError):
            make_env("mountaincar")


class TestChains:
    def test_random_walk_values(self):
        env = chain_mdp(5, 1.0)
        np.testing.assert_allclose(env.values(), np.arange(1, 6) / 6)
        assert env.episodic

    def test_cycle(self):
        env = chain_mdp(4, 0.9, "cycle", reward=2.0)
        np.testing.assert_allclose(env.values(), 20.0)
        assert not env.episodic

    def test_absorbing(self):
        env = chain_mdp(3, 0.9, "absorbing")
        np.testing.assert_allclose(env.values(), [1.0, 2.0, 3.0])
        tr = env.step(1, rng=np.random.default_rng(0))
        assert tr.done and tr.r == 2.0

    def test_sampled_reward_mean(self):
        env = chain_mdp(5, 1.0)
        rng = np.random.default_rng(0)
        rs = [env.step(4, rng=rng).r for _ in range(4000)]
        assert np.mean(rs) == pytest.approx(env.r[4], abs=0.03)

    def test_limits(self):
        with pytest.raises(ValueError):
            chain_mdp(101, 0.9)
        with pytest.raises(ValueError):
            chain_mdp(3, 0.9, "ladder")


class TestStepMRP:
    def test_values(self):
        env = DyadicStepMRP(gamma=0.5)
        mean = np.mean(env.values_) / (1 - 0.5)
        np.testing.assert_allclose(env.values(), env.values_ + 0.5 * mean)

    def test_power_of_two(self):
        with pytest.raises(ValueError):
            DyadicStepMRP(values=(1.0, 2.0, 3.0))

    def test_same_seed_same_path(self):
        env = DyadicStepMRP()
        a, b = np.random.default_rng(4), np.random.default_rng(4)
        s = t = 0.3
        for _ in range(20):
            ta, tb = env.step(s, rng=a), env.step(t, rng=b)
            assert ta == tb
            s, t = ta.s_next, tb.s_next

    def test_cell_edges(self):
        env = DyadicStepMRP()
        assert [env.cell(x) for x in (0.0, 0.25, 0.4999, 1.0)] == [0, 1, 1, 3]
