"""Benchmark environments and small Markov chains with exact models.

Every environment exposes ``spec`` (an :class:`EnvSpec`), ``reset(rng)``,
``step(s, a, rng)`` returning a :class:`Transition`, and ``observe(s)``,
which maps a raw state to the point handed to feature bases.  The control
tasks are deterministic, so ``step`` doubles as the one-step model used for
greedy lookahead.  Episode caps are enforced by the caller (see
:class:`gmsa.td.Rollout`); reaching the cap is a timeout, not a terminal
state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from . import constants as C

__all__ = [
    "Acrobot",
    "CartPole",
    "ChainMDP",
    "DyadicStepMRP",
    "EnvSpec",
    "Transition",
    "acrobot_energy",
    "acrobot_step",
    "cartpole_step",
    "chain_mdp",
    "make_env",
    "normalize",
]


@dataclass(frozen=True)
class EnvSpec:
    name: str
    dim: int
    n_actions: int
    low: tuple
    high: tuple
    cap: int

    def __post_init__(self):
        low = np.asarray(self.low, dtype=float)
        high = np.asarray(self.high, dtype=float)
        if low.shape != (self.dim,) or high.shape != (self.dim,):
            raise ValueError("bounds must have one entry per state coordinate")
        if not (np.all(np.isfinite(low)) and np.all(np.isfinite(high))):
            raise ValueError("bounds must be finite")
        if np.any(high <= low):
            raise ValueError(f"degenerate bounds for {self.name}: low={self.low} high={self.high}")

    def with_bounds(self, low=None, high=None, cap=None) -> "EnvSpec":
        return EnvSpec(
            self.name,
            self.dim,
            self.n_actions,
            tuple(self.low if low is None else low),
            tuple(self.high if high is None else high),
            self.cap if cap is None else int(cap),
        )


@dataclass(frozen=True)
class Transition:
    s: object
    a: int
    r: float
    s_next: object
    done: bool
    timeout: bool = False


def normalize(spec: EnvSpec, s) -> np.ndarray:
    """Affine map of the raw state onto ``[0, 1]**d``, clipped."""
    low = np.asarray(spec.low, dtype=float)
    high = np.asarray(spec.high, dtype=float)
    return np.clip((np.asarray(s, dtype=float) - low) / (high - low), 0.0, 1.0)


# ---------------------------------------------------------------- cart-pole


@njit(cache=True)
def cartpole_dynamics(x, x_dot, theta, theta_dot, force):
    """One semi-implicit Euler step of the cart-pole equations."""
    total = C.CARTPOLE_MASS_CART + C.CARTPOLE_MASS_POLE
    pml = C.CARTPOLE_MASS_POLE * C.CARTPOLE_HALF_LENGTH
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + pml * theta_dot * theta_dot * sin_t) / total
    theta_acc = (C.CARTPOLE_GRAVITY * sin_t - cos_t * temp) / (
        C.CARTPOLE_HALF_LENGTH * (4.0 / 3.0 - C.CARTPOLE_MASS_POLE * cos_t * cos_t / total)
    )
    x_acc = temp - pml * theta_acc * cos_t / total
    x_dot = x_dot + C.CARTPOLE_TAU * x_acc
    x = x + C.CARTPOLE_TAU * x_dot
    theta_dot = theta_dot + C.CARTPOLE_TAU * theta_acc
    theta = theta + C.CARTPOLE_TAU * theta_dot
    return x, x_dot, theta, theta_dot


@njit(cache=True)
def cartpole_terminal(x, theta):
    return abs(x) > C.CARTPOLE_X_LIMIT or abs(theta) > C.CARTPOLE_THETA_LIMIT


def cartpole_step(s, a: int, force_mag: float = C.CARTPOLE_FORCE) -> Transition:
    """Push left (``a=0``) or right (``a=1``); +1 reward while upright."""
    force = force_mag if a == 1 else -force_mag
    nxt = np.array(cartpole_dynamics(s[0], s[1], s[2], s[3], force))
    done = bool(cartpole_terminal(nxt[0], nxt[2]))
    return Transition(np.asarray(s, dtype=float), int(a), 0.0 if done else 1.0, nxt, done)


class CartPole:
    def __init__(self, spec: EnvSpec | None = None, force_mag: float = C.CARTPOLE_FORCE):
        self.spec = spec or EnvSpec("cartpole", 4, 2, C.CARTPOLE_LOW, C.CARTPOLE_HIGH, C.CARTPOLE_CAP)
        self.force_mag = force_mag

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-C.CARTPOLE_INIT_RANGE, C.CARTPOLE_INIT_RANGE, size=4)

    def step(self, s, a: int, rng=None) -> Transition:
        return cartpole_step(s, a, self.force_mag)

    def observe(self, s) -> np.ndarray:
        return normalize(self.spec, s)


# ------------------------------------------------------------------ acrobot


@njit(cache=True)
def _acrobot_dsdt(t1, t2, d1_, d2_, torque):
    m1 = C.ACROBOT_LINK_MASS_1
    m2 = C.ACROBOT_LINK_MASS_2
    l1 = C.ACROBOT_LINK_LENGTH_1
    lc1 = C.ACROBOT_LINK_COM_1
    lc2 = C.ACROBOT_LINK_COM_2
    I1 = C.ACROBOT_LINK_MOI
    I2 = C.ACROBOT_LINK_MOI
    g = C.ACROBOT_GRAVITY
    d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2.0 * l1 * lc2 * math.cos(t2)) + I1 + I2
    d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(t2)) + I2
    phi2 = m2 * lc2 * g * math.cos(t1 + t2 - math.pi / 2.0)
    phi1 = (
        -m2 * l1 * lc2 * d2_**2 * math.sin(t2)
        - 2.0 * m2 * l1 * lc2 * d2_ * d1_ * math.sin(t2)
        + (m1 * lc1 + m2 * l1) * g * math.cos(t1 - math.pi / 2.0)
        + phi2
    )
    dd2 = (torque + d2 / d1 * phi1 - m2 * l1 * lc2 * d1_**2 * math.sin(t2) - phi2) / (
        m2 * lc2**2 + I2 - d2**2 / d1
    )
    dd1 = -(d2 * dd2 + phi1) / d1
    return d1_, d2_, dd1, dd2


@njit(cache=True)
def acrobot_rk4(t1, t2, v1, v2, torque, dt):
    """One classical RK4 step of the frictionless acrobot, no wrapping."""
    k1 = _acrobot_dsdt(t1, t2, v1, v2, torque)
    h = dt / 2.0
    k2 = _acrobot_dsdt(t1 + h * k1[0], t2 + h * k1[1], v1 + h * k1[2], v2 + h * k1[3], torque)
    k3 = _acrobot_dsdt(t1 + h * k2[0], t2 + h * k2[1], v1 + h * k2[2], v2 + h * k2[3], torque)
    k4 = _acrobot_dsdt(t1 + dt * k3[0], t2 + dt * k3[1], v1 + dt * k3[2], v2 + dt * k3[3], torque)
    w = dt / 6.0
    return (
        t1 + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        t2 + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        v1 + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        v2 + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
    )


@njit(cache=True)
def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


@njit(cache=True)
def acrobot_dynamics(t1, t2, v1, v2, torque):
    t1, t2, v1, v2 = acrobot_rk4(t1, t2, v1, v2, torque, C.ACROBOT_DT)
    v1 = min(max(v1, -C.ACROBOT_MAX_VEL_1), C.ACROBOT_MAX_VEL_1)
    v2 = min(max(v2, -C.ACROBOT_MAX_VEL_2), C.ACROBOT_MAX_VEL_2)
    return _wrap(t1), _wrap(t2), v1, v2


@njit(cache=True)
def acrobot_terminal(t1, t2):
    return -math.cos(t1) - math.cos(t2 + t1) > C.ACROBOT_GOAL_HEIGHT


def acrobot_step(s, a: int) -> Transition:
    """Torque ``a - 1`` in {-1, 0, +1}; reward -1 until the goal height."""
    nxt = np.array(acrobot_dynamics(s[0], s[1], s[2], s[3], float(a - 1)))
    done = bool(acrobot_terminal(nxt[0], nxt[1]))
    return Transition(np.asarray(s, dtype=float), int(a), 0.0 if done else -1.0, nxt, done)


def acrobot_energy(s) -> float:
    """Kinetic plus potential energy of the double pendulum."""
    t1, t2, v1, v2 = (float(v) for v in s)
    m1, m2 = C.ACROBOT_LINK_MASS_1, C.ACROBOT_LINK_MASS_2
    l1, lc1, lc2 = C.ACROBOT_LINK_LENGTH_1, C.ACROBOT_LINK_COM_1, C.ACROBOT_LINK_COM_2
    I1 = I2 = C.ACROBOT_LINK_MOI
    g = C.ACROBOT_GRAVITY
    c2 = math.cos(t2)
    m11 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * c2) + I1 + I2
    m12 = m2 * (lc2**2 + l1 * lc2 * c2) + I2
    m22 = m2 * lc2**2 + I2
    kinetic = 0.5 * (m11 * v1 * v1 + 2 * m12 * v1 * v2 + m22 * v2 * v2)
    potential = -(m1 * lc1 + m2 * l1) * g * math.cos(t1) - m2 * lc2 * g * math.cos(t1 + t2)
    return kinetic + potential


class Acrobot:
    def __init__(self, spec: EnvSpec | None = None):
        self.spec = spec or EnvSpec("acrobot", 4, 3, C.ACROBOT_LOW, C.ACROBOT_HIGH, C.ACROBOT_CAP)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-C.ACROBOT_INIT_RANGE, C.ACROBOT_INIT_RANGE, size=4)

    def step(self, s, a: int, rng=None) -> Transition:
        return acrobot_step(s, a)

    def observe(self, s) -> np.ndarray:
        return normalize(self.spec, s)


# ------------------------------------------------------------ exact chains


class ChainMDP:
    """Finite Markov reward process with known transition matrix.

    ``P[i, j]`` is the probability of moving between non-terminal states; a
    row summing to less than one leaks into termination.  ``r[i]`` is the
    expected reward on leaving ``i`` and ``exit_reward[i]`` the reward paid
    when the step from ``i`` terminates.
    """

    def __init__(self, P, r, start, gamma: float, exit_reward=None, cap: int = 10_000, name: str = "chain"):
        self.P = np.asarray(P, dtype=float)
        self.r = np.asarray(r, dtype=float)
        self.start = np.asarray(start, dtype=float)
        self.gamma = float(gamma)
        n = len(self.r)
        if self.P.shape != (n, n) or self.start.shape != (n,):
            raise ValueError("inconsistent chain shapes")
        if n > 100:
            raise ValueError("chains are limited to 100 states")
        self.exit_prob = 1.0 - self.P.sum(axis=1)
        self.exit_reward = np.zeros(n) if exit_reward is None else np.asarray(exit_reward, dtype=float)
        self.spec = EnvSpec(name, 1, 1, (0.0,), (float(n),), cap)
        # step rewards on non-terminal moves, chosen so E[reward] = r
        with np.errstate(invalid="ignore", divide="ignore"):
            inner = self.r - self.exit_prob * self.exit_reward
            stay = self.P.sum(axis=1)
            self._move_reward = np.where(stay > 0, inner / np.where(stay > 0, stay, 1.0), 0.0)

    @property
    def n_states(self) -> int:
        return len(self.r)

    @property
    def episodic(self) -> bool:
        return bool(np.any(self.exit_prob > 1e-12))

    def values(self) -> np.ndarray:
        """Exact ``V = (I - gamma P)^-1 r``."""
        return np.linalg.solve(np.eye(self.n_states) - self.gamma * self.P, self.r)

    def reset(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_states, p=self.start))

    def step(self, s: int, a: int = 0, rng: np.random.Generator | None = None) -> Transition:
        probs = np.append(self.P[s], self.exit_prob[s])
        j = int(rng.choice(self.n_states + 1, p=probs / probs.sum()))
        if j == self.n_states:
            return Transition(s, a, float(self.exit_reward[s]), s, True)
        return Transition(s, a, float(self._move_reward[s]), j, False)

    def observe(self, s):
        return s


def chain_mdp(n_states: int, gamma: float, kind: str = "random_walk", reward: float = 1.0) -> ChainMDP:
    """Small chains used as oracle environments.

    ``random_walk``: symmetric walk started in the middle; leaving on the
    right pays 1, on the left 0.  ``cycle``: deterministic cycle paying
    ``reward`` per step.  ``absorbing``: every state terminates immediately
    paying ``reward * (i + 1)``.
    """
    n = n_states
    if kind == "random_walk":
        P = np.zeros((n, n))
        for i in range(n):
            if i > 0:
                P[i, i - 1] = 0.5
            if i < n - 1:
                P[i, i + 1] = 0.5
        exit_reward = np.zeros(n)
        exit_reward[-1] = 1.0
        r = np.zeros(n)
        r[-1] = 0.5
        start = np.zeros(n)
        start[n // 2] = 1.0
        return ChainMDP(P, r, start, gamma, exit_reward, name="random_walk")
    if kind == "cycle":
        P = np.roll(np.eye(n), 1, axis=1)
        return ChainMDP(P, np.full(n, reward), np.full(n, 1.0 / n), gamma, name="cycle")
    if kind == "absorbing":
        r = reward * np.arange(1, n + 1, dtype=float)
        return ChainMDP(np.zeros((n, n)), r, np.full(n, 1.0 / n), gamma, exit_reward=r, name="absorbing")
    raise ValueError(f"unknown chain kind {kind!r}")


class DyadicStepMRP:
    """One-dimensional process on ``[0, 1]`` whose value is a dyadic step.

    The next state is drawn uniformly and independently of the current one,
    and the reward is ``values[k]`` on the ``k``-th cell of the level-``L``
    grid.  Hence ``V = values + gamma * mean(V)``, a step function on the
    same grid.  The sample path depends only on the generator, so two
    learners fed generators with the same seed see identical transitions.
    """

    def __init__(self, values=(0.0, 0.0, 1.0, 0.5), gamma: float = 0.0, cap: int = 100):
        self.values_ = np.asarray(values, dtype=float)
        n = len(self.values_)
        if n & (n - 1):
            raise ValueError("number of cells must be a power of two")
        self.level = n.bit_length() - 1
        self.gamma = float(gamma)
        self.spec = EnvSpec("step_mrp", 1, 1, (0.0,), (1.0,), cap)

    def cell(self, s: float) -> int:
        n = len(self.values_)
        return min(int(s * n), n - 1)

    def transition_matrix(self) -> np.ndarray:
        n = len(self.values_)
        return np.full((n, n), 1.0 / n)

    def values(self) -> np.ndarray:
        """Cell values of ``V`` from the aggregated linear system."""
        n = len(self.values_)
        return np.linalg.solve(np.eye(n) - self.gamma * self.transition_matrix(), self.values_)

    def value_function(self):
        from .wavelets import DyadicStep

        return DyadicStep(self.values())

    def reset(self, rng: np.random.Generator) -> float:
        return float(rng.random())

    def step(self, s: float, a: int = 0, rng: np.random.Generator | None = None) -> Transition:
        return Transition(s, a, float(self.values_[self.cell(s)]), float(rng.random()), False)

    def observe(self, s) -> np.ndarray:
        return np.array([s], dtype=float)


def make_env(name: str, low=None, high=None, cap=None):
    if name == "cartpole":
        env = CartPole()
    elif name == "acrobot":
        env = Acrobot()
    else:
        raise ValueError(f"unknown environment {name!r}")
    if low is not None or high is not None or cap is not None:
        env.spec = env.spec.with_bounds(low, high, cap)
    return env
