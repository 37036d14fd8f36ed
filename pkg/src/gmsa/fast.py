"""Compiled learners for the four-dimensional control tasks.

The episode loops of the wavelet learner, fixed tile coding and the
adaptive partition learner run inside numba kernels; tree refinement and
splitting happen in Python between phases.  Eligibility traces are kept as
a ring of the last ``K`` feature vectors, with ``K`` chosen so that the
dropped weight ``(gamma * lam)**K`` is negligible.

Random numbers come from numba's generator, seeded once per run, so a run
is deterministic given its seed but does not share the stream of the
Python reference learners.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import constants as C
from .baselines import ATCConfig
from .dyadic import DyadicCube, ProperTree
from .envs import acrobot_dynamics, acrobot_terminal, cartpole_dynamics, cartpole_terminal
from .refinement import GMSAConfig, PhaseRecord
from .td import EpisodeRow, Transcript
from .wavelets import sign_table

__all__ = [
    "ENV_IDS",
    "FastResult",
    "TilesConfig",
    "fast_atc",
    "fast_gmsa",
    "fast_tiles",
    "trace_length",
]

ENV_IDS = {"cartpole": 0, "acrobot": 1}

OK_PATIENCE, OK_BUDGET, TIMEOUT, DIVERGED = 0, 1, 2, 3


def trace_length(gamma: float, lam: float, tol: float = 1e-8) -> int:
    gl = gamma * lam
    if gl <= 0.0:
        return 1
    if gl >= 1.0:
        raise ValueError("truncated traces need gamma * lambda < 1")
    return max(1, math.ceil(math.log(tol) / math.log(gl)))


@dataclass(frozen=True)
class TilesConfig:
    tilings: int = 10
    width: float = 0.025
    alpha: float = 0.1
    gamma: float = 0.8
    lam: float = 0.0
    epsilon: float = 0.1
    epsilon_decay: float = 0.999
    episodes: int = 1000
    seed: int = 0


@dataclass
class FastResult:
    """Per-episode arrays plus learner-specific extras."""

    steps: np.ndarray
    returns: np.ndarray
    phase: np.ndarray
    basis_size: np.ndarray
    mean_abs_delta: np.ndarray
    phases: list = field(default_factory=list)
    tree: ProperTree | None = None
    converged: bool = False
    failed: bool = False
    message: str = ""
    model: object = None

    def transcript(self) -> Transcript:
        t = Transcript()
        for i in range(len(self.steps)):
            t.episodes.append(
                EpisodeRow(
                    i,
                    int(self.steps[i]),
                    float(self.returns[i]),
                    int(self.phase[i]),
                    int(self.basis_size[i]),
                    float(self.mean_abs_delta[i]),
                )
            )
        return t


# ------------------------------------------------------------ shared kernels


@njit(cache=True)
def _seed(seed):
    np.random.seed(seed)


@njit(cache=True)
def _env_step(env_id, s, a, out):
    """Advance ``s`` by action ``a`` into ``out``; returns (reward, done)."""
    if env_id == 0:
        force = C.CARTPOLE_FORCE if a == 1 else -C.CARTPOLE_FORCE
        x, xd, t, td = cartpole_dynamics(s[0], s[1], s[2], s[3], force)
        out[0] = x
        out[1] = xd
        out[2] = t
        out[3] = td
        done = cartpole_terminal(x, t)
        return (0.0 if done else 1.0), done
    t1, t2, v1, v2 = acrobot_dynamics(s[0], s[1], s[2], s[3], float(a - 1))
    out[0] = t1
    out[1] = t2
    out[2] = v1
    out[3] = v2
    done = acrobot_terminal(t1, t2)
    return (0.0 if done else -1.0), done


@njit(cache=True)
def _env_reset(env_id, s):
    r = C.CARTPOLE_INIT_RANGE if env_id == 0 else C.ACROBOT_INIT_RANGE
    for i in range(4):
        s[i] = np.random.uniform(-r, r)


@njit(cache=True)
def _normalize(s, low, high, x):
    for i in range(s.shape[0]):
        v = (s[i] - low[i]) / (high[i] - low[i])
        x[i] = min(max(v, 0.0), 1.0)


@njit(cache=True)
def _choose(q, n, epsilon):
    if np.random.random() < epsilon:
        return np.random.randint(n)
    best = q[0]
    for a in range(1, n):
        if q[a] > best:
            best = q[a]
    ties = 0
    for a in range(n):
        if q[a] == best:
            ties += 1
    if ties == 1:
        for a in range(n):
            if q[a] == best:
                return a
    pick = np.random.randint(ties)
    for a in range(n):
        if q[a] == best:
            if pick == 0:
                return a
            pick -= 1
    return 0


# Rollout bookkeeping lives in two small arrays so it survives across calls:
#   ints:   [steps in episode, episode, total steps]
#   floats: [return, sum |delta|, epsilon]


@njit(cache=True)
def _end_step(ints, floats, r, absd, ended, phase, basis, decay, ep_steps, ep_ret, ep_phase, ep_basis, ep_delta):
    ints[0] += 1
    ints[2] += 1
    floats[0] += r
    floats[1] += absd
    if ended:
        e = ints[1]
        ep_steps[e] = ints[0]
        ep_ret[e] = floats[0]
        ep_phase[e] = phase
        ep_basis[e] = basis
        ep_delta[e] = floats[1] / ints[0]
        ints[1] += 1
        ints[0] = 0
        floats[0] = 0.0
        floats[1] = 0.0
        floats[2] *= decay


# ------------------------------------------------------------ wavelet tree


@njit(cache=True)
def _child_offset(x, j):
    c = 0
    scale = 2.0 ** (j + 1)
    for i in range(x.shape[0]):
        k = int(math.floor(x[i] * scale))
        n = int(scale)
        if k >= n:
            k = n - 1
        if k & 1:
            c |= 1 << i
    return c


@njit(cache=True)
def _tree_value(x, children, weights, level, signs, d):
    node = 0
    v = 0.0
    while node >= 0:
        j = level[node]
        c = _child_offset(x, j)
        acc = 0.0
        for e in range(weights.shape[1]):
            acc += weights[node, e] * signs[c, e]
        v += 2.0 ** (j * d / 2.0) * acc
        node = children[node, c]
    return v


@njit(cache=True)
def _tree_path(x, children, level, layer, path_node, path_c):
    """Trainable nodes on the path of ``x``: the one at level ``layer``, or
    every node when ``layer < 0``.  Returns how many were written."""
    node = 0
    m = 0
    while node >= 0:
        j = level[node]
        c = _child_offset(x, j)
        if layer < 0 or j == layer:
            path_node[m] = node
            path_c[m] = c
            m += 1
            if layer >= 0:
                break
        node = children[node, c]
    return m


@njit(cache=True)
def _gmsa_kernel(
    env_id, low, high, n_actions, cap,
    children, weights, level, signs, layer,
    rate, gamma, gl, decay, K, depth,
    s, ints, floats,
    ep_steps, ep_ret, ep_phase, ep_basis, ep_delta,
    max_episodes, patience, max_steps, phase, basis,
):
    d = s.shape[0]
    n_e = weights.shape[1]
    x = np.empty(d)
    xn = np.empty(d)
    nxt = np.empty((n_actions, d))
    rew = np.empty(n_actions)
    dn = np.zeros(n_actions, dtype=np.bool_)
    q = np.empty(n_actions)
    ring_node = np.full((K, depth), -1, dtype=np.int64)
    ring_c = np.zeros((K, depth), dtype=np.int64)
    ring_m = np.zeros(K, dtype=np.int64)
    scale = np.empty(depth)
    for j in range(depth):
        scale[j] = 2.0 ** (j * d / 2.0)
    head = 0
    lowest = np.inf
    u = 0
    steps = 0
    while True:
        if ints[1] >= max_episodes:
            return OK_BUDGET, steps
        for a in range(n_actions):
            rr, dd = _env_step(env_id, s, a, nxt[a])
            rew[a] = rr
            dn[a] = dd
            if dd:
                q[a] = rr
            else:
                _normalize(nxt[a], low, high, xn)
                q[a] = rr + gamma * _tree_value(xn, children, weights, level, signs, d)
        a = _choose(q, n_actions, floats[2])
        _normalize(s, low, high, x)
        v = _tree_value(x, children, weights, level, signs, d)
        done = dn[a]
        timeout = (not done) and ints[0] + 1 >= cap
        delta = q[a] - v
        if not (math.isfinite(delta) and math.isfinite(v)):
            return DIVERGED, steps
        head = (head + 1) % K
        ring_m[head] = _tree_path(x, children, level, layer, ring_node[head], ring_c[head])
        if ring_m[head] > 0:
            z = 1.0
            for k in range(K):
                r_ = (head - k) % K
                for i in range(ring_m[r_]):
                    nd = ring_node[r_, i]
                    cc = ring_c[r_, i]
                    j = level[nd]
                    g = rate[j] * delta * z * scale[j]
                    for e in range(1 if j > 0 else 0, n_e):
                        weights[nd, e] += g * signs[cc, e]
                z *= gl
                if z == 0.0:
                    break
        ended = done or timeout
        _end_step(ints, floats, rew[a], abs(delta), ended, phase, basis, decay,
                  ep_steps, ep_ret, ep_phase, ep_basis, ep_delta)
        if ended:
            _env_reset(env_id, s)
            ring_m[:] = 0
        else:
            for i in range(d):
                s[i] = nxt[a, i]
        steps += 1
        if patience > 0:
            if abs(delta) < lowest:
                lowest = abs(delta)
                u = 0
            else:
                u += 1
            if u > patience:
                return OK_PATIENCE, steps
            if steps >= max_steps:
                return TIMEOUT, steps


def level_rates(rule: str, alpha: float, dim: int, depth: int, cap: float = 0.5) -> np.ndarray:
    """Step size of each level's block under the given rule.

    ``normalized`` scales ``alpha`` by ``2**d / ||b_j||**2``; ``capped`` uses
    ``alpha`` unless ``alpha * ||b_j||**2`` would exceed ``cap``.
    """
    out = np.empty(depth)
    for j in range(depth):
        n_atoms = (1 << dim) if j == 0 else (1 << dim) - 1
        norm2 = 2.0 ** (j * dim) * n_atoms
        if rule == "normalized":
            out[j] = alpha * (1 << dim) / norm2
        elif rule == "capped":
            out[j] = min(alpha, cap / norm2)
        elif rule == "constant":
            out[j] = alpha
        else:
            raise ValueError(f"step-size rule {rule!r} has no compiled form")
    return out


class _NodeStore:
    """Growable arrays for the coefficient tree."""

    def __init__(self, dim: int, capacity: int = 1024):
        self.dim = dim
        self.nc = 1 << dim
        self.children = np.full((capacity, self.nc), -1, dtype=np.int64)
        self.weights = np.zeros((capacity, self.nc))
        self.level = np.zeros(capacity, dtype=np.int64)
        self.index = np.zeros((capacity, dim), dtype=np.int64)
        self.n = 1
        self.by_level: dict[int, list[int]] = {0: [0]}

    def _grow(self):
        cap = 2 * len(self.level)
        for name in ("children", "weights", "level", "index"):
            old = getattr(self, name)
            new = np.full((cap,) + old.shape[1:], -1 if name == "children" else 0, dtype=old.dtype)
            new[: len(old)] = old
            setattr(self, name, new)

    def add_children(self, node: int) -> None:
        j = int(self.level[node])
        for c in range(self.nc):
            if self.n >= len(self.level):
                self._grow()
            m = self.n
            self.n += 1
            self.level[m] = j + 1
            bits = np.array([(c >> i) & 1 for i in range(self.dim)])
            self.index[m] = 2 * self.index[node] + bits
            self.children[node, c] = m
            self.by_level.setdefault(j + 1, []).append(m)

    def view(self):
        n = self.n
        return self.children[:n], self.weights[:n], self.level[:n]

    def cubes(self) -> list[DyadicCube]:
        return [DyadicCube(int(self.level[i]), tuple(int(k) for k in self.index[i])) for i in range(self.n)]


def _episode_arrays(n: int):
    return (
        np.zeros(n, dtype=np.int64),
        np.zeros(n),
        np.zeros(n, dtype=np.int64),
        np.zeros(n, dtype=np.int64),
        np.zeros(n),
    )


def _bounds(env_name: str, low, high):
    if env_name == "cartpole":
        lo, hi, n_actions, cap = C.CARTPOLE_LOW, C.CARTPOLE_HIGH, 2, C.CARTPOLE_CAP
    elif env_name == "acrobot":
        lo, hi, n_actions, cap = C.ACROBOT_LOW, C.ACROBOT_HIGH, 3, C.ACROBOT_CAP
    else:
        raise ValueError(f"no compiled kernel for environment {env_name!r}")
    lo = np.asarray(lo if low is None else low, dtype=float)
    hi = np.asarray(hi if high is None else high, dtype=float)
    return lo, hi, n_actions, cap


class TreeValue:
    """Callable value function of a learned wavelet tree."""

    def __init__(self, store: _NodeStore, low, high):
        self.store = store
        self.low = low
        self.high = high
        self.signs = sign_table(store.dim)

    def __call__(self, s) -> float:
        x = np.empty(self.store.dim)
        _normalize(np.asarray(s, dtype=float), self.low, self.high, x)
        ch, w, lv = self.store.view()
        return float(_tree_value(x, ch, w, lv, self.signs, self.store.dim))


def fast_gmsa(env_name: str, config: GMSAConfig, low=None, high=None, cap=None) -> FastResult:
    """Compiled wavelet learner; ``config.episodes`` is the episode budget."""
    if config.basis != "haar":
        raise ValueError("the compiled learner supports the Haar basis only")
    if config.episodes is None:
        raise ValueError("the compiled learner needs an episode budget")
    lo, hi, n_actions, default_cap = _bounds(env_name, low, high)
    cap = default_cap if cap is None else int(cap)
    env_id = ENV_IDS[env_name]
    d = 4
    store = _NodeStore(d)
    signs = sign_table(d)
    K = trace_length(config.gamma, config.lam)
    gl = config.gamma * config.lam
    depth = config.j_max + 2
    rates = level_rates(config.step_size, config.alpha, d, depth, config.step_cap)
    n_ep = config.episodes
    eps = _episode_arrays(n_ep)
    _seed(config.seed)
    s = np.empty(d)
    _env_reset(env_id, s)
    ints = np.zeros(3, dtype=np.int64)
    floats = np.array([0.0, 0.0, config.epsilon])
    result = FastResult(*eps)
    n_atoms = 1 << d
    last_layer = 0
    for phase in range(config.max_phases):
        ch, w, lv = store.view()
        status, steps = _gmsa_kernel(
            env_id, lo, hi, n_actions, cap, ch, w, lv, signs, phase,
            rates, config.gamma, gl, config.epsilon_decay, K, depth,
            s, ints, floats, *eps,
            n_ep, config.patience, config.max_phase_steps, phase, n_atoms,
        )
        if status == DIVERGED:
            result.failed = True
            result.message = f"phase {phase}: TD update diverged"
            break
        if status == TIMEOUT:
            result.failed = True
            result.message = f"phase {phase}: exceeded {config.max_phase_steps} steps"
            break
        last_layer = phase
        nodes = store.by_level.get(phase, [])
        norms = np.sqrt(np.sum(store.weights[nodes] ** 2, axis=1)) if nodes else np.zeros(0)
        refined = [nd for nd, nrm in zip(nodes, norms) if nrm >= config.eta and phase < config.j_max]
        for nd in refined:
            store.add_children(nd)
        size = n_atoms
        n_atoms += len(refined) * (1 << d) * ((1 << d) - 1)
        result.phases.append(
            PhaseRecord(
                phase,
                size,
                len(refined),
                float(norms.min()) if len(norms) else 0.0,
                float(norms.max()) if len(norms) else 0.0,
                int(steps),
            )
        )
        if status == OK_BUDGET:
            break
        if not refined:
            result.converged = True
            break
    growing = config.final_training in ("grow", "grow_all")
    phase = len(result.phases)
    while not result.failed and ints[1] < n_ep:
        # keep training until the budget is spent
        ch, w, lv = store.view()
        status, steps = _gmsa_kernel(
            env_id, lo, hi, n_actions, cap, ch, w, lv, signs,
            last_layer if config.final_training == "last" else -1,
            rates, config.gamma, gl, config.epsilon_decay, K, depth,
            s, ints, floats, *eps,
            n_ep, config.patience if growing else 0, config.max_phase_steps, phase, n_atoms,
        )
        if status == DIVERGED:
            result.failed = True
            result.message = "final training: TD update diverged"
        if status != OK_PATIENCE:
            break
        leaves = np.flatnonzero((store.children[: store.n, 0] < 0) & (store.level[: store.n] < config.j_max))
        norms = np.sqrt(np.sum(store.weights[leaves] ** 2, axis=1))
        refined = leaves[norms >= config.eta]
        for nd in refined:
            store.add_children(int(nd))
        size = n_atoms
        n_atoms += len(refined) * (1 << d) * ((1 << d) - 1)
        result.phases.append(
            PhaseRecord(
                phase, size, len(refined),
                float(norms.min()) if len(norms) else 0.0,
                float(norms.max()) if len(norms) else 0.0,
                int(steps),
            )
        )
        phase += 1
        if len(refined) == 0 and config.final_training == "grow":
            growing = False
    _truncate(result, int(ints[1]))
    result.tree = ProperTree(store.cubes(), d)
    result.model = TreeValue(store, lo, hi)
    return result


def _truncate(result: FastResult, n: int) -> None:
    for name in ("steps", "returns", "phase", "basis_size", "mean_abs_delta"):
        setattr(result, name, getattr(result, name)[:n])


# ------------------------------------------------------------ tile coding


@njit(cache=True)
def _tile_indices(x, offsets, width, per_dim, out):
    T = offsets.shape[0]
    d = x.shape[0]
    size = per_dim**d
    for t in range(T):
        flat = 0
        for i in range(d):
            k = int(math.floor((x[i] + offsets[t, i]) / width))
            if k < 0:
                k = 0
            elif k >= per_dim:
                k = per_dim - 1
            flat = flat * per_dim + k
        out[t] = t * size + flat


@njit(cache=True)
def _tile_value(x, w, offsets, width, per_dim, idx):
    _tile_indices(x, offsets, width, per_dim, idx)
    v = 0.0
    for t in range(idx.shape[0]):
        v += w[idx[t]]
    return v


@njit(cache=True)
def _tiles_kernel(
    env_id, low, high, n_actions, cap,
    w, offsets, width, per_dim,
    alpha, gamma, gl, decay, K,
    s, ints, floats,
    ep_steps, ep_ret, ep_phase, ep_basis, ep_delta,
    max_episodes, basis,
):
    d = s.shape[0]
    T = offsets.shape[0]
    x = np.empty(d)
    xn = np.empty(d)
    idx = np.empty(T, dtype=np.int64)
    nxt = np.empty((n_actions, d))
    rew = np.empty(n_actions)
    dn = np.zeros(n_actions, dtype=np.bool_)
    q = np.empty(n_actions)
    ring = np.full((K, T), -1, dtype=np.int64)
    head = 0
    rate = alpha / T
    steps = 0
    while ints[1] < max_episodes:
        for a in range(n_actions):
            rr, dd = _env_step(env_id, s, a, nxt[a])
            rew[a] = rr
            dn[a] = dd
            if dd:
                q[a] = rr
            else:
                _normalize(nxt[a], low, high, xn)
                q[a] = rr + gamma * _tile_value(xn, w, offsets, width, per_dim, idx)
        a = _choose(q, n_actions, floats[2])
        _normalize(s, low, high, x)
        v = _tile_value(x, w, offsets, width, per_dim, idx)
        done = dn[a]
        timeout = (not done) and ints[0] + 1 >= cap
        delta = q[a] - v
        if not (math.isfinite(delta) and math.isfinite(v)):
            return DIVERGED, steps
        head = (head + 1) % K
        for t in range(T):
            ring[head, t] = idx[t]
        z = 1.0
        for k in range(K):
            r_ = (head - k) % K
            if ring[r_, 0] < 0:
                break
            g = rate * delta * z
            for t in range(T):
                w[ring[r_, t]] += g
            z *= gl
            if z == 0.0:
                break
        ended = done or timeout
        _end_step(ints, floats, rew[a], abs(delta), ended, 0, basis, decay,
                  ep_steps, ep_ret, ep_phase, ep_basis, ep_delta)
        if ended:
            _env_reset(env_id, s)
            ring[:, :] = -1
        else:
            for i in range(d):
                s[i] = nxt[a, i]
        steps += 1
    return OK_BUDGET, steps


class TileValue:
    def __init__(self, w, offsets, width, per_dim, low, high):
        self.w, self.offsets, self.width, self.per_dim = w, offsets, width, per_dim
        self.low, self.high = low, high

    def __call__(self, s) -> float:
        x = np.empty(len(self.low))
        _normalize(np.asarray(s, dtype=float), self.low, self.high, x)
        idx = np.empty(self.offsets.shape[0], dtype=np.int64)
        return float(_tile_value(x, self.w, self.offsets, self.width, self.per_dim, idx))


def fast_tiles(env_name: str, config: TilesConfig, low=None, high=None, cap=None) -> FastResult:
    """Compiled fixed tile coding with ``alpha / tilings`` per active tile."""
    from .baselines import TileCoder

    lo, hi, n_actions, default_cap = _bounds(env_name, low, high)
    cap = default_cap if cap is None else int(cap)
    env_id = ENV_IDS[env_name]
    coder = TileCoder.uniform(4, config.tilings, config.width)
    w = np.zeros(coder.n_features)
    K = trace_length(config.gamma, config.lam)
    eps = _episode_arrays(config.episodes)
    _seed(config.seed)
    s = np.empty(4)
    _env_reset(env_id, s)
    ints = np.zeros(3, dtype=np.int64)
    floats = np.array([0.0, 0.0, config.epsilon])
    status, _ = _tiles_kernel(
        env_id, lo, hi, n_actions, cap, w, coder.offsets, coder.width, coder.tiles_per_dim,
        config.alpha, config.gamma, config.gamma * config.lam, config.epsilon_decay, K,
        s, ints, floats, *eps, config.episodes, coder.n_features,
    )
    result = FastResult(*eps)
    if status == DIVERGED:
        result.failed = True
        result.message = "TD update diverged"
    _truncate(result, int(ints[1]))
    result.model = TileValue(w, coder.offsets, coder.width, coder.tiles_per_dim, lo, hi)
    return result


# ------------------------------------------------------------ adaptive partition


@njit(cache=True)
def _leaf(x, children, level):
    node = 0
    while children[node, 0] >= 0:
        node = children[node, _child_offset(x, level[node])]
    return node


@njit(cache=True)
def _atc_kernel(
    env_id, low, high, n_actions, cap,
    children, value, child_value, level,
    rate, gamma, gl, decay, K,
    s, ints, floats,
    ep_steps, ep_ret, ep_phase, ep_basis, ep_delta,
    max_episodes, patience, max_steps, phase, basis,
):
    d = s.shape[0]
    x = np.empty(d)
    xn = np.empty(d)
    nxt = np.empty((n_actions, d))
    rew = np.empty(n_actions)
    dn = np.zeros(n_actions, dtype=np.bool_)
    q = np.empty(n_actions)
    ring = np.full(K, -1, dtype=np.int64)
    head = 0
    lowest = np.inf
    u = 0
    steps = 0
    while True:
        if ints[1] >= max_episodes:
            return OK_BUDGET, steps
        for a in range(n_actions):
            rr, dd = _env_step(env_id, s, a, nxt[a])
            rew[a] = rr
            dn[a] = dd
            if dd:
                q[a] = rr
            else:
                _normalize(nxt[a], low, high, xn)
                q[a] = rr + gamma * value[_leaf(xn, children, level)]
        a = _choose(q, n_actions, floats[2])
        _normalize(s, low, high, x)
        leaf = _leaf(x, children, level)
        v = value[leaf]
        done = dn[a]
        timeout = (not done) and ints[0] + 1 >= cap
        target = q[a]
        delta = target - v
        if not (math.isfinite(delta) and math.isfinite(v)):
            return DIVERGED, steps
        head = (head + 1) % K
        ring[head] = leaf
        z = 1.0
        for k in range(K):
            nd = ring[(head - k) % K]
            if nd < 0:
                break
            value[nd] += rate * delta * z
            z *= gl
            if z == 0.0:
                break
        c = _child_offset(x, level[leaf])
        child_delta = target - child_value[leaf, c]
        child_value[leaf, c] += rate * child_delta
        ended = done or timeout
        _end_step(ints, floats, rew[a], abs(delta), ended, phase, basis, decay,
                  ep_steps, ep_ret, ep_phase, ep_basis, ep_delta)
        if ended:
            _env_reset(env_id, s)
            ring[:] = -1
        else:
            for i in range(d):
                s[i] = nxt[a, i]
        steps += 1
        if patience > 0:
            if abs(child_delta) < lowest:
                lowest = abs(child_delta)
                u = 0
            else:
                u += 1
            if u > patience:
                return OK_PATIENCE, steps
            if steps >= max_steps:
                return TIMEOUT, steps


class _PartitionStore(_NodeStore):
    def __init__(self, dim: int, capacity: int = 1024):
        super().__init__(dim, capacity)
        self.value = np.zeros(capacity)
        self.child_value = np.zeros((capacity, self.nc))
        self.leaves = {0}

    def _grow(self):
        super()._grow()
        cap = len(self.level)
        for name in ("value", "child_value"):
            old = getattr(self, name)
            new = np.zeros((cap,) + old.shape[1:])
            new[: len(old)] = old
            setattr(self, name, new)

    def split(self, node: int) -> None:
        first = self.n
        self.add_children(node)
        for c in range(self.nc):
            m = first + c
            self.value[m] = self.child_value[node, c]
            self.child_value[m] = self.child_value[node, c]
        self.leaves.discard(node)
        self.leaves.update(range(first, first + self.nc))

    def criterion(self, node: int) -> float:
        u = self.child_value[node]
        vol = 2.0 ** (-(int(self.level[node]) + 1) * self.dim)
        return math.sqrt(vol * float(np.sum((u - u.mean()) ** 2)))


class PartitionValue:
    def __init__(self, store: _PartitionStore, low, high):
        self.store, self.low, self.high = store, low, high

    def __call__(self, s) -> float:
        x = np.empty(self.store.dim)
        _normalize(np.asarray(s, dtype=float), self.low, self.high, x)
        n = self.store.n
        return float(self.store.value[_leaf(x, self.store.children[:n], self.store.level[:n])])


def fast_atc(env_name: str, config: ATCConfig, low=None, high=None, cap=None) -> FastResult:
    """Compiled adaptive partition learner (split policy ``max`` or ``all``)."""
    if config.episodes is None:
        raise ValueError("the compiled learner needs an episode budget")
    lo, hi, n_actions, default_cap = _bounds(env_name, low, high)
    cap = default_cap if cap is None else int(cap)
    env_id = ENV_IDS[env_name]
    d = 4
    store = _PartitionStore(d)
    for _ in range(config.initial_level):
        for leaf in sorted(store.leaves):
            store.split(leaf)
    rate = config.alpha * (1 << d)
    K = trace_length(config.gamma, config.lam)
    n_ep = config.episodes
    eps = _episode_arrays(n_ep)
    _seed(config.seed)
    s = np.empty(d)
    _env_reset(env_id, s)
    ints = np.zeros(3, dtype=np.int64)
    floats = np.array([0.0, 0.0, config.epsilon])
    result = FastResult(*eps)
    splitting = True
    splits_done = 0
    phase = 0
    while True:
        n = store.n
        patience = config.patience if splitting and phase < config.max_phases else 0
        status, steps = _atc_kernel(
            env_id, lo, hi, n_actions, cap,
            store.children[:n], store.value[:n], store.child_value[:n], store.level[:n],
            rate, config.gamma, config.gamma * config.lam, config.epsilon_decay, K,
            s, ints, floats, *eps,
            n_ep, patience, config.max_phase_steps, phase, len(store.leaves),
        )
        if status == DIVERGED:
            result.failed = True
            result.message = f"phase {phase}: TD update diverged"
            break
        if status == TIMEOUT:
            result.failed = True
            result.message = f"phase {phase}: exceeded {config.max_phase_steps} steps"
            break
        if status == OK_BUDGET:
            break
        crit = {
            nd: store.criterion(nd) for nd in store.leaves if store.level[nd] < config.j_max
        }
        if config.max_splits is not None and splits_done >= config.max_splits:
            chosen = []
        elif config.split == "max":
            best = max(crit, key=lambda k: (crit[k], -k), default=None)
            chosen = [best] if best is not None and crit[best] >= config.eta else []
        else:
            chosen = sorted(k for k, c in crit.items() if c >= config.eta)
        for nd in chosen:
            store.split(nd)
        splits_done += len(chosen)
        result.phases.append((phase, len(chosen), len(store.leaves), int(steps)))
        phase += 1
        if not chosen:
            result.converged = True
            splitting = False
    _truncate(result, int(ints[1]))
    result.tree = ProperTree(store.cubes(), d)
    result.model = PartitionValue(store, lo, hi)
    return result
