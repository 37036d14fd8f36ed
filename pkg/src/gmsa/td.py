"""Linear TD(lambda) with accumulating eligibility traces.

The learned value is ``V(s) = base(s) + theta @ b(s)`` where ``base`` is an
optional frozen function (earlier refinement layers) and ``b`` a feature
basis.  Learning runs in *phases*: a phase ends once the smallest absolute
TD error seen in the phase has failed to improve for more than ``patience``
consecutive steps.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .dyadic import locate_indices
from .envs import Transition
from .errors import DivergenceError, PhaseTimeoutError, SingularSystemError
from .wavelets import sign_table

__all__ = [
    "AtomBasis",
    "FunctionBasis",
    "GreedyLookahead",
    "PhaseMonitor",
    "Rollout",
    "TDState",
    "TabularBasis",
    "Transcript",
    "run_chain_td",
    "run_phase",
    "td_fixed_point_oracle",
    "td_step",
]


class FunctionBasis:
    """Dense basis from a list of scalar feature functions."""

    def __init__(self, features: Sequence[Callable]):
        self.features = list(features)

    @property
    def n(self) -> int:
        return len(self.features)

    def __len__(self):
        return self.n

    def __call__(self, s) -> np.ndarray:
        return np.array([f(s) for f in self.features], dtype=float)


class TabularBasis:
    """One indicator per state of a finite chain (states ``0..n-1``).

    ``groups`` aggregates states: feature ``g`` is the indicator of the set
    ``groups[g]``.
    """

    def __init__(self, n_states: int, groups: Sequence[Sequence[int]] | None = None):
        groups = [[i] for i in range(n_states)] if groups is None else [list(g) for g in groups]
        self.matrix = np.zeros((n_states, len(groups)))
        for g, members in enumerate(groups):
            self.matrix[members, g] = 1.0

    @property
    def n(self) -> int:
        return self.matrix.shape[1]

    def __len__(self):
        return self.n

    def __call__(self, s) -> np.ndarray:
        return self.matrix[int(s)].copy()


class AtomBasis:
    """Basis of cube-supported atoms with fast sparse evaluation.

    Each atom needs ``cube`` and either ``vertex`` (a Haar wavelet atom) or
    none (a normalized scaling indicator of its cube).  At any point at most
    one cube per level is active.
    """

    def __init__(self, atoms: Sequence, dim: int | None = None):
        self.atoms = list(atoms)
        self.dim = dim if dim is not None else (self.atoms[0].cube.dim if self.atoms else 1)
        self._signs = sign_table(self.dim)
        self._weights = 1 << np.arange(self.dim)
        self._index: dict[int, dict[tuple, list[tuple[int, int]]]] = {}
        for i, atom in enumerate(self.atoms):
            cube = atom.cube
            mask = _vertex_mask(getattr(atom, "vertex", None))
            self._index.setdefault(cube.level, {}).setdefault(cube.index, []).append((i, mask))
        self._levels = sorted(self._index)

    @property
    def n(self) -> int:
        return len(self.atoms)

    def __len__(self):
        return self.n

    def cubes(self) -> list:
        seen = {}
        for atom in self.atoms:
            seen.setdefault(atom.cube, None)
        return list(seen)

    def active(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Indices and values of the atoms that are nonzero at ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        idx, val = [], []
        for j in self._levels:
            k = tuple(int(v) for v in locate_indices(x, j))
            entries = self._index[j].get(k)
            if not entries:
                continue
            c = int((locate_indices(x, j + 1) & 1) @ self._weights)
            scale = 2.0 ** (j * self.dim / 2.0)
            for i, mask in entries:
                idx.append(i)
                val.append(scale * self._signs[c, mask])
        return np.asarray(idx, dtype=np.int64), np.asarray(val, dtype=float)

    def __call__(self, x) -> np.ndarray:
        out = np.zeros(self.n)
        idx, val = self.active(x)
        out[idx] = val
        return out


def _vertex_mask(vertex) -> int:
    if vertex is None:
        return 0
    return sum(int(b) << i for i, b in enumerate(vertex))


@dataclass
class TDState:
    """Weights, trace and step-size rule of one linear TD(lambda) learner.

    ``step_size`` is ``"constant"`` (``alpha`` every step), ``"visits"``
    (per-feature ``1 / visit count``), ``"normalized"`` (``alpha *
    ref_norm / ||b(s)||**2``, which keeps the effective rate of large
    high-level atoms equal to that of the level-0 atoms) or ``"capped"``
    (``alpha``, reduced to ``cap / ||b(s)||**2`` where that is smaller).
    """

    n: int
    alpha: float = 0.001
    gamma: float = 0.8
    lam: float = 0.0
    step_size: str = "constant"
    ref_norm: float = 1.0
    cap: float = 0.5
    theta: np.ndarray = None
    trace: np.ndarray = None
    visits: np.ndarray = field(default=None, repr=False)
    t: int = 0

    def __post_init__(self):
        if self.theta is None:
            self.theta = np.zeros(self.n)
        if self.trace is None:
            self.trace = np.zeros(self.n)
        if self.visits is None:
            self.visits = np.zeros(self.n)
        if self.step_size not in ("constant", "visits", "normalized", "capped"):
            raise ValueError(f"unknown step-size rule {self.step_size!r}")
        if not 0.0 <= self.gamma <= 1.0 or not 0.0 <= self.lam <= 1.0:
            raise ValueError("gamma and lambda must lie in [0, 1]")

    def reset_trace(self) -> None:
        self.trace[:] = 0.0

    def value(self, b: np.ndarray) -> float:
        return float(self.theta @ b)


def td_step(
    td: TDState,
    basis,
    s,
    r: float,
    s_next,
    terminal: bool,
    base: Callable | None = None,
    b: np.ndarray | None = None,
) -> tuple[TDState, float]:
    """One TD(lambda) update on the transition ``(s, r, s_next)``.

    ``td`` is updated in place and returned with the TD error.  Terminal
    transitions bootstrap from 0.  ``b`` may pass a precomputed ``basis(s)``.
    """
    b = basis(s) if b is None else b
    v = float(td.theta @ b) + (base(s) if base is not None else 0.0)
    if not math.isfinite(v):
        raise DivergenceError(f"TD update diverged at step {td.t}")
    if terminal:
        v_next = 0.0
    else:
        v_next = float(td.theta @ basis(s_next)) + (base(s_next) if base is not None else 0.0)
    delta = r + td.gamma * v_next - v
    td.trace *= td.gamma * td.lam
    td.trace += b
    if td.step_size == "visits":
        td.visits += b != 0
        alpha = np.where(td.visits > 0, 1.0 / np.maximum(td.visits, 1.0), 0.0)
        td.theta += alpha * td.trace * delta
    else:
        alpha = td.alpha
        if td.step_size == "normalized":
            nb = float(b @ b)
            alpha = td.alpha * td.ref_norm / nb if nb > 0 else 0.0
        elif td.step_size == "capped":
            nb = float(b @ b)
            alpha = min(td.alpha, td.cap / nb) if nb > 0 else td.alpha
        td.theta += alpha * delta * td.trace
    td.t += 1
    if not math.isfinite(delta) or not math.isfinite(v):
        raise DivergenceError(f"TD update diverged at step {td.t}")
    return td, delta


@dataclass
class PhaseMonitor:
    """Patience counter on the running minimum of ``|delta V|``."""

    patience: int
    lowest: float = math.inf
    u: int = 0

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be at least 1")

    def update(self, abs_delta: float) -> bool:
        """Record one step; True once the phase should end."""
        if abs_delta < self.lowest:
            self.lowest = abs_delta
            self.u = 0
        else:
            self.u += 1
        return self.u > self.patience


class GreedyLookahead:
    """Epsilon-greedy control on one-step lookahead through the env model.

    Ties among greedy actions are broken uniformly at random.  ``epsilon``
    is multiplied by ``decay`` after every episode.
    """

    def __init__(self, env, gamma: float, epsilon: float = 0.1, decay: float = 0.999):
        self.env = env
        self.gamma = gamma
        self.epsilon = epsilon
        self.decay = decay

    def act(self, s, value: Callable, rng: np.random.Generator) -> tuple[int, Transition | None]:
        n = self.env.spec.n_actions
        if n == 1:
            return 0, None
        if rng.random() < self.epsilon:
            a = int(rng.integers(n))
            return a, self.env.step(s, a, rng)
        outs = [self.env.step(s, a, rng) for a in range(n)]
        q = np.array([t.r + (0.0 if t.done else self.gamma * value(self.env.observe(t.s_next))) for t in outs])
        best = np.flatnonzero(q == q.max())
        a = int(best[0]) if len(best) == 1 else int(rng.choice(best))
        return a, outs[a]

    def end_episode(self) -> None:
        self.epsilon *= self.decay


@dataclass
class EpisodeRow:
    episode: int
    steps: int
    ret: float
    phase: int
    basis_size: int
    mean_abs_delta: float


@dataclass
class Transcript:
    """Per-episode rows and per-step ``|delta V|`` values."""

    episodes: list = field(default_factory=list)
    deltas: list = field(default_factory=list)

    HEADER = "episode,steps,return,phase,basisSize,meanAbsDeltaV"

    def extend(self, other: "Transcript") -> None:
        self.episodes.extend(other.episodes)
        self.deltas.extend(other.deltas)

    def to_csv(self) -> str:
        lines = [self.HEADER]
        for e in self.episodes:
            lines.append(
                f"{e.episode},{e.steps},{format(e.ret, '.17g')},{e.phase},{e.basis_size},{format(e.mean_abs_delta, '.17g')}"
            )
        return "\n".join(lines) + "\n"

    def returns(self) -> np.ndarray:
        return np.array([e.ret for e in self.episodes], dtype=float)


class Rollout:
    """Stream of transitions that persists across learning phases.

    Owns the current raw state, episode counters and the controller.  The
    driver sets ``phase`` and ``basis_size`` for the episode rows.
    """

    def __init__(self, env, rng: np.random.Generator, controller: GreedyLookahead | None = None, gamma: float = 0.8):
        self.env = env
        self.rng = rng
        self.controller = controller or GreedyLookahead(env, gamma)
        self.state = env.reset(rng)
        self.episode = 0
        self.steps = 0
        self.ret = 0.0
        self.abs_delta_sum = 0.0
        self.phase = 0
        self.basis_size = 0
        self.total_steps = 0

    def next(self, value: Callable) -> Transition:
        a, tr = self.controller.act(self.state, value, self.rng)
        if tr is None:
            tr = self.env.step(self.state, a, self.rng)
        if not tr.done and self.steps + 1 >= self.env.spec.cap:
            tr = Transition(tr.s, tr.a, tr.r, tr.s_next, False, True)
        return tr

    def advance(self, tr: Transition, abs_delta: float, transcript: Transcript) -> bool:
        """Move to the next state; returns True when an episode ended."""
        self.steps += 1
        self.total_steps += 1
        self.ret += tr.r
        self.abs_delta_sum += abs_delta
        if tr.done or tr.timeout:
            transcript.episodes.append(
                EpisodeRow(self.episode, self.steps, self.ret, self.phase, self.basis_size, self.abs_delta_sum / self.steps)
            )
            self.episode += 1
            self.steps = 0
            self.ret = 0.0
            self.abs_delta_sum = 0.0
            self.controller.end_episode()
            self.state = self.env.reset(self.rng)
            return True
        self.state = tr.s_next
        return False


def run_phase(
    rollout: Rollout,
    basis,
    td: TDState,
    monitor: PhaseMonitor | None,
    base: Callable | None = None,
    max_steps: int = 5_000_000,
    max_episodes: int | None = None,
    hook: Callable | None = None,
) -> tuple[TDState, Transcript]:
    """Run TD(lambda) on ``rollout`` until the patience rule fires.

    With ``monitor=None`` the phase only ends on ``max_episodes`` (counted on
    the rollout's global episode counter).  ``hook(s, v_base, v_theta,
    v_target, delta)`` is called after every update with the quantities used
    in it.  Raises :class:`PhaseTimeoutError` after ``max_steps`` steps.
    """
    transcript = Transcript()
    env = rollout.env

    def value(x):
        return float(td.theta @ basis(x)) + (base(x) if base is not None else 0.0)

    steps = 0
    while True:
        if max_episodes is not None and rollout.episode >= max_episodes:
            return td, transcript
        tr = rollout.next(value)
        x = env.observe(tr.s)
        x_next = env.observe(tr.s_next)
        b = basis(x)
        if hook is not None:
            v_base = base(x) if base is not None else 0.0
            v_theta = float(td.theta @ b)
            v_next = 0.0 if tr.done else value(x_next)
        td, delta = td_step(td, basis, x, tr.r, x_next, tr.done, base=base, b=b)
        if hook is not None:
            hook(x, v_base, v_theta, tr.r + td.gamma * v_next, delta)
        transcript.deltas.append(abs(delta))
        if rollout.advance(tr, abs(delta), transcript):
            td.reset_trace()
        steps += 1
        if monitor is not None and monitor.update(abs(delta)):
            return td, transcript
        if steps >= max_steps:
            raise PhaseTimeoutError(f"phase exceeded {max_steps} steps")


def run_chain_td(chain, basis, td: TDState, episodes: int, rng: np.random.Generator) -> TDState:
    """Policy evaluation on a finite chain, ``episodes`` episodes of TD(lambda).

    A lean loop without controller or transcript, for oracle comparisons.
    """
    n = chain.n_states
    Phi = np.array([basis(s) for s in range(n)], dtype=float)
    cum = np.cumsum(np.column_stack([chain.P, chain.exit_prob]), axis=1)
    cum[:, -1] = 1.0
    start = np.cumsum(chain.start)
    table = _PhiBasis(Phi)
    for _ in range(episodes):
        s = int(np.searchsorted(start, rng.random(), side="right"))
        td.reset_trace()
        for _ in range(chain.spec.cap):
            j = int(np.searchsorted(cum[s], rng.random(), side="right"))
            if j >= n:
                td_step(td, table, s, float(chain.exit_reward[s]), s, True, b=Phi[s])
                break
            td_step(td, table, s, float(chain._move_reward[s]), j, False, b=Phi[s])
            s = j
    return td


class _PhiBasis:
    def __init__(self, Phi):
        self.Phi = Phi

    def __call__(self, s):
        return self.Phi[s]


def td_fixed_point_oracle(chain, basis) -> np.ndarray:
    """TD(0) fixed point by a direct solve of the projected Bellman system.

    Solves ``Phi^T D (I - gamma P) Phi theta = Phi^T D r`` where ``D`` holds
    the on-policy state weighting: expected visits per episode for episodic
    chains, the stationary distribution otherwise.
    """
    n = chain.n_states
    if n > 100:
        raise ValueError("oracle limited to 100 states")
    Phi = np.array([basis(s) for s in range(n)], dtype=float)
    P = chain.P
    if chain.episodic:
        weights = np.linalg.solve((np.eye(n) - P).T, chain.start)
    else:
        evals, evecs = np.linalg.eig(P.T)
        w = np.real(evecs[:, np.argmin(np.abs(evals - 1.0))])
        weights = w / w.sum()
    D = np.diag(weights)
    A = Phi.T @ D @ (np.eye(n) - chain.gamma * P) @ Phi
    rhs = Phi.T @ D @ chain.r
    if np.linalg.matrix_rank(A) < A.shape[0]:
        raise SingularSystemError("projected Bellman system is singular")
    return np.linalg.solve(A, rhs)
