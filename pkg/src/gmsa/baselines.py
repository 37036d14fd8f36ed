"""Fixed tile coding and an adaptive piecewise-constant learner (ATC-like).

Tile coding overlays ``tilings`` uniform grids of tile ``width`` on the unit
cube, each shifted by its own offset; a point activates one tile per tiling.

The adaptive learner keeps a dyadic partition.  Every leaf carries its real
value and the values its children would have if it were split; both are
trained by TD on the same stream.  At the end of a phase (same patience
rule as the wavelet learner) the leaf whose hypothetical children differ
most, measured by ``sqrt(vol_child * sum (v_c - mean v)**2)``, is split when
that detail reaches ``eta``.  The detail equals the L2 norm of the Haar
detail of the child values, which makes this the scaling-only special case
of the wavelet learner.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicCube, ProperTree, children, complete_to_proper_tree, locate_indices
from .errors import PhaseTimeoutError
from .td import GreedyLookahead, PhaseMonitor, Rollout, Transcript

__all__ = [
    "ATCConfig",
    "ATCReport",
    "ATCTree",
    "TileBasis",
    "TileCoder",
    "atc_learn",
    "tile_features",
]


@dataclass(frozen=True)
class TileCoder:
    """``tilings`` grids of ``tiles_per_dim**d`` tiles, shifted by ``offsets``."""

    dim: int
    tilings: int
    tiles_per_dim: int
    width: float
    offsets: np.ndarray = field(compare=False)

    def __post_init__(self):
        off = np.asarray(self.offsets, dtype=float)
        if off.shape != (self.tilings, self.dim):
            raise ValueError("offsets must have shape (tilings, dim)")
        if np.any(off < 0) or np.any(off >= self.width):
            raise ValueError("offsets must lie in [0, width)")
        if self.tiles_per_dim * self.width < 1.0 + off.max() - 1e-12:
            raise ValueError("tiles do not cover the unit cube")
        object.__setattr__(self, "offsets", off)

    @classmethod
    def uniform(cls, dim: int, tilings: int = 10, width: float = 0.025) -> "TileCoder":
        """Evenly spaced diagonal offsets ``t * width / tilings``."""
        if tilings < 1 or not 0 < width <= 1:
            raise ValueError("need tilings >= 1 and width in (0, 1]")
        base = math.ceil(1.0 / width - 1e-9)
        per_dim = base + (1 if tilings > 1 else 0)
        offsets = np.repeat((np.arange(tilings) * width / tilings)[:, None], dim, axis=1)
        return cls(dim, tilings, per_dim, width, offsets)

    @classmethod
    def dyadic(cls, dim: int, level: int) -> "TileCoder":
        """One unshifted tiling equal to the level-``level`` dyadic grid."""
        return cls(dim, 1, 1 << level, 2.0**-level, np.zeros((1, dim)))

    @property
    def n_features(self) -> int:
        return self.tilings * self.tiles_per_dim**self.dim

    def indices(self, x) -> np.ndarray:
        """Flat index of the active tile in each tiling."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"expected a point of dimension {self.dim}")
        cells = np.floor((x[None, :] + self.offsets) / self.width).astype(np.int64)
        np.clip(cells, 0, self.tiles_per_dim - 1, out=cells)
        strides = self.tiles_per_dim ** np.arange(self.dim - 1, -1, -1, dtype=np.int64)
        return np.arange(self.tilings, dtype=np.int64) * self.tiles_per_dim**self.dim + cells @ strides


def tile_features(coder: TileCoder, x) -> tuple[np.ndarray, np.ndarray]:
    """Sparse binary feature vector as ``(indices, ones)``."""
    idx = coder.indices(x)
    return idx, np.ones(len(idx))


class TileBasis:
    """Feature basis view of a tile coder (dense ``__call__``)."""

    def __init__(self, coder: TileCoder):
        self.coder = coder

    @property
    def n(self) -> int:
        return self.coder.n_features

    def __len__(self):
        return self.n

    def active(self, x):
        return tile_features(self.coder, x)

    def __call__(self, x) -> np.ndarray:
        out = np.zeros(self.n)
        out[self.coder.indices(x)] = 1.0
        return out


class ATCTree:
    """Dyadic partition with real and hypothetical child values per leaf."""

    def __init__(self, dim: int, initial_level: int = 1):
        self.dim = dim
        self.n_children = 1 << dim
        self.value: dict[DyadicCube, float] = {}
        self.child_value: dict[DyadicCube, np.ndarray] = {}
        self._weights = 1 << np.arange(dim)[::-1]
        cubes = [DyadicCube(0, (0,) * dim)]
        for _ in range(initial_level):
            cubes = [c for cube in cubes for c in children(cube)]
        for c in cubes:
            self._add_leaf(c, 0.0)

    def _add_leaf(self, cube: DyadicCube, v: float) -> None:
        self.value[cube] = v
        self.child_value[cube] = np.full(self.n_children, v)

    @property
    def leaves(self) -> list[DyadicCube]:
        return sorted(self.value)

    def partition(self) -> tuple:
        return tuple(self.leaves)

    def tree(self) -> ProperTree:
        return complete_to_proper_tree(self.value, self.dim)

    def leaf_of(self, x) -> DyadicCube:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = 0
        while True:
            cube = DyadicCube(j, tuple(int(v) for v in locate_indices(x, j)))
            if cube in self.value:
                return cube
            j += 1
            if j > 24:
                raise KeyError("point not covered by the partition")

    def child_slot(self, cube: DyadicCube, x) -> int:
        """Position of the child containing ``x`` in ``children(cube)`` order."""
        bits = locate_indices(np.atleast_1d(np.asarray(x, dtype=float)), cube.level + 1) & 1
        return int(bits @ self._weights)

    def __call__(self, x) -> float:
        return self.value[self.leaf_of(x)]

    def criterion(self, cube: DyadicCube) -> float:
        u = self.child_value[cube]
        vol = 2.0 ** (-(cube.level + 1) * self.dim)
        return math.sqrt(vol * float(np.sum((u - u.mean()) ** 2)))

    def split(self, cube: DyadicCube) -> None:
        u = self.child_value.pop(cube)
        del self.value[cube]
        for c, v in zip(children(cube), u):
            self._add_leaf(c, float(v))

    def is_partition(self) -> bool:
        """Leaves are disjoint and their volumes sum to one."""
        vol = sum(c.volume for c in self.value)
        if abs(vol - 1.0) > 1e-12:
            return False
        for c in self.value:
            p = c
            while p.level > 0:
                p = p.parent()
                if p in self.value:
                    return False
        return True


@dataclass(frozen=True)
class ATCConfig:
    eta: float = 1e-3
    patience: int = 50
    alpha: float = 0.001
    gamma: float = 0.8
    lam: float = 0.0
    initial_level: int = 1
    split: str = "max"
    max_splits: int | None = None
    j_max: int = 8
    epsilon: float = 0.1
    epsilon_decay: float = 0.999
    max_phase_steps: int = 5_000_000
    max_phases: int = 10_000
    episodes: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.split not in ("max", "all"):
            raise ValueError(f"unknown split policy {self.split!r}")
        if self.initial_level < 0:
            raise ValueError("initial level must be non-negative")


@dataclass
class ATCReport:
    transcript: Transcript = field(default_factory=Transcript)
    partitions: list = field(default_factory=list)
    splits: list = field(default_factory=list)
    tree: ProperTree | None = None
    converged: bool = False
    failed: bool = False
    message: str = ""


def atc_learn(env, config: ATCConfig, tree: ATCTree | None = None) -> tuple[Callable, ATCReport]:
    """TD(lambda) on leaf indicators with value-criterion splits.

    Each leaf indicator has a step ``alpha * 2**d`` (the rate of a level-0
    normalized atom).  Hypothetical child values take one-step TD updates
    towards the same target as the real value, and the patience counter
    follows their errors since they decide the splits.
    """
    rng = np.random.default_rng(config.seed)
    dim = env.spec.dim
    atc = tree if tree is not None else ATCTree(dim, config.initial_level)
    rate = config.alpha * (1 << dim)
    gl = config.gamma * config.lam
    controller = GreedyLookahead(env, config.gamma, config.epsilon, config.epsilon_decay)
    rollout = Rollout(env, rng, controller)
    report = ATCReport()
    trace: dict[DyadicCube, float] = {}
    splits_done = 0
    splitting = True
    phase = 0

    while phase < config.max_phases:
        rollout.phase = phase
        rollout.basis_size = len(atc.value)
        monitor = PhaseMonitor(config.patience) if splitting else None
        steps = 0
        ended = False
        while True:
            if config.episodes is not None and rollout.episode >= config.episodes:
                ended = True
                break
            tr = rollout.next(atc)
            x = env.observe(tr.s)
            leaf = atc.leaf_of(x)
            v = atc.value[leaf]
            v_next = 0.0 if tr.done else atc(env.observe(tr.s_next))
            target = tr.r + config.gamma * v_next
            delta = target - v
            if not (math.isfinite(delta) and math.isfinite(v)):
                report.failed = True
                report.message = f"diverged at phase {phase}"
                break
            if gl > 0.0:
                for k in trace:
                    trace[k] *= gl
                trace[leaf] = trace.get(leaf, 0.0) + 1.0
                for k, z in trace.items():
                    atc.value[k] += rate * delta * z
            else:
                atc.value[leaf] += rate * delta
            slot = atc.child_slot(leaf, x)
            child_delta = target - atc.child_value[leaf][slot]
            atc.child_value[leaf][slot] += rate * child_delta
            report.transcript.deltas.append(abs(delta))
            if rollout.advance(tr, abs(delta), report.transcript):
                trace.clear()
            steps += 1
            if monitor is not None and monitor.update(abs(child_delta)):
                break
            if monitor is not None and steps >= config.max_phase_steps:
                report.failed = True
                report.message = str(PhaseTimeoutError(f"phase exceeded {config.max_phase_steps} steps"))
                break
        if report.failed or ended or not splitting:
            break
        report.partitions.append(atc.partition())
        if config.max_splits is not None and splits_done >= config.max_splits:
            chosen = []
        else:
            crit = {c: atc.criterion(c) for c in atc.leaves if c.level < config.j_max}
            if config.split == "max":
                best = max(crit, key=lambda c: (crit[c], c), default=None) if crit else None
                chosen = [best] if best is not None and crit[best] >= config.eta else []
            else:
                chosen = [c for c in sorted(crit) if crit[c] >= config.eta]
        for c in chosen:
            atc.split(c)
            trace.pop(c, None)
        splits_done += len(chosen)
        report.splits.append(len(chosen))
        phase += 1
        if not chosen:
            report.converged = True
            splitting = False
            if config.episodes is None:
                break
    report.tree = atc.tree()
    return atc, report
