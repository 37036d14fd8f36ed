"""Phase-wise TD learning with tree refinement of a Haar basis.

Each phase trains the atoms of the newest layer with TD(lambda) while all
earlier layers stay frozen, so the target seen by the new layer is the
residual of the frozen value.  When the phase ends, every cube of the layer
whose learned block norm reaches ``eta`` is refined: its children enter the
tree and their nonzero-vertex atoms form the next layer.  Learning stops
when no cube is refined.

``basis="constant"`` is the piecewise-constant variant: the features of a
phase are the scaling indicators of the children of the current partition
cells, nothing is frozen, and a cell is split when the detail of the
learned child values reaches ``eta``.  Learned values carry over between
phases; the children of a split cell start at the value of that cell.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .dyadic import ProperTree, children, complete_to_proper_tree, root
from .errors import DivergenceError, PhaseTimeoutError
from .td import AtomBasis, GreedyLookahead, PhaseMonitor, Rollout, TDState, Transcript, run_phase
from .wavelets import WaveletAtom, vertex_tuple

__all__ = [
    "GMSAConfig",
    "GMSAReport",
    "GMSAState",
    "ScalingAtom",
    "initial_basis",
    "initial_state",
    "refine_basis",
    "run_gmsa",
]


@dataclass(frozen=True)
class ScalingAtom:
    """Normalized indicator ``2**(j*d/2) * 1_I`` of a cube."""

    cube: object

    @property
    def scale(self) -> float:
        return 2.0 ** (self.cube.level * self.cube.dim / 2.0)

    def __call__(self, x) -> float:
        return self.scale if self.cube.contains(x) else 0.0


@dataclass(frozen=True)
class GMSAConfig:
    eta: float = 1e-3
    patience: int = 50
    alpha: float = 0.001
    gamma: float = 0.8
    lam: float = 0.0
    max_phases: int = 100
    j_max: int = 8
    children_augmented: bool = True
    basis: str = "haar"
    step_size: str = "normalized"
    step_cap: float = 0.5
    epsilon: float = 0.1
    epsilon_decay: float = 0.999
    max_phase_steps: int = 5_000_000
    episodes: int | None = None
    uniform_restart: bool = False
    final_training: str = "all"
    seed: int = 0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.max_phases < 1:
            raise ValueError("max_phases must be at least 1")
        if self.basis not in ("haar", "constant"):
            raise ValueError(f"unknown basis kind {self.basis!r}")
        if self.final_training not in ("last", "all", "grow", "grow_all"):
            raise ValueError(f"unknown final training mode {self.final_training!r}")


@dataclass(frozen=True)
class GMSAState:
    """Frozen layers, the current basis and the cubes grown so far.

    For the piecewise-constant variant ``leaves`` holds the partition and
    ``layers`` stays empty.
    """

    dim: int
    tree: ProperTree
    basis: AtomBasis
    layers: tuple = ()
    phase: int = 0
    leaves: tuple = ()
    passed: frozenset = frozenset()
    theta0: np.ndarray | None = field(default=None, repr=False, compare=False)

    def frozen_value(self, x) -> float:
        total = 0.0
        for layer, theta in self.layers:
            idx, val = layer.active(x)
            if len(idx):
                total += float(theta[idx] @ val)
        return total

    @property
    def n_frozen(self) -> int:
        return sum(layer.n for layer, _ in self.layers)


def initial_basis(dim: int) -> AtomBasis:
    """Scaling function and the ``2**d - 1`` mother wavelets on the root."""
    if not 1 <= dim <= 4:
        raise ValueError(f"unsupported dimension {dim}")
    r = root(dim)
    return AtomBasis([WaveletAtom(r, vertex_tuple(m, dim)) for m in range(1 << dim)], dim)


def _leaf_basis(leaves, dim: int, j_max: int) -> AtomBasis:
    atoms = []
    for leaf in leaves:
        if leaf.level < j_max:
            atoms.extend(ScalingAtom(c) for c in children(leaf))
        else:
            atoms.append(ScalingAtom(leaf))
    return AtomBasis(atoms, dim)


def initial_state(dim: int, kind: str = "haar", j_max: int = 8) -> GMSAState:
    r = root(dim)
    tree = ProperTree([r], dim)
    if kind == "haar":
        return GMSAState(dim, tree, initial_basis(dim))
    return GMSAState(dim, tree, _leaf_basis([r], dim, j_max), leaves=(r,))


def _group_by_cube(basis: AtomBasis, theta: np.ndarray) -> dict:
    groups: dict = {}
    for atom, w in zip(basis.atoms, theta):
        groups.setdefault(atom.cube, []).append(float(w))
    return groups


def refine_basis(
    state: GMSAState, theta: np.ndarray, eta: float, j_max: int = 8
) -> tuple[GMSAState, set, dict]:
    """Refine the cubes of the current layer whose block norm reaches ``eta``.

    Returns the new state, the set of refined cubes and the block norm of
    every tested cube.  An empty refined set means learning has converged.
    """
    theta = np.asarray(theta, dtype=float)
    if len(theta) != state.basis.n:
        raise ValueError("theta does not match the current basis")
    if state.leaves:
        return _refine_partition(state, theta, eta, j_max)
    norms = {cube: math.sqrt(sum(w * w for w in ws)) for cube, ws in _group_by_cube(state.basis, theta).items()}
    refined = {c for c, nrm in norms.items() if nrm >= eta and c.level < j_max}
    passed = state.passed | {c for c, nrm in norms.items() if nrm >= eta}
    nodes = set(state.tree.nodes)
    atoms = []
    for cube in sorted(refined):
        for child in children(cube):
            nodes.add(child)
            atoms.extend(WaveletAtom(child, vertex_tuple(m, state.dim)) for m in range(1, 1 << state.dim))
    new = GMSAState(
        dim=state.dim,
        tree=ProperTree(nodes, state.dim),
        basis=AtomBasis(atoms, state.dim),
        layers=state.layers + ((state.basis, theta.copy()),),
        phase=state.phase + 1,
        passed=passed,
    )
    return new, refined, norms


def _refine_partition(state: GMSAState, theta: np.ndarray, eta: float, j_max: int):
    d = state.dim
    groups = _group_by_cube(state.basis, theta)
    norms, refined = {}, set()
    for leaf in state.leaves:
        if leaf.level >= j_max:
            continue
        ws = np.array([groups[c][0] for c in children(leaf)])
        detail = math.sqrt(max(0.0, float(ws @ ws) - float(ws.sum()) ** 2 / (1 << d)))
        norms[leaf] = detail
        if detail >= eta:
            refined.add(leaf)
    leaves = []
    for leaf in state.leaves:
        leaves.extend(children(leaf) if leaf in refined else [leaf])
    leaves = tuple(sorted(leaves))
    basis = _leaf_basis(leaves, d, j_max)
    cell_value = {c: ws[0] * c.volume ** -0.5 for c, ws in groups.items()}
    theta0 = np.array([cell_value.get(a.cube, cell_value.get(a.cube.parent())) for a in basis.atoms])
    theta0 *= np.array([a.cube.volume**0.5 for a in basis.atoms])
    new = GMSAState(
        dim=d,
        tree=complete_to_proper_tree(leaves, d),
        basis=basis,
        phase=state.phase + 1,
        leaves=leaves,
        passed=state.passed | refined,
        theta0=theta0,
    )
    return new, refined, norms


@dataclass
class PhaseRecord:
    phase: int
    basis_size: int
    refined_count: int
    min_block_norm: float
    max_block_norm: float
    steps: int


@dataclass
class GMSAReport:
    phases: list = field(default_factory=list)
    transcript: Transcript = field(default_factory=Transcript)
    tree: ProperTree | None = None
    state: GMSAState | None = None
    converged: bool = False
    failed: bool = False
    message: str = ""

    @property
    def basis_sizes(self) -> list[int]:
        return [p.basis_size for p in self.phases]

    def depth_histogram(self) -> dict[int, int]:
        return self.tree.depth_histogram() if self.tree is not None else {}

    def summary_text(self) -> str:
        lines = ["phase,basisSize,refinedCount,minBlockNorm,maxBlockNorm,steps"]
        for p in self.phases:
            lines.append(
                f"{p.phase},{p.basis_size},{p.refined_count},"
                f"{format(p.min_block_norm, '.17g')},{format(p.max_block_norm, '.17g')},{p.steps}"
            )
        lines.append(f"# converged={self.converged} failed={self.failed}")
        if self.tree is not None:
            hist = " ".join(f"{j}:{n}" for j, n in self.depth_histogram().items())
            lines.append(f"# tree size={len(self.tree)} depth histogram {hist}")
        if self.message:
            lines.append(f"# {self.message}")
        return "\n".join(lines) + "\n"


class _UniformRestart:
    """Wrap an environment so episodes start uniformly inside its bounds."""

    def __init__(self, env):
        self._env = env
        self.spec = env.spec

    def reset(self, rng):
        return rng.uniform(self.spec.low, self.spec.high)

    def __getattr__(self, name):
        return getattr(self._env, name)


def _make_value(state: GMSAState, basis: AtomBasis, theta: np.ndarray, with_frozen: bool) -> Callable:
    def value(x) -> float:
        idx, val = basis.active(x)
        v = float(theta[idx] @ val) if len(idx) else 0.0
        return v + (state.frozen_value(x) if with_frozen else 0.0)

    return value


def run_gmsa(env, config: GMSAConfig, hook: Callable | None = None) -> tuple[Callable, GMSAReport]:
    """Run the phase / refinement loop on ``env``.

    Stops when a refinement is empty, after ``max_phases`` phases, or when
    the episode budget ``config.episodes`` is spent.  If learning converges
    before the budget, the last layer is reopened and trained until the
    budget runs out.  ``hook`` receives ``(x, v_frozen, v_layer, target,
    delta, state)`` for every update, with the values used by it.
    """
    rng = np.random.default_rng(config.seed)
    if config.uniform_restart:
        env = _UniformRestart(env)
    dim = env.spec.dim
    controller = GreedyLookahead(env, config.gamma, config.epsilon, config.epsilon_decay)
    rollout = Rollout(env, rng, controller)
    state = initial_state(dim, config.basis, config.j_max)
    report = GMSAReport()
    ref_norm = float(1 << dim)
    td = None
    last = None

    def phase_hook(st):
        if hook is None:
            return None
        return lambda x, vb, vt, target, delta: hook(x, vb, vt, target, delta, st)

    for phase in range(config.max_phases):
        td = TDState(
            state.basis.n, config.alpha, config.gamma, config.lam, config.step_size, ref_norm=ref_norm
        )
        if state.theta0 is not None:
            td.theta[:] = state.theta0
        rollout.phase = phase
        rollout.basis_size = state.basis.n + state.n_frozen
        base = state.frozen_value if state.layers else None
        steps_before = rollout.total_steps
        try:
            td, tr = run_phase(
                rollout,
                state.basis,
                td,
                PhaseMonitor(config.patience),
                base=base,
                max_steps=config.max_phase_steps,
                max_episodes=config.episodes,
                hook=phase_hook(state),
            )
        except (DivergenceError, PhaseTimeoutError) as exc:
            report.failed = True
            report.message = f"phase {phase}: {exc}"
            break
        report.transcript.extend(tr)
        budget_spent = config.episodes is not None and rollout.episode >= config.episodes
        last = state
        state, refined, norms = refine_basis(state, td.theta, config.eta, config.j_max)
        vals = list(norms.values()) or [0.0]
        report.phases.append(
            PhaseRecord(
                phase, last.basis.n + last.n_frozen, len(refined), min(vals), max(vals),
                rollout.total_steps - steps_before,
            )
        )
        if budget_spent:
            break
        if not refined:
            report.converged = True
            break

    if last is None:
        report.state = state
        report.tree = state.tree
        return (lambda x: 0.0), report

    if report.converged and config.episodes is not None and rollout.episode < config.episodes and not report.failed:
        base = last.frozen_value if last.layers else None
        rollout.phase = len(report.phases)
        try:
            td, tr = run_phase(
                rollout, last.basis, td, None, base=base, max_steps=10**12, max_episodes=config.episodes
            )
            report.transcript.extend(tr)
        except DivergenceError as exc:
            report.failed = True
            report.message = f"final layer: {exc}"

    report.state = state
    report.tree = _report_tree(state, config)
    if last.leaves:
        value = _make_value(last, last.basis, td.theta, with_frozen=False)
    else:
        value = _make_value(last, last.basis, td.theta, with_frozen=True)
    return value, report


def _report_tree(state: GMSAState, config: GMSAConfig) -> ProperTree:
    if config.children_augmented or state.leaves:
        return state.tree
    return complete_to_proper_tree(state.passed, state.dim)
