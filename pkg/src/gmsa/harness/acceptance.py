"""Acceptance checks, one function per criterion.

Each check returns a :class:`CriterionResult`; tolerances are fixed here.
``gmsa selftest`` runs the invariant and oracle checks by default; the
rate fits (6, 7) and the control-task comparison (10) are opt-in.
"""

from __future__ import annotations

import itertools
import math
import time
from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from ..approximation import best_m_term, term_count, threshold, tree_error
from ..baselines import ATCConfig, atc_learn
from ..dyadic import DyadicCube
from ..envs import DyadicStepMRP, chain_mdp
from ..refinement import GMSAConfig, run_gmsa
from ..td import TabularBasis, TDState, run_chain_td, td_fixed_point_oracle
from ..wavelets import CoeffTree, DyadicStep, WaveletAtom, decompose, eval_atom, project_Pj, vertex_tuple
from .compare import rl_compare
from .config import ExperimentConfig
from .functions import SUITE
from .rates import eta_grid, rate_experiment_eta, rate_experiment_N

__all__ = ["CRITERIA", "CriterionResult", "run_all"]

ETA_GRID = (1e-4, 1e-1, 30)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"{tag} [{self.number:2d}] {self.title}: {self.detail} ({self.seconds:.1f}s)"


def _timed(number: int, title: str, fn: Callable[[], tuple[bool, str]], limit: float | None = None):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt > limit:
        ok = False
        detail += f"; runtime {dt:.1f}s over {limit:.0f}s"
    return CriterionResult(number, title, bool(ok), detail, dt)


# 1 -----------------------------------------------------------------------


def _atoms_upto(dim: int, level: int) -> list[WaveletAtom]:
    atoms = [WaveletAtom(DyadicCube(0, (0,) * dim), vertex_tuple(0, dim))]
    for j in range(level + 1):
        for k in itertools.product(range(1 << j), repeat=dim):
            atoms += [WaveletAtom(DyadicCube(j, k), vertex_tuple(m, dim)) for m in range(1, 1 << dim)]
    return atoms


def gram_matrix(dim: int, level: int) -> np.ndarray:
    """Exact Gram matrix of all atoms of levels ``<= level``.

    Every atom is constant on the cells of level ``level + 1``, so midpoint
    sums over that grid integrate products exactly.
    """
    atoms = _atoms_upto(dim, level)
    fine = level + 1
    n = 1 << fine
    M = np.zeros((len(atoms), n**dim))
    for a, atom in enumerate(atoms):
        cube = atom.cube
        span = 1 << (fine - cube.level)
        ranges = [range(k * span, (k + 1) * span) for k in cube.index]
        for cell in itertools.product(*ranges):
            x = (np.asarray(cell) + 0.5) / n
            M[a, np.ravel_multi_index(cell, (n,) * dim)] = eval_atom(atom, x)
    return M @ M.T / n**dim


def criterion_1() -> CriterionResult:
    def run():
        worst = 0.0
        sizes = []
        for d in (1, 2):
            G = gram_matrix(d, 4)
            sizes.append(len(G))
            worst = max(worst, float(np.max(np.abs(G - np.eye(len(G))))))
        return worst <= 1e-10, f"max |<a,b> - delta| = {worst:.2e} over {sizes} atoms (tol 1e-10)"

    return _timed(1, "orthonormality up to level 4, d in {1,2}", run, limit=10.0)


# 2 -----------------------------------------------------------------------


def criterion_2(n_functions: int = 50, seed: int = 0) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for d, J in ((1, 10), (2, 5)):
            n = 1 << J
            mids = (np.arange(n) + 0.5) / n
            grid = np.stack([g.reshape(-1) for g in np.meshgrid(*([mids] * d), indexing="ij")], axis=1)
            for _ in range(n_functions):
                L = int(rng.integers(0, J + 1))
                f = DyadicStep(rng.standard_normal((1 << L,) * d))
                coeffs = decompose(f, J)
                err = np.max(np.abs(project_Pj(coeffs, J, grid) - f(grid)))
                worst = max(worst, float(err))
        return worst <= 1e-12, f"max midpoint error {worst:.2e} over {2 * n_functions} steps (tol 1e-12)"

    return _timed(2, "perfect reconstruction of dyadic steps", run)


# 3 -----------------------------------------------------------------------


def criterion_3() -> CriterionResult:
    def run():
        worst = 0.0
        for name, f in SUITE.items():
            J = 14 if f.dim == 1 else 8
            coeffs = decompose(f, J)
            energy = float(np.mean(f.cell_averages(J) ** 2))
            blocks = sum(float(np.sum(coeffs.block_norms(j) ** 2)) for j in range(J))
            worst = max(worst, abs(energy - blocks))
        return worst <= 1e-10, f"max | ||P_J f||^2 - sum of block energies | = {worst:.2e} (tol 1e-10)"

    return _timed(3, "Parseval identity on the synthetic suite", run)


# 4 -----------------------------------------------------------------------


def criterion_4(n_trees: int = 200, seed: int = 0) -> CriterionResult:
    def run():
        rng = np.random.default_rng(seed)
        worst = 0.0
        for t in range(n_trees):
            d = 1 + t % 2
            J = 6 if d == 1 else 4
            levels = [np.zeros((1 << j,) * d + (1 << d,)) for j in range(J)]
            masks = [rng.random((1 << j,) * d) < rng.uniform(0.05, 0.6) for j in range(J)]
            masks[0][...] = rng.random() < 0.8
            if not any(m.any() for m in masks):
                masks[J - 1].flat[0] = True
            for j in range(J):
                vals = rng.standard_normal(levels[j].shape) * rng.uniform(0.1, 3.0)
                if j > 0:
                    vals[..., 0] = 0.0
                levels[j][masks[j]] = vals[masks[j]]
            tree = CoeffTree(d, levels)
            norms = np.concatenate([tree.block_norms(j)[masks[j]] for j in range(J)])
            n = 1 << J
            mids = (np.arange(n) + 0.5) / n
            grid = np.stack([g.reshape(-1) for g in np.meshgrid(*([mids] * d), indexing="ij")], axis=1)
            total = math.sqrt(float(np.mean(tree.evaluate(grid) ** 2)))
            root_n = math.sqrt(len(norms))
            lo = norms.min() * root_n - total
            hi = total - norms.max() * root_n
            worst = max(worst, lo, hi)
        return worst <= 1e-10, f"largest bound violation {worst:.2e} over {n_trees} trees (tol 1e-10)"

    return _timed(4, "block-sum norm bounds", run)


# 5 -----------------------------------------------------------------------


def criterion_5() -> CriterionResult:
    def run():
        grid = eta_grid(*ETA_GRID)
        bad = []
        for name in ("step1d", "linear1d", "bump2d", "step2d"):
            f = SUITE[name]
            coeffs = decompose(f, 12 if f.dim == 1 else 7)
            prev_tree, prev_err = None, None
            for eta in grid:  # decreasing thresholds
                res = threshold(coeffs, eta)
                err = tree_error(coeffs, res)
                if prev_tree is not None and not prev_tree <= res.tree:
                    bad.append(f"{name}: trees not nested at eta={eta:.3g}")
                if prev_err is not None and err > prev_err:
                    bad.append(f"{name}: error increased at eta={eta:.3g}")
                _, m_err = best_m_term(coeffs, term_count(res))
                if m_err > err * (1 + 1e-12):
                    bad.append(f"{name}: best m-term above tree error at eta={eta:.3g}")
                prev_tree, prev_err = res.tree, err
        detail = "nesting, monotone error and m-term dominance on 4 functions x 30 thresholds"
        return not bad, detail if not bad else "; ".join(bad[:3])

    return _timed(5, "tree monotonicity", run)


# 6 -----------------------------------------------------------------------


def criterion_6() -> CriterionResult:
    def run():
        err_fit, count_fit, _ = rate_experiment_eta("step1d", 14, eta_grid(*ETA_GRID))
        predicted = 1.0 - count_fit.slope / 2.0
        gap = err_fit.slope - predicted
        ok = err_fit.residual < 0.05 and abs(gap) <= 0.15
        return ok, (
            f"error slope {err_fit.slope:.3f} vs 1 - lambda/2 = {predicted:.3f} "
            f"(lambda {count_fit.slope:.3f}, gap {gap:+.3f}, tol 0.15); residual {err_fit.residual:.3f} (cap 0.05)"
        )

    return _timed(6, "error-threshold consistency on step1d, J=14", run, limit=60.0)


# 7 -----------------------------------------------------------------------


def criterion_7() -> CriterionResult:
    def run():
        parts, ok = [], True
        for name, J in (("linear1d", 14), ("bump2d", 8), ("step2d", 8)):
            fit, _ = rate_experiment_N(name, J, eta_grid(*ETA_GRID))
            target = SUITE[name].slope_N
            good = fit.residual < 0.05 and abs(fit.slope - target) <= 0.15
            ok &= good
            parts.append(f"{name} {fit.slope:.3f} vs {target:+.2f} (res {fit.residual:.3f})")
        return ok, "; ".join(parts)

    return _timed(7, "error vs N slopes equal -s/d", run)


# 8 -----------------------------------------------------------------------


def criterion_8(episodes: int = 100_000) -> CriterionResult:
    def run():
        chain = chain_mdp(5, 1.0, "random_walk")
        tab = TabularBasis(5)
        td = TDState(5, alpha=0.001, gamma=1.0, step_size="constant")
        run_chain_td(chain, tab, td, episodes, np.random.default_rng(8))
        e_tab = float(np.max(np.abs(td.theta - chain.values())))
        agg = TabularBasis(5, [[0, 1], [2], [3, 4]])
        oracle = td_fixed_point_oracle(chain, agg)
        td2 = TDState(3, alpha=0.001, gamma=1.0, step_size="constant")
        run_chain_td(chain, agg, td2, episodes // 5, np.random.default_rng(9))
        e_lin = float(np.max(np.abs(td2.theta - oracle)))
        ok = e_tab <= 0.02 and e_lin <= 0.05
        return ok, f"tabular error {e_tab:.4f} (tol 0.02); aggregated-feature error {e_lin:.4f} (tol 0.05)"

    return _timed(8, "TD fixed points on the 5-state walk", run, limit=30.0)


# 9 -----------------------------------------------------------------------

STEP_MRP_GMSA = dict(eta=0.05, patience=200, alpha=0.01, j_max=6)


def criterion_9(seeds=range(10)) -> CriterionResult:
    def run():
        env = DyadicStepMRP(gamma=0.5)
        target = threshold(decompose(env.value_function(), 8), 1e-9).tree
        hits = 0
        for seed in seeds:
            _, rep = run_gmsa(env, GMSAConfig(gamma=0.5, seed=seed, **STEP_MRP_GMSA))
            tree = rep.tree
            if all(c in tree for c in target) and tree.depth <= target.depth + 1:
                hits += 1
        n = len(list(seeds))
        return hits >= 8, f"{hits}/{n} seeds recover the support tree within one level (need 8)"

    return _timed(9, "structure recovery on the step MDP", run)


# 10 ----------------------------------------------------------------------


def criterion_10(seeds=range(1, 11), episodes: int = 50_000, progress=None) -> CriterionResult:
    def run():
        limit = 30 * 60.0
        parts, ok = [], True
        for env, rival, need, ties in (("cartpole", "tiles", 7, False), ("acrobot", "atc", 6, True)):
            cfg = ExperimentConfig()
            cfg.set("env.name", env)
            cfg.set("experiment.seeds", list(seeds))
            cfg.set("compare.episodes", episodes)
            times = {}
            results = []
            for learner in ("gmsa", rival):
                cfg.set("learner.name", [learner])
                t0 = time.perf_counter()
                results.append(rl_compare(cfg, progress=progress))
                times[learner] = time.perf_counter() - t0
            res = results[0]
            res.summaries += results[1].summaries
            wins = res.wins("gmsa", rival, ties=ties)
            slow = [k for k, v in times.items() if v > limit]
            good = wins >= need and not slow
            ok &= good
            g = np.mean(list(res.final("gmsa").values()))
            r = np.mean(list(res.final(rival).values()))
            parts.append(
                f"{env}: gmsa ahead of {rival} in {wins}/{len(list(seeds))} (need {need}; "
                f"mean final {g:.1f} vs {r:.1f}; {times['gmsa']:.0f}s/{times[rival]:.0f}s)"
            )
        return ok, "; ".join(parts)

    return _timed(10, "control-task comparison at 50k episodes", run)


# 11 ----------------------------------------------------------------------

STEP_MRP_PARTITION = dict(eta=0.05, patience=200, alpha=0.01, j_max=5)


def criterion_11(seeds=range(10)) -> CriterionResult:
    def run():
        env = DyadicStepMRP(gamma=0.0)
        same = 0
        for seed in seeds:
            _, rep = run_gmsa(env, GMSAConfig(gamma=0.0, basis="constant", seed=seed, **STEP_MRP_PARTITION))
            atc, _ = atc_learn(
                env, ATCConfig(gamma=0.0, initial_level=0, split="all", seed=seed, **STEP_MRP_PARTITION)
            )
            same += set(rep.state.leaves) == set(atc.partition())
        n = len(list(seeds))
        return same == n, f"identical final partitions in {same}/{n} seeds"

    return _timed(11, "piecewise-constant GMSA equals ATC on the step MDP", run)


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
}


def run_all(include_long: bool = False, echo=print) -> list[CriterionResult]:
    out = []
    for n, fn in CRITERIA.items():
        if n == 10 and not include_long:
            continue
        res = fn()
        out.append(res)
        if echo is not None:
            echo(res.line())
    return out
