"""Learner runs and multi-seed comparisons on the control tasks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from ..fast import FastResult, fast_atc, fast_gmsa, fast_tiles
from .config import ExperimentConfig

__all__ = ["CompareResult", "RunSummary", "rl_compare", "rolling_mean", "run_learner"]

LEARNERS = ("gmsa", "atc", "tiles")
CONTROL_ENVS = ("cartpole", "acrobot")


def rolling_mean(returns, window: int = 1000) -> np.ndarray:
    """Trailing mean over ``window`` episodes, one value per full window."""
    r = np.asarray(returns, dtype=float)
    if window < 1:
        raise ValueError("window must be positive")
    if len(r) < window:
        return np.zeros(0)
    c = np.concatenate([[0.0], np.cumsum(r)])
    return (c[window:] - c[:-window]) / window


def run_learner(cfg: ExperimentConfig, learner: str, seed: int, episodes: int) -> FastResult:
    env = cfg.get("env.name")
    if env not in CONTROL_ENVS:
        raise ConfigError(f"learner runs need a control task, got env.name={env}")
    kw = dict(low=cfg.get("env.bounds.low"), high=cfg.get("env.bounds.high"), cap=cfg.get("env.cap"))
    if learner == "gmsa":
        return fast_gmsa(env, cfg.gmsa(seed, episodes), **kw)
    if learner == "atc":
        return fast_atc(env, cfg.atc(seed, episodes), **kw)
    if learner == "tiles":
        return fast_tiles(env, cfg.tiles(seed, episodes), **kw)
    raise ConfigError(f"unknown learner {learner!r}")


@dataclass(frozen=True)
class RunSummary:
    env: str
    learner: str
    seed: int
    episodes: int
    first_at_threshold: int
    rolling_at_threshold: int
    final_rolling_mean: float
    failed: bool
    message: str = ""

    HEADER = "env,learner,seed,episodes,firstEpisodeAtThreshold,rollingEpisodeAtThreshold,finalRollingMean,failed"

    def row(self) -> str:
        return (
            f"{self.env},{self.learner},{self.seed},{self.episodes},{self.first_at_threshold},"
            f"{self.rolling_at_threshold},{format(self.final_rolling_mean, '.17g')},{int(self.failed)}"
        )


def summarize(env: str, learner: str, seed: int, result: FastResult, window: int, thr: float) -> RunSummary:
    ret = result.returns
    roll = rolling_mean(ret, window)
    hit = np.flatnonzero(ret >= thr)
    rhit = np.flatnonzero(roll >= thr)
    return RunSummary(
        env,
        learner,
        seed,
        len(ret),
        int(hit[0]) if len(hit) else -1,
        int(rhit[0]) + window - 1 if len(rhit) else -1,
        float(roll[-1]) if len(roll) else math.nan,
        result.failed,
        result.message,
    )


@dataclass
class CompareResult:
    summaries: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def final(self, learner: str) -> dict[int, float]:
        return {s.seed: s.final_rolling_mean for s in self.summaries if s.learner == learner}

    def wins(self, a: str, b: str, ties: bool = False) -> int:
        fa, fb = self.final(a), self.final(b)
        return sum(1 for s in fa if s in fb and (fa[s] > fb[s] or (ties and fa[s] == fb[s])))

    def summary_csv(self) -> str:
        return "\n".join([RunSummary.HEADER] + [s.row() for s in self.summaries]) + "\n"


def _threshold(cfg: ExperimentConfig) -> float:
    thr = cfg.get("compare.threshold")
    if thr is not None:
        return float(thr)
    env = cfg.get("env.name")
    cap = cfg.get("env.cap")
    if env == "cartpole":
        return float(cap or 200)
    return -100.0


def rl_compare(cfg: ExperimentConfig, out: str | Path | None = None, progress=None) -> CompareResult:
    """Run every configured learner on every seed and write CSV reports.

    Files per run: ``<env>_<learner>_seed<s>.csv`` (episodes) and
    ``<env>_<learner>_seed<s>_rolling.csv``; plus ``summary.csv``.
    """
    env = cfg.get("env.name")
    learners = cfg.get("learner.name")
    for name in learners:
        if name not in LEARNERS:
            raise ConfigError(f"unknown learner {name!r}")
    seeds = cfg.get("experiment.seeds")
    episodes = cfg.get("compare.episodes")
    window = cfg.get("compare.window")
    thr = _threshold(cfg)
    outdir = Path(out) if out is not None else None
    if outdir is not None:
        outdir.mkdir(parents=True, exist_ok=True)
    result = CompareResult()
    for learner in learners:
        for seed in seeds:
            run = run_learner(cfg, learner, seed, episodes)
            summ = summarize(env, learner, seed, run, window, thr)
            result.summaries.append(summ)
            if progress is not None:
                progress(summ)
            if outdir is not None:
                stem = f"{env}_{learner}_seed{seed}"
                p = outdir / f"{stem}.csv"
                p.write_text(run.transcript().to_csv())
                roll = rolling_mean(run.returns, window)
                lines = ["episode,rollingMean"] + [
                    f"{i + window - 1},{format(v, '.17g')}" for i, v in enumerate(roll)
                ]
                q = outdir / f"{stem}_rolling.csv"
                q.write_text("\n".join(lines) + "\n")
                result.files += [p, q]
    if outdir is not None:
        p = outdir / "summary.csv"
        p.write_text(result.summary_csv())
        result.files.append(p)
    return result
