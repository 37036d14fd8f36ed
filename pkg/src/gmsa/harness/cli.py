"""Command-line entry point: ``gmsa {approx,train,compare,selftest}``.

Exit status is 0 on success, 1 for invalid input and 2 when a run fails.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..envs import DyadicStepMRP
from ..errors import ConfigError, GMSAError
from .config import REGISTRY, ExperimentConfig, load_config

__all__ = ["main"]


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file with 'key = value' lines")
    p.add_argument("--seed", type=int, help="single seed (replaces experiment.seeds)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--env", help="environment name")
    p.add_argument("--learner", help="learner name(s), comma separated")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gmsa", description="Multiscale tree approximation and adaptive TD learning.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True
    p = sub.add_parser("approx", help="error rates of tree thresholding on a synthetic function")
    _common(p)
    p = sub.add_parser("train", help="one learner run")
    _common(p)
    p = sub.add_parser("compare", help="learners across seeds on a control task")
    _common(p)
    p = sub.add_parser("selftest", help="invariant and oracle checks")
    _common(p)
    p.add_argument("--rates", action="store_true", help="also run the rate-fit checks")
    p.add_argument("--long", action="store_true", help="also run the 50k-episode control comparison")
    p = sub.add_parser("keys", help="list configuration keys")
    return parser


def _config(args) -> ExperimentConfig:
    overrides = list(args.set)
    if args.env:
        overrides.append(f"env.name={args.env}")
    if args.learner:
        overrides.append(f"learner.name={args.learner}")
    if args.seed is not None:
        overrides.append(f"experiment.seeds={args.seed}")
    if args.out:
        overrides.append(f"experiment.out={args.out}")
    return load_config(args.config, overrides)


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    print(out / name)


def _out(args, cfg) -> Path | None:
    return Path(cfg.get("experiment.out")) if args.out or "experiment.out" in cfg.values else None


def cmd_approx(args) -> int:
    from .rates import eta_grid, rate_experiment_eta, rate_experiment_N

    cfg = _config(args)
    grid = eta_grid(cfg.get("approx.eta_min"), cfg.get("approx.eta_max"), cfg.get("approx.eta_points"))
    f, J, Q = cfg.get("approx.f"), cfg.get("approx.J"), cfg.get("approx.Q")
    err_fit, count_fit, table = rate_experiment_eta(f, J, grid, Q)
    out = _out(args, cfg)
    _emit(err_fit.to_csv("eta", "error"), out, f"{f}_error_vs_eta.csv")
    if out is not None:
        n_fit, _ = rate_experiment_N(f, J, grid, Q)
        _emit(count_fit.to_csv("inv_eta", "N"), out, f"{f}_N_vs_inv_eta.csv")
        if not n_fit.exact:
            _emit(n_fit.to_csv("N", "error"), out, f"{f}_error_vs_N.csv")
        _emit(table.to_csv(), out, f"{f}_table.csv")
    return 0


def cmd_train(args) -> int:
    cfg = _config(args)
    learners = cfg.get("learner.name")
    if len(learners) != 1:
        raise ConfigError("train runs exactly one learner")
    learner = learners[0]
    seed = cfg.get("env.seed")
    seed = cfg.get("experiment.seeds")[0] if seed is None else seed
    episodes = cfg.get("compare.episodes")
    env_name = cfg.get("env.name")
    out = _out(args, cfg)
    stem = f"{env_name}_{learner}_seed{seed}"
    if env_name == "step_mrp":
        episodes = cfg.values.get("compare.episodes")
        env = DyadicStepMRP(gamma=cfg.get(f"{learner}.gamma") if learner != "tiles" else 0.0)
        if learner == "gmsa":
            from ..refinement import run_gmsa

            _, rep = run_gmsa(env, cfg.gmsa(seed, episodes))
            transcript, failed, msg = rep.transcript, rep.failed, rep.message
            if out is not None:
                _emit(rep.summary_text(), out, f"{stem}_phases.csv")
        elif learner == "atc":
            from ..baselines import atc_learn

            _, rep = atc_learn(env, cfg.atc(seed, episodes))
            transcript, failed, msg = rep.transcript, rep.failed, rep.message
        else:
            raise ConfigError("tiles runs need a control task")
    else:
        from .compare import run_learner

        res = run_learner(cfg, learner, seed, episodes)
        transcript, failed, msg = res.transcript(), res.failed, res.message
    _emit(transcript.to_csv(), out, f"{stem}.csv")
    if failed:
        print(f"run failed: {msg}", file=sys.stderr)
        return 2
    return 0


def cmd_compare(args) -> int:
    from .compare import rl_compare

    cfg = _config(args)
    out = Path(cfg.get("experiment.out"))
    progress = lambda s: print(  # noqa: E731
        f"{s.env} {s.learner} seed {s.seed}: final rolling mean {s.final_rolling_mean:.2f}", file=sys.stderr
    )
    res = rl_compare(cfg, out, progress=progress)
    sys.stdout.write(res.summary_csv())
    return 2 if any(s.failed for s in res.summaries) else 0


def cmd_selftest(args) -> int:
    from .acceptance import CRITERIA

    quick = [1, 2, 3, 4, 5, 8, 9, 11]
    chosen = quick + ([6, 7] if args.rates else []) + ([10] if args.long else [])
    ok = True
    for n in sorted(chosen):
        res = CRITERIA[n]()
        print(res.line(), flush=True)
        ok &= res.passed
    return 0 if ok else 2


def cmd_keys(args) -> int:
    for k in REGISTRY.values():
        default = "" if k.default is None else k.default
        if isinstance(default, list):
            default = ",".join(map(str, default))
        print(f"{k.name} = {default}    # {k.doc}")
    return 0


COMMANDS = {
    "approx": cmd_approx,
    "train": cmd_train,
    "compare": cmd_compare,
    "selftest": cmd_selftest,
    "keys": cmd_keys,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"gmsa: {exc}", file=sys.stderr)
        return 1
    except (GMSAError, OSError, FloatingPointError) as exc:
        print(f"gmsa: run failed: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"gmsa: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
