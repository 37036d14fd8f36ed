"""Flat ``section.key = value`` configuration with a fixed key registry.

Files hold one assignment per line; ``#`` starts a comment.  Every key must
be registered below, values are parsed by the registered type, and a key
may be abbreviated to its last component when that is unambiguous
(``f`` for ``approx.f``).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..baselines import ATCConfig
from ..errors import ConfigError
from ..fast import TilesConfig
from ..refinement import GMSAConfig

__all__ = ["REGISTRY", "ExperimentConfig", "Key", "load_config", "parse_text"]


@dataclass(frozen=True)
class Key:
    name: str
    kind: str
    default: object
    doc: str
    choices: tuple = ()


def _k(name, kind, default, doc, choices=()):
    return Key(name, kind, default, doc, tuple(choices))


_G = GMSAConfig()
_A = ATCConfig()
_T = TilesConfig()

REGISTRY: dict[str, Key] = {
    k.name: k
    for k in [
        _k("experiment.kind", "str", "rl-compare", "experiment to run", ("approx-rate", "rl-compare", "oracle-tests")),
        _k("experiment.seeds", "ints", [1], "seeds, comma separated"),
        _k("experiment.out", "str", "out", "output directory"),
        _k("env.name", "str", "cartpole", "environment", ("cartpole", "acrobot", "step_mrp")),
        _k("env.cap", "int", None, "episode step cap (default per environment)"),
        _k("env.seed", "int", None, "seed override for a single run"),
        _k("env.bounds.low", "floats", None, "lower normalization bounds"),
        _k("env.bounds.high", "floats", None, "upper normalization bounds"),
        _k("learner.name", "strs", ["gmsa"], "learners, comma separated", ("gmsa", "atc", "tiles")),
        _k("gmsa.eta", "float", _G.eta, "refinement tolerance"),
        _k("gmsa.p", "int", _G.patience, "patience in steps"),
        _k("gmsa.alpha", "float", _G.alpha, "step size"),
        _k("gmsa.gamma", "float", _G.gamma, "discount"),
        _k("gmsa.lam", "float", _G.lam, "trace decay"),
        _k("gmsa.max_phases", "int", _G.max_phases, "phase limit"),
        _k("gmsa.j_max", "int", _G.j_max, "deepest refinable level"),
        _k("gmsa.children_augmented", "bool", _G.children_augmented, "report tree includes refined children"),
        _k("gmsa.basis", "str", _G.basis, "atom family", ("haar", "constant")),
        _k("gmsa.step_size", "str", _G.step_size, "step-size rule", ("constant", "visits", "normalized", "capped")),
        _k("gmsa.step_cap", "float", _G.step_cap, "cap for the capped rule"),
        _k("gmsa.epsilon", "float", _G.epsilon, "initial exploration rate"),
        _k("gmsa.epsilon_decay", "float", _G.epsilon_decay, "per-episode exploration decay"),
        _k("gmsa.max_phase_steps", "int", _G.max_phase_steps, "per-phase step cap"),
        _k("gmsa.final_training", "str", _G.final_training, "training after refinement stops",
           ("last", "all", "grow", "grow_all")),
        _k("gmsa.uniform_restart", "bool", _G.uniform_restart, "start episodes uniformly in the box"),
        _k("atc.eta", "float", _A.eta, "split tolerance"),
        _k("atc.p", "int", _A.patience, "patience in steps"),
        _k("atc.alpha", "float", _A.alpha, "step size (times 2**d per indicator)"),
        _k("atc.gamma", "float", _A.gamma, "discount"),
        _k("atc.lam", "float", _A.lam, "trace decay"),
        _k("atc.initial_level", "int", _A.initial_level, "level of the initial partition"),
        _k("atc.split", "str", _A.split, "split policy", ("max", "all")),
        _k("atc.max_splits", "int", _A.max_splits, "split budget"),
        _k("atc.j_max", "int", _A.j_max, "deepest split level"),
        _k("atc.epsilon", "float", _A.epsilon, "initial exploration rate"),
        _k("atc.epsilon_decay", "float", _A.epsilon_decay, "per-episode exploration decay"),
        _k("atc.max_phase_steps", "int", _A.max_phase_steps, "per-phase step cap"),
        _k("tiles.tilings", "int", _T.tilings, "number of tilings"),
        _k("tiles.width", "float", _T.width, "tile width in normalized units"),
        _k("tiles.alpha", "float", _T.alpha, "step size (divided by tilings)"),
        _k("tiles.gamma", "float", _T.gamma, "discount"),
        _k("tiles.lam", "float", _T.lam, "trace decay"),
        _k("tiles.epsilon", "float", _T.epsilon, "initial exploration rate"),
        _k("tiles.epsilon_decay", "float", _T.epsilon_decay, "per-episode exploration decay"),
        _k("approx.f", "str", "step1d", "synthetic function"),
        _k("approx.J", "int", 12, "decomposition depth"),
        _k("approx.Q", "int", 4, "extra quadrature levels"),
        _k("approx.eta_min", "float", 1e-4, "smallest threshold"),
        _k("approx.eta_max", "float", 1e-1, "largest threshold"),
        _k("approx.eta_points", "int", 30, "thresholds, log spaced"),
        _k("compare.episodes", "int", 50_000, "episode budget per run"),
        _k("compare.window", "int", 1000, "rolling-mean window"),
        _k("compare.threshold", "float", None, "score for episodes-to-threshold (default: cap for cartpole)"),
    ]
}


def _parse_value(key: Key, raw: str):
    raw = raw.strip()
    try:
        if raw.lower() in ("none", "") and key.default is None:
            return None
        if key.kind == "int":
            val = int(raw)
        elif key.kind == "float":
            val = float(raw)
        elif key.kind == "bool":
            low = raw.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            val = low in ("true", "1", "yes")
        elif key.kind == "str":
            val = raw
        elif key.kind == "ints":
            val = _int_list(raw)
        elif key.kind == "floats":
            val = [float(v) for v in raw.split(",")]
        elif key.kind == "strs":
            val = [v.strip() for v in raw.split(",") if v.strip()]
        else:
            raise ConfigError(f"unsupported key type {key.kind}")
    except ValueError as exc:
        raise ConfigError(f"bad value for {key.name}: {raw!r}") from exc
    if key.choices:
        vals = val if isinstance(val, list) else [val]
        bad = [v for v in vals if v not in key.choices]
        if bad:
            raise ConfigError(f"{key.name} must be one of {', '.join(key.choices)}; got {bad[0]!r}")
    return val


def _int_list(raw: str) -> list[int]:
    out = []
    for part in raw.split(","):
        part = part.strip()
        if ".." in part:
            a, b = part.split("..")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def resolve_key(name: str) -> str:
    name = name.strip()
    if name in REGISTRY:
        return name
    hits = [k for k in REGISTRY if k.split(".")[-1] == name]
    if len(hits) == 1:
        return hits[0]
    if hits:
        raise ConfigError(f"ambiguous key {name!r}: {', '.join(sorted(hits))}")
    raise ConfigError(f"unknown key {name!r}")


def parse_text(text: str) -> dict[str, object]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        k, v = line.split("=", 1)
        key = resolve_key(k)
        out[key] = _parse_value(REGISTRY[key], v)
    return out


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=dict)

    @classmethod
    def from_sources(cls, text: str | None = None, overrides=()) -> "ExperimentConfig":
        vals = parse_text(text) if text else {}
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            k, v = item.split("=", 1)
            key = resolve_key(k)
            vals[key] = _parse_value(REGISTRY[key], v)
        return cls(vals)

    def get(self, name: str):
        key = resolve_key(name)
        return self.values.get(key, REGISTRY[key].default)

    def set(self, name: str, value) -> None:
        self.values[resolve_key(name)] = value

    def to_text(self) -> str:
        lines = []
        for key in REGISTRY:
            v = self.get(key)
            if v is None:
                continue
            if isinstance(v, list):
                v = ",".join(str(x) for x in v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def gmsa(self, seed: int = 0, episodes: int | None = None) -> GMSAConfig:
        g = lambda k: self.get("gmsa." + k)  # noqa: E731
        try:
            return GMSAConfig(
                eta=g("eta"), patience=g("p"), alpha=g("alpha"), gamma=g("gamma"), lam=g("lam"),
                max_phases=g("max_phases"), j_max=g("j_max"), children_augmented=g("children_augmented"),
                basis=g("basis"), step_size=g("step_size"), step_cap=g("step_cap"), epsilon=g("epsilon"),
                epsilon_decay=g("epsilon_decay"), max_phase_steps=g("max_phase_steps"), episodes=episodes,
                uniform_restart=g("uniform_restart"), final_training=g("final_training"), seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def atc(self, seed: int = 0, episodes: int | None = None) -> ATCConfig:
        g = lambda k: self.get("atc." + k)  # noqa: E731
        try:
            return ATCConfig(
                eta=g("eta"), patience=g("p"), alpha=g("alpha"), gamma=g("gamma"), lam=g("lam"),
                initial_level=g("initial_level"), split=g("split"), max_splits=g("max_splits"),
                j_max=g("j_max"), epsilon=g("epsilon"), epsilon_decay=g("epsilon_decay"),
                max_phase_steps=g("max_phase_steps"), episodes=episodes, seed=seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def tiles(self, seed: int = 0, episodes: int = 1000) -> TilesConfig:
        g = lambda k: self.get("tiles." + k)  # noqa: E731
        if g("tilings") < 1 or not 0 < g("width") <= 1:
            raise ConfigError("tiles need tilings >= 1 and width in (0, 1]")
        return TilesConfig(
            tilings=g("tilings"), width=g("width"), alpha=g("alpha"), gamma=g("gamma"), lam=g("lam"),
            epsilon=g("epsilon"), epsilon_decay=g("epsilon_decay"), episodes=episodes, seed=seed,
        )


def load_config(path: str | Path | None = None, overrides=()) -> ExperimentConfig:
    text = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return ExperimentConfig.from_sources(text, overrides)
