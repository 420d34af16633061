"""INI-style experiment configuration files.

Grammar (``configparser`` syntax, ``#`` comments)::

    [model]        kind, seed, path, num_states, num_leader_actions,
                   num_follower_actions, horizon, feature_dim, reward_low
    [experiment]   episodes, mode, cadence, seed, check_invariants,
                   wall_clock, checkpoint
    [hyperparams]  c1, failure_prob, lambda, beta, alpha_l, alpha_f
    [sweep]        any experiment key = comma-separated values
    [output]       dir

Overrides use ``section.key=value``. A relative ``model.path`` resolves against
the directory of the config file.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import fields
from pathlib import Path

from .harness import ConfigError, ExperimentConfig

# (section, key) -> ExperimentConfig field
KEYMAP = {
    ("model", "kind"): "model_kind",
    ("model", "seed"): "model_seed",
    ("model", "path"): "model_path",
    ("model", "num_states"): "num_states",
    ("model", "num_leader_actions"): "num_leader_actions",
    ("model", "num_follower_actions"): "num_follower_actions",
    ("model", "horizon"): "horizon",
    ("model", "feature_dim"): "feature_dim",
    ("model", "reward_low"): "reward_low",
    ("experiment", "episodes"): "episodes",
    ("experiment", "mode"): "mode",
    ("experiment", "cadence"): "cadence",
    ("experiment", "seed"): "seed",
    ("experiment", "check_invariants"): "check_invariants",
    ("experiment", "wall_clock"): "wall_clock",
    ("experiment", "checkpoint"): "checkpoint",
    ("hyperparams", "c1"): "c1",
    ("hyperparams", "failure_prob"): "failure_prob",
    ("hyperparams", "lambda"): "lam",
    ("hyperparams", "beta"): "beta",
    ("hyperparams", "alpha_l"): "alpha_l",
    ("hyperparams", "alpha_f"): "alpha_f",
}
FIELD_TO_KEY = {v: k for k, v in KEYMAP.items()}
OTHER_KEYS = {("output", "dir")}
_TYPES = {
    "model_kind": str,
    "model_path": str,
    "mode": str,
    "check_invariants": bool,
    "wall_clock": bool,
    "checkpoint": bool,
    "reward_low": float,
    "c1": float,
    "failure_prob": float,
    "lam": float,
    "beta": float,
    "alpha_l": float,
    "alpha_f": float,
}


def parse_value(field: str, text: str):
    text = text.strip()
    kind = _TYPES.get(field, int)
    if text.lower() in ("none", "") and field in ("model_path", "beta", "alpha_l", "alpha_f"):
        return None
    try:
        if kind is bool:
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if kind is float:
            return math.inf if text.lower() in ("inf", "infinity") else float(text)
        if kind is int:
            return int(text)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {field}: {text!r}") from None


def _split_key(dotted: str) -> tuple[str, str]:
    if "." not in dotted:
        raise ConfigError(f"override key must be section.key, got {dotted!r}")
    sec, key = dotted.split(".", 1)
    return sec.strip(), key.strip()


class RunSpec:
    """Effective settings after layering defaults, file and overrides."""

    def __init__(self):
        self.values: dict[str, object] = {}
        self.output_dir: str | None = None
        self.sweep: dict[str, list] = {}

    def apply(self, section: str, key: str, value: str, base_dir: Path | None = None) -> None:
        if section == "sweep":
            field = KEYMAP.get(("experiment", key)) or KEYMAP.get(("hyperparams", key)) or KEYMAP.get(("model", key))
            if field is None:
                raise ConfigError(f"unknown sweep key {key!r}")
            self.sweep[field] = [parse_value(field, v) for v in value.split(",") if v.strip()]
            return
        if (section, key) in OTHER_KEYS:
            self.output_dir = value.strip()
            return
        field = KEYMAP.get((section, key))
        if field is None:
            raise ConfigError(f"unknown config key {section}.{key}")
        v = parse_value(field, value)
        if field == "model_path" and v is not None and base_dir is not None and not Path(v).is_absolute():
            v = str((base_dir / v).resolve())
        self.values[field] = v

    def experiment(self) -> ExperimentConfig:
        return ExperimentConfig(**self.values)


def load(path: str | Path | None, overrides: list[str] = ()) -> RunSpec:
    spec = RunSpec()
    if path is not None:
        path = Path(path)
        cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
        try:
            with open(path, encoding="utf-8") as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise FileNotFoundError(f"cannot read config {path}: {exc.strerror}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        for sec in cp.sections():
            for key, val in cp.items(sec):
                spec.apply(sec, key, val, base_dir=path.parent)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override must be section.key=value, got {item!r}")
        dotted, val = item.split("=", 1)
        sec, key = _split_key(dotted)
        spec.apply(sec, key, val, base_dir=Path.cwd())
    return spec


def _render(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return str(v)


def dumps(config: ExperimentConfig, output_dir: str | None = None, sweep: dict | None = None) -> str:
    """Render every field of ``config`` (defaults included) in config-file syntax."""
    by_section: dict[str, list[str]] = {}
    for f in fields(ExperimentConfig):
        sec, key = FIELD_TO_KEY[f.name]
        by_section.setdefault(sec, []).append(f"{key} = {_render(getattr(config, f.name))}")
    if sweep:
        by_section["sweep"] = [
            f"{FIELD_TO_KEY[k][1]} = {', '.join(_render(v) for v in vals)}" for k, vals in sweep.items()
        ]
    if output_dir is not None:
        by_section["output"] = [f"dir = {output_dir}"]
    return "\n\n".join(f"[{sec}]\n" + "\n".join(lines) for sec, lines in by_section.items()) + "\n"
