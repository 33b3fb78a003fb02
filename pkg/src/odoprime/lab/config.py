"""Experiment configuration: a small TOML grammar, defaults and feasibility checks.

A config file looks like::

    experiment = "barycenter"   # optional; the CLI argument wins
    seed = 0

    [schedule]                  # a preset name, or base / E / depth
    preset = "lab"

    [metric]
    theta = 0.5

    [params]                    # experiment-specific, merged over defaults
    targets = [1, 2]
    samples = 10000

``E`` entries are inline tables ``{pos = 4, kind = "W", size = 400}``.
Fractions may be written as strings (``eps = "1/8"``).
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import tomli

from ..measures import MetricConfig
from ..schedule import AlphabetSchedule, DepthError, ScheduleError

TOP_KEYS = {"experiment", "seed", "schedule", "metric", "params"}
MAX_SEED = (1 << 64) - 1


class ConfigError(ValueError):
    """Malformed configuration."""


class InfeasibleConfig(ConfigError):
    """Well-formed, but the requested experiment cannot run on it."""


@dataclass
class ExperimentConfig:
    experiment: str | None = None
    seed: int = 0
    schedule: dict | None = None
    metric: dict = field(default_factory=lambda: {"theta": 0.5})
    params: dict = field(default_factory=dict)

    def build_schedule(self, spec: dict | None = None) -> AlphabetSchedule:
        spec = self.schedule if spec is None else spec
        if spec is None:
            raise ConfigError("no schedule configured")
        try:
            return AlphabetSchedule.from_dict(spec)
        except (ScheduleError, DepthError, KeyError, TypeError) as exc:
            raise InfeasibleConfig(f"bad schedule: {exc}") from exc

    def metric_config(self) -> MetricConfig:
        try:
            return MetricConfig(**self.metric)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad metric table: {exc}") from exc

    def canonical(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "schedule": self.schedule,
            "metric": self.metric,
            "params": self.params,
        }

    def digest(self) -> str:
        return config_hash(self.canonical())


def config_hash(d: dict) -> str:
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def parse_config(text: str) -> ExperimentConfig:
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    unknown = set(raw) - TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    cfg = ExperimentConfig()
    if "experiment" in raw:
        cfg.experiment = str(raw["experiment"])
    if "seed" in raw:
        cfg.seed = check_seed(raw["seed"])
    for key in ("schedule", "metric", "params"):
        if key in raw:
            if not isinstance(raw[key], dict):
                raise ConfigError(f"[{key}] must be a table")
            setattr(cfg, key, dict(raw[key]))
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


def check_seed(seed) -> int:
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise ConfigError(f"seed must be an integer in [0, 2^64), got {seed!r}")
    return seed


def resolve(cfg: ExperimentConfig, name: str, defaults: dict) -> ExperimentConfig:
    """Defaults for ``name`` overlaid with the file's params; unknown keys are rejected."""
    unknown = set(cfg.params) - set(defaults["params"])
    if unknown:
        raise ConfigError(f"unknown params for {name}: {sorted(unknown)}")
    out = copy.deepcopy(cfg)
    out.experiment = name
    params = copy.deepcopy(defaults["params"])
    params.update(cfg.params)
    out.params = params
    if out.schedule is None:
        out.schedule = copy.deepcopy(defaults.get("schedule"))
    return out
