"""Experiment configuration: a JSON document with a schema version."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .fdsolve import SCHEMES
from .mms import LOG_BASES
from .optim import AdamWConfig, LbfgsConfig, Schedule
from .pareto import DEFAULT_ALPHAS
from .pinnloss import Weighting
from .scenarios import MODES, TAGS, normalize_tag
from .tapenet import preset_layer_sizes

SCHEMA_VERSION = 1
FD_METHODS = (*SCHEMES, "newton")


class ConfigError(ValueError):
    pass


@dataclass
class FdConfig:
    method: str = "rk3"
    cfl: float = 0.4
    tol: float = 1e-12
    max_iters: int = 50_000_000


@dataclass
class ExperimentConfig:
    schema_version: int = SCHEMA_VERSION
    mode: str = "standard"
    tag: str = "Analytical"
    tags: list[str] = field(default_factory=lambda: list(TAGS))
    weighting: str = "lbpinn"  # "lbpinn" or "fixed"
    alpha: float = 0.5
    alphas: list[float] = field(default_factory=lambda: list(DEFAULT_ALPHAS))
    preset: str = "desk"
    schedule: dict = field(default_factory=dict)  # overrides on top of the mode preset
    seed: int = 0
    out: str = "runs"
    log_base: str = "natural"
    fd: FdConfig = field(default_factory=FdConfig)
    adamw: AdamWConfig = field(default_factory=AdamWConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    workers: int = 1

    def validate(self) -> "ExperimentConfig":
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {self.schema_version}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        try:
            self.tag = normalize_tag(self.tag)
            self.tags = [normalize_tag(t) for t in self.tags]
            self.weighting_obj()
            preset_layer_sizes(self.preset, 1)
        except (ValueError, KeyError) as exc:
            raise ConfigError(str(exc)) from None
        if not self.alphas or any(not 0.0 <= a <= 1.0 for a in self.alphas):
            raise ConfigError("alphas must be a non-empty list in [0, 1]")
        if self.log_base not in LOG_BASES:
            raise ConfigError(f"log_base must be one of {tuple(LOG_BASES)}")
        if self.fd.method not in FD_METHODS:
            raise ConfigError(f"fd.method must be one of {FD_METHODS}")
        if not (self.fd.cfl > 0 and self.fd.tol > 0 and self.fd.max_iters > 0):
            raise ConfigError("fd.cfl, fd.tol and fd.max_iters must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        sched = self.schedule_obj()
        if min(sched.warmup_epochs, sched.adamw_epochs, sched.lbfgs_epochs) < 0 \
                or sched.batch_size < 1 or sched.record_stride < 1:
            raise ConfigError("schedule entries must be non-negative (batch_size, record_stride >= 1)")
        return self

    def weighting_obj(self) -> Weighting:
        if self.weighting == "lbpinn":
            return Weighting.lbpinn()
        if self.weighting == "fixed":
            return Weighting.fixed(self.alpha)
        raise ValueError(f"weighting must be 'lbpinn' or 'fixed', got {self.weighting!r}")

    def schedule_obj(self) -> Schedule:
        base = asdict(Schedule.preset(self.mode))
        unknown = set(self.schedule) - set(base)
        if unknown:
            raise ConfigError(f"unknown schedule keys {sorted(unknown)}")
        base.update({k: int(v) for k, v in self.schedule.items()})
        return Schedule(**base)

    def layer_sizes(self) -> list[int]:
        return preset_layer_sizes(self.preset, 1 if self.mode == "standard" else 2)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["adamw"]["betas"] = list(d["adamw"]["betas"])
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _sub(cls, data, name):
    if not isinstance(data, dict):
        raise ConfigError(f"{name} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown {name} keys {sorted(unknown)}")
    obj = cls(**data)
    if cls is AdamWConfig:
        obj.betas = tuple(obj.betas)
    return obj


def config_from_dict(data: dict) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    data = dict(data)
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")
    if "schema_version" not in data:
        raise ConfigError("config is missing schema_version")
    subs = {"fd": FdConfig, "adamw": AdamWConfig, "lbfgs": LbfgsConfig}
    for key, cls in subs.items():
        if key in data:
            data[key] = _sub(cls, data[key], key)
    try:
        cfg = ExperimentConfig(**data)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON config. Raises FileNotFoundError or ConfigError."""
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)
