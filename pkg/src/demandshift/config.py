"""Run configuration: JSON file, ``--set key=value`` overrides, validation."""
from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .calibration import DEFAULT_ALPHA_GRID
from .clustering import DEFAULT_K_RANGE
from .errors import ConfigError
from .ingest import Schema
from .signature import DEFAULT_ALPHA, DEFAULT_K
from .validation import GREATER, SIDEDNESS

OUTPUT_DIR_ENV = "DEMANDSHIFT_OUTPUT_DIR"


@dataclass
class SourceConfig:
    path: str
    schema: dict = field(default_factory=dict)

    def to_schema(self):
        try:
            return Schema.from_dict(self.schema)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad schema for {self.path}: {exc}") from None


@dataclass
class CovariateConfig:
    path: str
    cluster_id: int
    name: str = "covariate"
    units: str = ""
    sidedness: str = GREATER


@dataclass
class RunConfig:
    sources: list
    span: list | None = None
    K: int = DEFAULT_K
    alpha: float | str = DEFAULT_ALPHA
    alpha_grid: list = field(default_factory=lambda: list(DEFAULT_ALPHA_GRID))
    k_min: int = DEFAULT_K_RANGE[0]
    k_max: int = DEFAULT_K_RANGE[1]
    seed: int = 0
    covariates: list = field(default_factory=list)
    radar: bool = True
    record_timings: bool = False
    output_dir: str | None = None
    base_dir: str = field(default=".", repr=False)

    def validate(self):
        if not self.sources:
            raise ConfigError("at least one input source is required")
        if not isinstance(self.K, int) or self.K < 2 or self.K % 2:
            raise ConfigError(f"K must be an even integer >= 2, got {self.K!r}")
        if isinstance(self.alpha, str):
            if self.alpha != "auto":
                raise ConfigError(f"alpha must be a number or 'auto', got {self.alpha!r}")
        elif not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        grid = self.alpha_grid
        if len(grid) < 4 or any(b <= a for a, b in zip(grid, grid[1:])):
            raise ConfigError("alpha_grid needs >= 4 strictly increasing values")
        if not 2 <= self.k_min <= self.k_max:
            raise ConfigError(f"need 2 <= k_min <= k_max, got {self.k_min}, {self.k_max}")
        if self.span is not None and len(self.span) != 2:
            raise ConfigError("span must be [first_hour, last_hour]")
        for s in self.sources:
            s.to_schema()
        for c in self.covariates:
            if c.sidedness not in SIDEDNESS:
                raise ConfigError(f"covariate sidedness must be one of {SIDEDNESS}")
        return self

    def resolve(self, path):
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def to_dict(self):
        """Everything that can affect an output (no output dir, no base dir)."""
        d = asdict(self)
        d.pop("output_dir")
        d.pop("base_dir")
        return d

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = copy.deepcopy(d)
        known = set(cls.__dataclass_fields__) - {"base_dir"}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            d["sources"] = [SourceConfig(**s) for s in d.get("sources", [])]
            d["covariates"] = [CovariateConfig(**c) for c in d.get("covariates", [])]
            cfg = cls(**d, base_dir=str(base_dir))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        return cfg.validate()


def _coerce(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(doc, assignments):
    """Apply ``key=value`` strings to a config dict; dotted keys nest, and
    values are parsed as JSON when possible."""
    doc = copy.deepcopy(doc)
    for item in assignments or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = doc
        for p in parts[:-1]:
            if isinstance(node, list):
                node = node[int(p)]
            else:
                node = node.setdefault(p, {})
        last = parts[-1]
        if isinstance(node, list):
            node[int(last)] = _coerce(value)
        else:
            node[last] = _coerce(value)
    return doc


def load_config(path, overrides=()):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    doc = apply_overrides(doc, overrides)
    return RunConfig.from_dict(doc, base_dir=Path(path).resolve().parent)


def resolve_output_dir(flag=None, config=None, default="out"):
    """Flag wins over the environment, which wins over the config file."""
    if flag:
        return Path(flag)
    env = os.environ.get(OUTPUT_DIR_ENV)
    if env:
        return Path(env)
    if config is not None and config.output_dir:
        return config.resolve(config.output_dir)
    return Path(default)
