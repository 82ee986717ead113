"""JSON run configuration shared by the command-line front end."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

from .graph import RandomDagSampler, parse_palette
from .nn import TrainConfig
from .oracle import SyntheticOracleConfig
from .wl_kernel import WlConfig

SEED_ENV = "GEMNAS_SEED"


class ConfigError(ValueError):
    pass


@dataclass
class SearchSpaceConfig:
    n: int = 8
    edge_prob: float = 0.5
    ops: list[str] = field(default_factory=lambda: ["conv1x1", "dwsep3x3"])
    channels: int = 64
    resolution: list[int] = field(default_factory=lambda: [32, 32])


@dataclass
class TrainBlock:
    learning_rate: float = 1e-3
    iterations: int = 10_000
    batch_size: int = 32
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(rng_seed=seed, **asdict(self))


@dataclass
class EncoderConfig:
    d: int = 16
    wl_h: int = 3
    wl_use_ops: bool = False
    include_ops: bool = False
    pair_count: int = 5000
    hidden: list[int] = field(default_factory=lambda: [256, 256])
    train: TrainBlock = field(default_factory=TrainBlock)


@dataclass
class OracleConfig:
    kind: str = "synthetic"
    table_path: str | None = None
    lam: float = 0.01
    on_missing: str = "fail"
    synthetic: SyntheticOracleConfig = field(default_factory=SyntheticOracleConfig)


@dataclass
class EstimatorConfig:
    sample_budget: int = 200
    epochs_per_sample: int = 5
    min_steps_per_sample: int = 50
    final_steps: int = 200
    hidden: list[int] = field(default_factory=lambda: [128, 128])
    train: TrainBlock = field(default_factory=lambda: TrainBlock(iterations=1))


@dataclass
class SearchConfig:
    pool_size: int = 50_000


@dataclass
class CorrelationConfig:
    corpus_size: int = 1000
    n: int = 6
    edge_prob: float = 0.5
    ops: list[str] = field(default_factory=lambda: ["conv1x1"])
    train_fraction: float = 0.6
    proportions: list[int] = field(default_factory=lambda: [10, 20, 30, 50, 70, 100])
    methods: list[str] = field(default_factory=lambda: ["adjacency", "autoencoder", "kernel"])
    predictor_iterations: int = 2000


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "runs/default"
    workers: int = 1
    search_space: SearchSpaceConfig = field(default_factory=SearchSpaceConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    search: SearchConfig = field(default_factory=SearchConfig)
    correlation: CorrelationConfig = field(default_factory=CorrelationConfig)

    def validate(self) -> "RunConfig":
        s = self.search_space
        if s.n < 2:
            raise ConfigError("search_space.n must be >= 2")
        if not 0.0 < s.edge_prob <= 1.0:
            raise ConfigError("search_space.edge_prob must be in (0, 1]")
        if s.channels < 1 or len(s.resolution) != 2 or min(s.resolution) < 1:
            raise ConfigError("search_space needs positive channels and a 2-element resolution")
        try:
            parse_palette(s.ops)
            parse_palette(self.correlation.ops)
            WlConfig(self.encoder.wl_h)
            self.encoder.train.to_train_config(self.seed)
            self.estimator.train.to_train_config(self.seed)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if self.encoder.d < 1 or self.encoder.pair_count < 1:
            raise ConfigError("encoder.d and encoder.pair_count must be >= 1")
        if self.oracle.kind not in ("synthetic", "tabular"):
            raise ConfigError(f"unknown oracle kind {self.oracle.kind!r}")
        if self.oracle.kind == "tabular":
            if not self.oracle.table_path or not Path(self.oracle.table_path).is_file():
                raise ConfigError(f"benchmark table {self.oracle.table_path!r} does not exist")
        if self.oracle.lam < 0:
            raise ConfigError("oracle.lam must be >= 0")
        if self.oracle.on_missing not in ("fail", "skip"):
            raise ConfigError("oracle.on_missing must be 'fail' or 'skip'")
        if self.estimator.sample_budget < 1 or self.search.pool_size < 1:
            raise ConfigError("sample_budget and pool_size must be >= 1")
        c = self.correlation
        if not 0.0 < c.train_fraction < 1.0:
            raise ConfigError("correlation.train_fraction must be in (0, 1)")
        if any(not 0 < p <= 100 for p in c.proportions):
            raise ConfigError("correlation.proportions must be percentages in (0, 100]")
        bad = set(c.methods) - {"adjacency", "autoencoder", "kernel"}
        if bad:
            raise ConfigError(f"unknown correlation methods {sorted(bad)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def sampler(self) -> RandomDagSampler:
        s = self.search_space
        return RandomDagSampler(s.n, s.edge_prob, parse_palette(s.ops))

    def wl_config(self) -> WlConfig:
        return WlConfig(self.encoder.wl_h, self.encoder.wl_use_ops)

    def to_json(self) -> dict:
        return asdict(self)


def _build(cls, data, path="config"):
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must be an object")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {path}: {sorted(unknown)}")
    defaults = cls()
    kwargs = {}
    for name, f in known.items():
        current = getattr(defaults, name)
        if name not in data:
            kwargs[name] = current
        elif is_dataclass(current):
            kwargs[name] = _build(type(current), data[name], f"{path}.{name}")
        else:
            kwargs[name] = data[name]
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    return _build(RunConfig, data).validate()


def load_config(path, seed: int | None = None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config; an explicit ``seed`` wins over the file, GEMNAS_SEED fills in when the file has none."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if "seed" not in data and os.environ.get(SEED_ENV):
        try:
            data["seed"] = int(os.environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {os.environ[SEED_ENV]!r}") from None
    if seed is not None:
        data["seed"] = seed
    for key, value in (overrides or {}).items():
        data[key] = value
    return config_from_dict(data)
