"""Experiment configuration: JSON in, validated dataclasses out."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

from .baselines import GdConfig
from .errors import ContractError
from .results import METHODS
from .shooter import SharpShooterConfig


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _positive(name, value):
    if value <= 0:
        raise ContractError(f"{name} must be positive")


@dataclass
class DatasetConfig:
    synthetic: Optional[dict] = None
    csv: Optional[str] = None
    test_fraction: float = 0.2
    standardize: bool = True

    def __post_init__(self):
        if (self.synthetic is None) == (self.csv is None):
            raise ContractError("synthetic: give exactly one of 'synthetic' or 'csv'")
        if not 0.0 < self.test_fraction < 1.0:
            raise ContractError("test_fraction must lie in (0, 1)")


@dataclass
class ClassifierConfig:
    hidden: list = field(default_factory=lambda: [16])
    activation: str = "tanh"
    epochs: int = 30
    batch_size: int = 64
    lr: float = 1e-2

    def __post_init__(self):
        if self.epochs < 0:
            raise ContractError("epochs must be >= 0")
        _positive("batch_size", self.batch_size)
        _positive("lr", self.lr)


@dataclass
class VaeConfig:
    latent_dim: int = 2
    hidden: list = field(default_factory=lambda: [32, 32])
    activation: str = "tanh"
    beta: float = 0.5
    w_cat: float = 0.5
    epochs: int = 60
    batch_size: int = 64
    lr: float = 3e-3

    def __post_init__(self):
        _positive("latent_dim", self.latent_dim)
        if self.beta < 0:
            raise ContractError("beta must be >= 0")
        if not 0.0 <= self.w_cat <= 1.0:
            raise ContractError("w_cat must lie in [0, 1]")
        if self.epochs < 0:
            raise ContractError("epochs must be >= 0")
        _positive("batch_size", self.batch_size)
        _positive("lr", self.lr)


@dataclass
class ExplainConfig:
    n_samples: int = 200
    methods: list = field(default_factory=lambda: list(METHODS))

    def __post_init__(self):
        _positive("n_samples", self.n_samples)
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ContractError(f"methods must be a non-empty subset of {list(METHODS)}")


@dataclass
class VizConfig:
    n_lines: int = 200
    alpha_count: int = 50
    cell_size: float = 0.1
    trace_points: int = 20

    def __post_init__(self):
        _positive("n_lines", self.n_lines)
        if self.alpha_count < 2:
            raise ContractError("alpha_count must be >= 2")
        _positive("cell_size", self.cell_size)
        _positive("trace_points", self.trace_points)


@dataclass
class SweepConfig:
    betas: list = field(default_factory=lambda: [0.05, 0.2, 0.5, 1.0])
    values: list = field(default_factory=lambda: [1, 2, 3])
    axis: str = "latent_dim"
    role: str = "target"
    epochs: int = 30

    def __post_init__(self):
        if not self.betas or not self.values:
            raise ContractError("betas and values must be non-empty")
        if self.axis not in ("latent_dim", "w_cat"):
            raise ContractError("axis must be 'latent_dim' or 'w_cat'")
        if self.role not in ("target", "unified"):
            raise ContractError("role must be 'target' or 'unified'")


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig
    seed: int = 0
    output: str = "out"
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    tvae: VaeConfig = field(default_factory=lambda: VaeConfig(beta=0.3))
    uvae: VaeConfig = field(default_factory=lambda: VaeConfig(beta=0.1))
    sharpshooter: SharpShooterConfig = field(default_factory=SharpShooterConfig)
    gdi: GdConfig = field(default_factory=GdConfig)
    gdl: GdConfig = field(default_factory=lambda: GdConfig(lr=0.5))
    explain: ExplainConfig = field(default_factory=ExplainConfig)
    viz: VizConfig = field(default_factory=VizConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ContractError("seed must be a non-negative integer")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _build(cls, data, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(prefix or "<root>", "expected a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(_join(prefix, unknown[0]), "unknown key")
    kwargs = {}
    for name, value in data.items():
        sub = fields[name].type
        target = _SECTIONS.get(sub) if isinstance(sub, str) else None
        kwargs[name] = _build(target, value, _join(prefix, name)) if target else value
    for name, f in fields.items():
        if (f.default is dataclasses.MISSING and f.default_factory is dataclasses.MISSING
                and name not in kwargs):
            raise ConfigError(_join(prefix, name), "missing required key")
    try:
        return cls(**kwargs)
    except ContractError as exc:
        key = str(exc).split()[0].rstrip(":")
        raise ConfigError(_join(prefix, key), str(exc)) from exc
    except TypeError as exc:
        raise ConfigError(prefix or "<root>", str(exc)) from exc


def _join(prefix: str, name: str) -> str:
    return f"{prefix}.{name}" if prefix else name


_SECTIONS = {
    "DatasetConfig": DatasetConfig,
    "ClassifierConfig": ClassifierConfig,
    "VaeConfig": VaeConfig,
    "SharpShooterConfig": SharpShooterConfig,
    "GdConfig": GdConfig,
    "ExplainConfig": ExplainConfig,
    "VizConfig": VizConfig,
    "SweepConfig": SweepConfig,
}


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    except OSError as exc:
        raise ConfigError("<file>", str(exc)) from exc
    return config_from_dict(data)


def desk_dataset_spec() -> dict:
    """Two Gaussian classes over five correlated continuous features plus one binary categorical.

    The shared covariance is rank two plus 0.3-sd isotropic noise, so a 2-D
    latent code can represent the data; the class means sit at +/-2 along a
    direction inside that plane.
    """
    cov = [[1.09, 0.8, 0.5, 0.0, -0.6],
           [0.8, 0.98, 0.0, 0.5, -0.18],
           [0.5, 0.0, 0.98, -0.8, -0.78],
           [0.0, 0.5, -0.8, 1.09, 0.6],
           [-0.6, -0.18, -0.78, 0.6, 0.81]]
    shift = [1.233722, 1.357094, 0.024674, 0.740233, -0.296093]
    return {
        "n_base": 1200,
        "n_target": 800,
        "continuous": ["amount", "income", "dti", "score", "age"],
        "base_mean": [-v for v in shift],
        "target_mean": shift,
        "base_cov": cov,
        "target_cov": cov,
        "categorical": [["term", 2]],
        "base_cat_probs": [[0.3, 0.7]],
        "target_cat_probs": [[0.7, 0.3]],
    }


def desk_config(**overrides) -> ExperimentConfig:
    data = {"dataset": {"synthetic": desk_dataset_spec()}}
    data.update(overrides)
    return config_from_dict(data)
