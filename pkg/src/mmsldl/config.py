"""Dataclass configs: solver hyperparameters and CLI run configuration."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import InvalidConfigurationError


@dataclass
class Hyperparams:
    alpha: float = 0.1
    beta: float = 0.1
    lam: float = 0.5
    gamma: float = 0.5
    mu0: float = 1e-6
    rho: float = 1.1
    mu_max: float = 1e30
    eps_solver: float = 1e-8
    eps_dict: float = 1e-5
    max_inner_iters: int = 500
    max_dict_iters: int = 20
    max_outer_alternations: int = 10
    lambda_ridge: float = 1e-2
    ksvd_sparsity: Optional[int] = None
    ksvd_iters: int = 10
    rpca_lambda: Optional[float] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        bad = []
        if min(self.alpha, self.beta, self.lam) < 0:
            bad.append("alpha, beta, lam must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            bad.append("gamma must lie in [0, 1]")
        if self.rho <= 1:
            bad.append("rho must be > 1")
        if self.mu0 <= 0 or self.mu_max < self.mu0:
            bad.append("need 0 < mu0 <= mu_max")
        if self.eps_solver <= 0 or self.eps_dict <= 0:
            bad.append("tolerances must be > 0")
        if min(self.max_inner_iters, self.max_dict_iters, self.max_outer_alternations) < 1:
            bad.append("iteration caps must be >= 1")
        if self.lambda_ridge < 0:
            bad.append("lambda_ridge must be >= 0")
        if self.ksvd_sparsity is not None and self.ksvd_sparsity < 1:
            bad.append("ksvd_sparsity must be positive")
        if bad:
            raise InvalidConfigurationError("invalid hyperparameters: " + "; ".join(bad))

    def replace(self, **changes) -> "Hyperparams":
        return dataclasses.replace(self, **changes)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**_known_fields(cls, d))


@dataclass
class SynthSpec:
    classes: int = 5
    per_class: int = 20
    dim: int = 256
    rank: int = 3
    corruption: float = 0.0
    cross_modal_overlap: float = 0.0
    seed: int = 0

    @classmethod
    def from_dict(cls, d):
        return cls(**_known_fields(cls, d))


@dataclass
class SplitSpec:
    train_per_class: int = 10
    repeats: int = 10
    seed: int = 0


@dataclass
class OcclusionSpec:
    fraction: float = 0.0
    patch_dir: Optional[str] = None
    # training-only occlusion mirrors the Extended YaleB protocol
    apply_to: str = "train"


@dataclass
class ModalitySpec:
    height: int = 32
    width: int = 32
    second: str = "illumination_invariant"


@dataclass
class GridSpec:
    alpha: list = field(default_factory=lambda: [0.0, 0.1])
    beta: list = field(default_factory=lambda: [0.1])
    lam: list = field(default_factory=lambda: [0.5])
    folds: int = 5


@dataclass
class RunConfig:
    command: str = "train"
    dataset: Optional[str] = None
    synthetic: Optional[SynthSpec] = None
    modality: ModalitySpec = field(default_factory=ModalitySpec)
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    split: SplitSpec = field(default_factory=SplitSpec)
    occlusion: OcclusionSpec = field(default_factory=OcclusionSpec)
    out: str = "runs/out"
    grid: GridSpec = field(default_factory=GridSpec)
    train_corruption: float = 0.0

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        nested = {
            "modality": ModalitySpec,
            "hyperparams": Hyperparams,
            "split": SplitSpec,
            "occlusion": OcclusionSpec,
            "grid": GridSpec,
        }
        kwargs = _known_fields(cls, d)
        for key, sub in nested.items():
            if isinstance(kwargs.get(key), dict):
                kwargs[key] = sub(**_known_fields(sub, kwargs[key]))
        if isinstance(kwargs.get("synthetic"), dict):
            kwargs["synthetic"] = SynthSpec.from_dict(kwargs["synthetic"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise InvalidConfigurationError(str(exc)) from exc

    def dump(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path):
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise InvalidConfigurationError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise InvalidConfigurationError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InvalidConfigurationError(f"config file {path} must hold a JSON object")
        return cls.from_dict(raw)


def _known_fields(cls, d):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidConfigurationError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return dict(d)
