"""Run configuration: every stage's parameters in one JSON document.

Sections mirror the stages (``stft``, ``mfcc``, ``nmf``, ``dictionary``,
``train``, ``detect``, ``postprocess``, ``piano``). Missing keys keep their
defaults; unknown sections or keys are an error. Example::

    {"dictionary": {"strategy": "csdl", "K": 2, "r_sub": 3},
     "train": {"positive_class_weight": 3.0}}
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .classifier import TrainConfig
from .detection import PostProcessConfig
from .dictionary import DictStrategy
from .errors import ConfigError
from .experiments import PianoConfig
from .frontend import MfccConfig, StftConfig
from .nmf import NmfConfig


@dataclass(frozen=True)
class NmfSection:
    max_iters: int = 200
    epsilon_floor: float = 1e-12
    tolerance: float = 1e-6

    def config(self, rank: int = 0, seed: int = 0) -> NmfConfig:
        return NmfConfig(rank, self.max_iters, self.epsilon_floor, seed, self.tolerance)


@dataclass(frozen=True)
class DictionarySection:
    strategy: str = DictStrategy.C_SDL.value
    K: int = 2
    r_sub: int = 3
    dl_rank: int = 35
    enmf_rank: int = 3
    gmm_iters: int = 100
    seed: int = 0

    def __post_init__(self):
        try:
            DictStrategy(self.strategy)
        except ValueError:
            raise ConfigError(f"unknown strategy {self.strategy!r}") from None
        if self.K < 1 or self.r_sub < 1 or self.dl_rank < 1 or self.enmf_rank < 1:
            raise ConfigError("K, r_sub and ranks must be >= 1")


@dataclass(frozen=True)
class DetectSection:
    noise_rank: int = 1

    def __post_init__(self):
        if self.noise_rank < 0:
            raise ConfigError("noise_rank must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    stft: StftConfig = field(default_factory=StftConfig)
    mfcc: MfccConfig = field(default_factory=lambda: MfccConfig(23))
    nmf: NmfSection = field(default_factory=NmfSection)
    dictionary: DictionarySection = field(default_factory=DictionarySection)
    train: TrainConfig = field(default_factory=TrainConfig)
    detect: DetectSection = field(default_factory=DetectSection)
    postprocess: PostProcessConfig = field(default_factory=PostProcessConfig)
    piano: PianoConfig = field(default_factory=PianoConfig)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        defaults = cls()
        sections = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(cls)}
        unknown = set(data) - set(sections)
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        built = {}
        for name, value in data.items():
            built[name] = _section(name, sections[name], value)
        return dataclasses.replace(defaults, **built)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(
            self,
            dictionary=dataclasses.replace(self.dictionary, seed=seed),
            train=dataclasses.replace(self.train, seed=seed),
            piano=dataclasses.replace(self.piano, first_seed=seed),
        )

    def with_strategy(self, strategy: str) -> "RunConfig":
        return dataclasses.replace(self, dictionary=_replace(self.dictionary, strategy=strategy))


def _replace(obj, **changes):
    try:
        return dataclasses.replace(obj, **changes)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _section(name, default, value):
    if not isinstance(value, dict):
        raise ConfigError(f"section {name!r} must be an object")
    known = {f.name for f in dataclasses.fields(default)}
    unknown = set(value) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in {name!r}: {', '.join(sorted(unknown))}")
    return _replace(default, **value)
