"""Run configuration: one JSON document covering every knob of a run.

Unknown keys are rejected at every nesting level so a typo cannot silently
fall back to a default and corrupt an experiment grid.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import CorpusSpec
from .episodes import EpisodeSpec
from .errors import ConfigError
from .model import ModelConfig
from .serialize import dataclass_from_dict


@dataclass(frozen=True)
class TrainOptions:
    episodes: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass(frozen=True)
class EvalOptions:
    episodes: int = 600
    top_k: int = 1
    split: str = "test"


@dataclass(frozen=True)
class SweepOptions:
    noise_grid: tuple = (0.0, 0.25, 0.5, 0.75, 1.0)
    ways_grid: tuple = (5, 20)
    shots_grid: tuple = (1, 5)

    def __post_init__(self):
        object.__setattr__(self, "noise_grid", tuple(self.noise_grid))
        object.__setattr__(self, "ways_grid", tuple(self.ways_grid))
        object.__setattr__(self, "shots_grid", tuple(self.shots_grid))


@dataclass(frozen=True)
class RunConfig:
    variant: str = "full"
    seed: int = 0
    out_dir: str = "runs/out"
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    model: ModelConfig = field(default_factory=ModelConfig)
    episode: EpisodeSpec = field(default_factory=EpisodeSpec)
    train: TrainOptions = field(default_factory=TrainOptions)
    eval: EvalOptions = field(default_factory=EvalOptions)
    sweep: SweepOptions = field(default_factory=SweepOptions)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be an object, got {type(data).__name__}")
        sections = {
            "corpus": (CorpusSpec, CorpusSpec.from_dict),
            "model": (ModelConfig, lambda d, p: dataclass_from_dict(ModelConfig, d, p)),
            "episode": (EpisodeSpec, lambda d, p: dataclass_from_dict(EpisodeSpec, d, p)),
            "train": (TrainOptions, lambda d, p: dataclass_from_dict(TrainOptions, d, p)),
            "eval": (EvalOptions, lambda d, p: dataclass_from_dict(EvalOptions, d, p)),
            "sweep": (SweepOptions, lambda d, p: dataclass_from_dict(SweepOptions, d, p)),
        }
        known = {"variant", "seed", "out_dir", *sections}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown key(s) {unknown} in config root")
        kwargs = {}
        for key in ("variant", "seed", "out_dir"):
            if key in data:
                kwargs[key] = data[key]
        for key, (_, build) in sections.items():
            if key in data:
                kwargs[key] = build(data[key], key)
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "variant": self.variant,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "corpus": self.corpus.to_dict(),
            "model": dataclasses.asdict(self.model),
            "episode": self.episode.to_dict(),
            "train": dataclasses.asdict(self.train),
            "eval": dataclasses.asdict(self.eval),
            "sweep": {
                "noise_grid": list(self.sweep.noise_grid),
                "ways_grid": list(self.sweep.ways_grid),
                "shots_grid": list(self.sweep.shots_grid),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def load_run_config(path) -> RunConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return RunConfig.from_dict(data)
