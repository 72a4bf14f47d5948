"""Episodic training: Adam updates with a staged learning-rate schedule.

The learning rate starts at its base value and drops by a factor of 10 at
each third of the run (capped at two drops), which reproduces the reference
schedule of 1e-3 / 1e-4 / 1e-5 with drops at episodes 10,000 and 20,000
when training for 30,000 episodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .corpus import Corpus
from .episodes import EpisodeSpec, sample_episode
from .errors import DimensionError, TrainingDiverged
from .model import ModelConfig, ModelParams, ModelVariant, TrainedModel, forward_episode


@dataclass(frozen=True)
class TrainSettings:
    episodes: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0


def learning_rate_at(base: float, episode: int, total_episodes: int) -> float:
    third = max(1, total_episodes // 3)
    return base / 10.0 ** min(2, episode // third)


class Adam:
    def __init__(self, tensors: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.tensors = tensors
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {k: np.zeros_like(v.data) for k, v in tensors.items()}
        self.v = {k: np.zeros_like(v.data) for k, v in tensors.items()}

    def step(self, lr: float) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for name, p in self.tensors.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class TrainResult:
    model: TrainedModel
    loss_curve: list[float] = field(default_factory=list)


def _check_dims(corpus: Corpus, config: ModelConfig) -> None:
    if corpus.word_table.d_w != config.d_w:
        raise DimensionError(f"config d_w={config.d_w} but corpus word table has d_w={corpus.word_table.d_w}")
    if corpus.instances and corpus.instances[0].features.shape != (config.d_f,):
        raise DimensionError(
            f"config d_f={config.d_f} but corpus features have shape {corpus.instances[0].features.shape}"
        )


def train(variant, corpus: Corpus, spec: EpisodeSpec | None = None,
          settings: TrainSettings | None = None, config: ModelConfig | None = None) -> TrainResult:
    """Meta-train a variant on the corpus's train split.

    Deterministic given settings.seed; aborts with a parameter-norm report
    if the loss ever goes non-finite.
    """
    variant = ModelVariant.parse(variant)
    spec = spec or EpisodeSpec()
    settings = settings or TrainSettings()
    if config is None:
        config = ModelConfig(
            d_f=corpus.instances[0].features.shape[0] if corpus.instances else 32,
            d_w=corpus.word_table.d_w,
        )
    config = config.resolved()
    _check_dims(corpus, config)

    params = ModelParams.initialize(config, np.random.default_rng((settings.seed, 0)))
    episode_rng = np.random.default_rng((settings.seed, 1))
    optimizer = Adam(params.trainable(variant), settings.beta1, settings.beta2, settings.eps)

    curve: list[float] = []
    for index in range(settings.episodes):
        episode = sample_episode(corpus, spec, episode_rng, split="train")
        out = forward_episode(episode, variant, params, corpus.word_table)
        loss = out.loss.item()
        if not np.isfinite(loss):
            norms = ", ".join(f"{k}={np.linalg.norm(v.data):.3e}" for k, v in params.trainable(variant).items())
            raise TrainingDiverged(f"loss became non-finite at episode {index}; parameter norms: {norms}")
        params.zero_grads()
        ad.backward(out.loss)
        optimizer.step(learning_rate_at(settings.learning_rate, index, settings.episodes))
        curve.append(loss)

    model = TrainedModel(
        variant=variant,
        params=params,
        word_table=corpus.word_table,
        train_classes=list(corpus.train_classes),
        test_classes=list(corpus.test_classes),
    )
    return TrainResult(model=model, loss_curve=curve)
