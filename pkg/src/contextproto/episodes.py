"""Episode sampling for M-way K-shot tasks.

Classes are drawn uniformly without replacement from the split's eligible
classes, instances without replacement within each class, and support/query
sets are disjoint by construction. Context-source filtering and label-noise
injection happen here, so downstream forward passes are pure functions of
the episode.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .attention import ContextSource, inject_noise, select_context
from .corpus import Corpus, SceneInstance
from .errors import ConfigError, SamplingError


@dataclass(frozen=True)
class EpisodeSpec:
    """Episode shape: M ways, K shots, n_q queries per class."""

    ways: int = 5
    shots: int = 1
    queries: int = 15
    context_source: ContextSource = ContextSource.UNION
    p_noise: float = 0.0

    def __post_init__(self):
        if isinstance(self.context_source, str):
            object.__setattr__(self, "context_source", ContextSource.parse(self.context_source))
        if self.ways < 2 or self.shots < 1 or self.queries < 1:
            raise ConfigError(f"need ways >= 2, shots >= 1, queries >= 1, got {self.ways}/{self.shots}/{self.queries}")
        if not 0.0 <= self.p_noise <= 1.0:
            raise ConfigError(f"p_noise must be in [0, 1], got {self.p_noise}")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["context_source"] = self.context_source.value
        return d


@dataclass
class Episode:
    """Sampled task: a class roster, K support instances per class, queries."""

    roster: list[str]
    support: list[list[SceneInstance]]
    queries: list[SceneInstance]
    query_targets: np.ndarray  # roster index of each query

    @property
    def ways(self) -> int:
        return len(self.roster)


def sample_episode(corpus: Corpus, spec: EpisodeSpec, rng: np.random.Generator, split: str = "train") -> Episode:
    by_class = corpus.by_class()
    members = corpus.split_members(split)
    need = spec.shots + spec.queries
    eligible = [c for c in members if len(by_class[c]) >= need]
    if len(eligible) < spec.ways:
        raise SamplingError(
            f"{split} split has {len(eligible)} classes with at least {need} instances, "
            f"but a {spec.ways}-way {spec.shots}-shot episode with {spec.queries} queries needs {spec.ways}"
        )
    roster = [eligible[i] for i in rng.choice(len(eligible), size=spec.ways, replace=False)]

    # All sampling draws happen before any noise draw, so sweeps over p_noise
    # with a shared seed see identical classes and instances (paired design).
    chosen: list[list[SceneInstance]] = []
    for cls in roster:
        pool = by_class[cls]
        picks = rng.choice(len(pool), size=need, replace=False)
        chosen.append([pool[i] for i in picks])

    def prepare(inst: SceneInstance) -> SceneInstance:
        labels = select_context(inst.context, spec.context_source, corpus.train_classes, corpus.test_classes)
        if spec.p_noise > 0.0:
            labels = inject_noise(labels, spec.p_noise, corpus.train_classes, rng)
        return SceneInstance(label=inst.label, features=inst.features, context=tuple(labels), size=inst.size)

    support: list[list[SceneInstance]] = []
    queries: list[SceneInstance] = []
    targets: list[int] = []
    for k, picks in enumerate(chosen):
        support.append([prepare(i) for i in picks[: spec.shots]])
        for inst in picks[spec.shots:]:
            queries.append(prepare(inst))
            targets.append(k)
    return Episode(roster=roster, support=support, queries=queries, query_targets=np.asarray(targets, dtype=np.int64))
