"""Episodic evaluation: top-k accuracy, confidence intervals, sweeps, strata.

Every episode i of a run draws from an rng seeded by (seed, i), so results
are independent of evaluation order and runs over different noise levels or
variants with the same seed are paired episode by episode.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .episodes import EpisodeSpec, sample_episode
from .errors import DomainError
from .model import TrainedModel, forward_episode


@dataclass
class EvalReport:
    """Accuracy summary over episodes plus the raw per-episode scores."""

    variant: str
    spec: dict
    mean: float
    ci95: float
    top_k: int
    n_episodes: int
    seed: int
    per_episode: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls(**json.loads(text))


def confidence_half_width(per_episode) -> float:
    """95% half-width, 1.96 * std / sqrt(n); a constant vector gives 0."""
    scores = np.asarray(per_episode, dtype=np.float64)
    if scores.size == 0:
        return 0.0
    return float(1.96 * scores.std() / math.sqrt(scores.size))


def topk_hits(probs: np.ndarray, targets: np.ndarray, top_k: int) -> np.ndarray:
    """Whether each query's true class is among its top_k most probable.

    Probability ties rank the lower roster index first (stable argsort).
    """
    if top_k < 1 or top_k > probs.shape[1]:
        raise DomainError(f"top_k must be in [1, {probs.shape[1]}], got {top_k}")
    order = np.argsort(-probs, axis=1, kind="stable")[:, :top_k]
    return (order == np.asarray(targets)[:, None]).any(axis=1)


def _summarize(model: TrainedModel, spec: EpisodeSpec, accs: list[float], top_k: int, seed: int) -> EvalReport:
    return EvalReport(
        variant=model.variant.value,
        spec=spec.to_dict(),
        mean=float(np.mean(accs)) if accs else 0.0,
        ci95=confidence_half_width(accs),
        top_k=top_k,
        n_episodes=len(accs),
        seed=seed,
        per_episode=[float(a) for a in accs],
    )


def evaluate(model: TrainedModel, corpus: Corpus, spec: EpisodeSpec, n_episodes: int,
             top_k: int = 1, seed: int = 0, split: str = "test") -> EvalReport:
    accs: list[float] = []
    for i in range(n_episodes):
        rng = np.random.default_rng((seed, i))
        episode = sample_episode(corpus, spec, rng, split=split)
        out = forward_episode(episode, model.variant, model.params, corpus.word_table)
        accs.append(float(topk_hits(out.probs, episode.query_targets, top_k).mean()))
    return _summarize(model, spec, accs, top_k, seed)


def noise_sweep(model: TrainedModel, corpus: Corpus, spec: EpisodeSpec, p_grid,
                n_episodes: int, top_k: int = 1, seed: int = 0, split: str = "test") -> list[tuple[float, EvalReport]]:
    """One report per noise level, paired through shared episode seeds."""
    out = []
    for p in p_grid:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"noise grid value {p} outside [0, 1]")
        noisy = dataclasses.replace(spec, p_noise=float(p))
        out.append((float(p), evaluate(model, corpus, noisy, n_episodes, top_k=top_k, seed=seed, split=split)))
    return out


@dataclass
class StrataBin:
    lo: float
    hi: float
    n_queries: int
    report: EvalReport


def strata_eval(model: TrainedModel, corpus: Corpus, spec: EpisodeSpec, size_bins,
                n_episodes: int, top_k: int = 1, seed: int = 0, split: str = "test") -> list[StrataBin]:
    """Accuracy restricted to queries whose size falls in each bin.

    Bins are [lo, hi) except the last, which also includes its upper edge.
    Bins that never receive a query are absent from the result.
    """
    bins = [(float(lo), float(hi)) for lo, hi in size_bins]
    if not bins:
        raise DomainError("size_bins is empty")
    per_bin_accs: list[list[float]] = [[] for _ in bins]
    per_bin_counts = [0 for _ in bins]

    def bin_index(size: float) -> int | None:
        for b, (lo, hi) in enumerate(bins):
            if lo <= size < hi or (b == len(bins) - 1 and size == hi):
                return b
        return None

    for i in range(n_episodes):
        rng = np.random.default_rng((seed, i))
        episode = sample_episode(corpus, spec, rng, split=split)
        out = forward_episode(episode, model.variant, model.params, corpus.word_table)
        hits = topk_hits(out.probs, episode.query_targets, top_k)
        members: list[list[int]] = [[] for _ in bins]
        for q, inst in enumerate(episode.queries):
            if inst.size is None:
                raise DomainError("strata evaluation needs size metadata on every instance")
            b = bin_index(float(inst.size))
            if b is not None:
                members[b].append(q)
        for b, qs in enumerate(members):
            if qs:
                per_bin_accs[b].append(float(hits[qs].mean()))
                per_bin_counts[b] += len(qs)

    result = []
    for (lo, hi), accs, count in zip(bins, per_bin_accs, per_bin_counts):
        if count == 0:
            continue
        result.append(StrataBin(lo=lo, hi=hi, n_queries=count, report=_summarize(model, spec, accs, top_k, seed)))
    return result


def reports_to_csv(rows: list[dict]) -> str:
    """Flatten report cells (dicts with consistent keys) into CSV text."""
    if not rows:
        return ""
    header = list(rows[0].keys())
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(str(row[k]) for k in header))
    return "\n".join(lines) + "\n"
