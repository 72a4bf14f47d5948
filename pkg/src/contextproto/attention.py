"""Context handling.

Covers the class-conditioned scaled dot-product attention over context
labels (used on the support side, where the class is known), plain context
averaging (used for queries), context-source filtering, and label-noise
injection. All functions are pure given their inputs and an explicit rng.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DomainError, EmptyContextError
from .wordvec import WordTable


class ContextSource(enum.Enum):
    """Which class pools context labels may come from."""

    CS = "cs"        # training classes only
    CT = "ct"        # test classes only
    UNION = "union"  # either

    @classmethod
    def parse(cls, token: str) -> "ContextSource":
        try:
            return cls(str(token).lower())
        except ValueError:
            raise DomainError(f"unknown context source {token!r}; expected cs, ct, or union") from None


@dataclass(frozen=True)
class ContextSet:
    """Ordered context labels plus the (d_w x n_s) matrix of their vectors."""

    labels: tuple[str, ...]
    matrix: np.ndarray

    @classmethod
    def from_labels(cls, labels, table: WordTable) -> "ContextSet":
        labels = tuple(labels)
        return cls(labels=labels, matrix=table.context_matrix(labels))

    @property
    def n_s(self) -> int:
        return len(self.labels)


@dataclass
class AttentionParams:
    """Key/query projections (d_c x d_w), no biases.

    Both projections start from one shared semi-orthogonal draw, so initial
    scores are plain cosine similarity in word space (the product of the two
    matrices is the identity on word space). A random bilinear form would
    start with arbitrary-sign scores that episodic training at small scale
    cannot reliably repair.
    """

    wk: Tensor
    wq: Tensor

    @classmethod
    def initialize(cls, d_c: int, d_w: int, rng: np.random.Generator) -> "AttentionParams":
        q, _ = np.linalg.qr(rng.normal(size=(max(d_c, d_w), min(d_c, d_w))))
        w = q if d_c >= d_w else q.T
        return cls(wk=ad.parameter(w.copy()), wq=ad.parameter(w.copy()))

    def named(self) -> dict[str, Tensor]:
        return {"attention.wk": self.wk, "attention.wq": self.wq}

    @property
    def d_c(self) -> int:
        return self.wk.data.shape[0]


@dataclass
class AttentionResult:
    """Attention weights over context labels and the pooled context vector."""

    labels: tuple[str, ...]
    weights: Tensor  # (n_s,), nonnegative, sums to 1
    pooled: Tensor   # (d_w,), equals matrix @ weights

    def weight_map(self) -> dict[str, float]:
        out: dict[str, float] = {}
        for label, w in zip(self.labels, self.weights.data):
            out[label] = out.get(label, 0.0) + float(w)
        return out

    def ranked(self) -> list[tuple[str, float]]:
        """Per-label weights (duplicates summed), heaviest first."""
        return sorted(self.weight_map().items(), key=lambda kv: (-kv[1], kv[0]))


def attend_context(ctx: ContextSet, focal_vec, params: AttentionParams) -> AttentionResult:
    """Weight context labels by scaled dot-product relevance to the focal class.

    Keys are projected context vectors, the query is the projected focal word
    vector, scores are scaled by 1/sqrt(d_c), and the pooled vector is the
    weight-averaged context matrix.
    """
    if ctx.n_s == 0:
        raise EmptyContextError("attention over an empty context set")
    s = ad.constant(ctx.matrix)
    w = focal_vec if isinstance(focal_vec, Tensor) else ad.constant(focal_vec)
    keys = ad.matmul(params.wk, s)      # (d_c, n_s)
    query = ad.matmul(params.wq, w)     # (d_c,)
    scores = ad.scale(ad.matmul(ad.transpose(keys), query), 1.0 / math.sqrt(params.d_c))
    weights = ad.softmax(scores)
    pooled = ad.matmul(s, weights)
    return AttentionResult(labels=ctx.labels, weights=weights, pooled=pooled)


def context_average(ctx: ContextSet) -> Tensor:
    """Arithmetic mean of the context columns (the query-side pooling)."""
    if ctx.n_s == 0:
        raise EmptyContextError("average of an empty context set")
    return ad.constant(ctx.matrix.mean(axis=1))


def select_context(labels, source: ContextSource, train_classes, test_classes) -> list[str]:
    """Keep labels whose class membership matches the source mode, in order.

    Labels belonging to neither class pool are dropped in every mode.
    """
    train_set = set(train_classes)
    test_set = set(test_classes)
    if source is ContextSource.CS:
        keep = train_set
    elif source is ContextSource.CT:
        keep = test_set
    else:
        keep = train_set | test_set
    return [l for l in labels if l in keep]


def inject_noise(labels, p_noise: float, vocab, rng: np.random.Generator) -> list[str]:
    """Independently replace each label with probability p_noise.

    Replacements are drawn uniformly from vocab excluding the current label,
    so at p_noise = 1 every label is guaranteed to change.
    """
    if not 0.0 <= p_noise <= 1.0:
        raise DomainError(f"p_noise must be in [0, 1], got {p_noise}")
    vocab = list(vocab)
    if p_noise > 0.0 and len(vocab) < 2:
        raise DomainError("noise injection needs a vocabulary of at least 2 labels")
    index = {l: i for i, l in enumerate(vocab)}
    out: list[str] = []
    for label in labels:
        if rng.random() >= p_noise:
            out.append(label)
            continue
        pos = index.get(label)
        if pos is None:
            out.append(vocab[int(rng.integers(len(vocab)))])
        else:
            j = int(rng.integers(len(vocab) - 1))
            out.append(vocab[j if j < pos else j + 1])
    return out
