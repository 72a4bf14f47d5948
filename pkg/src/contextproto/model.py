"""Model variants, parameter bundle, and episode forward passes.

Six variants share one parameter layout and differ only in which pathways
are active:

==========  ============  =================  ===========
variant     uses context  support attention  word refine
==========  ============  =================  ===========
protonet    no            -                  no
am3         no            -                  yes
cavg        yes           averaging          no
ccam        yes           class-conditioned  no
cavg-w2v    yes           averaging          yes
full        yes           class-conditioned  yes
==========  ============  =================  ===========

Queries never see the class-conditioned attention (their class is unknown);
when context is in play they pool it by averaging and pass through the same
gate as the support side. An instance whose filtered context is empty falls
back to its raw visual embedding.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .attention import AttentionParams, ContextSet, attend_context, context_average
from .autodiff import Tensor
from .encoders import EncoderParams, ProjectorParams, encode_visual, project_context
from .episodes import Episode
from .errors import DimensionError, DomainError
from .fusion import GateParams, RefineParams, class_prototype, gated_fuse, refine_with_word
from .wordvec import WordTable


@dataclass(frozen=True)
class VariantFlags:
    uses_context: bool
    attention: str | None  # "avg" | "ccam" | None
    uses_word_refine: bool


class ModelVariant(enum.Enum):
    PROTONET = "protonet"
    AM3 = "am3"
    CAVG = "cavg"
    CCAM = "ccam"
    CAVG_W2V = "cavg-w2v"
    FULL = "full"

    @classmethod
    def parse(cls, token) -> "ModelVariant":
        if isinstance(token, cls):
            return token
        try:
            return cls(str(token).lower())
        except ValueError:
            raise DomainError(f"unknown variant {token!r}; expected one of {[v.value for v in cls]}") from None

    @property
    def flags(self) -> VariantFlags:
        return _FLAGS[self]


_FLAGS = {
    ModelVariant.PROTONET: VariantFlags(False, None, False),
    ModelVariant.AM3: VariantFlags(False, None, True),
    ModelVariant.CAVG: VariantFlags(True, "avg", False),
    ModelVariant.CCAM: VariantFlags(True, "ccam", False),
    ModelVariant.CAVG_W2V: VariantFlags(True, "avg", True),
    ModelVariant.FULL: VariantFlags(True, "ccam", True),
}


@dataclass(frozen=True)
class ModelConfig:
    """Dimensions and numeric conventions; None sub-dims inherit defaults."""

    d_f: int = 32
    d_x: int = 64
    d_w: int = 16
    d_c: int | None = None    # attention projection dim, defaults to d_x
    d_z: int | None = None    # gate hidden dim, defaults to d_x
    d_h: int | None = None    # refine hidden dim, defaults to d_w
    encoder_hidden: int | None = None  # defaults to d_x
    gate_biases: bool = True
    squared_distance: bool = True

    def resolved(self) -> "ModelConfig":
        return ModelConfig(
            d_f=self.d_f,
            d_x=self.d_x,
            d_w=self.d_w,
            d_c=self.d_c if self.d_c is not None else self.d_x,
            d_z=self.d_z if self.d_z is not None else self.d_x,
            d_h=self.d_h if self.d_h is not None else self.d_w,
            encoder_hidden=self.encoder_hidden if self.encoder_hidden is not None else self.d_x,
            gate_biases=self.gate_biases,
            squared_distance=self.squared_distance,
        )


@dataclass
class ModelParams:
    """All trainable weights plus the resolved config they were built for."""

    config: ModelConfig
    encoder: EncoderParams
    projector: ProjectorParams
    attention: AttentionParams
    gate: GateParams
    refine: RefineParams

    @classmethod
    def initialize(cls, config: ModelConfig, rng: np.random.Generator) -> "ModelParams":
        c = config.resolved()
        return cls(
            config=c,
            encoder=EncoderParams.initialize(c.d_f, c.d_x, c.encoder_hidden, rng),
            projector=ProjectorParams.initialize(c.d_w, c.d_x, rng),
            attention=AttentionParams.initialize(c.d_c, c.d_w, rng),
            gate=GateParams.initialize(c.d_x, c.d_z, rng, use_biases=c.gate_biases),
            refine=RefineParams.initialize(c.d_w, c.d_h, c.d_x, rng),
        )

    def named(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for group in (self.encoder, self.projector, self.attention, self.gate, self.refine):
            out.update(group.named())
        return out

    def trainable(self, variant: ModelVariant) -> dict[str, Tensor]:
        """The parameters the variant's forward pass actually uses."""
        flags = variant.flags
        out = dict(self.encoder.named())
        if flags.uses_context:
            out.update(self.projector.named())
            gate = self.gate.named()
            if not self.gate.use_biases:
                gate = {k: v for k, v in gate.items() if not k.startswith("gate.b")}
            out.update(gate)
        if flags.attention == "ccam":
            out.update(self.attention.named())
        if flags.uses_word_refine:
            out.update(self.refine.named())
        return out

    def zero_grads(self) -> None:
        for t in self.named().values():
            t.zero_grad()

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: dict[str, np.ndarray]) -> "ModelParams":
        """Rebuild a parameter bundle from named arrays (checkpoint loading)."""
        c = config.resolved()
        fresh = cls.initialize(c, np.random.default_rng(0))
        named = fresh.named()
        missing = sorted(set(named) - set(arrays))
        if missing:
            raise DimensionError(f"missing parameter arrays {missing}")
        for name, tensor in named.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != tensor.data.shape:
                raise DimensionError(f"{name}: stored shape {arr.shape} != expected {tensor.data.shape}")
            tensor.data = arr.copy()
        return fresh


@dataclass
class TrainedModel:
    """A variant plus its weights, word table, and class split."""

    variant: ModelVariant
    params: ModelParams
    word_table: WordTable
    train_classes: list[str]
    test_classes: list[str]


@dataclass
class EpisodeOutput:
    roster: list[str]
    probs: np.ndarray       # (n_queries, M), rows sum to 1, original query order
    loss: Tensor            # scalar cross-entropy node
    lambdas: dict[str, float] = field(default_factory=dict)  # refine blend per class


def _support_embedding(inst, cls: str, flags: VariantFlags, params: ModelParams, table: WordTable) -> Tensor:
    fx = encode_visual(ad.constant(inst.features), params.encoder)
    if not flags.uses_context or not inst.context:
        return fx
    ctx = ContextSet.from_labels(inst.context, table)
    if flags.attention == "ccam":
        pooled = attend_context(ctx, table.vector(cls), params.attention).pooled
    else:
        pooled = context_average(ctx)
    gc = project_context(pooled, params.projector)
    return gated_fuse(fx, gc, params.gate).fused


def build_prototypes(roster, support, variant: ModelVariant, params: ModelParams,
                     table: WordTable) -> tuple[list[Tensor], dict[str, float]]:
    """Per-class prototype nodes for a support set (list of instance lists)."""
    flags = variant.flags
    protos: list[Tensor] = []
    lambdas: dict[str, float] = {}
    for cls, insts in zip(roster, support):
        embedded = [_support_embedding(inst, cls, flags, params, table) for inst in insts]
        proto = class_prototype(embedded)
        if flags.uses_word_refine:
            proto, lam = refine_with_word(proto, table.vector(cls), params.refine)
            lambdas[cls] = lam.item()
        protos.append(proto)
    return protos, lambdas


def _query_matrix(instances, flags: VariantFlags, params: ModelParams, table: WordTable) -> tuple[list[int], Tensor]:
    """Embed queries in two batches (with / without usable context).

    Returns the query indices in processing order and the stacked embedding
    rows in that same order.
    """
    n = len(instances)
    with_ctx = [i for i in range(n) if flags.uses_context and instances[i].context]
    without = [i for i in range(n) if i not in set(with_ctx)]
    parts: list[Tensor] = []
    order: list[int] = []
    for idxs, fuse in ((with_ctx, True), (without, False)):
        if not idxs:
            continue
        feats = ad.constant(np.stack([instances[i].features for i in idxs]))
        emb = encode_visual(feats, params.encoder)
        if fuse:
            pooled = np.stack(
                [context_average(ContextSet.from_labels(instances[i].context, table)).data for i in idxs]
            )
            gc = project_context(ad.constant(pooled), params.projector)
            emb = gated_fuse(emb, gc, params.gate).fused
        parts.append(emb)
        order.extend(idxs)
    stacked = parts[0] if len(parts) == 1 else ad.concat(parts, axis=0)
    return order, stacked


def _distance_logits(embeddings: Tensor, protos: list[Tensor], squared: bool) -> Tensor:
    cols = []
    for p in protos:
        diff = ad.sub(embeddings, p)
        d = ad.tsum(ad.mul(diff, diff), axis=1)
        cols.append(d if squared else ad.sqrt(d))
    return ad.scale(ad.column_stack(cols), -1.0)


def forward_episode(episode: Episode, variant: ModelVariant, params: ModelParams,
                    word_table: WordTable) -> EpisodeOutput:
    """Classify every query against the episode's prototypes.

    Returns per-query distributions over the roster (rows sum to 1) and the
    scalar mean cross-entropy loss node for training.
    """
    variant = ModelVariant.parse(variant)
    protos, lambdas = build_prototypes(episode.roster, episode.support, variant, params, word_table)
    order, emb = _query_matrix(episode.queries, variant.flags, params, word_table)
    logits = _distance_logits(emb, protos, params.config.squared_distance)
    targets = episode.query_targets[order]
    loss = ad.cross_entropy(logits, targets)
    probs = ad.softmax_rows(logits.data)
    unshuffled = np.empty_like(probs)
    unshuffled[order] = probs
    return EpisodeOutput(roster=list(episode.roster), probs=unshuffled, loss=loss, lambdas=lambdas)


def query_distributions(instances, protos: list[Tensor], variant: ModelVariant, params: ModelParams,
                        word_table: WordTable) -> np.ndarray:
    """Distributions for arbitrary instances against fixed prototype nodes."""
    order, emb = _query_matrix(instances, ModelVariant.parse(variant).flags, params, word_table)
    logits = _distance_logits(emb, protos, params.config.squared_distance)
    probs = ad.softmax_rows(logits.data)
    out = np.empty_like(probs)
    out[order] = probs
    return out


def episode_loss(distributions: np.ndarray, targets) -> float:
    """Mean negative log-probability of the true classes.

    Reporting-side view of the loss; the training path computes the same
    quantity with a fused log-softmax so it can never return -inf.
    """
    p = np.asarray(distributions, dtype=np.float64)
    t = np.asarray(targets, dtype=np.int64)
    if p.ndim != 2 or t.shape != (p.shape[0],):
        raise DimensionError(f"need (n, M) distributions and (n,) targets, got {p.shape} and {t.shape}")
    if not np.allclose(p.sum(axis=1), 1.0, atol=1e-6):
        raise DomainError("each distribution must sum to 1")
    picked = p[np.arange(p.shape[0]), t]
    return float(-np.log(np.maximum(picked, 1e-300)).mean())
