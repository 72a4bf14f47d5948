"""Fusion of visual and context embeddings, and prototype construction.

The gated unit mixes the two inputs per dimension with a learned sigmoid
gate, so the output always lies inside the axis-aligned box spanned by the
inputs. Word refinement blends a prototype with a transformed class word
vector using a single learned scalar in (0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .encoders import _affine, glorot
from .errors import DimensionError, DomainError


@dataclass
class GateParams:
    """Gate projections: wv, wc are (d_z x d_x); wz is (d_x x 2 d_z)."""

    wv: Tensor
    bv: Tensor
    wc: Tensor
    bc: Tensor
    wz: Tensor
    bz: Tensor
    use_biases: bool = True

    @classmethod
    def initialize(cls, d_x: int, d_z: int, rng: np.random.Generator, use_biases: bool = True) -> "GateParams":
        return cls(
            wv=ad.parameter(glorot(rng, d_z, d_x)),
            bv=ad.parameter(np.zeros(d_z)),
            wc=ad.parameter(glorot(rng, d_z, d_x)),
            bc=ad.parameter(np.zeros(d_z)),
            wz=ad.parameter(glorot(rng, d_x, 2 * d_z)),
            bz=ad.parameter(np.zeros(d_x)),
            use_biases=use_biases,
        )

    def named(self) -> dict[str, Tensor]:
        return {
            "gate.wv": self.wv, "gate.bv": self.bv,
            "gate.wc": self.wc, "gate.bc": self.bc,
            "gate.wz": self.wz, "gate.bz": self.bz,
        }


@dataclass
class FusionTrace:
    """Fused output plus the gate and both inputs, kept for auditing."""

    fused: Tensor
    gate: Tensor
    visual: Tensor
    context: Tensor


def gated_fuse(fx: Tensor, gc: Tensor, p: GateParams) -> FusionTrace:
    """Per-dimension convex mix: z * fx + (1 - z) * gc.

    The gate z is a sigmoid over a projection of tanh summaries of both
    inputs, so every output coordinate stays between the two input
    coordinates. Accepts single vectors or batches of row vectors.
    """
    if fx.data.shape != gc.data.shape:
        raise DimensionError(f"fusion inputs must share a shape, got {fx.data.shape} and {gc.data.shape}")
    bias = (lambda b: b) if p.use_biases else (lambda b: None)
    hv = ad.tanh(_affine(fx, p.wv, bias(p.bv)))
    hc = ad.tanh(_affine(gc, p.wc, bias(p.bc)))
    joint = ad.concat([hv, hc], axis=0 if fx.data.ndim == 1 else 1)
    z = ad.sigmoid(_affine(joint, p.wz, bias(p.bz)))
    ones = ad.constant(np.ones_like(z.data))
    fused = ad.add(ad.mul(z, fx), ad.mul(ad.sub(ones, z), gc))
    return FusionTrace(fused=fused, gate=z, visual=fx, context=gc)


def class_prototype(embeddings: list[Tensor]) -> Tensor:
    """Arithmetic mean of a class's support embeddings."""
    if not embeddings:
        raise DomainError("prototype of an empty support set")
    dim = embeddings[0].data.shape
    if any(e.data.shape != dim for e in embeddings):
        raise DimensionError("support embeddings differ in shape")
    return ad.mean_tensors(embeddings)


def context_aware_prototype(pairs: list[tuple[Tensor, Tensor]], gate: GateParams) -> Tensor:
    """Mean of gated fusions of (visual, context) pairs for one class."""
    if not pairs:
        raise DomainError("prototype of an empty support set")
    return ad.mean_tensors([gated_fuse(fx, gc, gate).fused for fx, gc in pairs])


@dataclass
class RefineParams:
    """Shared tanh hidden layer over the word vector with two heads.

    The vector head (linear) produces the transformed word embedding; the
    scalar head (sigmoid) produces the blend coefficient.
    """

    wh: Tensor
    bh: Tensor
    ww: Tensor
    bw: Tensor
    wl: Tensor
    bl: Tensor

    @classmethod
    def initialize(cls, d_w: int, d_h: int, d_x: int, rng: np.random.Generator) -> "RefineParams":
        return cls(
            wh=ad.parameter(glorot(rng, d_h, d_w)),
            bh=ad.parameter(np.zeros(d_h)),
            ww=ad.parameter(glorot(rng, d_x, d_h)),
            bw=ad.parameter(np.zeros(d_x)),
            wl=ad.parameter(glorot(rng, 1, d_h)),
            bl=ad.parameter(np.zeros(1)),
        )

    def named(self) -> dict[str, Tensor]:
        return {
            "refine.wh": self.wh, "refine.bh": self.bh,
            "refine.ww": self.ww, "refine.bw": self.bw,
            "refine.wl": self.wl, "refine.bl": self.bl,
        }


def refine_with_word(proto: Tensor, word_vec, p: RefineParams) -> tuple[Tensor, Tensor]:
    """Blend a prototype with the transformed class word vector.

    Returns (refined prototype, lam) where lam is a scalar tensor strictly
    inside (0, 1) and refined = lam * proto + (1 - lam) * w_hat.
    """
    w = word_vec if isinstance(word_vec, Tensor) else ad.constant(word_vec)
    hidden = ad.tanh(ad.add(ad.matmul(p.wh, w), p.bh))
    w_hat = ad.add(ad.matmul(p.ww, hidden), p.bw)
    lam = ad.sigmoid(ad.add(ad.matmul(p.wl, hidden), p.bl))  # shape (1,)
    one = ad.constant(np.ones(1))
    refined = ad.add(ad.smul(proto, lam), ad.smul(w_hat, ad.sub(one, lam)))
    return refined, lam
