"""Visual encoder and context projector.

The encoder is a two-layer dense map (tanh hidden, linear output) from raw
feature space into the shared embedding space; the projector is a single
tanh layer from word space into the same embedding space. Both accept a
single vector or a batch of row vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


def glorot(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (rows + cols))
    return rng.uniform(-limit, limit, size=(rows, cols))


def _affine(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    # vector input: w @ x + b; batch of rows: x @ w.T + b
    if x.data.ndim == 1:
        out = ad.matmul(w, x)
    else:
        out = ad.matmul(x, ad.transpose(w))
    return out if b is None else ad.add(out, b)


@dataclass
class EncoderParams:
    """Two-layer visual encoder weights: (hidden x d_f), (d_x x hidden)."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def initialize(cls, d_f: int, d_x: int, hidden: int, rng: np.random.Generator) -> "EncoderParams":
        return cls(
            w1=ad.parameter(glorot(rng, hidden, d_f)),
            b1=ad.parameter(np.zeros(hidden)),
            w2=ad.parameter(glorot(rng, d_x, hidden)),
            b2=ad.parameter(np.zeros(d_x)),
        )

    def named(self) -> dict[str, Tensor]:
        return {"encoder.w1": self.w1, "encoder.b1": self.b1, "encoder.w2": self.w2, "encoder.b2": self.b2}


def encode_visual(raw: Tensor, p: EncoderParams) -> Tensor:
    """Embed raw features: linear(w2, tanh(linear(w1, raw)))."""
    hidden = ad.tanh(_affine(raw, p.w1, p.b1))
    return _affine(hidden, p.w2, p.b2)


@dataclass
class ProjectorParams:
    """Single tanh layer mapping word space (d_w) into embedding space (d_x)."""

    w: Tensor
    b: Tensor

    @classmethod
    def initialize(cls, d_w: int, d_x: int, rng: np.random.Generator) -> "ProjectorParams":
        return cls(w=ad.parameter(glorot(rng, d_x, d_w)), b=ad.parameter(np.zeros(d_x)))

    def named(self) -> dict[str, Tensor]:
        return {"projector.w": self.w, "projector.b": self.b}


def project_context(c: Tensor, p: ProjectorParams) -> Tensor:
    """Project a pooled context vector (or batch of rows) into embedding space."""
    return ad.tanh(_affine(c, p.w, p.b))
