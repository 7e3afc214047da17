"""Structural prefix learning.

The four structural prompts for an event type are joined into one
sequence, run through a small encoder-only transformer, and the
representation at the leading [CLS] position is mapped by a feed-forward
projector to a prefix matrix P of shape (l, d_model). The sequence model
then attends over P alongside its real keys and values (see
model.attend_with_prefix).

By default one P is shared by every injection site; a per-layer variant
(one P per encoder layer and per decoder layer) can be switched on in
the projector config.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .model import EncoderLayer, Linear
from .templates import build_structural_sequence
from .tokenizer import Vocab

PROMPT_ENCODER_SCOPE = "prompt_encoder"
PROJECTOR_SCOPE = "prefix_projector"


@dataclass
class PromptEncoderConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 0  # 0 means 4 * d_model
    max_len: int = 192
    layer_norm_eps: float = 1e-5
    init_std: float = 0.02

    def __post_init__(self):
        if self.d_ff == 0:
            self.d_ff = 4 * self.d_model
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PromptEncoderConfig":
        return cls(**json.loads(text))


@dataclass
class PrefixConfig:
    length: int = 40
    per_layer: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "PrefixConfig":
        return cls(**json.loads(text))


@dataclass
class Prefix:
    """Per-injection-site prefix tensors for one event type."""

    enc: list[Optional[Tensor]] = field(default_factory=list)
    cross: list[Optional[Tensor]] = field(default_factory=list)

    @classmethod
    def disabled(cls, n_enc_layers: int, n_dec_layers: int) -> "Prefix":
        return cls(enc=[None] * n_enc_layers, cross=[None] * n_dec_layers)


class PromptEncoder:
    """Encoder-only transformer over the joined structural prompts."""

    def __init__(self, config: PromptEncoderConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.embed = ad.normal_init(rng, (c.vocab_size, c.d_model), std=c.init_std)
        self.pos = ad.normal_init(rng, (c.max_len, c.d_model), std=c.init_std)
        self.layers = [
            EncoderLayer(rng, c.d_model, c.n_heads, c.d_ff, c.layer_norm_eps, c.init_std)
            for _ in range(c.n_layers)
        ]

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"embed": self.embed, "pos": self.pos}
        for i, layer in enumerate(self.layers):
            for key, tensor in layer.params().items():
                out[f"layers.{i}.{key}"] = tensor
        return out

    def encode_cls(self, ids: np.ndarray) -> Tensor:
        """ids: (B, T) with the [CLS] token first; returns (B, d_model)."""
        ids = np.asarray(ids, dtype=np.int64)
        if ids.shape[1] > self.config.max_len:
            raise ValueError(
                f"structural sequence length {ids.shape[1]} exceeds maximum {self.config.max_len}"
            )
        tok = ad.embedding_lookup(self.embed, ids)
        pos = ad.narrow(self.pos, 0, 0, ids.shape[1])
        h = ad.add(tok, pos)
        for layer in self.layers:
            h = layer(h, None, None)
        lead = ad.narrow(h, 1, 0, 1)
        return ad.reshape(lead, (ids.shape[0], self.config.d_model))


class PrefixProjector:
    """Feed-forward map from the [CLS] state to prefix matrices.

    One hidden layer of width 4 * d_model with tanh, then a linear layer
    producing l * d_model values (times the number of injection layers
    in per-layer mode), reshaped to (l, d_model) blocks.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        d_in: int,
        d_model: int,
        prefix: PrefixConfig,
        n_enc_layers: int,
        n_dec_layers: int,
        init_std: float = 0.02,
    ):
        self.d_model = d_model
        self.prefix = prefix
        self.n_enc_layers = n_enc_layers
        self.n_dec_layers = n_dec_layers
        self.n_blocks = (n_enc_layers + n_dec_layers) if prefix.per_layer else 1
        hidden = 4 * d_model
        out_dim = self.n_blocks * prefix.length * d_model
        self.lin1 = Linear(rng, d_in, hidden, init_std)
        self.lin2 = Linear(rng, hidden, max(out_dim, 1), init_std)
        self._out_dim = out_dim

    def named_parameters(self) -> dict[str, Tensor]:
        out = {}
        for part, lin in (("lin1", self.lin1), ("lin2", self.lin2)):
            for key, tensor in lin.params().items():
                out[f"{part}.{key}"] = tensor
        return out

    def __call__(self, h_cls: Tensor) -> Prefix:
        """h_cls: (1, d_in) for one event type; returns its Prefix."""
        length = self.prefix.length
        if length == 0:
            return Prefix.disabled(self.n_enc_layers, self.n_dec_layers)
        z = ad.tanh(self.lin1(h_cls))
        flat = self.lin2(z)
        blocks = ad.reshape(flat, (self.n_blocks, length, self.d_model))
        if not self.prefix.per_layer:
            shared = ad.reshape(blocks, (length, self.d_model))
            return Prefix(
                enc=[shared] * self.n_enc_layers,
                cross=[shared] * self.n_dec_layers,
            )
        per_layer = [
            ad.reshape(ad.narrow(blocks, 0, i, 1), (length, self.d_model))
            for i in range(self.n_blocks)
        ]
        return Prefix(
            enc=per_layer[: self.n_enc_layers],
            cross=per_layer[self.n_enc_layers :],
        )


def structural_ids(event_type: str, vocab: Vocab) -> np.ndarray:
    """Token ids of the joined structural prompt sequence, shape (1, T)."""
    text = build_structural_sequence(event_type)
    ids, _ = vocab.encode(text)
    return np.asarray([ids], dtype=np.int64)


def build_prefix(
    event_type: str,
    vocab: Vocab,
    encoder: PromptEncoder,
    projector: PrefixProjector,
) -> Prefix:
    """Structural prompts -> [CLS] state -> prefix, for one event type."""
    h_cls = encoder.encode_cls(structural_ids(event_type, vocab))
    return projector(h_cls)
