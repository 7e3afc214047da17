"""Encoder-decoder transformer with prefix-injected attention.

The model is a conventional post-layer-norm transformer built on the
Tensor autodiff ops, with one structural extension: attention can be
given a learned prefix, a matrix P of l extra positions that acts as
both additional keys and additional values. The prefix participates in
encoder self-attention and decoder cross-attention; decoder
self-attention never sees it. Prefix positions are always attendable;
padding and causal masks apply to real positions only.

With no prefix (or l == 0) every code path reduces to the plain
transformer computation.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

NEG_INF = -1e9


@dataclass
class ModelConfig:
    vocab_size: int
    d_model: int = 64
    n_heads: int = 4
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    d_ff: int = 0  # 0 means 4 * d_model
    max_src_len: int = 256
    max_tgt_len: int = 96
    pad_id: int = 0
    bos_id: int = 1
    eos_id: int = 2
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
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


def attend_with_prefix(
    q: Tensor,
    k: Tensor,
    v: Tensor,
    n_heads: int,
    prefix: Optional[Tensor] = None,
    mask: Optional[np.ndarray] = None,
) -> Tensor:
    """Scaled dot-product attention over real positions plus a prefix.

    q: (B, Tq, D); k, v: (B, Tk, D), already projected. prefix: (l, D)
    shared across the batch or (B, l, D) per item; its rows serve as both
    keys and values. mask: boolean array broadcastable to (B, 1, Tq, Tk),
    True where a real position may be attended; the prefix is exempt
    from masking by construction. Returns (B, Tq, D).
    """
    b, t_q, d = q.shape
    t_k = k.shape[1]
    if d % n_heads != 0:
        raise ValueError(f"width {d} not divisible by {n_heads} heads")
    d_head = d // n_heads
    inv_sqrt = 1.0 / math.sqrt(d_head)

    qh = ad.transpose(ad.reshape(q, (b, t_q, n_heads, d_head)), (0, 2, 1, 3))
    kh = ad.transpose(ad.reshape(k, (b, t_k, n_heads, d_head)), (0, 2, 1, 3))
    vh = ad.transpose(ad.reshape(v, (b, t_k, n_heads, d_head)), (0, 2, 1, 3))

    scores_real = ad.scale(ad.matmul(qh, ad.transpose(kh, (0, 1, 3, 2))), inv_sqrt)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        while mask.ndim < 4:
            mask = mask[np.newaxis]
        additive = np.where(mask, 0.0, NEG_INF)
        scores_real = ad.add(scores_real, Tensor(additive))

    l = 0 if prefix is None else prefix.shape[-2]
    if l > 0:
        if prefix.ndim == 2:
            ph = ad.transpose(ad.reshape(prefix, (l, n_heads, d_head)), (1, 0, 2))
            ph_t = ad.transpose(ph, (0, 2, 1))
        elif prefix.ndim == 3:
            ph = ad.transpose(ad.reshape(prefix, (b, l, n_heads, d_head)), (0, 2, 1, 3))
            ph_t = ad.transpose(ph, (0, 1, 3, 2))
        else:
            raise ValueError(f"prefix must be (l, D) or (B, l, D), got {prefix.shape}")
        scores_prefix = ad.scale(ad.matmul(qh, ph_t), inv_sqrt)
        scores = ad.concat([scores_prefix, scores_real], axis=-1)
        attn = ad.softmax(scores, axis=-1)
        attn_prefix = ad.narrow(attn, attn.ndim - 1, 0, l)
        attn_real = ad.narrow(attn, attn.ndim - 1, l, t_k)
        context = ad.add(ad.matmul(attn_prefix, ph), ad.matmul(attn_real, vh))
    else:
        attn = ad.softmax(scores_real, axis=-1)
        context = ad.matmul(attn, vh)

    return ad.reshape(ad.transpose(context, (0, 2, 1, 3)), (b, t_q, d))


class Linear:
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, std: float = 0.02):
        self.w = ad.normal_init(rng, (d_in, d_out), std=std)
        self.b = ad.zeros_init((d_out,))

    def __call__(self, x: Tensor) -> Tensor:
        return ad.add(ad.matmul(x, self.w), self.b)

    def params(self) -> dict[str, Tensor]:
        return {"w": self.w, "b": self.b}


class LayerNorm:
    def __init__(self, d: int, eps: float = 1e-5):
        self.gain = ad.ones_init((d,))
        self.bias = ad.zeros_init((d,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return ad.layer_norm(x, self.gain, self.bias, self.eps)

    def params(self) -> dict[str, Tensor]:
        return {"gain": self.gain, "bias": self.bias}


class MultiHeadAttention:
    def __init__(self, rng: np.random.Generator, d_model: int, n_heads: int, std: float = 0.02):
        self.n_heads = n_heads
        self.wq = Linear(rng, d_model, d_model, std)
        self.wk = Linear(rng, d_model, d_model, std)
        self.wv = Linear(rng, d_model, d_model, std)
        self.wo = Linear(rng, d_model, d_model, std)

    def __call__(self, query, keys_values, mask=None, prefix=None) -> Tensor:
        attended = attend_with_prefix(
            self.wq(query),
            self.wk(keys_values),
            self.wv(keys_values),
            self.n_heads,
            prefix=prefix,
            mask=mask,
        )
        return self.wo(attended)

    def params(self) -> dict[str, Tensor]:
        out = {}
        for part, lin in (("wq", self.wq), ("wk", self.wk), ("wv", self.wv), ("wo", self.wo)):
            for key, tensor in lin.params().items():
                out[f"{part}.{key}"] = tensor
        return out


class FeedForward:
    def __init__(self, rng: np.random.Generator, d_model: int, d_ff: int, std: float = 0.02):
        self.lin1 = Linear(rng, d_model, d_ff, std)
        self.lin2 = Linear(rng, d_ff, d_model, std)

    def __call__(self, x: Tensor) -> Tensor:
        return self.lin2(ad.gelu(self.lin1(x)))

    def params(self) -> dict[str, Tensor]:
        out = {}
        for part, lin in (("lin1", self.lin1), ("lin2", self.lin2)):
            for key, tensor in lin.params().items():
                out[f"{part}.{key}"] = tensor
        return out


def _collect(prefix: str, modules: dict) -> dict[str, Tensor]:
    out = {}
    for name, module in modules.items():
        for key, tensor in module.params().items():
            out[f"{prefix}{name}.{key}"] = tensor
    return out


class EncoderLayer:
    def __init__(self, rng, d_model, n_heads, d_ff, eps, std=0.02):
        self.attn = MultiHeadAttention(rng, d_model, n_heads, std)
        self.ln1 = LayerNorm(d_model, eps)
        self.ff = FeedForward(rng, d_model, d_ff, std)
        self.ln2 = LayerNorm(d_model, eps)

    def __call__(self, x, mask, prefix) -> Tensor:
        h = self.ln1(ad.add(x, self.attn(x, x, mask=mask, prefix=prefix)))
        return self.ln2(ad.add(h, self.ff(h)))

    def params(self) -> dict[str, Tensor]:
        return _collect("", {"attn": self.attn, "ln1": self.ln1, "ff": self.ff, "ln2": self.ln2})


class DecoderLayer:
    def __init__(self, rng, d_model, n_heads, d_ff, eps, std=0.02):
        self.self_attn = MultiHeadAttention(rng, d_model, n_heads, std)
        self.ln1 = LayerNorm(d_model, eps)
        self.cross_attn = MultiHeadAttention(rng, d_model, n_heads, std)
        self.ln2 = LayerNorm(d_model, eps)
        self.ff = FeedForward(rng, d_model, d_ff, std)
        self.ln3 = LayerNorm(d_model, eps)

    def __call__(self, x, memory, causal_mask, memory_mask, cross_prefix) -> Tensor:
        # The prefix extends keys/values only where the encoder output is
        # consumed; the causal self-attention below runs without it.
        h = self.ln1(ad.add(x, self.self_attn(x, x, mask=causal_mask, prefix=None)))
        h = self.ln2(ad.add(h, self.cross_attn(h, memory, mask=memory_mask, prefix=cross_prefix)))
        return self.ln3(ad.add(h, self.ff(h)))

    def params(self) -> dict[str, Tensor]:
        return _collect(
            "",
            {
                "self_attn": self.self_attn,
                "ln1": self.ln1,
                "cross_attn": self.cross_attn,
                "ln2": self.ln2,
                "ff": self.ff,
                "ln3": self.ln3,
            },
        )


def log_softmax_1d(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - np.log(np.exp(shifted).sum())


class Seq2Seq:
    """Token-to-token transformer with optional attention prefixes.

    Prefixes are supplied per layer as sequences (one entry per encoder
    layer / per decoder layer); a shared prefix is just the same tensor
    repeated. None (or an l == 0 entry) disables injection at that layer.
    """

    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.embed = ad.normal_init(rng, (c.vocab_size, c.d_model), std=c.init_std)
        self.pos_src = ad.normal_init(rng, (c.max_src_len, c.d_model), std=c.init_std)
        self.pos_tgt = ad.normal_init(rng, (c.max_tgt_len, c.d_model), std=c.init_std)
        self.enc_layers = [
            EncoderLayer(rng, c.d_model, c.n_heads, c.d_ff, c.layer_norm_eps, c.init_std)
            for _ in range(c.n_enc_layers)
        ]
        self.dec_layers = [
            DecoderLayer(rng, c.d_model, c.n_heads, c.d_ff, c.layer_norm_eps, c.init_std)
            for _ in range(c.n_dec_layers)
        ]

    def named_parameters(self) -> dict[str, Tensor]:
        out = {"embed": self.embed, "pos_src": self.pos_src, "pos_tgt": self.pos_tgt}
        for i, layer in enumerate(self.enc_layers):
            for key, tensor in layer.params().items():
                out[f"enc.{i}.{key}"] = tensor
        for i, layer in enumerate(self.dec_layers):
            for key, tensor in layer.params().items():
                out[f"dec.{i}.{key}"] = tensor
        return out

    def load_state(self, tensors: dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = sorted(set(params) - set(tensors))
        extra = sorted(set(tensors) - set(params))
        if missing or extra:
            raise ValueError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if p.data.shape != tensors[name].shape:
                raise ValueError(
                    f"{name}: shape {tensors[name].shape} does not match {p.data.shape}"
                )
            p.data = tensors[name].astype(np.float64).copy()

    def _embed_positions(self, ids: np.ndarray, table: Tensor, limit: int, side: str) -> Tensor:
        if ids.shape[1] > limit:
            raise ValueError(f"{side} length {ids.shape[1]} exceeds maximum {limit}")
        tok = ad.embedding_lookup(self.embed, ids)
        pos = ad.narrow(table, 0, 0, ids.shape[1])
        return ad.add(tok, pos)

    def encode(
        self, src_ids: np.ndarray, prefixes: Optional[Sequence[Optional[Tensor]]] = None
    ) -> tuple[Tensor, np.ndarray]:
        src_ids = np.asarray(src_ids, dtype=np.int64)
        c = self.config
        if prefixes is None:
            prefixes = [None] * c.n_enc_layers
        if len(prefixes) != c.n_enc_layers:
            raise ValueError(f"expected {c.n_enc_layers} encoder prefixes, got {len(prefixes)}")
        real = src_ids != c.pad_id
        mask = real[:, np.newaxis, np.newaxis, :]
        h = self._embed_positions(src_ids, self.pos_src, c.max_src_len, "source")
        for layer, prefix in zip(self.enc_layers, prefixes):
            h = layer(h, mask, prefix)
        return h, real

    def decode(
        self,
        memory: Tensor,
        src_real: np.ndarray,
        tgt_ids: np.ndarray,
        cross_prefixes: Optional[Sequence[Optional[Tensor]]] = None,
    ) -> Tensor:
        tgt_ids = np.asarray(tgt_ids, dtype=np.int64)
        c = self.config
        if cross_prefixes is None:
            cross_prefixes = [None] * c.n_dec_layers
        if len(cross_prefixes) != c.n_dec_layers:
            raise ValueError(
                f"expected {c.n_dec_layers} decoder prefixes, got {len(cross_prefixes)}"
            )
        t = tgt_ids.shape[1]
        causal = np.tril(np.ones((t, t), dtype=bool))
        memory_mask = src_real[:, np.newaxis, np.newaxis, :]
        h = self._embed_positions(tgt_ids, self.pos_tgt, c.max_tgt_len, "target")
        for layer, prefix in zip(self.dec_layers, cross_prefixes):
            h = layer(h, memory, causal, memory_mask, prefix)
        return ad.matmul(h, ad.transpose(self.embed, (1, 0)))

    def loss(
        self,
        src_ids: np.ndarray,
        tgt_in: np.ndarray,
        tgt_out: np.ndarray,
        enc_prefixes=None,
        cross_prefixes=None,
    ) -> Tensor:
        """Token-mean NLL of tgt_out under teacher forcing on tgt_in."""
        memory, src_real = self.encode(src_ids, enc_prefixes)
        logits = self.decode(memory, src_real, tgt_in, cross_prefixes)
        b, t, v = logits.shape
        flat = ad.reshape(logits, (b * t, v))
        return ad.cross_entropy(flat, np.asarray(tgt_out, dtype=np.int64).reshape(-1), self.config.pad_id)

    def _step_logprobs(self, memory, src_real, tokens: list[int], cross_prefixes) -> np.ndarray:
        logits = self.decode(memory, src_real, np.array([tokens], dtype=np.int64), cross_prefixes)
        return log_softmax_1d(logits.data[0, -1])

    def generate_greedy(
        self, src_ids: np.ndarray, enc_prefixes=None, cross_prefixes=None, max_len: Optional[int] = None
    ) -> list[int]:
        """Greedy decode for one source sequence; returns BOS ... EOS ids."""
        c = self.config
        if max_len is None:
            max_len = c.max_tgt_len - 1
        max_len = min(max_len, c.max_tgt_len - 1)
        memory, src_real = self.encode(np.asarray(src_ids, dtype=np.int64)[np.newaxis, :], enc_prefixes)
        tokens = [c.bos_id]
        for _ in range(max_len):
            logp = self._step_logprobs(memory, src_real, tokens, cross_prefixes)
            tokens.append(int(np.argmax(logp)))
            if tokens[-1] == c.eos_id:
                break
        return tokens

    def generate_beam(
        self,
        src_ids: np.ndarray,
        beam_size: int,
        enc_prefixes=None,
        cross_prefixes=None,
        max_len: Optional[int] = None,
    ) -> list[int]:
        """Beam search with length-normalized final ranking.

        Running beams are compared on summed log-probability; finished
        hypotheses are ranked by logp / generated-length. Ties break to
        the lexicographically smallest token sequence, so decoding is
        deterministic.
        """
        if beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        c = self.config
        if max_len is None:
            max_len = c.max_tgt_len - 1
        max_len = min(max_len, c.max_tgt_len - 1)
        memory, src_real = self.encode(np.asarray(src_ids, dtype=np.int64)[np.newaxis, :], enc_prefixes)
        beams: list[tuple[list[int], float]] = [([c.bos_id], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(max_len):
            candidates: list[tuple[list[int], float]] = []
            for tokens, score in beams:
                logp = self._step_logprobs(memory, src_real, tokens, cross_prefixes)
                top = np.argsort(-logp, kind="stable")[:beam_size]
                for token_id in top:
                    candidates.append((tokens + [int(token_id)], score + float(logp[token_id])))
            candidates.sort(key=lambda cand: (-cand[1], cand[0]))
            beams = []
            for tokens, score in candidates[:beam_size]:
                if tokens[-1] == c.eos_id:
                    finished.append((tokens, score))
                else:
                    beams.append((tokens, score))
            if not beams:
                break
        finished.extend(beams)
        finished.sort(key=lambda cand: (-cand[1] / max(len(cand[0]) - 1, 1), cand[0]))
        return finished[0][0]
