"""Gradient-check case inventory.

Each case is (name, f, params): f rebuilds a scalar loss from the
current parameter values, so finite differences and the analytic
backward pass can be compared by autodiff.grad_check. Cases cover every
differentiable op individually, the attention composite, the prefix
feed-forward, the prompt encoder stack, and a full prefix-injected
encoder-decoder loss.
"""
from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, grad_check
from .model import ModelConfig, Seq2Seq, attend_with_prefix
from .prefix import PrefixConfig, PrefixProjector, PromptEncoder, PromptEncoderConfig

Case = tuple[str, Callable[[], Tensor], list[Tensor]]


def _scalarize(out: Tensor, weights: np.ndarray) -> Tensor:
    """Reduce any tensor to a (1, 1) scalar via a fixed weighted sum."""
    flat = ad.reshape(out, (1, out.data.size))
    return ad.matmul(flat, Tensor(weights.reshape(-1, 1)))


def op_cases(rng: np.random.Generator) -> list[Case]:
    """One focused gradient check per differentiable op."""
    cases: list[Case] = []

    def weighted(name: str, build: Callable[[], Tensor], params: list[Tensor]) -> None:
        probe: Optional[np.ndarray] = None

        def f() -> Tensor:
            nonlocal probe
            out = build()
            if probe is None:
                probe = rng.normal(size=out.data.size)
            return _scalarize(out, probe)

        cases.append((name, f, params))

    a = ad.parameter(rng.normal(size=(3, 4)))
    b = ad.parameter(rng.normal(size=(4,)))
    weighted("add", lambda: ad.add(a, b), [a, b])

    c = ad.parameter(rng.normal(size=(3, 4)))
    d = ad.parameter(rng.normal(size=(4,)))
    weighted("mul", lambda: ad.mul(c, d), [c, d])

    e = ad.parameter(rng.normal(size=(2, 5)))
    weighted("scale", lambda: ad.scale(e, -1.7), [e])

    m1 = ad.parameter(rng.normal(size=(2, 3, 4)))
    m2 = ad.parameter(rng.normal(size=(4, 5)))
    m3 = ad.parameter(rng.normal(size=(2, 5, 3)))
    weighted("matmul", lambda: ad.matmul(ad.matmul(m1, m2), m3), [m1, m2, m3])

    t1 = ad.parameter(rng.normal(size=(3, 4)))
    weighted("tanh", lambda: ad.tanh(t1), [t1])

    g1 = ad.parameter(rng.normal(size=(3, 4)) * 2.0)
    weighted("gelu", lambda: ad.gelu(g1), [g1])

    s1 = ad.parameter(rng.normal(size=(2, 3, 5)))
    weighted("softmax", lambda: ad.softmax(s1, axis=-1), [s1])

    x = ad.parameter(rng.normal(size=(2, 3, 6)))
    gain = ad.parameter(rng.normal(size=(6,)) * 0.5 + 1.0)
    bias = ad.parameter(rng.normal(size=(6,)) * 0.1)
    weighted("layer_norm", lambda: ad.layer_norm(x, gain, bias), [x, gain, bias])

    table = ad.parameter(rng.normal(size=(7, 4)))
    ids = np.array([[0, 3, 3, 6], [2, 0, 5, 3]])  # repeats exercise accumulation
    weighted("embedding_lookup", lambda: ad.embedding_lookup(table, ids), [table])

    c1 = ad.parameter(rng.normal(size=(2, 2, 3)))
    c2 = ad.parameter(rng.normal(size=(2, 4, 3)))
    c3 = ad.parameter(rng.normal(size=(2, 1, 3)))
    weighted("concat", lambda: ad.concat([c1, c2, c3], axis=1), [c1, c2, c3])

    n1 = ad.parameter(rng.normal(size=(3, 6, 2)))
    weighted("narrow", lambda: ad.narrow(n1, 1, 2, 3), [n1])

    r1 = ad.parameter(rng.normal(size=(3, 4, 2)))
    weighted("reshape", lambda: ad.reshape(r1, (6, 4)), [r1])

    p1 = ad.parameter(rng.normal(size=(2, 3, 4)))
    weighted("transpose", lambda: ad.transpose(p1, (2, 0, 1)), [p1])

    logits = ad.parameter(rng.normal(size=(6, 5)))
    targets = np.array([1, 4, 0, 0, 2, 3])
    cases.append(("cross_entropy", lambda: ad.cross_entropy(logits, targets, ignore_id=0), [logits]))

    q = ad.parameter(rng.normal(size=(2, 3, 8)))
    k = ad.parameter(rng.normal(size=(2, 4, 8)))
    v = ad.parameter(rng.normal(size=(2, 4, 8)))
    pre = ad.parameter(rng.normal(size=(2, 8)))
    causal = np.tril(np.ones((3, 4), dtype=bool))
    weighted(
        "attend_with_prefix",
        lambda: attend_with_prefix(q, k, v, n_heads=2, prefix=pre, mask=causal),
        [q, k, v, pre],
    )
    return cases


def prefix_ffnn_case(rng: np.random.Generator) -> Case:
    """The feed-forward prefix projector alone."""
    projector = PrefixProjector(rng, d_in=12, d_model=8, prefix=PrefixConfig(length=4), n_enc_layers=1, n_dec_layers=1)
    h = ad.parameter(rng.normal(size=(1, 12)))
    probe = rng.normal(size=4 * 8)
    params = [h] + [projector.named_parameters()[n] for n in sorted(projector.named_parameters())]

    def f() -> Tensor:
        return _scalarize(projector(h).enc[0], probe)

    return "prefix_ffnn", f, params


def prompt_encoder_case(rng: np.random.Generator) -> Case:
    """The structural prompt encoder through its [CLS] readout."""
    config = PromptEncoderConfig(vocab_size=11, d_model=16, n_heads=4, n_layers=1, d_ff=32, max_len=8)
    encoder = PromptEncoder(config, rng)
    ids = np.array([[2, 4, 7, 3, 10, 5], [2, 9, 8, 1, 4, 6]])
    probe = rng.normal(size=2 * 16)
    named = encoder.named_parameters()
    params = [named[n] for n in sorted(named)]

    def f() -> Tensor:
        return _scalarize(encoder.encode_cls(ids), probe)

    return "prompt_encoder", f, params


def full_model_case(rng: np.random.Generator) -> Case:
    """Prefix-injected encoder-decoder loss, every parameter included.

    A 2+2-layer model at d_model=16 with an l=4 prefix produced by the
    projector, teacher-forced on a tiny padded batch.
    """
    config = ModelConfig(
        vocab_size=23,
        d_model=16,
        n_heads=4,
        n_enc_layers=2,
        n_dec_layers=2,
        d_ff=32,
        max_src_len=8,
        max_tgt_len=8,
    )
    model = Seq2Seq(config, rng)
    projector = PrefixProjector(
        rng, d_in=16, d_model=16, prefix=PrefixConfig(length=4), n_enc_layers=2, n_dec_layers=2
    )
    h = ad.parameter(rng.normal(size=(1, 16)))
    src = np.array([[3, 9, 14, 7, 21], [4, 11, 0, 0, 0]])
    tgt_in = np.array([[1, 5, 8, 17], [1, 6, 0, 0]])
    tgt_out = np.array([[5, 8, 17, 2], [6, 2, 0, 0]])

    named = dict(model.named_parameters())
    for name, p in projector.named_parameters().items():
        named[f"projector.{name}"] = p
    named["h_cls"] = h
    params = [named[n] for n in sorted(named)]

    def f() -> Tensor:
        prefix = projector(h)
        return model.loss(src, tgt_in, tgt_out, prefix.enc, prefix.cross)

    return "full_model", f, params


def all_cases(rng: np.random.Generator) -> list[Case]:
    return op_cases(rng) + [prefix_ffnn_case(rng), prompt_encoder_case(rng), full_model_case(rng)]


def run_gradient_checks(
    seed: int = 0,
    h: float = 1e-4,
    floor: float = 1e-3,
    max_coords_per_tensor: Optional[int] = None,
) -> dict[str, float]:
    """Worst relative error per case; the capstone of the numeric tests."""
    rng = np.random.default_rng(seed)
    results: dict[str, float] = {}
    for name, f, params in all_cases(rng):
        results[name] = grad_check(
            f, params, h=h, floor=floor, max_coords_per_tensor=max_coords_per_tensor,
            rng=np.random.default_rng(seed + 1),
        )
    return results
