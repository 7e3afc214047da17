"""Subtask construction, pipeline training, and model persistence.

Training decomposes a corpus into (event type, context) subtasks: the
input is the rendered event prompt plus the context, the target is the
filled template for every gold event of that type (all-placeholder when
there are none — a negative subtask, downsampled to keep the task
balanced). Batches are homogeneous in event type so a single structural
prefix serves the whole batch.

A trained pipeline is a directory: checkpoint.bin, config.json,
vocab.txt, templates.json, ontology.json.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .autodiff import Adam, Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import Corpus, EventMention, Ontology, load_ontology, save_ontology
from .model import ModelConfig, Seq2Seq
from .prefix import (
    PROJECTOR_SCOPE,
    PROMPT_ENCODER_SCOPE,
    Prefix,
    PrefixConfig,
    PrefixProjector,
    PromptEncoder,
    PromptEncoderConfig,
    build_prefix,
)
from .templates import (
    EventPrompt,
    TemplateStore,
    build_event_prompt,
    build_input,
    build_structural_sequence,
    render_target,
)
from .tokenizer import Vocab, build_vocab

CHECKPOINT_FILE = "checkpoint.bin"
CONFIG_FILE = "config.json"
VOCAB_FILE = "vocab.txt"
TEMPLATES_FILE = "templates.json"
ONTOLOGY_FILE = "ontology.json"


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 16
    lr_seq2seq: float = 1e-5
    lr_prompt_encoder: float = 1e-6
    negative_ratio: float = 1.0
    seed: int = 0
    shuffle: bool = True
    max_steps: int = 0  # 0 = no cap
    warmup_steps: int = 0
    cosine_decay: bool = False
    init_std: float = 0.02
    beam_size: int = 1

    PRESETS = {
        # Fine-tuning-scale corpora: small steps, many passes.
        "phee": {"epochs": 50, "batch_size": 16, "lr_seq2seq": 1e-5, "lr_prompt_encoder": 1e-6},
        "mlee-ge11": {"epochs": 80, "batch_size": 16, "lr_seq2seq": 1e-5, "lr_prompt_encoder": 1e-6},
        # From-scratch toy models: larger steps and a wider init, with
        # warmup plus cosine decay to settle into an exact fit.
        "synthetic": {
            "epochs": 500,
            "batch_size": 8,
            "lr_seq2seq": 1e-3,
            "lr_prompt_encoder": 2.5e-4,
            "max_steps": 500,
            "warmup_steps": 75,
            "cosine_decay": True,
            "init_std": 0.15,
        },
    }

    @classmethod
    def preset(cls, name: str, **overrides) -> "TrainConfig":
        if name not in cls.PRESETS:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(cls.PRESETS)}")
        values = dict(cls.PRESETS[name])
        values.update(overrides)
        return cls(**values)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class Subtask:
    """One (event type, context) training example."""

    instance_id: str
    event_type: str
    input_text: str
    target_text: str
    positive: bool


def build_subtasks(
    corpus: Corpus,
    store: TemplateStore,
    negative_ratio: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> list[Subtask]:
    """Decompose a corpus into subtasks, downsampling negatives.

    negative_ratio bounds negatives at ratio * positives (a seeded draw
    without replacement, order preserved); a negative value keeps all.
    """
    ontology = corpus.ontology
    store.ensure_covers(ontology)
    prompts = {t: build_event_prompt(t, ontology, store) for t in ontology.event_types}
    positives: list[Subtask] = []
    negatives: list[Subtask] = []
    for inst in corpus:
        by_type: dict[str, list[EventMention]] = {}
        for event in inst.events:
            by_type.setdefault(event.event_type, []).append(event)
        for event_type in ontology.event_types:
            prompt = prompts[event_type]
            events = by_type.get(event_type, [])
            subtask = Subtask(
                instance_id=inst.id,
                event_type=event_type,
                input_text=build_input(prompt, inst.context),
                target_text=render_target(prompt.template, events, inst.context),
                positive=bool(events),
            )
            (positives if events else negatives).append(subtask)
    if negative_ratio >= 0:
        cap = min(len(negatives), round(negative_ratio * len(positives)))
        if cap < len(negatives):
            gen = rng if rng is not None else np.random.default_rng(0)
            picked = sorted(gen.choice(len(negatives), size=cap, replace=False))
            negatives = [negatives[i] for i in picked]
    return positives + negatives


@dataclass(frozen=True)
class EncodedSubtask:
    instance_id: str
    event_type: str
    src: tuple[int, ...]
    tgt: tuple[int, ...]


def encode_subtasks(subtasks: Sequence[Subtask], vocab: Vocab) -> list[EncodedSubtask]:
    out = []
    for sub in subtasks:
        src, _ = vocab.encode(sub.input_text)
        tgt, _ = vocab.encode(sub.target_text)
        out.append(EncodedSubtask(sub.instance_id, sub.event_type, tuple(src), tuple(tgt)))
    return out


@dataclass
class Batch:
    event_type: str
    src: np.ndarray  # (B, Ts) padded
    tgt_in: np.ndarray  # (B, Tt) BOS-shifted
    tgt_out: np.ndarray  # (B, Tt) EOS-terminated


def _pad(rows: list[list[int]], pad_id: int) -> np.ndarray:
    width = max(len(r) for r in rows)
    out = np.full((len(rows), width), pad_id, dtype=np.int64)
    for i, row in enumerate(rows):
        out[i, : len(row)] = row
    return out


def make_batches(
    encoded: Sequence[EncodedSubtask],
    vocab: Vocab,
    batch_size: int,
    rng: Optional[np.random.Generator] = None,
) -> list[Batch]:
    """Chunk subtasks into batches homogeneous in event type.

    With an rng, order is shuffled within each type and across batches;
    without one, corpus order is kept.
    """
    by_type: dict[str, list[EncodedSubtask]] = {}
    for sub in encoded:
        by_type.setdefault(sub.event_type, []).append(sub)
    batches: list[Batch] = []
    for event_type, subs in by_type.items():
        order = list(rng.permutation(len(subs))) if rng is not None else range(len(subs))
        ordered = [subs[i] for i in order]
        for lo in range(0, len(ordered), batch_size):
            chunk = ordered[lo : lo + batch_size]
            src = _pad([list(s.src) for s in chunk], vocab.pad_id)
            tgt_in = _pad([[vocab.bos_id, *s.tgt] for s in chunk], vocab.pad_id)
            tgt_out = _pad([[*s.tgt, vocab.eos_id] for s in chunk], vocab.pad_id)
            batches.append(Batch(event_type, src, tgt_in, tgt_out))
    if rng is not None:
        batches = [batches[i] for i in rng.permutation(len(batches))]
    return batches


def build_pipeline_vocab(corpus: Corpus, store: TemplateStore, min_count: int = 1) -> Vocab:
    """Vocabulary over everything the models will read or write."""
    ontology = corpus.ontology
    store.ensure_covers(ontology)
    prompts = {t: build_event_prompt(t, ontology, store) for t in ontology.event_types}
    placeholders: list[str] = []
    texts: list[str] = []
    for event_type, prompt in prompts.items():
        placeholders.extend(prompt.template.placeholder_tokens())
        texts.append(prompt.render())
        texts.append(build_structural_sequence(event_type))
    for sub in build_subtasks(corpus, store, negative_ratio=-1):
        texts.append(sub.input_text)
        texts.append(sub.target_text)
    return build_vocab(texts, placeholders=placeholders, min_count=min_count)


def fit_model_config(
    vocab: Vocab,
    encoded: Sequence[EncodedSubtask],
    src_margin: int = 8,
    tgt_margin: int = 8,
    **overrides,
) -> ModelConfig:
    """Model config sized to the training data, with headroom."""
    max_src = max(len(s.src) for s in encoded)
    max_tgt = max(len(s.tgt) for s in encoded) + 1  # BOS/EOS shift
    return ModelConfig(
        vocab_size=len(vocab),
        max_src_len=max_src + src_margin,
        max_tgt_len=max_tgt + tgt_margin,
        pad_id=vocab.pad_id,
        bos_id=vocab.bos_id,
        eos_id=vocab.eos_id,
        **overrides,
    )


def fit_prompt_encoder_config(vocab: Vocab, ontology: Ontology, margin: int = 8, **overrides) -> PromptEncoderConfig:
    longest = max(
        len(vocab.encode(build_structural_sequence(t))[0]) for t in ontology.event_types
    )
    return PromptEncoderConfig(vocab_size=len(vocab), max_len=longest + margin, **overrides)


class ExtractionPipeline:
    """Everything needed to go from raw context to event mentions."""

    def __init__(
        self,
        ontology: Ontology,
        store: TemplateStore,
        vocab: Vocab,
        model: Seq2Seq,
        prompt_encoder: PromptEncoder,
        projector: PrefixProjector,
        prefix_config: PrefixConfig,
    ):
        store.ensure_covers(ontology)
        self.ontology = ontology
        self.store = store
        self.vocab = vocab
        self.model = model
        self.prompt_encoder = prompt_encoder
        self.projector = projector
        self.prefix_config = prefix_config
        self._prompts: dict[str, EventPrompt] = {}
        self._prefixes: dict[str, Prefix] = {}

    # -- prompt / prefix caches ------------------------------------------
    def prompt_for(self, event_type: str) -> EventPrompt:
        if event_type not in self._prompts:
            self._prompts[event_type] = build_event_prompt(event_type, self.ontology, self.store)
        return self._prompts[event_type]

    def prefix_for(self, event_type: str) -> Prefix:
        """Inference-time prefix: computed once per type, detached."""
        if event_type not in self._prefixes:
            live = build_prefix(event_type, self.vocab, self.prompt_encoder, self.projector)
            self._prefixes[event_type] = Prefix(
                enc=[None if p is None else Tensor(p.data.copy()) for p in live.enc],
                cross=[None if p is None else Tensor(p.data.copy()) for p in live.cross],
            )
        return self._prefixes[event_type]

    def invalidate_caches(self) -> None:
        self._prefixes.clear()

    # -- parameters -------------------------------------------------------
    def named_parameters(self) -> dict[str, Tensor]:
        out = dict(self.model.named_parameters())
        for name, p in self.prompt_encoder.named_parameters().items():
            out[f"{PROMPT_ENCODER_SCOPE}.{name}"] = p
        for name, p in self.projector.named_parameters().items():
            out[f"{PROJECTOR_SCOPE}.{name}"] = p
        return out

    # -- generation --------------------------------------------------------
    def encode_input(self, context: str, event_type: str) -> np.ndarray:
        """Token ids for one subtask input, truncated to the source cap.

        Truncation drops context tokens from the right; the prompt part
        always survives intact.
        """
        text = build_input(self.prompt_for(event_type), context)
        ids, _ = self.vocab.encode(text)
        limit = self.model.config.max_src_len
        if len(ids) > limit:
            ids = ids[:limit]
        return np.asarray(ids, dtype=np.int64)

    def generate_text(self, context: str, event_type: str, beam_size: int = 1) -> str:
        """Generate and decode the filled template for one event type."""
        src = self.encode_input(context, event_type)
        prefix = self.prefix_for(event_type)
        if beam_size <= 1:
            ids = self.model.generate_greedy(src, prefix.enc, prefix.cross)
        else:
            ids = self.model.generate_beam(src, beam_size, prefix.enc, prefix.cross)
        strip = {self.vocab.bos_id, self.vocab.eos_id, self.vocab.pad_id}
        return self.vocab.decode([i for i in ids if i not in strip])

    # -- persistence --------------------------------------------------------
    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        tensors = {name: p.data for name, p in self.named_parameters().items()}
        save_checkpoint(directory / CHECKPOINT_FILE, tensors)
        config = {
            "model": asdict(self.model.config),
            "prompt_encoder": asdict(self.prompt_encoder.config),
            "prefix": asdict(self.prefix_config),
        }
        (directory / CONFIG_FILE).write_text(json.dumps(config, indent=2) + "\n", encoding="utf-8")
        self.vocab.save(directory / VOCAB_FILE)
        self.store.save(directory / TEMPLATES_FILE)
        save_ontology(self.ontology, directory / ONTOLOGY_FILE)

    @classmethod
    def load(cls, directory) -> "ExtractionPipeline":
        directory = Path(directory)
        config = json.loads((directory / CONFIG_FILE).read_text(encoding="utf-8"))
        model_config = ModelConfig(**config["model"])
        enc_config = PromptEncoderConfig(**config["prompt_encoder"])
        prefix_config = PrefixConfig(**config["prefix"])
        vocab = Vocab.load(directory / VOCAB_FILE)
        store = TemplateStore.load(directory / TEMPLATES_FILE)
        ontology = load_ontology(directory / ONTOLOGY_FILE)
        rng = np.random.default_rng(0)  # immediately overwritten by the checkpoint
        model = Seq2Seq(model_config, rng)
        prompt_encoder = PromptEncoder(enc_config, rng)
        projector = PrefixProjector(
            rng,
            enc_config.d_model,
            model_config.d_model,
            prefix_config,
            model_config.n_enc_layers,
            model_config.n_dec_layers,
        )
        pipeline = cls(ontology, store, vocab, model, prompt_encoder, projector, prefix_config)
        tensors = load_checkpoint(directory / CHECKPOINT_FILE)
        params = pipeline.named_parameters()
        missing = sorted(set(params) - set(tensors))
        extra = sorted(set(tensors) - set(params))
        if missing or extra:
            raise ValueError(f"checkpoint mismatch: missing {missing}, unexpected {extra}")
        for name, p in params.items():
            if p.data.shape != tensors[name].shape:
                raise ValueError(
                    f"{name}: checkpoint shape {tensors[name].shape} != {p.data.shape}"
                )
            p.data = tensors[name].copy()
        return pipeline


@dataclass
class TrainResult:
    pipeline: ExtractionPipeline
    loss_curve: list[tuple[int, int, float]]  # (step, epoch, loss)
    steps: int

    def write_loss_curve(self, path) -> None:
        lines = ["step\tepoch\tloss"]
        lines += [f"{s}\t{e}\t{v:.6f}" for s, e, v in self.loss_curve]
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def train(
    corpus: Corpus,
    store: TemplateStore,
    config: TrainConfig,
    vocab: Optional[Vocab] = None,
    model_overrides: Optional[dict] = None,
    prompt_encoder_overrides: Optional[dict] = None,
    prefix_config: Optional[PrefixConfig] = None,
    log: Optional[Callable[[str], None]] = None,
) -> TrainResult:
    """Train a fresh pipeline on a corpus; fully seeded and reproducible.

    A single generator seeded from config.seed drives initialization,
    negative downsampling, and every shuffle, in a fixed order, so equal
    seeds give byte-identical checkpoints.
    """
    rng = np.random.default_rng(config.seed)
    model_overrides = {"init_std": config.init_std, **(model_overrides or {})}
    prompt_encoder_overrides = {"init_std": config.init_std, **(prompt_encoder_overrides or {})}
    if vocab is None:
        vocab = build_pipeline_vocab(corpus, store)
    subtasks = build_subtasks(corpus, store, config.negative_ratio, rng)
    if not subtasks:
        raise ValueError("corpus yields no training subtasks")
    encoded = encode_subtasks(subtasks, vocab)

    model_config = fit_model_config(vocab, encoded, **model_overrides)
    enc_config = fit_prompt_encoder_config(vocab, corpus.ontology, **prompt_encoder_overrides)
    prefix_config = prefix_config or PrefixConfig()
    model = Seq2Seq(model_config, rng)
    prompt_encoder = PromptEncoder(enc_config, rng)
    projector = PrefixProjector(
        rng,
        enc_config.d_model,
        model_config.d_model,
        prefix_config,
        model_config.n_enc_layers,
        model_config.n_dec_layers,
        init_std=model_config.init_std,
    )
    pipeline = ExtractionPipeline(
        corpus.ontology, store, vocab, model, prompt_encoder, projector, prefix_config
    )

    params = pipeline.named_parameters()
    seq2seq_group = [params[n] for n in sorted(params) if not n.startswith(PROMPT_ENCODER_SCOPE + ".")]
    prompt_group = [params[n] for n in sorted(params) if n.startswith(PROMPT_ENCODER_SCOPE + ".")]
    groups = [{"params": seq2seq_group, "lr": config.lr_seq2seq}]
    if prompt_group:
        groups.append({"params": prompt_group, "lr": config.lr_prompt_encoder})
    opt = Adam(groups)
    base_lrs = [g["lr"] for g in opt.groups]
    steps_per_epoch = len(make_batches(encoded, vocab, config.batch_size))
    total_steps = config.epochs * steps_per_epoch
    if config.max_steps:
        total_steps = min(total_steps, config.max_steps)

    curve: list[tuple[int, int, float]] = []
    step = 0
    done = False
    for epoch in range(config.epochs):
        if done:
            break
        batches = make_batches(encoded, vocab, config.batch_size, rng if config.shuffle else None)
        for batch in batches:
            scale = 1.0
            if config.warmup_steps:
                scale = min(1.0, (step + 1) / config.warmup_steps)
            if config.cosine_decay and total_steps > config.warmup_steps and step >= config.warmup_steps:
                progress = (step - config.warmup_steps) / (total_steps - config.warmup_steps)
                scale = 0.5 * (1.0 + math.cos(math.pi * progress))
            if scale != 1.0:
                for group, base in zip(opt.groups, base_lrs):
                    group["lr"] = base * scale
            live_prefix = build_prefix(batch.event_type, vocab, prompt_encoder, projector)
            loss = model.loss(
                batch.src, batch.tgt_in, batch.tgt_out, live_prefix.enc, live_prefix.cross
            )
            opt.zero_grad()
            loss.backward()
            opt.step()
            curve.append((step, epoch, float(loss.data)))
            step += 1
            if config.max_steps and step >= config.max_steps:
                done = True
                break
        if log is not None and curve:
            log(f"epoch {epoch + 1}/{config.epochs} step {step} loss {curve[-1][2]:.4f}")
    pipeline.invalidate_caches()
    return TrainResult(pipeline=pipeline, loss_curve=curve, steps=step)
