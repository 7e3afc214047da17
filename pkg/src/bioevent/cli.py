"""Command-line interface.

Subcommands cover the full workflow: corpus statistics, template
generation, vocabulary construction, training, prediction, evaluation,
and a gradient-check smoke test. Every option shows its default in
--help; train accepts a JSON config file with flags taking precedence.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import (
    CorpusError,
    compute_stats,
    load_corpus,
    load_ontology,
    save_corpus,
)
from .extraction import extract_corpus, predictions_to_corpus
from .llmgen import ProviderConfig, TemplateCache, TemplateGenError, generate_templates
from .metrics import score
from .prefix import PrefixConfig
from .templates import TemplateError, TemplateStore
from .tokenizer import Vocab
from .training import (
    ExtractionPipeline,
    TrainConfig,
    build_pipeline_vocab,
    train,
)


def _add_common_io(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--ontology", required=True, help="ontology JSON file")
    parser.add_argument("--corpus", required=True, help="corpus JSONL file")
    parser.add_argument("--split", default="train", help="split label for the corpus (default: %(default)s)")


def cmd_stats(args) -> int:
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus, ontology, split=args.split)
    print(compute_stats(corpus).to_text())
    return 0


def cmd_gen_templates(args) -> int:
    ontology = load_ontology(args.ontology)
    out = Path(args.out)
    store = TemplateStore.load(out) if out.exists() else TemplateStore()
    descriptions = {}
    if args.descriptions:
        loaded = json.loads(Path(args.descriptions).read_text(encoding="utf-8"))
        descriptions = loaded.get("descriptions", loaded)
    config = ProviderConfig(
        base_url=args.base_url or "",
        model=args.model or "",
        timeout=args.timeout,
        max_retries=args.retries,
        offline=not args.online,
    )
    cache = TemplateCache(args.cache_dir)
    responses = generate_templates(
        ontology, store, config, cache, descriptions=descriptions, only_missing=not args.overwrite
    )
    store.save(out)
    for resp in responses:
        origin = "cache" if resp.cached else resp.provider_id
        print(f"{resp.event_type}: {origin}")
    print(f"wrote {len(store.event_types)} templates to {out}")
    return 0


def cmd_build_vocab(args) -> int:
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus, ontology, split=args.split)
    store = TemplateStore.load(args.templates)
    vocab = build_pipeline_vocab(corpus, store, min_count=args.min_count)
    vocab.save(args.out)
    print(f"wrote {len(vocab)} tokens to {args.out}")
    return 0


def _train_config(args) -> TrainConfig:
    file_values = {}
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))
    base = TrainConfig.preset(args.preset) if args.preset else TrainConfig()
    values = {**vars(base), **file_values.get("train", {})}
    for key in (
        "epochs",
        "batch_size",
        "lr_seq2seq",
        "lr_prompt_encoder",
        "negative_ratio",
        "seed",
        "max_steps",
        "warmup_steps",
        "cosine_decay",
        "init_std",
        "beam_size",
    ):
        flag = getattr(args, key)
        if flag is not None:
            values[key] = flag
    return TrainConfig(**values)


def cmd_train(args) -> int:
    ontology = load_ontology(args.ontology)
    corpus = load_corpus(args.corpus, ontology, split=args.split)
    store = TemplateStore.load(args.templates)
    config = _train_config(args)
    file_values = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}

    model_overrides = dict(file_values.get("model", {}))
    for key, flag in (
        ("d_model", args.d_model),
        ("n_heads", args.n_heads),
        ("n_enc_layers", args.n_enc_layers),
        ("n_dec_layers", args.n_dec_layers),
    ):
        if flag is not None:
            model_overrides[key] = flag
    enc_overrides = dict(file_values.get("prompt_encoder", {}))
    if args.d_model is not None:
        enc_overrides.setdefault("d_model", args.d_model)
    if args.n_heads is not None:
        enc_overrides.setdefault("n_heads", args.n_heads)

    prefix_values = dict(file_values.get("prefix", {}))
    if args.prefix_len is not None:
        prefix_values["length"] = args.prefix_len
    if args.per_layer_prefix:
        prefix_values["per_layer"] = True
    prefix_config = PrefixConfig(**prefix_values)

    vocab = Vocab.load(args.vocab) if args.vocab else None
    result = train(
        corpus,
        store,
        config,
        vocab=vocab,
        model_overrides=model_overrides,
        prompt_encoder_overrides=enc_overrides,
        prefix_config=prefix_config,
        log=lambda msg: print(msg, file=sys.stderr),
    )
    out_dir = Path(args.out_dir)
    result.pipeline.save(out_dir)
    curve_path = Path(args.loss_curve) if args.loss_curve else out_dir / "loss_curve.tsv"
    result.write_loss_curve(curve_path)
    final = result.loss_curve[-1][2] if result.loss_curve else float("nan")
    print(f"trained {result.steps} steps; final loss {final:.4f}; model saved to {out_dir}")
    return 0


def cmd_predict(args) -> int:
    pipeline = ExtractionPipeline.load(args.model_dir)
    corpus = load_corpus(args.corpus, pipeline.ontology, split=args.split)
    predictions = extract_corpus(
        pipeline, corpus.instances, beam_size=args.beam_size, workers=args.workers
    )
    predicted = predictions_to_corpus(corpus, predictions)
    save_corpus(predicted, args.out)
    n_events = sum(len(v) for v in predictions.values())
    print(f"wrote {n_events} events over {len(corpus)} instances to {args.out}")
    return 0


def cmd_eval(args) -> int:
    ontology = load_ontology(args.ontology)
    gold = load_corpus(args.gold, ontology, split="gold")
    pred = load_corpus(args.pred, ontology, split="pred")
    predictions = {inst.id: list(inst.events) for inst in pred}
    report = score(gold, predictions, by_structure=not args.no_structure)
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(report.to_text())
    return 0


def cmd_gradcheck(args) -> int:
    from .diagnostics import run_gradient_checks

    results = run_gradient_checks(
        seed=args.seed if args.seed is not None else 0,
        max_coords_per_tensor=args.max_coords,
    )
    worst = 0.0
    for name, err in results.items():
        print(f"{name:<20} {err:.3e}")
        worst = max(worst, err)
    print(f"worst relative error: {worst:.3e} (tolerance {args.tolerance:.0e})")
    return 0 if worst < args.tolerance else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bioevent",
        description="Structure-aware generative event extraction for biomedical text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="corpus structure statistics")
    _add_common_io(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gen-templates", help="generate event templates via a chat-completion API")
    p.add_argument("--ontology", required=True, help="ontology JSON file")
    p.add_argument("--out", required=True, help="templates JSON file to write")
    p.add_argument("--cache-dir", default=".bioevent-cache", help="response cache directory (default: %(default)s)")
    p.add_argument("--base-url", default=None, help="provider base URL (default: offline)")
    p.add_argument("--model", default=None, help="provider model name")
    p.add_argument("--online", action="store_true", help="allow network calls (default: cache only)")
    p.add_argument("--timeout", type=float, default=60.0, help="request timeout seconds (default: %(default)s)")
    p.add_argument("--retries", type=int, default=2, help="validation retries per type (default: %(default)s)")
    p.add_argument("--descriptions", default=None, help="JSON file of event-type descriptions")
    p.add_argument("--overwrite", action="store_true", help="regenerate types already in the store")
    p.set_defaults(func=cmd_gen_templates)

    p = sub.add_parser("build-vocab", help="build the pipeline vocabulary")
    _add_common_io(p)
    p.add_argument("--templates", required=True, help="templates JSON file")
    p.add_argument("--out", required=True, help="vocab file to write")
    p.add_argument("--min-count", type=int, default=1, help="minimum token count (default: %(default)s)")
    p.set_defaults(func=cmd_build_vocab)

    p = sub.add_parser("train", help="train an extraction pipeline")
    _add_common_io(p)
    p.add_argument("--templates", required=True, help="templates JSON file")
    p.add_argument("--out-dir", required=True, help="directory for the trained model")
    p.add_argument("--vocab", default=None, help="existing vocab file (default: build from corpus)")
    p.add_argument("--config", default=None, help="JSON config file (sections: train, model, prompt_encoder, prefix)")
    p.add_argument("--preset", choices=sorted(TrainConfig.PRESETS), default=None, help="named hyperparameter preset")
    p.add_argument("--epochs", type=int, default=None, help="training epochs (default: preset/50)")
    p.add_argument("--batch-size", type=int, default=None, help="subtasks per batch (default: preset/16)")
    p.add_argument("--lr-seq2seq", type=float, default=None, help="sequence model learning rate (default: preset/1e-5)")
    p.add_argument("--lr-prompt-encoder", type=float, default=None, help="prompt encoder learning rate (default: preset/1e-6)")
    p.add_argument("--negative-ratio", type=float, default=None, help="negatives per positive (default: 1.0)")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: 0)")
    p.add_argument("--max-steps", type=int, default=None, help="hard step cap, 0 = none (default: 0)")
    p.add_argument("--warmup-steps", type=int, default=None, help="linear learning-rate warmup steps (default: 0)")
    p.add_argument(
        "--cosine-decay",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="cosine-decay the learning rate after warmup",
    )
    p.add_argument("--init-std", type=float, default=None, help="weight init standard deviation (default: 0.02)")
    p.add_argument("--beam-size", type=int, default=None, help="beam width stored with the run (default: 1)")
    p.add_argument("--d-model", type=int, default=None, help="model width (default: 64)")
    p.add_argument("--n-heads", type=int, default=None, help="attention heads (default: 4)")
    p.add_argument("--n-enc-layers", type=int, default=None, help="encoder layers (default: 2)")
    p.add_argument("--n-dec-layers", type=int, default=None, help="decoder layers (default: 2)")
    p.add_argument("--prefix-len", type=int, default=None, help="prefix length l (default: 40)")
    p.add_argument("--per-layer-prefix", action="store_true", help="learn a distinct prefix per layer")
    p.add_argument("--loss-curve", default=None, help="loss curve TSV path (default: <out-dir>/loss_curve.tsv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="extract events with a trained model")
    p.add_argument("--model-dir", required=True, help="trained model directory")
    p.add_argument("--corpus", required=True, help="corpus JSONL file (gold events ignored)")
    p.add_argument("--split", default="test", help="split label (default: %(default)s)")
    p.add_argument("--out", required=True, help="predictions JSONL file to write")
    p.add_argument("--beam-size", type=int, default=1, help="beam width (default: greedy)")
    p.add_argument("--workers", type=int, default=1, help="prediction threads (default: %(default)s)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("--ontology", required=True, help="ontology JSON file")
    p.add_argument("--gold", required=True, help="gold corpus JSONL")
    p.add_argument("--pred", required=True, help="predicted corpus JSONL")
    p.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p.add_argument("--no-structure", action="store_true", help="skip the per-structure recall breakdown")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="finite-difference check of every gradient path")
    p.add_argument("--seed", type=int, default=None, help="random seed (default: 0)")
    p.add_argument("--max-coords", type=int, default=48, help="coordinates checked per tensor (default: %(default)s)")
    p.add_argument("--tolerance", type=float, default=1e-4, help="worst-case relative error bound (default: %(default)s)")
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CorpusError, TemplateError, TemplateGenError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
