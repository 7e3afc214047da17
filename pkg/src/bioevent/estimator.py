"""Estimator-style facade over the extraction pipeline.

GenerativeEventExtractor follows the familiar fit/predict/score
conventions (constructor takes plain hyperparameters, fit leaves
trailing-underscore attributes, get_params/set_params/clone work), so
the pipeline can sit in grid searches or cross-validation harnesses next
to ordinary estimators.
"""
from __future__ import annotations

from typing import Sequence, Union

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .corpus import Corpus, EventMention, Instance, validate_instance
from .extraction import extract, extract_corpus
from .metrics import EvalReport, score
from .prefix import PrefixConfig
from .templates import TemplateStore
from .training import ExtractionPipeline, TrainConfig, train


def check_corpus(X, require_events: bool = False) -> Corpus:
    """Validate estimator input: a Corpus with well-formed instances."""
    if not isinstance(X, Corpus):
        raise TypeError(f"expected a Corpus, got {type(X).__name__}")
    if not X.instances:
        raise ValueError("corpus is empty")
    for instance in X:
        validate_instance(instance, X.ontology)
    if require_events and not any(instance.events for instance in X):
        raise ValueError("corpus has no event annotations to fit on")
    return X


def _as_instances(X: Union[Corpus, Sequence[Instance]]) -> list[Instance]:
    if isinstance(X, Corpus):
        return list(X.instances)
    instances = list(X)
    if not all(isinstance(i, Instance) for i in instances):
        raise TypeError("expected a Corpus or a sequence of Instance objects")
    return instances


class GenerativeEventExtractor(BaseEstimator):
    """Structure-aware generative event extractor.

    Parameters mirror TrainConfig/model sizing; `templates` is the
    TemplateStore (or a path to its JSON file) covering the corpus
    ontology. fit() trains from scratch; predict() returns
    {instance id: [EventMention, ...]}; score() is the Trg-C F1.

    Defaults are tuned for desk-scale corpora trained from scratch
    (wide init, warmup plus cosine decay, a hard step cap); pass the
    fine-tuning-scale values from TrainConfig.PRESETS for real corpora.
    """

    def __init__(
        self,
        templates: Union[TemplateStore, str, None] = None,
        d_model: int = 64,
        n_heads: int = 4,
        n_enc_layers: int = 2,
        n_dec_layers: int = 2,
        prefix_len: int = 8,
        per_layer_prefix: bool = False,
        epochs: int = 500,
        batch_size: int = 8,
        lr_seq2seq: float = 1e-3,
        lr_prompt_encoder: float = 2.5e-4,
        negative_ratio: float = 1.0,
        max_steps: int = 500,
        warmup_steps: int = 75,
        cosine_decay: bool = True,
        init_std: float = 0.15,
        beam_size: int = 1,
        seed: int = 0,
    ):
        self.templates = templates
        self.d_model = d_model
        self.n_heads = n_heads
        self.n_enc_layers = n_enc_layers
        self.n_dec_layers = n_dec_layers
        self.prefix_len = prefix_len
        self.per_layer_prefix = per_layer_prefix
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr_seq2seq = lr_seq2seq
        self.lr_prompt_encoder = lr_prompt_encoder
        self.negative_ratio = negative_ratio
        self.max_steps = max_steps
        self.warmup_steps = warmup_steps
        self.cosine_decay = cosine_decay
        self.init_std = init_std
        self.beam_size = beam_size
        self.seed = seed

    def _store(self) -> TemplateStore:
        if isinstance(self.templates, TemplateStore):
            return self.templates
        if isinstance(self.templates, str):
            return TemplateStore.load(self.templates)
        raise ValueError("the `templates` parameter is required (TemplateStore or path)")

    def fit(self, X: Corpus, y=None) -> "GenerativeEventExtractor":
        corpus = check_corpus(X, require_events=True)
        store = self._store()
        config = TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr_seq2seq=self.lr_seq2seq,
            lr_prompt_encoder=self.lr_prompt_encoder,
            negative_ratio=self.negative_ratio,
            seed=self.seed,
            max_steps=self.max_steps,
            warmup_steps=self.warmup_steps,
            cosine_decay=self.cosine_decay,
            init_std=self.init_std,
            beam_size=self.beam_size,
        )
        result = train(
            corpus,
            store,
            config,
            model_overrides={
                "d_model": self.d_model,
                "n_heads": self.n_heads,
                "n_enc_layers": self.n_enc_layers,
                "n_dec_layers": self.n_dec_layers,
            },
            prompt_encoder_overrides={"d_model": self.d_model, "n_heads": self.n_heads},
            prefix_config=PrefixConfig(length=self.prefix_len, per_layer=self.per_layer_prefix),
        )
        self.pipeline_ = result.pipeline
        self.loss_curve_ = [loss for _, _, loss in result.loss_curve]
        self.n_steps_ = result.steps
        return self

    def _require_fitted(self) -> ExtractionPipeline:
        pipeline = getattr(self, "pipeline_", None)
        if pipeline is None:
            raise NotFittedError(
                "this GenerativeEventExtractor is not fitted; call fit() or load()"
            )
        return pipeline

    def predict(self, X: Union[Corpus, Sequence[Instance]]) -> dict[str, list[EventMention]]:
        pipeline = self._require_fitted()
        return extract_corpus(pipeline, _as_instances(X), beam_size=self.beam_size)

    def predict_instance(self, context: str) -> list[EventMention]:
        return extract(self._require_fitted(), context, beam_size=self.beam_size)

    def evaluate(self, X: Corpus) -> EvalReport:
        corpus = check_corpus(X)
        return score(corpus, self.predict(corpus))

    def score(self, X: Corpus, y=None) -> float:
        """Trg-C F1 on a gold corpus (higher is better)."""
        return self.evaluate(X).trigger.f1

    def save(self, directory) -> None:
        self._require_fitted().save(directory)

    @classmethod
    def load(cls, directory, **params) -> "GenerativeEventExtractor":
        est = cls(**params)
        est.pipeline_ = ExtractionPipeline.load(directory)
        return est
