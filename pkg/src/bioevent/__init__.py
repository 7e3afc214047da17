"""Structure-aware generative event extraction for biomedical text.

The pipeline turns each (event type, context) pair into a text-to-text
subtask: the input is an event prompt (type, description, template)
joined with the context; the output is the template with trigger and
role placeholders filled. A small encoder over four structural prompts
produces a prefix that the sequence model attends to alongside its real
keys and values, injecting knowledge of nested and overlapping event
structure. Parsing the generated template and matching surfaces back to
character spans yields grounded event mentions.
"""

from .corpus import (
    Argument,
    Corpus,
    CorpusError,
    Entity,
    EventMention,
    Instance,
    Ontology,
    Span,
    compute_stats,
    detect_structures,
    load_corpus,
    load_ontology,
    save_corpus,
    save_ontology,
)
from .estimator import GenerativeEventExtractor, check_corpus
from .extraction import extract, extract_corpus, match_span
from .metrics import EvalReport, PRF, compute_prf, score
from .prefix import PrefixConfig, PromptEncoderConfig
from .templates import (
    EventPrompt,
    EventTemplate,
    TemplateError,
    TemplateStore,
    build_event_prompt,
    build_input,
    fill_template,
    parse_output,
    render_target,
)
from .tokenizer import Vocab, build_vocab, normalize, tokenize
from .training import (
    ExtractionPipeline,
    TrainConfig,
    build_pipeline_vocab,
    build_subtasks,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Argument",
    "Corpus",
    "CorpusError",
    "Entity",
    "EvalReport",
    "EventMention",
    "EventPrompt",
    "EventTemplate",
    "ExtractionPipeline",
    "GenerativeEventExtractor",
    "Instance",
    "Ontology",
    "PRF",
    "PrefixConfig",
    "PromptEncoderConfig",
    "Span",
    "TemplateError",
    "TemplateStore",
    "TrainConfig",
    "Vocab",
    "build_event_prompt",
    "build_input",
    "build_pipeline_vocab",
    "build_subtasks",
    "build_vocab",
    "check_corpus",
    "compute_prf",
    "compute_stats",
    "detect_structures",
    "extract",
    "extract_corpus",
    "fill_template",
    "load_corpus",
    "load_ontology",
    "match_span",
    "normalize",
    "parse_output",
    "render_target",
    "save_corpus",
    "save_ontology",
    "score",
    "tokenize",
    "train",
    "__version__",
]
