"""From generated template text back to grounded event mentions.

Generated output contains surface strings; extraction matches them back
to character spans in the context (token-subsequence matching, so
whitespace and punctuation spacing differences introduced by decoding do
not matter), assembles EventMentions, and drops whatever cannot be
grounded: events without a resolvable trigger, arguments without a
resolvable span.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

from .corpus import Argument, Corpus, EventMention, Instance, Span
from .templates import parse_output
from .tokenizer import tokenize
from .training import ExtractionPipeline


def match_span(context: str, surface: str, anchor: Optional[int] = None) -> Optional[Span]:
    """Locate a generated surface string in the context.

    Both sides are tokenized and the surface's token sequence is searched
    for among the context tokens; the span runs from the first matched
    token's start to the last's end. Without an anchor the first
    occurrence wins; with one, the occurrence whose start is nearest the
    anchor (ties to the left). Returns None when the surface does not
    occur.
    """
    surface_tokens = [t for t, _ in tokenize(surface)]
    if not surface_tokens:
        return None
    context_tokens = tokenize(context)
    context_strs = [t for t, _ in context_tokens]
    n = len(surface_tokens)
    starts = [
        i
        for i in range(len(context_strs) - n + 1)
        if context_strs[i : i + n] == surface_tokens
    ]
    if not starts:
        return None
    if anchor is None:
        best = starts[0]
    else:
        best = min(starts, key=lambda i: (abs(context_tokens[i][1].start - anchor), i))
    return Span(context_tokens[best][1].start, context_tokens[best + n - 1][1].end)


def events_from_output(
    generated: str, event_type: str, template, context: str
) -> list[EventMention]:
    """Ground one generated string for one event type."""
    mentions = []
    for parsed in parse_output(template, generated):
        if parsed.trigger is None:
            continue
        trigger_span = match_span(context, parsed.trigger)
        if trigger_span is None:
            continue
        arguments = []
        for role in template.roles:  # declared order, deterministic
            surface = parsed.roles.get(role)
            if surface is None:
                continue
            span = match_span(context, surface, anchor=trigger_span.start)
            if span is None:
                continue
            arguments.append(Argument(role=role, span=span))
        mentions.append(
            EventMention(event_type=event_type, trigger=trigger_span, arguments=tuple(arguments))
        )
    return mentions


def extract(
    pipeline: ExtractionPipeline, context: str, beam_size: int = 1
) -> list[EventMention]:
    """Run every event-type subtask over one context and merge the results.

    Duplicate (event type, trigger span) mentions keep the first
    occurrence; event types follow ontology order, so output is
    deterministic.
    """
    mentions: list[EventMention] = []
    seen: set[tuple[str, int, int]] = set()
    for event_type in pipeline.ontology.event_types:
        template = pipeline.prompt_for(event_type).template
        generated = pipeline.generate_text(context, event_type, beam_size=beam_size)
        for mention in events_from_output(generated, event_type, template, context):
            key = (mention.event_type, mention.trigger.start, mention.trigger.end)
            if key in seen:
                continue
            seen.add(key)
            mentions.append(mention)
    return mentions


def extract_corpus(
    pipeline: ExtractionPipeline,
    instances: Sequence[Instance],
    beam_size: int = 1,
    workers: int = 1,
) -> dict[str, list[EventMention]]:
    """Predict events for each instance; id -> mentions.

    workers > 1 fans instances out over threads; results are collected
    by position so the mapping does not depend on completion order.
    """
    instances = list(instances)
    if workers <= 1:
        predictions = [extract(pipeline, inst.context, beam_size) for inst in instances]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(
                pool.map(lambda inst: extract(pipeline, inst.context, beam_size), instances)
            )
    return {inst.id: events for inst, events in zip(instances, predictions)}


def predictions_to_corpus(
    gold: Corpus, predictions: dict[str, list[EventMention]]
) -> Corpus:
    """Same instances, predicted events (entities dropped)."""
    instances = [
        Instance(id=inst.id, context=inst.context, events=tuple(predictions.get(inst.id, ())))
        for inst in gold
    ]
    return Corpus(ontology=gold.ontology, instances=instances, split=gold.split)
