"""Trigger and argument scoring.

Trigger classification (Trg-C): a predicted trigger matches when the
instance, the trigger span, and the event type all agree with a gold
event. Argument classification (Arg-C): a predicted argument matches on
instance, argument span, event type, and role. Matching is set-based per
key, micro-averaged over the corpus, and a zero denominator yields 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, EventMention, detect_structures

TrgKey = tuple[str, int, int, str]
ArgKey = tuple[str, int, int, str, str]


@dataclass(frozen=True)
class PRF:
    precision: float
    recall: float
    f1: float
    n_gold: int
    n_pred: int
    n_correct: int


def compute_prf(n_correct: int, n_pred: int, n_gold: int) -> PRF:
    precision = n_correct / n_pred if n_pred else 0.0
    recall = n_correct / n_gold if n_gold else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return PRF(precision, recall, f1, n_gold, n_pred, n_correct)


def trigger_keys(instance_id: str, events: Iterable[EventMention]) -> set[TrgKey]:
    return {(instance_id, e.trigger.start, e.trigger.end, e.event_type) for e in events}


def argument_keys(instance_id: str, events: Iterable[EventMention]) -> set[ArgKey]:
    return {
        (instance_id, a.span.start, a.span.end, e.event_type, a.role)
        for e in events
        for a in e.arguments
    }


@dataclass(frozen=True)
class EvalReport:
    trigger: PRF
    argument: PRF
    structure_recall: dict[str, tuple[float, int]]  # tag -> (Trg-C recall, n gold)

    def to_json(self) -> dict:
        return {
            "trigger": vars(self.trigger),
            "argument": vars(self.argument),
            "structure_trigger_recall": {
                tag: {"recall": r, "n_gold": n} for tag, (r, n) in self.structure_recall.items()
            },
        }

    def to_text(self) -> str:
        def row(label: str, m: PRF) -> str:
            return (
                f"{label:<6} P {m.precision:.4f}  R {m.recall:.4f}  F1 {m.f1:.4f}  "
                f"(correct {m.n_correct} / pred {m.n_pred} / gold {m.n_gold})"
            )

        lines = [row("Trg-C", self.trigger), row("Arg-C", self.argument)]
        if self.structure_recall:
            lines.append("trigger recall by gold structure:")
            for tag, (recall, n_gold) in self.structure_recall.items():
                lines.append(f"  {tag:<12} R {recall:.4f}  (gold {n_gold})")
        return "\n".join(lines)


def score(
    gold: Corpus,
    predictions: Mapping[str, Sequence[EventMention]],
    by_structure: bool = True,
) -> EvalReport:
    """Micro-averaged Trg-C / Arg-C over a gold corpus and predictions.

    Predictions must be keyed by gold instance id; unknown ids are an
    error (misaligned corpora score meaninglessly otherwise). Missing
    ids count as predicting nothing.
    """
    gold_ids = {inst.id for inst in gold}
    unknown = sorted(set(predictions) - gold_ids)
    if unknown:
        raise ValueError(f"predictions for unknown instance ids: {unknown[:5]}")

    gold_trg: set[TrgKey] = set()
    gold_arg: set[ArgKey] = set()
    pred_trg: set[TrgKey] = set()
    pred_arg: set[ArgKey] = set()
    structure_gold: dict[str, set[TrgKey]] = {}
    for inst in gold:
        gold_trg |= trigger_keys(inst.id, inst.events)
        gold_arg |= argument_keys(inst.id, inst.events)
        predicted = predictions.get(inst.id, ())
        pred_trg |= trigger_keys(inst.id, predicted)
        pred_arg |= argument_keys(inst.id, predicted)
        if by_structure:
            for event, tags in zip(inst.events, detect_structures(inst)):
                for tag in tags:
                    structure_gold.setdefault(tag, set()).update(
                        trigger_keys(inst.id, [event])
                    )

    trigger = compute_prf(len(gold_trg & pred_trg), len(pred_trg), len(gold_trg))
    argument = compute_prf(len(gold_arg & pred_arg), len(pred_arg), len(gold_arg))
    structure_recall: dict[str, tuple[float, int]] = {}
    if by_structure:
        for tag in sorted(structure_gold):
            keys = structure_gold[tag]
            hit = len(keys & pred_trg)
            structure_recall[tag] = (hit / len(keys) if keys else 0.0, len(keys))
    return EvalReport(trigger=trigger, argument=argument, structure_recall=structure_recall)
