"""Event-extraction corpora: domain types, JSONL ingestion, structure statistics.

The interchange format is one JSON object per line with fields
``{id, context, entities, events}``. Events carry character offsets into
``context`` (offsets survive retokenization, token indices would not).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

GENERAL = "general"
NESTED = "nested"
OVERLAPPING = "overlapping"


class CorpusError(Exception):
    """Base class for corpus loading/validation failures."""


class CorpusParseError(CorpusError):
    def __init__(self, path, line_no, reason):
        super().__init__(f"{path}:{line_no}: {reason}")
        self.path = str(path)
        self.line_no = line_no
        self.reason = reason


class CorpusValidationError(CorpusError):
    def __init__(self, instance_id, reason):
        super().__init__(f"instance {instance_id!r}: {reason}")
        self.instance_id = instance_id
        self.reason = reason


@dataclass(frozen=True, order=True)
class Span:
    """Character interval [start, end) into an owning context string."""

    start: int
    end: int

    def text(self, context: str) -> str:
        return context[self.start : self.end]

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Argument:
    role: str
    span: Span


@dataclass(frozen=True)
class Entity:
    label: str
    span: Span


@dataclass(frozen=True)
class EventMention:
    """A trigger span with an event type and its typed argument spans."""

    event_type: str
    trigger: Span
    arguments: tuple[Argument, ...] = ()

    def argument_spans(self) -> tuple[Span, ...]:
        return tuple(a.span for a in self.arguments)


@dataclass(frozen=True)
class Instance:
    id: str
    context: str
    events: tuple[EventMention, ...] = ()
    entities: tuple[Entity, ...] = ()


@dataclass(frozen=True)
class Ontology:
    """Event-type inventory with the declared role list per type.

    Role order matters: templates must mention roles in declared order.
    """

    name: str
    roles: dict[str, tuple[str, ...]]

    @property
    def event_types(self) -> tuple[str, ...]:
        return tuple(self.roles)

    def roles_for(self, event_type: str) -> tuple[str, ...]:
        if event_type not in self.roles:
            raise KeyError(f"unknown event type {event_type!r} in ontology {self.name!r}")
        return self.roles[event_type]

    def to_json(self) -> dict:
        return {"name": self.name, "event_types": {t: list(r) for t, r in self.roles.items()}}

    @classmethod
    def from_json(cls, obj: dict) -> "Ontology":
        if "event_types" not in obj or not obj["event_types"]:
            raise CorpusError("ontology must declare at least one event type")
        roles = {str(t): tuple(str(r) for r in rs) for t, rs in obj["event_types"].items()}
        return cls(name=str(obj.get("name", "unnamed")), roles=roles)


def load_ontology(path) -> Ontology:
    with open(path, encoding="utf-8") as fh:
        return Ontology.from_json(json.load(fh))


def save_ontology(ontology: Ontology, path) -> None:
    Path(path).write_text(json.dumps(ontology.to_json(), indent=2) + "\n", encoding="utf-8")


@dataclass
class Corpus:
    ontology: Ontology
    instances: list[Instance] = field(default_factory=list)
    split: str = "train"

    def __len__(self) -> int:
        return len(self.instances)

    def __iter__(self):
        return iter(self.instances)


def _check_span(span: Span, context: str, instance_id: str, what: str) -> None:
    if not (0 <= span.start < span.end <= len(context)):
        raise CorpusValidationError(
            instance_id,
            f"{what} span ({span.start}, {span.end}) out of bounds for context of length {len(context)}",
        )


def validate_instance(instance: Instance, ontology: Ontology) -> None:
    """Check span bounds and event-type/role membership for one instance."""
    for entity in instance.entities:
        _check_span(entity.span, instance.context, instance.id, f"entity {entity.label!r}")
    for event in instance.events:
        if event.event_type not in ontology.roles:
            raise CorpusValidationError(
                instance.id, f"unknown event type {event.event_type!r}"
            )
        _check_span(event.trigger, instance.context, instance.id, f"{event.event_type} trigger")
        declared = ontology.roles[event.event_type]
        for arg in event.arguments:
            if arg.role not in declared:
                raise CorpusValidationError(
                    instance.id,
                    f"role {arg.role!r} not declared for event type {event.event_type!r}",
                )
            _check_span(arg.span, instance.context, instance.id, f"argument {arg.role!r}")


def _span_from_json(obj, instance_id) -> Span:
    try:
        return Span(int(obj["start"]), int(obj["end"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CorpusValidationError(instance_id, f"malformed span object {obj!r}") from exc


def instance_from_json(obj: dict) -> Instance:
    instance_id = str(obj.get("id", ""))
    if not instance_id:
        raise CorpusError("instance record missing 'id'")
    if "context" not in obj:
        raise CorpusValidationError(instance_id, "missing 'context'")
    context = str(obj["context"])
    events = []
    for ev in obj.get("events", ()):
        args = tuple(
            Argument(str(a["role"]), _span_from_json(a, instance_id))
            for a in ev.get("args", ())
        )
        events.append(
            EventMention(
                event_type=str(ev["type"]),
                trigger=_span_from_json(ev["trigger"], instance_id),
                arguments=args,
            )
        )
    entities = tuple(
        Entity(str(e["label"]), _span_from_json(e, instance_id))
        for e in obj.get("entities", ())
    )
    return Instance(id=instance_id, context=context, events=tuple(events), entities=entities)


def instance_to_json(instance: Instance) -> dict:
    return {
        "id": instance.id,
        "context": instance.context,
        "entities": [
            {"label": e.label, "start": e.span.start, "end": e.span.end}
            for e in instance.entities
        ],
        "events": [
            {
                "type": ev.event_type,
                "trigger": {"start": ev.trigger.start, "end": ev.trigger.end},
                "args": [
                    {"role": a.role, "start": a.span.start, "end": a.span.end}
                    for a in ev.arguments
                ],
            }
            for ev in instance.events
        ],
    }


def load_corpus(path, ontology: Ontology, split: str = "train") -> Corpus:
    """Read a line-delimited corpus file and validate every instance.

    Raises CorpusParseError with the offending line number on malformed
    JSON, CorpusValidationError on bad spans or unknown types/roles.
    Instance order is preserved.
    """
    instances = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusParseError(path, line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(obj, dict):
                raise CorpusParseError(path, line_no, "record is not a JSON object")
            try:
                instance = instance_from_json(obj)
            except KeyError as exc:
                raise CorpusParseError(path, line_no, f"missing field {exc}") from exc
            validate_instance(instance, ontology)
            instances.append(instance)
    seen: set[str] = set()
    for instance in instances:
        if instance.id in seen:
            raise CorpusValidationError(instance.id, "duplicate instance id")
        seen.add(instance.id)
    return Corpus(ontology=ontology, instances=instances, split=split)


def save_corpus(corpus: Corpus, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for instance in corpus.instances:
            fh.write(json.dumps(instance_to_json(instance), ensure_ascii=False) + "\n")


def detect_structures(instance: Instance) -> list[frozenset[str]]:
    """Tag each event of the instance as general / nested / overlapping.

    nested: one of the event's argument spans equals another event's
    trigger span, or its trigger span equals another event's argument
    span. overlapping: trigger span shared with another event of a
    different type or different argument set. general: neither. The
    nested and overlapping tags can co-occur.
    """
    events = instance.events
    tags: list[set[str]] = [set() for _ in events]
    for i, ev in enumerate(events):
        for j, other in enumerate(events):
            if i == j:
                continue
            arg_spans = set(ev.argument_spans())
            other_arg_spans = set(other.argument_spans())
            if other.trigger in arg_spans or ev.trigger in other_arg_spans:
                tags[i].add(NESTED)
            if ev.trigger == other.trigger and (
                ev.event_type != other.event_type or set(ev.arguments) != set(other.arguments)
            ):
                tags[i].add(OVERLAPPING)
    return [frozenset(t) if t else frozenset((GENERAL,)) for t in tags]


@dataclass(frozen=True)
class StructureStats:
    n_instances: int = 0
    n_events: int = 0
    n_arguments: int = 0
    n_nested: int = 0
    n_overlapping: int = 0
    n_nested_or_overlapping: int = 0

    def to_text(self) -> str:
        rows = [
            ("Instances", self.n_instances),
            ("Events", self.n_events),
            ("Arguments", self.n_arguments),
            ("Nested events", self.n_nested),
            ("Overlapping events", self.n_overlapping),
            ("Nested or overlapping events", self.n_nested_or_overlapping),
        ]
        width = max(len(name) for name, _ in rows)
        return "\n".join(f"{name:<{width}}  {value}" for name, value in rows)


def compute_stats(corpus: Corpus) -> StructureStats:
    n_events = n_args = n_nested = n_overlap = n_either = 0
    for instance in corpus.instances:
        tags = detect_structures(instance)
        n_events += len(instance.events)
        n_args += sum(len(ev.arguments) for ev in instance.events)
        n_nested += sum(1 for t in tags if NESTED in t)
        n_overlap += sum(1 for t in tags if OVERLAPPING in t)
        n_either += sum(1 for t in tags if NESTED in t or OVERLAPPING in t)
    return StructureStats(
        n_instances=len(corpus.instances),
        n_events=n_events,
        n_arguments=n_args,
        n_nested=n_nested,
        n_overlapping=n_overlap,
        n_nested_or_overlapping=n_either,
    )
