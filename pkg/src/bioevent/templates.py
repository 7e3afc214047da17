"""Event prompts, output templates, and structural prompt sequences.

An event template is a format string with one ``{Trigger}`` placeholder
and role placeholders ``{Role_<name>}`` (legacy ``{ROLE_<name>}`` accepted
and canonicalized on read). Filling a template against gold spans yields
the generation target; parsing aligns generated text back onto the
template literals to recover surface strings.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .corpus import EventMention, Ontology
from .tokenizer import CLS, EVENT_DELIM, SEP, TEMPLATE_SEP, tokenize

TRIGGER_PLACEHOLDER = "{Trigger}"

_PLACEHOLDER_RE = re.compile(r"\{(Trigger|(?:Role|ROLE)_([A-Za-z0-9]+))\}")


class TemplateError(Exception):
    """Malformed template or template/event mismatch."""


class MissingTemplateError(TemplateError):
    def __init__(self, event_types):
        types = ", ".join(sorted(event_types))
        super().__init__(
            f"no template for event type(s): {types}; "
            "run `bioevent gen-templates` or add entries to the template store"
        )
        self.event_types = tuple(event_types)


def role_placeholder(role: str) -> str:
    return "{Role_" + role + "}"


@dataclass(frozen=True)
class TemplatePart:
    kind: str  # "lit" | "ph"
    value: str  # literal text, or "Trigger" / "Role_<name>"


@dataclass(frozen=True)
class EventTemplate:
    event_type: str
    parts: tuple[TemplatePart, ...]

    @property
    def text(self) -> str:
        """Canonical template string with all placeholders literal."""
        return "".join(
            p.value if p.kind == "lit" else "{" + p.value + "}" for p in self.parts
        )

    @property
    def roles(self) -> tuple[str, ...]:
        return tuple(p.value[len("Role_"):] for p in self.parts if p.kind == "ph" and p.value != "Trigger")

    @classmethod
    def parse(cls, event_type: str, text: str, declared_roles: Sequence[str]) -> "EventTemplate":
        """Parse and validate a template string.

        Enforces: exactly one {Trigger}; each role placeholder unique,
        declared for the event type, and in declared relative order; a
        literal <SEP> directly after the trigger placeholder.
        """
        parts: list[TemplatePart] = []
        pos = 0
        for m in _PLACEHOLDER_RE.finditer(text):
            if m.start() > pos:
                parts.append(TemplatePart("lit", text[pos : m.start()]))
            name = "Trigger" if m.group(1) == "Trigger" else "Role_" + m.group(2)
            parts.append(TemplatePart("ph", name))
            pos = m.end()
        if pos < len(text):
            parts.append(TemplatePart("lit", text[pos:]))

        template = cls(event_type=event_type, parts=tuple(parts))
        trigger_positions = [i for i, p in enumerate(parts) if p.kind == "ph" and p.value == "Trigger"]
        if len(trigger_positions) != 1:
            raise TemplateError(
                f"{event_type}: template must contain exactly one {{Trigger}}, "
                f"found {len(trigger_positions)}"
            )
        t = trigger_positions[0]
        after = parts[t + 1] if t + 1 < len(parts) else None
        if after is None or after.kind != "lit" or not after.value.lstrip().startswith(TEMPLATE_SEP):
            raise TemplateError(f"{event_type}: {{Trigger}} must be followed by a literal {TEMPLATE_SEP}")

        roles = template.roles
        if len(set(roles)) != len(roles):
            raise TemplateError(f"{event_type}: duplicate role placeholder in template")
        unknown = [r for r in roles if r not in declared_roles]
        if unknown:
            raise TemplateError(
                f"{event_type}: template names undeclared role(s) {', '.join(unknown)}"
            )
        order = [declared_roles.index(r) for r in roles]
        if order != sorted(order):
            raise TemplateError(
                f"{event_type}: role placeholders must follow the declared role order "
                f"{list(declared_roles)}"
            )
        return template

    def placeholder_tokens(self) -> tuple[str, ...]:
        return tuple("{" + p.value + "}" for p in self.parts if p.kind == "ph")


@dataclass(frozen=True)
class EventPrompt:
    event_type: str
    description: str
    template: EventTemplate

    def render(self) -> str:
        return f"{self.event_type} . {self.description} . {self.template.text}"


def basic_template(event_type: str, roles: Sequence[str]) -> str:
    """Bare scaffold: trigger part plus one placeholder per declared role."""
    pieces = ["Event trigger {Trigger} " + TEMPLATE_SEP]
    pieces += [role_placeholder(r) for r in roles]
    return " ".join(pieces)


class TemplateStore:
    """Mapping event type -> (description, template text), file-backed.

    One JSON file per ontology; hand-editable; the same schema holds for
    curated and machine-generated entries.
    """

    def __init__(self, entries: Optional[dict[str, dict[str, str]]] = None):
        self._entries: dict[str, dict[str, str]] = dict(entries or {})

    def set(self, event_type: str, description: str, template_text: str) -> None:
        self._entries[event_type] = {"description": description, "template": template_text}

    def has(self, event_type: str) -> bool:
        return event_type in self._entries

    @property
    def event_types(self) -> tuple[str, ...]:
        return tuple(self._entries)

    def description_for(self, event_type: str) -> str:
        self._require(event_type)
        return self._entries[event_type]["description"]

    def template_text(self, event_type: str) -> str:
        self._require(event_type)
        return self._entries[event_type]["template"]

    def _require(self, event_type: str) -> None:
        if event_type not in self._entries:
            raise MissingTemplateError([event_type])

    def ensure_covers(self, ontology: Ontology) -> None:
        missing = [t for t in ontology.event_types if t not in self._entries]
        if missing:
            raise MissingTemplateError(missing)

    def to_json(self) -> dict:
        return {"templates": {t: dict(e) for t, e in self._entries.items()}}

    def save(self, path) -> None:
        Path(path).write_text(
            json.dumps(self.to_json(), indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
        )

    @classmethod
    def load(cls, path) -> "TemplateStore":
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(obj.get("templates", {}))


def build_event_prompt(event_type: str, ontology: Ontology, store: TemplateStore) -> EventPrompt:
    roles = ontology.roles_for(event_type)
    template = EventTemplate.parse(event_type, store.template_text(event_type), roles)
    description = store.description_for(event_type)
    if not description:
        raise TemplateError(f"{event_type}: empty type description")
    return EventPrompt(event_type=event_type, description=description, template=template)


def build_input(prompt: EventPrompt, context: str) -> str:
    """Model input: rendered prompt, the separator token, then the context."""
    return f"{prompt.render()} {SEP} {context}"


# Structural prompt text, one entry per structure category. The event
# type name is substituted between the <T> tags.
STRUCTURAL_PROMPTS = (
    (
        "general co-occurrence",
        "Explore events that frequently co-occur with <T>{t}<T> events, aiming to "
        "identify and analyze the interactions and dependencies among these events "
        "to enhance understanding of their interrelationships.",
    ),
    (
        "overlapping triggers",
        "Explore entities that serve as triggers in both <T>{t}<T> events and other "
        "event types, aiming to clarify the overlap in trigger roles across "
        "different contexts to better understand trigger versatility.",
    ),
    (
        "nested multi-role",
        "Explore entities acting in multiple roles, including as roles in <T>{t}<T> "
        "events and differently in other events, highlighting the dynamics of role "
        "versatility and their implications for event structure.",
    ),
    (
        "nested trigger-as-role",
        "Explore entities where the trigger of <T>{t}<T> events also acts as a role "
        "in other events, or vice versa, highlighting these complex inter-event "
        "relationships to identify patterns of event interaction.",
    ),
)


def structural_prompts(event_type: str) -> tuple[str, ...]:
    return tuple(text.format(t=event_type) for _, text in STRUCTURAL_PROMPTS)


def build_structural_sequence(event_type: str) -> str:
    """Concatenate the four structural prompts with separators.

    Layout: [CLS] S1 [SEP] S2 [SEP] S3 [SEP] S4 [SEP]
    """
    pieces = [CLS]
    for prompt in structural_prompts(event_type):
        pieces.append(prompt)
        pieces.append(SEP)
    return " ".join(pieces)


def fill_template(template: EventTemplate, event: Optional[EventMention], context: str) -> str:
    """Substitute trigger/argument surface strings into the template.

    With event=None every placeholder stays literal (the empty-prediction
    target). Roles the event does not fill stay literal too. An event
    role missing from the template is an ontology mismatch and raises.
    """
    values: dict[str, str] = {}
    if event is not None:
        if event.event_type != template.event_type:
            raise TemplateError(
                f"event type {event.event_type!r} does not match template "
                f"{template.event_type!r}"
            )
        values["Trigger"] = event.trigger.text(context)
        by_role: dict[str, list[str]] = {}
        for arg in sorted(event.arguments, key=lambda a: (a.span.start, a.span.end)):
            by_role.setdefault(arg.role, []).append(arg.span.text(context))
        template_roles = set(template.roles)
        for role, surfaces in by_role.items():
            if role not in template_roles:
                raise TemplateError(
                    f"{template.event_type}: event fills role {role!r} absent from template"
                )
            # Repeated same-role arguments: joined, degraded but parseable.
            values["Role_" + role] = " and ".join(surfaces)

    out = []
    for part in template.parts:
        if part.kind == "lit":
            out.append(part.value)
        else:
            out.append(values.get(part.value, "{" + part.value + "}"))
    return "".join(out)


def render_target(template: EventTemplate, events: Sequence[EventMention], context: str) -> str:
    """Generation target for one (event type, context) pair.

    Multiple events of the type are filled in trigger-span order and
    joined with the instance delimiter; no events yields the
    all-placeholder template.
    """
    if not events:
        return fill_template(template, None, context)
    ordered = sorted(events, key=lambda e: (e.trigger.start, e.trigger.end))
    return f" {EVENT_DELIM} ".join(fill_template(template, ev, context) for ev in ordered)


@dataclass
class ParsedEvent:
    """Surface strings recovered from one generated event instance."""

    trigger: Optional[str] = None
    roles: dict[str, str] = field(default_factory=dict)

    def is_empty(self) -> bool:
        return self.trigger is None and not self.roles


def _token_strings(text: str, atomic: Sequence[str]) -> list[str]:
    return [t for t, _ in tokenize(text, atomic)]


def _find_subsequence(haystack: list[str], needle: list[str], start: int) -> int:
    if not needle:
        return start
    for i in range(start, len(haystack) - len(needle) + 1):
        if haystack[i : i + len(needle)] == needle:
            return i
    return -1


def _parse_piece(template: EventTemplate, text: str, atomic: tuple[str, ...]) -> Optional[ParsedEvent]:
    tokens = tokenize(text, atomic)
    token_strs = [t for t, _ in tokens]

    parsed = ParsedEvent()
    cursor = 0
    pending: list[str] = []  # placeholder names awaiting their slot text

    def close_slot(end_index: int) -> None:
        # Attribute tokens [cursor, end_index) to the pending placeholders.
        if not pending:
            return
        slot = tokens[cursor:end_index]
        values = _split_slot(slot, pending, text)
        for name, value in zip(pending, values):
            if value is None:
                continue
            if name == "Trigger":
                parsed.trigger = value
            else:
                parsed.roles[name[len("Role_"):]] = value
        pending.clear()

    for part in template.parts:
        if part.kind == "ph":
            pending.append(part.value)
            continue
        lit_tokens = _token_strings(part.value, atomic)
        if not lit_tokens:
            continue
        found = _find_subsequence(token_strs, lit_tokens, cursor)
        if found < 0:
            return None
        close_slot(found)
        cursor = found + len(lit_tokens)
    close_slot(len(tokens))
    return parsed


def _split_slot(slot, pending: list[str], text: str):
    """Assign slot tokens to a run of placeholders.

    A slot equal to its placeholder token is "no prediction". For runs of
    adjacent placeholders, placeholders whose literal token survives in
    the slot stay unfilled and the remaining text goes to the first
    placeholder whose token is absent.
    """
    def surface(toks) -> Optional[str]:
        if not toks:
            return None
        return text[toks[0][1].start : toks[-1][1].end] or None

    values: list[Optional[str]] = [None] * len(pending)
    if len(pending) == 1:
        value = surface(slot)
        if value is not None and value != "{" + pending[0] + "}":
            values[0] = value
        return values

    placeholder_tokens = {"{" + n + "}" for n in pending}
    kept = {t for t, _ in slot if t in placeholder_tokens}
    filled_text = [(t, s) for t, s in slot if t not in placeholder_tokens]
    if not filled_text:
        return values
    target = next((i for i, n in enumerate(pending) if "{" + n + "}" not in kept), 0)
    values[target] = surface(filled_text)
    return values


def parse_output(template: EventTemplate, generated: str) -> list[ParsedEvent]:
    """Recover trigger/role surface strings from generated text.

    The text is split on the instance delimiter; each piece is aligned
    against the template literals greedily left to right (earliest
    match). Slots equal to their placeholder token map to no prediction.
    Unalignable pieces yield nothing; this never raises.
    """
    atomic = template.placeholder_tokens()
    results = []
    for piece in generated.split(EVENT_DELIM):
        piece = piece.strip()
        if not piece:
            continue
        parsed = _parse_piece(template, piece, atomic)
        if parsed is not None and not parsed.is_empty():
            results.append(parsed)
    return results


def literal_collision(template: EventTemplate, surfaces: Iterable[str]) -> bool:
    """True if any surface string could be mistaken for template structure.

    Covers: a literal segment's token sequence occurring inside a
    surface, placeholder tokens, and the instance delimiter. Such
    surfaces are not guaranteed to round-trip through fill/parse.
    """
    atomic = template.placeholder_tokens() + (EVENT_DELIM,)
    literal_seqs = [
        _token_strings(p.value, atomic) for p in template.parts if p.kind == "lit"
    ]
    literal_seqs = [s for s in literal_seqs if s]
    for surface in surfaces:
        toks = _token_strings(surface, atomic)
        if any(t in atomic for t in toks):
            return True
        for seq in literal_seqs:
            if _find_subsequence(toks, seq, 0) >= 0:
                return True
    return False
