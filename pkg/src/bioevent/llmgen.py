"""Template elicitation from a chat-completion API, with an on-disk cache.

A request pairs a fixed instruction with a bare "basic template" for the
event type; the provider returns an enriched template which is validated
(every placeholder must survive) before it is accepted and cached. With
no provider configured the client is offline and serves the cache only,
so test and CI runs never touch the network.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .corpus import Ontology
from .templates import TemplateStore, basic_template, role_placeholder

DEFAULT_INSTRUCTION = (
    "Rewrite the basic template into one fluent sentence that a biomedical "
    "event extractor can generate, describing how the trigger and the "
    "argument roles of a {event_type} event relate to each other. Keep the "
    "leading 'Event trigger {{Trigger}} <SEP>' part unchanged and use every "
    "role placeholder exactly once. Reply with the template only."
)

API_KEY_ENV = "BIOEVENT_API_KEY"


class TemplateGenError(Exception):
    """Base class for template-generation failures."""


class ProviderError(TemplateGenError):
    """Network/auth/provider failure; safe to retry."""


class ResponseValidationError(TemplateGenError):
    def __init__(self, event_type, problems):
        super().__init__(f"{event_type}: generated template rejected: " + "; ".join(problems))
        self.problems = tuple(problems)


class OfflineCacheMissError(TemplateGenError):
    def __init__(self, event_type):
        super().__init__(
            f"{event_type}: offline mode and no cached template; configure a "
            f"provider (base URL, model, {API_KEY_ENV}) or pre-seed the cache"
        )


@dataclass(frozen=True)
class TemplateRequest:
    event_type: str
    roles: tuple[str, ...]
    instruction: str
    basic: str

    @classmethod
    def for_type(cls, event_type: str, roles: Sequence[str], instruction: str = DEFAULT_INSTRUCTION):
        return cls(
            event_type=event_type,
            roles=tuple(roles),
            instruction=instruction.format(event_type=event_type),
            basic=basic_template(event_type, roles),
        )


@dataclass(frozen=True)
class TemplateResponse:
    event_type: str
    template_text: str
    provider_id: str
    cached: bool


@dataclass
class ProviderConfig:
    base_url: str = ""
    model: str = ""
    api_key_env: str = API_KEY_ENV
    timeout: float = 60.0
    max_retries: int = 2
    offline: bool = True

    @property
    def configured(self) -> bool:
        return bool(self.base_url and self.model)


Transport = Callable[[dict], str]


def _http_transport(config: ProviderConfig) -> Transport:
    import requests

    def call(payload: dict) -> str:
        key = os.environ.get(config.api_key_env, "")
        if not key:
            raise ProviderError(f"API key environment variable {config.api_key_env} is not set")
        url = config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(
                url,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=config.timeout,
            )
            resp.raise_for_status()
            body = resp.json()
            return body["choices"][0]["message"]["content"]
        except requests.RequestException as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider response: {exc}") from exc

    return call


def validate_template_text(event_type: str, roles: Sequence[str], text: str) -> list[str]:
    """Return validation problems (empty list means acceptable)."""
    problems = []
    if text.count("{Trigger}") != 1:
        problems.append("{Trigger} must appear exactly once")
    for role in roles:
        pattern = re.compile(r"\{(?:Role|ROLE)_" + re.escape(role) + r"\}")
        n = len(pattern.findall(text))
        if n != 1:
            problems.append(f"{role_placeholder(role)} appears {n} times, expected once")
    return problems


class TemplateCache:
    """Directory of JSON files keyed by (ontology id, event type, instruction)."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self._lock = threading.Lock()

    def _path(self, ontology_id: str, event_type: str, instruction: str) -> Path:
        digest = hashlib.sha256(instruction.encode("utf-8")).hexdigest()[:16]
        safe_type = re.sub(r"[^A-Za-z0-9_.-]", "_", event_type)
        return self.directory / f"{ontology_id}__{safe_type}__{digest}.json"

    def get(self, ontology_id: str, event_type: str, instruction: str) -> Optional[dict]:
        path = self._path(ontology_id, event_type, instruction)
        with self._lock:
            if not path.exists():
                return None
            return json.loads(path.read_text(encoding="utf-8"))

    def put(self, ontology_id: str, event_type: str, instruction: str, record: dict) -> None:
        path = self._path(ontology_id, event_type, instruction)
        with self._lock:
            self.directory.mkdir(parents=True, exist_ok=True)
            path.write_text(json.dumps(record, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def gen_template(
    request: TemplateRequest,
    config: ProviderConfig,
    cache: TemplateCache,
    ontology_id: str,
    transport: Optional[Transport] = None,
) -> TemplateResponse:
    """Resolve one event template: cache first, then the provider.

    Provider responses are validated before acceptance; invalid ones are
    retried up to config.max_retries, then surfaced. Offline with a cache
    miss raises OfflineCacheMissError.
    """
    hit = cache.get(ontology_id, request.event_type, request.instruction)
    if hit is not None:
        return TemplateResponse(
            event_type=request.event_type,
            template_text=hit["template"],
            provider_id=hit.get("provider_id", "cache"),
            cached=True,
        )
    if config.offline or (not config.configured and transport is None):
        raise OfflineCacheMissError(request.event_type)

    call = transport or _http_transport(config)
    payload = {
        "model": config.model,
        "temperature": 0,
        "messages": [
            {"role": "user", "content": f"{request.instruction}\n\nBasic Template: {request.basic}"}
        ],
    }
    last_problems: list[str] = []
    for _ in range(config.max_retries + 1):
        text = call(payload).strip()
        last_problems = validate_template_text(request.event_type, request.roles, text)
        if not last_problems:
            record = {
                "event_type": request.event_type,
                "template": text,
                "provider_id": config.model or "transport",
            }
            cache.put(ontology_id, request.event_type, request.instruction, record)
            return TemplateResponse(
                event_type=request.event_type,
                template_text=text,
                provider_id=record["provider_id"],
                cached=False,
            )
    raise ResponseValidationError(request.event_type, last_problems)


def generate_templates(
    ontology: Ontology,
    store: TemplateStore,
    config: ProviderConfig,
    cache: TemplateCache,
    descriptions: Optional[dict[str, str]] = None,
    instruction: str = DEFAULT_INSTRUCTION,
    transport: Optional[Transport] = None,
    only_missing: bool = True,
) -> list[TemplateResponse]:
    """Fill the template store for every (missing) event type of an ontology.

    Descriptions are not elicited; they come from the ontology's dataset
    documentation and default to a neutral sentence when absent.
    """
    responses = []
    for event_type in ontology.event_types:
        if only_missing and store.has(event_type):
            continue
        request = TemplateRequest.for_type(event_type, ontology.roles_for(event_type), instruction)
        response = gen_template(request, config, cache, ontology.name, transport)
        description = (descriptions or {}).get(
            event_type, f"{event_type} events as annotated in the {ontology.name} dataset."
        )
        store.set(event_type, description, response.template_text)
        responses.append(response)
    return responses
