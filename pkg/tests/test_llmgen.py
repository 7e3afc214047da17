"""Template generation client: validation, caching, retries, offline mode."""
import pytest

from bioevent.corpus import Ontology
from bioevent.llmgen import (
    OfflineCacheMissError,
    ProviderConfig,
    ProviderError,
    ResponseValidationError,
    TemplateCache,
    TemplateRequest,
    gen_template,
    generate_templates,
    validate_template_text,
)
from bioevent.templates import EventTemplate, TemplateStore

GOOD = "Event trigger {Trigger} <SEP> {Role_Theme} attached at {Role_Site}."


def online(**kw) -> ProviderConfig:
    return ProviderConfig(base_url="https://llm.test", model="m1", offline=False, **kw)


def request() -> TemplateRequest:
    return TemplateRequest.for_type("Binding", ("Theme", "Site"))


def test_request_carries_basic_scaffold():
    req = request()
    assert req.event_type == "Binding"
    assert "{Trigger}" in req.basic
    assert "{Role_Theme}" in req.basic and "{Role_Site}" in req.basic
    assert "Binding" in req.instruction


def test_validate_template_text_accepts_good():
    assert validate_template_text("Binding", ("Theme", "Site"), GOOD) == []


def test_validate_template_text_accepts_uppercase_role_prefix():
    text = "Event trigger {Trigger} <SEP> {ROLE_Theme} at {ROLE_Site}."
    assert validate_template_text("Binding", ("Theme", "Site"), text) == []


@pytest.mark.parametrize(
    "text",
    [
        "no placeholders at all",
        "Event trigger {Trigger} {Trigger} <SEP> {Role_Theme} {Role_Site}",
        "Event trigger {Trigger} <SEP> {Role_Theme}",  # Site missing
        "Event trigger {Trigger} <SEP> {Role_Theme} {Role_Site} {Role_Site}",
    ],
)
def test_validate_template_text_flags_problems(text):
    assert validate_template_text("Binding", ("Theme", "Site"), text)


def test_validated_output_parses_as_template():
    # Whatever validation accepts, EventTemplate.parse must accept too.
    assert validate_template_text("Binding", ("Theme", "Site"), GOOD) == []
    EventTemplate.parse("Binding", GOOD, ("Theme", "Site"))


def test_cache_round_trip(tmp_path):
    cache = TemplateCache(tmp_path)
    record = {"event_type": "Binding", "template": GOOD, "provider_id": "m1"}
    assert cache.get("onto", "Binding", "inst") is None
    cache.put("onto", "Binding", "inst", record)
    assert cache.get("onto", "Binding", "inst") == record
    # A different instruction is a different cache key.
    assert cache.get("onto", "Binding", "other-inst") is None


def test_gen_template_offline_miss_raises(tmp_path):
    cache = TemplateCache(tmp_path)
    with pytest.raises(OfflineCacheMissError):
        gen_template(request(), ProviderConfig(offline=True), cache, "onto")


def test_gen_template_offline_cache_hit(tmp_path):
    cache = TemplateCache(tmp_path)
    req = request()
    cache.put("onto", "Binding", req.instruction, {"template": GOOD, "provider_id": "m1"})
    resp = gen_template(req, ProviderConfig(offline=True), cache, "onto")
    assert resp.cached
    assert resp.template_text == GOOD


def test_gen_template_calls_transport_and_caches(tmp_path):
    cache = TemplateCache(tmp_path)
    calls = []

    def transport(payload):
        calls.append(payload)
        return GOOD + "\n"

    resp = gen_template(request(), online(), cache, "onto", transport)
    assert not resp.cached
    assert resp.template_text == GOOD  # stripped
    assert len(calls) == 1
    assert calls[0]["model"] == "m1"
    assert "Basic Template:" in calls[0]["messages"][0]["content"]
    # Second call is served from the cache without touching the transport.
    again = gen_template(request(), online(), cache, "onto", transport)
    assert again.cached
    assert len(calls) == 1


def test_gen_template_retries_invalid_then_accepts(tmp_path):
    cache = TemplateCache(tmp_path)
    replies = iter(["garbage with no placeholders", GOOD])

    def transport(payload):
        return next(replies)

    resp = gen_template(request(), online(max_retries=1), cache, "onto", transport)
    assert resp.template_text == GOOD


def test_gen_template_exhausted_retries_raise(tmp_path):
    cache = TemplateCache(tmp_path)

    def transport(payload):
        return "never valid"

    with pytest.raises(ResponseValidationError) as err:
        gen_template(request(), online(max_retries=2), cache, "onto", transport)
    assert "Binding" in str(err.value)


def test_gen_template_propagates_provider_error(tmp_path):
    cache = TemplateCache(tmp_path)

    def transport(payload):
        raise ProviderError("boom")

    with pytest.raises(ProviderError):
        gen_template(request(), online(), cache, "onto", transport)


def test_generate_templates_fills_only_missing(tmp_path):
    ontology = Ontology(
        name="toy", roles={"Binding": ("Theme",), "Expression": ("Theme",)}
    )
    store = TemplateStore()
    store.set("Binding", "already here", "Event trigger {Trigger} <SEP> {Role_Theme}")
    served = []

    def transport(payload):
        served.append(payload)
        return "Event trigger {Trigger} <SEP> {Role_Theme} appears."

    cache = TemplateCache(tmp_path)
    responses = generate_templates(
        ontology, store, online(), cache, transport=transport
    )
    assert [r.event_type for r in responses] == ["Expression"]
    assert len(served) == 1
    store.ensure_covers(ontology)
    assert "Expression events" in store.description_for("Expression")
