"""Tests for the fit/predict estimator facade."""
import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from bioevent.corpus import Corpus, EventMention, Instance, Span
from bioevent.estimator import GenerativeEventExtractor, check_corpus


@pytest.fixture(scope="module")
def fitted(synth_corpus, synth_store):
    est = GenerativeEventExtractor(templates=synth_store, max_steps=60, seed=3)
    return est.fit(synth_corpus)


def test_get_set_params_and_clone(synth_store):
    est = GenerativeEventExtractor(templates=synth_store, seed=5, prefix_len=4)
    params = est.get_params()
    assert params["seed"] == 5
    assert params["prefix_len"] == 4
    est.set_params(seed=9)
    assert est.seed == 9
    copy = clone(est)
    assert copy.get_params()["seed"] == 9
    assert not hasattr(copy, "pipeline_")


def test_unfitted_predict_raises(synth_store, synth_corpus):
    est = GenerativeEventExtractor(templates=synth_store)
    with pytest.raises(NotFittedError, match="not fitted"):
        est.predict(synth_corpus)
    with pytest.raises(NotFittedError):
        est.predict_instance("GATA3 binds the promoter")
    with pytest.raises(NotFittedError):
        est.save("/tmp/nowhere")


def test_templates_parameter_is_required(synth_corpus):
    est = GenerativeEventExtractor()
    with pytest.raises(ValueError, match="templates"):
        est.fit(synth_corpus)


def test_check_corpus_rejects_bad_input(synth_corpus):
    with pytest.raises(TypeError, match="expected a Corpus"):
        check_corpus(["not", "a", "corpus"])
    empty = Corpus(ontology=synth_corpus.ontology, instances=[])
    with pytest.raises(ValueError, match="empty"):
        check_corpus(empty)
    eventless = Corpus(
        ontology=synth_corpus.ontology,
        instances=[Instance(id="x", context="no events here")],
    )
    with pytest.raises(ValueError, match="no event annotations"):
        check_corpus(eventless, require_events=True)
    assert check_corpus(eventless) is eventless
    bad = Corpus(
        ontology=synth_corpus.ontology,
        instances=[Instance(
            id="y", context="short",
            events=(EventMention(event_type="Binding", trigger=Span(0, 999)),),
        )],
    )
    with pytest.raises(Exception, match="out of bounds"):
        check_corpus(bad)


def test_fit_sets_trailing_underscore_attributes(fitted):
    assert fitted.n_steps_ == 60
    assert len(fitted.loss_curve_) == 60
    assert fitted.pipeline_.model.config.d_model == 64
    assert fitted.pipeline_.prefix_config.length == 8


def test_predict_returns_mentions_keyed_by_id(fitted, synth_corpus):
    predictions = fitted.predict(synth_corpus)
    assert set(predictions) == {inst.id for inst in synth_corpus}
    for events in predictions.values():
        for event in events:
            assert isinstance(event, EventMention)
    # A bare instance list works the same as a corpus.
    subset = list(synth_corpus)[:2]
    again = fitted.predict(subset)
    assert set(again) == {inst.id for inst in subset}
    with pytest.raises(TypeError, match="sequence of Instance"):
        fitted.predict(["nope"])


def test_evaluate_and_score_agree(fitted, synth_corpus):
    report = fitted.evaluate(synth_corpus)
    assert fitted.score(synth_corpus) == report.trigger.f1
    assert 0.0 <= report.trigger.f1 <= 1.0
    assert 0.0 <= report.argument.f1 <= 1.0


def test_save_load_round_trip(fitted, synth_corpus, synth_store, tmp_path):
    fitted.save(tmp_path / "run")
    loaded = GenerativeEventExtractor.load(tmp_path / "run", templates=synth_store)
    a = fitted.predict(synth_corpus)
    b = loaded.predict(synth_corpus)
    assert a == b
    before = fitted.pipeline_.named_parameters()
    after = loaded.pipeline_.named_parameters()
    for name in before:
        assert np.array_equal(before[name].data, after[name].data)


def test_fit_is_seeded(synth_corpus, synth_store):
    a = GenerativeEventExtractor(templates=synth_store, max_steps=10, seed=4).fit(synth_corpus)
    b = GenerativeEventExtractor(templates=synth_store, max_steps=10, seed=4).fit(synth_corpus)
    assert a.loss_curve_ == b.loss_curve_
    pa = a.pipeline_.named_parameters()
    pb = b.pipeline_.named_parameters()
    for name in pa:
        assert np.array_equal(pa[name].data, pb[name].data)
