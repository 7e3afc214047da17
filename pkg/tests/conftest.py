"""Shared fixtures: bundled synthetic assets and a small trained pipeline."""
from importlib import resources

import pytest

from bioevent.corpus import load_corpus, load_ontology
from bioevent.templates import TemplateStore
from bioevent.training import TrainConfig, train

# One line per acceptance criterion, echoed into the terminal summary so
# the verdicts survive pytest's output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

ASSETS = resources.files("bioevent") / "assets"
SYNTH = ASSETS / "synthetic"


@pytest.fixture(scope="session")
def synth_ontology():
    return load_ontology(str(SYNTH / "ontology.json"))


@pytest.fixture(scope="session")
def synth_store():
    return TemplateStore.load(str(SYNTH / "templates.json"))


@pytest.fixture(scope="session")
def synth_corpus(synth_ontology):
    return load_corpus(str(SYNTH / "corpus.jsonl"), synth_ontology)


@pytest.fixture(scope="session")
def short_run(synth_corpus, synth_store):
    """An 80-step training run: partially fit, enough for plumbing tests."""
    config = TrainConfig.preset("synthetic", seed=3, max_steps=80)
    return train(synth_corpus, synth_store, config)


@pytest.fixture(scope="session")
def short_pipeline(short_run):
    return short_run.pipeline
