"""End-to-end tests of every CLI subcommand on the bundled synthetic assets."""
import json
from importlib import resources

import pytest

from bioevent.cli import main
from bioevent.corpus import load_corpus, load_ontology
from bioevent.tokenizer import Vocab

SYNTH = resources.files("bioevent") / "assets" / "synthetic"
ONTOLOGY = str(SYNTH / "ontology.json")
CORPUS = str(SYNTH / "corpus.jsonl")
TEMPLATES = str(SYNTH / "templates.json")


@pytest.fixture(scope="module")
def model_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli-model") / "run"
    code = main([
        "train",
        "--ontology", ONTOLOGY,
        "--corpus", CORPUS,
        "--templates", TEMPLATES,
        "--out-dir", str(out),
        "--preset", "synthetic",
        "--max-steps", "12",
        "--seed", "3",
    ])
    assert code == 0
    return out


def test_stats_prints_structure_counts(capsys):
    assert main(["stats", "--ontology", ONTOLOGY, "--corpus", CORPUS]) == 0
    out = capsys.readouterr().out
    assert "Instances" in out and "10" in out
    assert "Events" in out and "15" in out
    assert "Nested or overlapping events" in out


def test_build_vocab_writes_loadable_file(tmp_path, capsys):
    out = tmp_path / "vocab.txt"
    code = main([
        "build-vocab",
        "--ontology", ONTOLOGY,
        "--corpus", CORPUS,
        "--templates", TEMPLATES,
        "--out", str(out),
    ])
    assert code == 0
    vocab = Vocab.load(out)
    assert len(vocab) > 50
    assert f"wrote {len(vocab)} tokens" in capsys.readouterr().out


def test_train_writes_model_directory(model_dir, capsys):
    for name in ("checkpoint.bin", "config.json", "vocab.txt",
                 "templates.json", "ontology.json", "loss_curve.tsv"):
        assert (model_dir / name).exists(), name
    curve = (model_dir / "loss_curve.tsv").read_text().strip().split("\n")
    assert curve[0] == "step\tepoch\tloss"
    assert len(curve) == 13


def test_train_flags_override_config_file(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps({
        "train": {"max_steps": 5, "warmup_steps": 1, "epochs": 5,
                  "batch_size": 8, "init_std": 0.1},
        "model": {"d_model": 16, "n_heads": 2},
        "prompt_encoder": {"d_model": 16, "n_heads": 2},
        "prefix": {"length": 2},
    }))
    out = tmp_path / "run"
    code = main([
        "train",
        "--ontology", ONTOLOGY,
        "--corpus", CORPUS,
        "--templates", TEMPLATES,
        "--out-dir", str(out),
        "--config", str(config),
        "--max-steps", "3",  # flag beats the file's 5
    ])
    assert code == 0
    assert "trained 3 steps" in capsys.readouterr().out
    stored = json.loads((out / "config.json").read_text())
    assert stored["model"]["d_model"] == 16
    assert stored["prefix"]["length"] == 2


def test_predict_then_eval_round_trip(model_dir, tmp_path, capsys):
    pred_path = tmp_path / "pred.jsonl"
    code = main([
        "predict",
        "--model-dir", str(model_dir),
        "--corpus", CORPUS,
        "--out", str(pred_path),
    ])
    assert code == 0
    assert "instances" in capsys.readouterr().out
    ontology = load_ontology(ONTOLOGY)
    predicted = load_corpus(pred_path, ontology)
    assert len(predicted) == 10

    code = main([
        "eval",
        "--ontology", ONTOLOGY,
        "--gold", CORPUS,
        "--pred", str(pred_path),
    ])
    assert code == 0
    text = capsys.readouterr().out
    assert "Trg-C" in text and "Arg-C" in text
    assert "trigger recall by gold structure:" in text


def test_eval_gold_against_itself_is_perfect(capsys):
    code = main([
        "eval",
        "--ontology", ONTOLOGY,
        "--gold", CORPUS,
        "--pred", CORPUS,
        "--json",
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["trigger"]["f1"] == 1.0
    assert report["argument"]["f1"] == 1.0
    assert report["structure_trigger_recall"]["nested"]["recall"] == 1.0


def test_eval_no_structure_flag(capsys):
    code = main([
        "eval",
        "--ontology", ONTOLOGY,
        "--gold", CORPUS,
        "--pred", CORPUS,
        "--no-structure",
    ])
    assert code == 0
    assert "by gold structure" not in capsys.readouterr().out


def test_gradcheck_passes_at_documented_tolerance(capsys):
    code = main(["gradcheck", "--max-coords", "1", "--tolerance", "1e-4"])
    assert code == 0
    out = capsys.readouterr().out
    assert "worst relative error" in out


def test_gradcheck_fails_when_tolerance_is_unreachable(monkeypatch, capsys):
    from bioevent import diagnostics

    monkeypatch.setattr(diagnostics, "run_gradient_checks",
                        lambda **kw: {"stubbed": 1.0})
    code = main(["gradcheck"])
    assert code == 1


def test_missing_files_exit_two(capsys):
    assert main(["stats", "--ontology", "/nonexistent.json", "--corpus", CORPUS]) == 2
    assert "error:" in capsys.readouterr().err


def test_malformed_corpus_exits_two(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x", "context": "hi"}\nnot json at all\n')
    assert main(["stats", "--ontology", ONTOLOGY, "--corpus", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err


def test_gen_templates_offline_uses_bundled_cache(tmp_path, capsys):
    # Offline with an empty cache: every type misses and the command
    # reports the failure through the normal error path.
    out = tmp_path / "templates.json"
    code = main([
        "gen-templates",
        "--ontology", ONTOLOGY,
        "--out", str(out),
        "--cache-dir", str(tmp_path / "cache"),
    ])
    assert code == 2
    assert "error:" in capsys.readouterr().err
