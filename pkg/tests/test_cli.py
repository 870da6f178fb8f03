import csv
import hashlib
import json
import shutil

import pytest

from speechsi.cli import main
from speechsi.schema import validate_report, validate_table
from speechsi.stopwords import STOPWORDS, stopwords_digest


def run(*argv):
    return main([str(a) for a in argv])


def sha(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def without_timestamp(path):
    doc = json.loads(path.read_text())
    doc.pop("timestamp")
    return doc


@pytest.fixture(scope="module")
def data(tmp_path_factory):
    """ε = 1 synthetic set with features, text sidecars and a full-grid evaluation."""
    root = tmp_path_factory.mktemp("cli")
    d = root / "d"
    assert run("synth", "--n", 70, "--imbalance", 6, "--sep", 1.0, "--seed", 42, "--out", d) == 0
    assert run("extract", "--manifest", d / "manifest.csv", "--out", d / "features.csv") == 0
    assert run("prep-text", "--manifest", d / "manifest.csv", "--out", d / "text", "--seed", 42) == 0
    assert run("evaluate", "--manifest", d / "manifest.csv", "--features-csv", d / "features.csv",
               "--text-dir", d / "text", "--all", "--svg", "--seed", 42, "--out", d / "grid") == 0
    return d


def test_synth_counts(data):
    rows = list(csv.DictReader((data / "manifest.csv").open()))
    assert len(rows) == 70
    assert sum(int(r["label"]) for r in rows) == 10


def test_synth_requires_out(capsys):
    with pytest.raises(SystemExit) as exc:
        run("synth", "--n", 10)
    assert exc.value.code == 2


def test_synth_digest_stable(data, tmp_path):
    run("synth", "--n", 70, "--imbalance", 6, "--sep", 1.0, "--seed", 42, "--out", tmp_path / "again")
    assert sha(tmp_path / "again" / "manifest.csv") == sha(data / "manifest.csv")
    assert sha(tmp_path / "again" / "audio" / "rec0003.wav") == sha(data / "audio" / "rec0003.wav")


def test_extract_shape(data):
    rows = list(csv.reader((data / "features.csv").open()))
    assert len(rows) == 71
    assert all(len(r) == 2 + 136 for r in rows)
    assert rows[0][:3] == ["source_id", "label", "zcr_mean"]


def test_extract_rerun_identical(data, tmp_path):
    assert run("extract", "--manifest", data / "manifest.csv", "--out", tmp_path / "f.csv") == 0
    assert sha(tmp_path / "f.csv") == sha(data / "features.csv")


def test_extract_skips_corrupt_file(data, tmp_path, caplog):
    d = tmp_path / "d"
    shutil.copytree(data, d, ignore=shutil.ignore_patterns("grid", "text"))
    (d / "audio" / "rec0005.wav").write_bytes(b"RIFF\x00\x00\x00\x00JUNK")
    assert run("extract", "--manifest", d / "manifest.csv", "--out", d / "f.csv") == 0
    assert len((d / "f.csv").read_text().splitlines()) == 1 + 69
    assert "rec0005" in caplog.text


def test_extract_fails_above_ten_percent(data, tmp_path):
    d = tmp_path / "d"
    shutil.copytree(data, d, ignore=shutil.ignore_patterns("grid", "text"))
    for i in range(8):
        (d / "audio" / f"rec{i:04d}.wav").write_bytes(b"not a wav")
    assert run("extract", "--manifest", d / "manifest.csv", "--out", d / "f.csv") == 1


def test_prep_text_sidecars(data):
    text = data / "text"
    assert (text / "embeddings.csv").read_text().startswith("# dim=100,seed=42,window=5,negatives=5,epochs=5\n")
    vocab = json.loads((text / "vocab.json").read_text())
    seq_rows = (text / "sequences.csv").read_text().splitlines()
    assert len(seq_rows) == 71
    assert len(vocab["terms"]) + 1 == len((text / "embeddings.csv").read_text().splitlines()) - 2


def test_grid_outputs(data):
    grid = data / "grid"
    table = json.loads((grid / "table.json").read_text())
    validate_table(table)
    assert len(table["rows"]) == 10
    lines = (grid / "table.csv").read_text().splitlines()
    assert lines[0] == "Feature Set,Model,Sensitivity,Specificity,AUC"
    assert [l.split(",")[1] for l in lines[1:]] == ["RF", "SVM", "LR", "ANN", "CNN"] * 2
    for fs in ("acoustic", "linguistic"):
        assert (grid / f"roc_{fs}.svg").read_text().startswith("<svg")
        for m in ("rf", "svm", "lr", "ann", "cnn"):
            doc = json.loads((grid / f"report_{fs}_{m}.json").read_text())
            validate_report(doc)
            assert len(doc["folds"]) == 5
            roc = (grid / f"roc_{fs}_{m}.csv").read_text().splitlines()
            assert roc[0] == "fold,fpr,tpr"


def test_grid_separates_at_full_separability(data):
    rows = json.loads((data / "grid" / "table.json").read_text())["rows"]
    aucs = {(r["feature_set"], r["model"]): r["auc"] for r in rows}
    # the acoustic CNN pools away feature identity and stays well below the rest
    weak = aucs.pop(("acoustic", "cnn"))
    assert all(a >= 0.9 for a in aucs.values()), aucs
    assert weak > 0.5


def test_single_cell_and_seeded_rerun(data, tmp_path):
    args = ["evaluate", "--manifest", data / "manifest.csv", "--features-csv", data / "features.csv",
            "--model", "svm", "--features", "acoustic", "--seed", 42]
    assert run(*args, "--out", tmp_path / "a") == 0
    assert run(*args, "--out", tmp_path / "b") == 0
    a = without_timestamp(tmp_path / "a" / "report_acoustic_svm.json")
    b = without_timestamp(tmp_path / "b" / "report_acoustic_svm.json")
    assert a == b
    assert len(a["folds"]) == 5 and set(a["means"]) == {"sensitivity", "specificity", "auc"}
    assert a == without_timestamp(data / "grid" / "report_acoustic_svm.json")


def test_evaluate_extras(data, tmp_path):
    assert run("evaluate", "--manifest", data / "manifest.csv", "--features-csv", data / "features.csv",
               "--model", "ann", "--features", "acoustic", "--epochs", 3, "--loss-trace", "--save-model",
               "--no-class-weights", "--out", tmp_path) == 0
    report = json.loads((tmp_path / "report_acoustic_ann.json").read_text())
    assert not report["class_weighted"]
    assert (tmp_path / "loss_acoustic_ann_fold0.csv").read_text().splitlines()[0] == "epoch,loss"
    model = json.loads((tmp_path / "model_acoustic_ann.json").read_text())
    assert model["kind"] == "ann" and "preprocessing" in model


def test_group_folds_need_enough_subjects(data, tmp_path, caplog):
    # ten positives over two subjects cannot fill five subject-disjoint folds
    assert run("evaluate", "--manifest", data / "manifest.csv", "--features-csv", data / "features.csv",
               "--model", "lr", "--features", "acoustic", "--group-by-subject", "--out", tmp_path) == 1
    assert "ClassTooSmall" in caplog.text


def test_evaluate_needs_inputs(data, tmp_path):
    assert run("evaluate", "--manifest", data / "manifest.csv", "--model", "lr", "--features", "acoustic",
               "--out", tmp_path) == 2
    assert run("evaluate", "--manifest", data / "manifest.csv", "--out", tmp_path) == 2


def test_analyze_stats_flags_energy_family(data, tmp_path):
    out = tmp_path / "sig.csv"
    assert run("analyze", "stats", "--features-csv", data / "features.csv", "--out", out) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 136
    flagged = {r["feature"] for r in rows if r["significant"] == "1"}
    assert any(f.startswith("energy") for f in flagged)
    for r in rows:
        assert float(r["p_adj"]) == min(1.0, float(r["p_row"]) * 136)


def test_analyze_lexical(data, tmp_path):
    out = tmp_path / "lex.csv"
    assert run("analyze", "lexical", "--manifest", data / "manifest.csv", "--out", out,
               "--svg", tmp_path / "lex.svg") == 0
    terms = {r["term"] for r in csv.DictReader(out.open())}
    assert terms and not terms & STOPWORDS
    meta = json.loads((tmp_path / "lex.meta.json").read_text())
    assert meta["stopwords_sha256"] == stopwords_digest()
    assert (tmp_path / "lex.svg").read_text().startswith("<svg")


def test_env_var_sets_default_output(data, tmp_path, monkeypatch):
    monkeypatch.setenv("SPEECHSI_OUT", str(tmp_path))
    assert run("analyze", "stats", "--features-csv", data / "features.csv") == 0
    assert (tmp_path / "significance.csv").exists()


def test_show_config(capsys):
    assert run("show-config", "--seed", 7) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["seed"] == 7 and cfg["nn_epochs"] == 250 and cfg["nn_filters"] == 250


def test_bad_manifest_exit_code(tmp_path):
    (tmp_path / "m.csv").write_text("nope\n")
    assert run("extract", "--manifest", tmp_path / "m.csv", "--out", tmp_path / "f.csv") == 1
