import json
import subprocess
import sys

import pytest

from archid import cli, synth


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    specs = synth.separable_specs(n_classes=3, seed=3)
    synth.write_corpus(root, specs, per_class=8, length=4200, seed=3, container="elf")
    return root


@pytest.fixture(scope="module")
def raw_corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("rawcorpus")
    specs = synth.separable_specs(n_classes=3, seed=4)
    synth.write_corpus(root, specs, per_class=6, length=3000, seed=4,
                       container="raw", complete=True)
    return root


@pytest.fixture(scope="module")
def csv_path(corpus, tmp_path_factory):
    out = tmp_path_factory.mktemp("csv") / "features.csv"
    assert cli.main(["extract", "--corpus", str(corpus), "--out", str(out),
                     "--jobs", "1"]) == 0
    return out


@pytest.fixture(scope="module")
def model_path(csv_path, tmp_path_factory):
    out = tmp_path_factory.mktemp("model") / "nb.archid"
    assert cli.main(["train", "--csv", str(csv_path), "--family", "naive_bayes",
                     "--out", str(out)]) == 0
    return out


def test_extract_writes_csv(csv_path):
    lines = csv_path.read_text().splitlines()
    assert len(lines) == 1 + 3 * 8
    assert lines[0].count(",") == 293


def test_extract_complete_binary_mode_on_raw_files(raw_corpus, tmp_path):
    out = tmp_path / "raw.csv"
    assert cli.main(["extract", "--corpus", str(raw_corpus), "--mode", "complete_binary",
                     "--out", str(out), "--jobs", "1"]) == 0
    assert len(out.read_text().splitlines()) == 1 + 3 * 6


def test_extract_unknown_arch_dir(tmp_path, capsys):
    (tmp_path / "z80").mkdir()
    assert cli.main(["extract", "--corpus", str(tmp_path), "--out",
                     str(tmp_path / "x.csv")]) == 2
    assert "z80" in capsys.readouterr().err


def test_train_random_forest(csv_path, tmp_path):
    out = tmp_path / "rf.archid"
    assert cli.main(["train", "--csv", str(csv_path), "--family", "random_forest",
                     "--trees", "5", "--out", str(out)]) == 0
    assert out.exists()


def test_train_logistic_c1000_l1(csv_path, tmp_path):
    out = tmp_path / "lg.archid"
    assert cli.main(["train", "--csv", str(csv_path), "--family", "logistic_regression",
                     "--c", "1000", "--penalty", "l1", "--max-iter", "150",
                     "--out", str(out)]) == 0
    assert out.exists()


def test_train_rejects_wrong_column_count(csv_path, tmp_path):
    broken = tmp_path / "broken.csv"
    lines = csv_path.read_text().splitlines()
    broken.write_text("\n".join(",".join(l.split(",")[1:]) for l in lines) + "\n")
    assert cli.main(["train", "--csv", str(broken), "--family", "naive_bayes",
                     "--out", str(tmp_path / "m.archid")]) == 2


def test_evaluate_cv(csv_path, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = cli.main(["evaluate", "--protocol", "cv", "--data", str(csv_path),
                     "--family", "naive_bayes", "--folds", "4",
                     "--feature-set", "all", "--report", str(report_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert "accuracy:" in out
    report = json.loads(report_path.read_text())
    assert "accuracy" in report
    assert report["config"]["folds"] == 4


def test_evaluate_sweep(csv_path, corpus, capsys):
    code = cli.main(["evaluate", "--protocol", "sweep", "--data", str(csv_path),
                     "--test-data", str(corpus), "--test-mode", "code_only",
                     "--family", "naive_bayes", "--sizes", "64,512",
                     "--draws", "2", "--per-class-cap", "3"])
    assert code == 0
    out = capsys.readouterr().out
    assert "64" in out and "512" in out


def test_evaluate_cross_regime(csv_path, raw_corpus, capsys):
    code = cli.main(["evaluate", "--protocol", "cross-regime", "--data", str(csv_path),
                     "--test-data", str(raw_corpus), "--test-mode", "complete_binary",
                     "--family", "naive_bayes"])
    assert code == 0
    assert "accuracy:" in capsys.readouterr().out


def test_evaluate_sweep_requires_test_data(csv_path):
    assert cli.main(["evaluate", "--protocol", "sweep", "--data", str(csv_path),
                     "--family", "naive_bayes"]) == 1


def test_predict_text_output(model_path, corpus, capsys):
    sample = next((corpus / "amd64").iterdir())
    assert cli.main(["predict", "--model", str(model_path), "--mode", "code_only",
                     str(sample)]) == 0
    out = capsys.readouterr().out
    assert "architecture:" in out
    assert "endianness:" in out
    assert "wordsize:" in out
    assert "probability:" in out


def test_predict_json_matches_service_schema(model_path, corpus, capsys):
    sample = next((corpus / "amd64").iterdir())
    assert cli.main(["predict", "--model", str(model_path), "--mode", "code_only",
                     "--json", str(sample)]) == 0
    body = json.loads(capsys.readouterr().out)
    assert set(body) == {"prediction", "prediction_probability"}
    assert set(body["prediction"]) == {"architecture", "endianness", "wordsize"}


def test_predict_empty_file(model_path, tmp_path):
    empty = tmp_path / "empty.bin"
    empty.write_bytes(b"")
    assert cli.main(["predict", "--model", str(model_path), str(empty)]) == 2


def test_predict_deterministic(model_path, corpus, capsys):
    sample = next((corpus / "armel").iterdir())
    cli.main(["predict", "--model", str(model_path), str(sample)])
    first = capsys.readouterr().out
    cli.main(["predict", "--model", str(model_path), str(sample)])
    assert capsys.readouterr().out == first


def test_usage_error_exit_code():
    assert cli.main(["train", "--family", "naive_bayes"]) == 1  # missing --csv
    assert cli.main(["evaluate", "--protocol", "nope", "--data", "x",
                     "--family", "knn"]) == 1


def test_serve_requires_api_key(model_path, monkeypatch):
    monkeypatch.delenv(cli.API_KEY_ENV, raising=False)
    assert cli.main(["serve", "--model", str(model_path)]) == 1


def test_config_file_supplies_defaults(csv_path, tmp_path, capsys):
    cfg = tmp_path / "archid.conf"
    cfg.write_text("folds=4\nfamily=naive_bayes\n")
    code = cli.main(["evaluate", "--protocol", "cv", "--data", str(csv_path),
                     "--family", "naive_bayes", "--config", str(cfg)])
    assert code == 0
    assert "accuracy:" in capsys.readouterr().out


def test_installed_entry_point(model_path, corpus):
    sample = next((corpus / "amd64").iterdir())
    proc = subprocess.run(
        [sys.executable, "-m", "archid.cli", "predict", "--model", str(model_path),
         "--mode", "code_only", "--json", str(sample)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    body = json.loads(proc.stdout)
    assert body["prediction"]["architecture"] in ("alpha", "amd64", "armel")
