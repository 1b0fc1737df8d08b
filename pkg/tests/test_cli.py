import json
import re

import pytest

from stackcnn.cli import main
from stackcnn.synthetic import data_dir

FAST_SPACE = {"embedding_choice": ["synthetic"], "num_filters": [4], "dense_size": [4], "batch_size": [10],
              "learning_rate": [0.001], "filter_sizes": [[1, 2, 3, 4, 5]], "dropout_p": [0.4, 0.5]}


def write_config(tmp_path, **overrides):
    doc = {
        "train_file": str(data_dir() / "synthetic_train.tsv"),
        "embeddings": {"synthetic": str(data_dir() / "synthetic_emb.txt")},
        "output_dir": str(tmp_path / "run"),
        "training": {"max_epochs": 2, "patience": 2},
        "space": FAST_SPACE,
        "n": 2,
        "c": 2,
        "k": [1, 2],
    }
    doc.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


@pytest.fixture
def searched(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["search", "--config", str(cfg), "--jobs", "1", "-q"]) == 0
    return cfg, tmp_path / "run"


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", "--config", str(write_config(tmp_path)), "-q"]) == 0
    out = capsys.readouterr().out
    assert "Train" in out and "60" in out


def test_validate_bad_label(tmp_path, capsys):
    bad = tmp_path / "bad.tsv"
    bad.write_text("t1\t0\thello\n")
    assert main(["validate", "--config", str(write_config(tmp_path, train_file=str(bad))), "-q"]) == 2
    assert "line 1" in capsys.readouterr().err


def test_validate_missing_embedding(tmp_path, capsys):
    missing = tmp_path / "nowhere.txt"
    cfg = write_config(tmp_path, embeddings={"synthetic": str(missing)})
    assert main(["validate", "--config", str(cfg), "-q"]) != 0
    assert str(missing) in capsys.readouterr().err


def test_invalid_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert main(["validate", "--config", str(path), "-q"]) == 1


def test_unknown_config_key(tmp_path):
    assert main(["validate", "--config", str(write_config(tmp_path, bogus=1)), "-q"]) == 1


def test_search_missing_input(tmp_path, capsys):
    cfg = write_config(tmp_path, train_file=str(tmp_path / "gone.tsv"))
    assert main(["search", "--config", str(cfg), "--jobs", "1", "-q"]) == 2
    assert "gone.tsv" in capsys.readouterr().err


def test_search_outputs(searched):
    _, run = searched
    assert len((run / "results.jsonl").read_text().splitlines()) == 2
    for ext in ("json", "tsv", "txt"):
        assert (run / f"report.{ext}").exists()
    report = json.loads((run / "report.json").read_text())
    assert [s["K"] for s in report["stacked"]] == [1, 2]


def test_search_rerun_skips_finished_work(searched):
    cfg, run = searched
    fold = run / "ensembles" / "e000" / "fold_0.json"
    before = fold.stat().st_mtime_ns
    assert main(["search", "--config", str(cfg), "--jobs", "1", "-q"]) == 0
    assert fold.stat().st_mtime_ns == before


@pytest.mark.parametrize("k", ["0", "3"])
def test_stack_k_out_of_range(searched, k, capsys):
    cfg, _ = searched
    assert main(["stack", "--config", str(cfg), "--top-k", k, "-q"]) == 1
    assert "top-k" in capsys.readouterr().err


def test_stack_without_search(tmp_path):
    assert main(["stack", "--config", str(write_config(tmp_path)), "--top-k", "1", "-q"]) == 1


def test_stack_evaluate_predict(searched, tmp_path, capsys):
    cfg, run = searched
    assert main(["stack", "--config", str(cfg), "--top-k", "2", "-q"]) == 0
    stack = run / "stacked_top2.json"
    assert json.loads(stack.read_text())["K"] == 2

    assert main(["evaluate", "--config", str(cfg), str(stack), str(data_dir() / "synthetic_train.tsv"), "-q"]) == 0
    record = json.loads((run / "stacked_top2_eval.json").read_text())
    assert record["total"] == 60 and 0 <= record["F12"] <= 1
    assert (run / "stacked_top2_eval.txt").exists()

    inp = tmp_path / "unlabeled.tsv"
    inp.write_text("a\t?\ti took advil\nb\t?\tadvil sale today\n")
    out = tmp_path / "pred.tsv"
    assert main(["predict", "--config", str(cfg), str(stack), str(inp), "-o", str(out), "-q"]) == 0
    lines = out.read_text().splitlines()
    assert [l.split("\t")[0] for l in lines] == ["a", "b"]
    for line in lines:
        assert re.fullmatch(r"\w+\t[123](\t\d\.\d{6}){3}", line)
        assert sum(float(x) for x in line.split("\t")[2:]) == pytest.approx(1, abs=1e-5)

    empty = tmp_path / "empty.tsv"
    empty.write_text("")
    out2 = tmp_path / "pred2.tsv"
    assert main(["predict", "--config", str(cfg), str(stack), str(empty), "-o", str(out2), "-q"]) == 0
    assert out2.read_text() == ""


def test_evaluate_missing_model_files(searched, capsys):
    cfg, run = searched
    assert main(["stack", "--config", str(cfg), "--top-k", "1", "-q"]) == 0
    for p in (run / "ensembles").rglob("fold_1.json"):
        p.unlink()
    code = main(["evaluate", "--config", str(cfg), str(run / "stacked_top1.json"),
                 str(data_dir() / "synthetic_train.tsv"), "-q"])
    assert code == 2
    assert "fold_1.json" in capsys.readouterr().err


def test_ablate_filters(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["ablate-filters", "--config", str(cfg), "--sizes", "1", "2", "--runs", "2", "-q"]) == 0
    rows = json.loads((tmp_path / "run" / "ablation.json").read_text())
    assert [r["size"] for r in rows] == [1, 2]


def test_jobs_must_be_positive(tmp_path):
    assert main(["validate", "--config", str(write_config(tmp_path)), "--jobs", "0"]) == 1


def test_missing_subcommand():
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 1
