import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from codeintent.classify import Classifier, LogisticModel
from codeintent.cli import main
from codeintent.corpus import Corpus, QueryRecord
from codeintent.embedding import EmbeddingTable
from codeintent.export import (
    HEADER,
    ExportRecord,
    SchemaError,
    dumps,
    export_dataset,
    loads,
    read_export,
    write_export,
)
from codeintent.pipeline import ARTIFACTS, STAGES, MissingArtifactError, PipelineConfig, run_all, run_stage
from codeintent.synth import generate_synthetic_corpus, read_truth


def constant_classifier(p):
    table = EmbeddingTable.from_dict({"java": [1.0, 0.0]})
    return Classifier(table, LogisticModel(np.zeros(2), np.array([math.log(p / (1 - p))])), frozenset())


def rec(i, text, users=60, urls=("u1",), freq=None):
    return QueryRecord(i, text, freq or users, users, tuple(urls), "java")


# -- export format -----------------------------------------------------------

def test_export_example_row():
    corpus = Corpus([rec(1, "how to do quicksort in java")], "java")
    rows = export_dataset(corpus, constant_classifier(0.9), k=50)
    assert dumps(rows).splitlines()[1] == "1\thow to do quicksort in java\ttrue\tu1\t1"


def test_export_keeps_both_classes_and_drops_rare_queries():
    corpus = Corpus([rec(1, "java a", 80), rec(2, "java b", 60), rec(3, "java c", 10)], "java")
    rows = export_dataset(corpus, constant_classifier(0.2), k=50)
    assert [r.query for r in rows] == ["java a", "java b"]
    assert [r.popularity_rank for r in rows] == [1, 2]
    assert not any(r.is_code_search_query for r in rows)


def test_export_applies_language_filter():
    from codeintent.corpus import default_keyword_sets
    corpus = Corpus([rec(1, "java list"), rec(2, "c# vs java")], "java")
    rows = export_dataset(corpus, constant_classifier(0.9), 1, default_keyword_sets(), "java")
    assert [r.query for r in rows] == ["java list"]


def test_empty_corpus_gives_header_only(tmp_path):
    rows = export_dataset(Corpus([], "java"), constant_classifier(0.9), k=5)
    write_export(rows, tmp_path / "out.tsv")
    assert (tmp_path / "out.tsv").read_bytes() == ("\t".join(HEADER) + "\n").encode()
    assert read_export(tmp_path / "out.tsv") == []


def test_export_needs_classifier():
    with pytest.raises(ValueError):
        export_dataset(Corpus([], "java"), None, k=5)


def test_url_delimiters_are_escaped():
    r = ExportRecord(7, "java x", True, ("http://a/?q=1,2", "http://b/\tt"), 1)
    line = r.to_line()
    assert line.split("\t")[3] == "http://a/?q=1%2C2,http://b/%09t"
    assert ExportRecord.from_line(line) == r


@pytest.mark.parametrize("text, match", [
    ("Id\tQuery\n", "header"),
    ("\t".join(HEADER) + "\n1\tq\tyes\t\t1\n", "true/false"),
    ("\t".join(HEADER) + "\n1\tq\ttrue\t\t2\n", "ranks"),
    ("\t".join(HEADER) + "\n1\tq\ttrue\t\t1\n1\tr\ttrue\t\t2\n", "duplicate"),
    ("\t".join(HEADER) + "\n1\tq\ttrue\t\t1", "newline"),
    ("\t".join(HEADER) + "\n1\tq\ttrue\t1\n", "fields"),
    ("\t".join(HEADER) + "\nx\tq\ttrue\t\t1\n", "integer"),
])
def test_schema_violations(text, match):
    with pytest.raises(SchemaError, match=match):
        loads(text)


url = st.text(alphabet="abc:/?=&,\t\r\n.%", min_size=1, max_size=20)
query = st.text(alphabet="abcdefgh #+.", min_size=1, max_size=30)


@given(st.lists(st.tuples(query, st.booleans(), st.lists(url, max_size=3)), max_size=15))
def test_export_round_trip_is_byte_identical(rows):
    records = [ExportRecord(i + 10, q, flag, tuple(urls), i + 1) for i, (q, flag, urls) in enumerate(rows)]
    text = dumps(records)
    assert dumps(loads(text)) == text


# -- synthetic corpus --------------------------------------------------------

def test_synthetic_size_and_truth(tmp_path):
    s = generate_synthetic_corpus(5000, seed=1)
    assert len(s.entries) == 5000
    assert set(s.truth.values()) == {0, 1}
    s.write(tmp_path / "log.jsonl", tmp_path / "truth.tsv")
    assert sum(1 for _ in open(tmp_path / "log.jsonl")) == 5000
    assert read_truth(tmp_path / "truth.tsv") == s.truth


def test_synthetic_is_deterministic(tmp_path):
    for name in ("a", "b"):
        generate_synthetic_corpus(500, seed=3).write(tmp_path / f"{name}.jsonl", tmp_path / f"{name}.tsv")
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()


def test_code_search_bank_only():
    from codeintent.synth import TEMPLATE_BANKS
    s = generate_synthetic_corpus(300, seed=2, banks={"code-search": TEMPLATE_BANKS["code-search"]})
    assert set(s.truth.values()) == {1}


def test_synthetic_size_must_be_positive():
    with pytest.raises(ValueError):
        generate_synthetic_corpus(0, seed=1)


# -- pipeline ----------------------------------------------------------------

SMALL = {
    "k": 2,
    "seed": 3,
    "test_size": 60,
    "synth_size": 1500,
    "embedding": {"dim": 12, "epochs": 2},
    "train": {"epochs": 3},
    "cnn": {"n_filters": 8},
}


def write_config(tmp_path, **extra):
    cfg = dict(SMALL, workdir="work", logs="logs.jsonl", truth="truth.tsv", **extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("run")
    path = write_config(tmp)
    assert main(["synth", "--config", str(path)]) == 0
    assert main(["run", "--config", str(path)]) == 0
    return PipelineConfig.load(path)


def test_full_run_writes_every_artifact(small_run):
    for stage in STAGES:
        assert small_run.artifact(stage).exists(), stage
        manifest = json.loads((small_run.work / "manifests" / f"{stage}.json").read_text())
        assert manifest["stage"] == stage and manifest["seeds"] == small_run.seeds


def test_full_run_export_conforms(small_run):
    path = small_run.artifact("export-dataset")
    records = read_export(path)
    corpus = Corpus.load(small_run.artifact("ingest"))
    users = {r.id: r.distinct_users for r in corpus}
    assert records and all(users[r.id] >= small_run.k for r in records)
    assert dumps(records) == path.read_text(encoding="utf-8")


def test_full_run_evaluation_report(small_run):
    result = json.loads(small_run.artifact("evaluate").read_text())
    assert set(result["reports"]) == {"Majority Vote", "Generative", "CNN"}
    assert result["n"] == 60
    assert "Code Intent" in (small_run.work / "evaluation.txt").read_text()


def test_stage_before_dependency_names_it(tmp_path):
    cfg = PipelineConfig(workdir=str(tmp_path / "w"))
    with pytest.raises(MissingArtifactError, match="'label'"):
        run_stage("fit-labelmodel", cfg)
    with pytest.raises(ValueError):
        run_stage("deploy", cfg)


def test_cli_reports_errors(tmp_path, capsys):
    path = write_config(tmp_path)
    assert main(["fit-labelmodel", "--config", str(path)]) == 1
    assert "label" in capsys.readouterr().err
    assert main(["ingest", "--config", str(tmp_path / "missing.json")]) == 1
    assert main(["ingest", "--config", str(path)]) == 1  # log file not written yet
    assert "log file not found" in capsys.readouterr().err


def test_cli_rejects_unknown_config_keys(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"workdir": "w", "epochs": 3}), encoding="utf-8")
    assert main(["ingest", "--config", str(path)]) == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_cli_overrides(tmp_path):
    path = write_config(tmp_path)
    cfg = PipelineConfig.load(path, k=9, model="logistic", language="java", seed=None)
    assert (cfg.k, cfg.model, cfg.language, cfg.seed) == (9, "logistic", "java", 3)
    assert cfg.train_config().seed == cfg.seeds["classifier"]


def test_logistic_run(tmp_path):
    path = write_config(tmp_path, model="logistic", label_mode="hard")
    assert main(["synth", "--config", str(path), "--size", "800"]) == 0
    cfg = PipelineConfig.load(path)
    run_all(cfg)
    result = json.loads(cfg.artifact("evaluate").read_text())
    assert "Logistic Regression" in result["reports"]
    assert json.loads(cfg.artifact("train-classifier").read_text())["model"]["kind"] == "logistic"


def test_artifact_names_are_distinct():
    assert len(set(ARTIFACTS.values())) == len(STAGES)
