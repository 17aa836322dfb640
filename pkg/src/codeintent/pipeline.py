"""Stage-by-stage orchestration with on-disk artifacts and run manifests.

Every stage reads its inputs from the work directory, writes its artifact, and
records a manifest (input/output hashes, seeds, duration) under
``<workdir>/manifests``. Artifacts carry no timestamps or absolute paths, so
identical configs and seeds give byte-identical files.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .classify import CNN_DEFAULTS, Classifier, TrainConfig, train_cnn, train_logistic
from .corpus import (
    DEFAULT_EXCLUSIONS,
    DEFAULT_KEYWORDS,
    ConfigError,
    Corpus,
    IngestConfig,
    Language,
    LanguageKeywordSet,
    filter_language,
    ingest,
    read_log,
    sample_by_length,
)
from .embedding import EmbeddingTable, SkipGramConfig, featurize, train_skipgram
from .evaluation import GoldSet, evaluate_model, format_reports, load_gold
from .export import export_dataset, write_export
from .labeling import LabelMatrix, build_label_matrix, compile_lf, lf_diagnostics, load_lf_specs
from .labelmodel import LabelModelParams, assign_labels, fit_em, majority_vote, posteriors
from .synth import generate_synthetic_corpus, read_truth
from .text import default_stopwords, load_stopwords, remove_stopwords, tokenize

log = logging.getLogger(__name__)

STAGES = (
    "ingest",
    "label",
    "fit-labelmodel",
    "train-embeddings",
    "train-classifier",
    "evaluate",
    "export-dataset",
)

ARTIFACTS = {
    "ingest": "corpus.jsonl",
    "label": "label_matrix.tsv",
    "fit-labelmodel": "label_model.json",
    "train-embeddings": "embeddings.txt",
    "train-classifier": "classifier.json",
    "evaluate": "evaluation.json",
    "export-dataset": "code_search_queries.tsv",
}

# stage -> stages whose artifacts it reads
REQUIRES = {
    "ingest": (),
    "label": ("ingest",),
    "fit-labelmodel": ("label",),
    "train-embeddings": ("ingest",),
    "train-classifier": ("ingest", "fit-labelmodel", "train-embeddings"),
    "evaluate": ("label", "fit-labelmodel", "train-embeddings", "train-classifier"),
    "export-dataset": ("ingest", "train-embeddings", "train-classifier"),
}

TEST_SPLIT = "test_split.tsv"
TRAIN_LABELS = "train_labels.tsv"


class MissingArtifactError(RuntimeError):
    def __init__(self, stage: str, path: Path):
        super().__init__(f"missing artifact {path.name!r}: run stage {stage!r} first")
        self.stage = stage


@dataclass
class PipelineConfig:
    workdir: str = "run"
    logs: str = "logs.jsonl"
    truth: str | None = None
    gold: str | None = None
    language: str = "csharp"
    locale: str = "en-US"
    region: str = "US"
    k: int = 50
    seed: int = 0
    label_mode: str = "soft"
    model: str = "cnn"
    test_size: int = 200
    drop_abstains: bool = True
    lf_config: str | None = None
    stopwords: str | None = None
    keywords: dict[str, list[str]] | None = None
    exclusions: list[str] | None = None
    em: dict[str, Any] = field(default_factory=dict)
    embedding: dict[str, Any] = field(default_factory=dict)
    train: dict[str, Any] = field(default_factory=dict)
    cnn: dict[str, Any] = field(default_factory=dict)
    threshold: float = 0.5
    max_len: int = 16
    synth_size: int = 5000
    base_dir: str = "."

    def __post_init__(self):
        self.language = Language.parse(self.language).value
        if self.model not in ("logistic", "cnn"):
            raise ConfigError(f"model must be logistic or cnn, got {self.model!r}")
        if self.label_mode not in ("soft", "hard"):
            raise ConfigError(f"label_mode must be soft or hard, got {self.label_mode!r}")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError(f"k must be a positive integer, got {self.k!r}")

    @classmethod
    def load(cls, path, **overrides) -> "PipelineConfig":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        raw.setdefault("base_dir", str(path.parent))
        raw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**raw)

    def path(self, p: str | None) -> Path | None:
        if p is None:
            return None
        p = Path(p)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def work(self) -> Path:
        return self.path(self.workdir)

    def artifact(self, stage: str) -> Path:
        return self.work / ARTIFACTS[stage]

    @property
    def seeds(self) -> dict[str, int]:
        s = self.seed
        return {"split": s, "labelmodel": s + 1, "embedding": s + 2, "classifier": s + 3, "majority_vote": s + 4}

    def keyword_sets(self) -> list[LanguageKeywordSet]:
        kw = self.keywords or {lang.value: list(p) for lang, p in DEFAULT_KEYWORDS.items()}
        sets = [LanguageKeywordSet(lang, tuple(p)) for lang, p in kw.items()]
        excl = DEFAULT_EXCLUSIONS if self.exclusions is None else tuple(self.exclusions)
        if excl:
            sets.append(LanguageKeywordSet("other", tuple(excl)))
        return sets

    def lfs(self):
        return [compile_lf(s) for s in load_lf_specs(self.path(self.lf_config))]

    def stopword_set(self) -> frozenset[str]:
        return default_stopwords() if self.stopwords is None else load_stopwords(self.path(self.stopwords))

    def skipgram(self) -> SkipGramConfig:
        return SkipGramConfig(**self.embedding)

    def train_config(self) -> TrainConfig:
        base = CNN_DEFAULTS if self.model == "cnn" else TrainConfig()
        return dataclasses.replace(base, seed=self.seeds["classifier"], label_mode=self.label_mode, **self.train)

    def public(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _require(config: PipelineConfig, stage: str) -> None:
    for upstream in REQUIRES[stage]:
        p = config.artifact(upstream)
        if not p.exists():
            raise MissingArtifactError(upstream, p)


def _write_manifest(config: PipelineConfig, stage: str, inputs: list[Path], outputs: list[Path], duration: float) -> None:
    mdir = config.work / "manifests"
    mdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "stage": stage,
        "version": __version__,
        "seeds": config.seeds,
        "config": config.public(),
        "inputs": {p.name: sha256(p) for p in inputs if p.exists()},
        "outputs": {p.name: sha256(p) for p in outputs},
        "duration_seconds": round(duration, 3),
    }
    with open(mdir / f"{stage}.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _split_ids(config: PipelineConfig) -> set[int]:
    p = config.work / TEST_SPLIT
    return set(load_gold(p).ids) if p.exists() else set()


def _training_corpus(config: PipelineConfig) -> Corpus:
    corpus = Corpus.load(config.artifact("ingest"))
    held = _split_ids(config)
    return corpus.replace([r for r in corpus if r.id not in held])


def _load_classifier(config: PipelineConfig) -> Classifier:
    table = EmbeddingTable.load(config.artifact("train-embeddings"))
    return Classifier.load(config.artifact("train-classifier"), table, config.stopword_set())


def stage_ingest(config: PipelineConfig) -> list[Path]:
    logs = config.path(config.logs)
    if not logs.exists():
        raise FileNotFoundError(f"log file not found: {logs}")
    corpus = ingest(read_log(logs), IngestConfig(config.language, config.locale, config.region))
    corpus = filter_language(corpus, config.keyword_sets(), config.language)
    config.work.mkdir(parents=True, exist_ok=True)
    corpus.save(config.artifact("ingest"))
    outputs = [config.artifact("ingest")]
    # without an external gold file, hold out a length-stratified sample labelled from ground truth
    if config.gold is None and config.truth is not None:
        truth = read_truth(config.path(config.truth))
        labelled = corpus.replace([r for r in corpus if r.text in truth])
        size = min(config.test_size, len(labelled) // 5)
        held = sample_by_length(labelled, size, config.seeds["split"])
        GoldSet([r.id for r in held], [r.text for r in held], [truth[r.text] for r in held]).save(
            config.work / TEST_SPLIT)
        outputs.append(config.work / TEST_SPLIT)
    log.info("ingest: %d queries kept, %d rejected", len(corpus), corpus.rejected)
    return outputs


def stage_label(config: PipelineConfig) -> list[Path]:
    corpus = _training_corpus(config)
    matrix = build_label_matrix(corpus, config.lfs())
    matrix.save(config.artifact("label"))
    diag = config.work / "lf_diagnostics.txt"
    diag.write_text(lf_diagnostics(matrix).summary() + "\n", encoding="utf-8")
    return [config.artifact("label"), diag]


def stage_fit_labelmodel(config: PipelineConfig) -> list[Path]:
    matrix = LabelMatrix.load(config.artifact("label"))
    emit = [lf.emit_label for lf in config.lfs()]
    params = fit_em(matrix, emit_labels=emit, seed=config.seeds["labelmodel"], **config.em)
    params.save(config.artifact("fit-labelmodel"), matrix.lf_names)
    probs = posteriors(params, matrix)
    hard = assign_labels(probs, "hard")
    covered = (matrix.values != -1).any(axis=1)
    out = config.work / TRAIN_LABELS
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("id\tp_code\thard\tcovered\n")
        for qid, p, h, c in zip(matrix.query_ids, probs[:, 1], hard, covered):
            fh.write(f"{qid}\t{float(p)!r}\t{int(h)}\t{int(c)}\n")
    return [config.artifact("fit-labelmodel"), out]


def stage_train_embeddings(config: PipelineConfig) -> list[Path]:
    corpus = _training_corpus(config)
    stop = config.stopword_set()
    tokens = [remove_stopwords(tokenize(r.text), stop) for r in corpus]
    table = train_skipgram(tokens, config.skipgram(), seed=config.seeds["embedding"])
    table.save(config.artifact("train-embeddings"))
    return [config.artifact("train-embeddings")]


def _read_train_labels(path: Path) -> dict[int, tuple[float, bool]]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            qid, p, _, covered = line.rstrip("\n").split("\t")
            out[int(qid)] = (float(p), covered == "1")
    return out


def stage_train_classifier(config: PipelineConfig) -> list[Path]:
    corpus = _training_corpus(config)
    labels = _read_train_labels(config.work / TRAIN_LABELS)
    records = [r for r in corpus if r.id in labels and (labels[r.id][1] or not config.drop_abstains)]
    if not records:
        raise ValueError("no training queries with weak labels")
    table = EmbeddingTable.load(config.artifact("train-embeddings"))
    clf = Classifier(table, None, config.stopword_set(), config.threshold, config.max_len)
    texts = [r.text for r in records]
    targets = np.array([labels[r.id][0] for r in records])
    tokens = [remove_stopwords(tokenize(t), clf.stopwords) for t in texts]
    tc = config.train_config()
    if config.model == "cnn":
        X = featurize(tokens, table, "cnn", config.max_len)
        model = train_cnn(X, targets, tc, **config.cnn)
    else:
        X = featurize(tokens, table, "logistic")
        model = train_logistic(X, targets, tc)
    clf.model = model
    clf.save(config.artifact("train-classifier"), extra={
        "seed": tc.seed, "train_config": dataclasses.asdict(tc), "n_train": len(records),
        "final_loss": model.loss_history[-1],
    })
    return [config.artifact("train-classifier")]


def evaluation_set(config: PipelineConfig) -> GoldSet:
    if config.gold is not None:
        return load_gold(config.path(config.gold))
    p = config.work / TEST_SPLIT
    if not p.exists():
        raise MissingArtifactError("ingest", p)
    return load_gold(p)


def stage_evaluate(config: PipelineConfig) -> list[Path]:
    gold = evaluation_set(config)
    if not len(gold):
        raise ValueError("evaluation set is empty")
    golds = dict(zip(gold.ids, gold.labels))
    matrix = build_label_matrix(list(zip(gold.ids, gold.queries)), config.lfs())
    params = LabelModelParams.load(config.artifact("fit-labelmodel"))
    mv = majority_vote(matrix, config.seeds["majority_vote"])
    gen = assign_labels(posteriors(params, matrix), "hard")
    clf = _load_classifier(config)
    pred = clf.predict(gold.queries)

    rows = [
        ("Majority Vote", evaluate_model(dict(zip(gold.ids, mv.tolist())), golds)),
        ("Generative", evaluate_model(dict(zip(gold.ids, gen.tolist())), golds)),
        ("Logistic Regression" if config.model == "logistic" else "CNN",
         evaluate_model(dict(zip(gold.ids, pred.tolist())), golds)),
    ]
    kappa = gold.kappa()
    result = {
        "language": config.language,
        "n": len(gold),
        "fleiss_kappa": kappa,
        "reports": {name: rep.to_dict() for name, rep in rows},
    }
    with open(config.artifact("evaluate"), "w", encoding="utf-8") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = format_reports(rows, title=f"{config.language} (n={len(gold)})")
    if kappa is not None:
        text += f"\nFleiss' kappa: {kappa:.3f}"
    txt = config.work / "evaluation.txt"
    txt.write_text(text + "\n", encoding="utf-8")
    return [config.artifact("evaluate"), txt]


def stage_export(config: PipelineConfig) -> list[Path]:
    corpus = Corpus.load(config.artifact("ingest"))
    clf = _load_classifier(config)
    records = export_dataset(corpus, clf, config.k, config.keyword_sets(), config.language)
    write_export(records, config.artifact("export-dataset"))
    return [config.artifact("export-dataset")]


RUNNERS = {
    "ingest": stage_ingest,
    "label": stage_label,
    "fit-labelmodel": stage_fit_labelmodel,
    "train-embeddings": stage_train_embeddings,
    "train-classifier": stage_train_classifier,
    "evaluate": stage_evaluate,
    "export-dataset": stage_export,
}


def run_stage(stage: str, config: PipelineConfig) -> list[Path]:
    if stage not in RUNNERS:
        raise ValueError(f"unknown stage {stage!r}; expected one of {', '.join(STAGES)}")
    _require(config, stage)
    inputs = [config.artifact(s) for s in REQUIRES[stage]]
    t0 = time.perf_counter()
    outputs = RUNNERS[stage](config)
    _write_manifest(config, stage, inputs, outputs, time.perf_counter() - t0)
    return outputs


def run_all(config: PipelineConfig) -> dict[str, list[Path]]:
    return {stage: run_stage(stage, config) for stage in STAGES}


def synthesize(config: PipelineConfig, size: int | None = None, seed: int | None = None) -> tuple[Path, Path]:
    """Write a synthetic log (and its ground truth) to the configured paths."""
    logs = config.path(config.logs)
    truth = config.path(config.truth) if config.truth else logs.with_suffix(".truth.tsv")
    logs.parent.mkdir(parents=True, exist_ok=True)
    synthetic = generate_synthetic_corpus(size or config.synth_size, config.seed if seed is None else seed)
    synthetic.write(logs, truth)
    return logs, truth
