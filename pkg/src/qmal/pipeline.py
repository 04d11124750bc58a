"""End-to-end orchestration over an artifacts directory.

Layout under the artifacts root::

    models/{section}.pca.json  models/{section}.scaler.json  models/{section}.qcnn.json
    models/full.*.json         models/scorer.{kind}.json
    data/records.jsonl         data/vectors_{train,val,test}.csv
    reports/metrics.json       reports/*.csv  reports/figures/*.png
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import BIT_CONVENTION, SECTION_KEYS, __version__
from .corpus import CorpusConfig, Manifest, gen_corpus, split_dataset
from .ensemble import (SCORER_KINDS, SectionModel, metrics, predict, read_vectors,
                       score_vectors, scorer_from_dict, train_scorer, write_vectors)
from .errors import EmptyDataset, MissingModel
from .features import AngleScaler, PcaModel, pca_fit, pca_transform, scaler_apply, scaler_fit
from .imaging import FileRecord, build_record, read_records, write_records
from .optim import TrainConfig, TrainHistory, train_qcnn
from .qcnn import QcnnModel, predict_labels
from .serialize import load_json, save_json

log = logging.getLogger(__name__)

VECTOR_SETS = {
    "train": ("scorer_train", "train"),
    "val": ("scorer_train", "val"),
    "test": ("test", None),
}


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("QMAL_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RunArtifacts:
    root: Path

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))

    @property
    def models(self) -> Path:
        return self.root / "models"

    @property
    def data(self) -> Path:
        return self.root / "data"

    @property
    def reports(self) -> Path:
        return self.root / "reports"

    @property
    def figures(self) -> Path:
        return self.reports / "figures"

    @property
    def records(self) -> Path:
        return self.data / "records.jsonl"

    @property
    def manifest(self) -> Path:
        return self.root / "manifest.csv"

    def vectors(self, which: str) -> Path:
        return self.data / f"vectors_{which}.csv"

    def model(self, section: str, stage: str) -> Path:
        return self.models / f"{section}.{stage}.json"

    def scorer(self, kind: str) -> Path:
        return self.models / f"scorer.{kind}.json"

    def ensure(self) -> "RunArtifacts":
        for d in (self.models, self.data, self.reports, self.figures):
            d.mkdir(parents=True, exist_ok=True)
        return self


def _provenance(seed, shared) -> dict:
    return {"bit_convention": BIT_CONVENTION, "shared_params": shared, "seed": seed,
            "qmal_version": __version__}


# ------------------------------------------------------------------ stages


def generate(out, config: CorpusConfig, split_seed: int | None = None) -> Manifest:
    out = Path(out)
    manifest = split_dataset(gen_corpus(config, out),
                             seed=config.seed if split_seed is None else split_seed)
    manifest.write(out / "manifest.csv")
    save_json(out / "corpus_config.json", config.to_dict())
    return manifest


def _record_for(args):
    path, row = args
    rec = build_record(Path(path).read_bytes(), row.label)
    if rec.sha256 != row.sha256:
        raise ValueError(f"sha256 mismatch for {row.path}: manifest {row.sha256}, file {rec.sha256}")
    rec.split, rec.fold = row.split, row.fold
    return rec


def extract(manifest: Manifest, threads: int | None = None) -> list[FileRecord]:
    jobs = [(manifest.resolve(row), row) for row in manifest.rows]
    threads = threads or thread_count()
    if threads == 1:
        return [_record_for(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(_record_for, jobs))


def _select(records, split, fold=None):
    return [r for r in records if r.split == split and (fold is None or r.fold == fold)]


def fit_image_model(pixels: np.ndarray, labels: np.ndarray, config: TrainConfig,
                    name: str) -> tuple[SectionModel, TrainHistory]:
    """PCA -> scaler -> QCNN on one image population (a section, or full files)."""
    flat = pixels.reshape(pixels.shape[0], -1).astype(float)
    pca = pca_fit(flat)
    scaler = scaler_fit(pca_transform(pca, flat))
    angles = scaler_apply(scaler, pca_transform(pca, flat))
    qcnn, history = train_qcnn(angles, labels, config, section=name)
    return SectionModel(pca, scaler, qcnn), history


def _split_scores(model: SectionModel, pixels, labels) -> dict:
    if len(labels) == 0:
        return {"n": 0}
    preds = predict_labels(model.qcnn, model.angles(pixels))
    return metrics(preds, labels)


def train_sections(records, config: TrainConfig, sections=SECTION_KEYS):
    """Fit one model per section on qcnn_train/train rows where the section is present."""
    train = _select(records, "qcnn_train", "train")
    val = _select(records, "qcnn_train", "val")
    models, histories, report = {}, {}, {}
    for key in sections:
        rows = [r for r in train if r.present(key)]
        if len(rows) < 8:
            raise EmptyDataset(f"section {key}: only {len(rows)} training rows carry it")
        pixels = np.stack([r.sections[key] for r in rows])
        labels = np.array([r.label for r in rows])
        model, history = fit_image_model(pixels, labels, config, key)
        vrows = [r for r in val if r.present(key)]
        vpix = np.stack([r.sections[key] for r in vrows]) if vrows else np.zeros((0, 8, 8))
        report[key] = {
            "n_train": len(rows),
            "n_val": len(vrows),
            "train": _split_scores(model, pixels, labels),
            "val": _split_scores(model, vpix, np.array([r.label for r in vrows])),
            "best_epoch": history.best_epoch,
            "loss_evaluations": history.loss_evaluations,
        }
        log.info("section %s: trained on %d rows (of %d), val n=%d", key, len(rows), len(train),
                 len(vrows))
        models[key], histories[key] = model, history
    return models, histories, report


def save_section_model(art: RunArtifacts, name: str, model: SectionModel, config: TrainConfig):
    prov = _provenance(config.seed, config.shared_params)
    save_json(art.model(name, "pca"), {**model.pca.to_dict(), **prov, "section": name})
    save_json(art.model(name, "scaler"), {**model.scaler.to_dict(), **prov, "section": name})
    save_json(art.model(name, "qcnn"), {**model.qcnn.to_dict(), "train_config": config.to_dict(),
                                        "qmal_version": __version__})


def load_section_model(art: RunArtifacts, name: str) -> SectionModel:
    paths = [art.model(name, stage) for stage in ("pca", "scaler", "qcnn")]
    for p in paths:
        if not p.exists():
            raise MissingModel(f"missing model file {p}")
    return SectionModel(PcaModel.from_dict(load_json(paths[0])),
                        AngleScaler.from_dict(load_json(paths[1])),
                        QcnnModel.from_dict(load_json(paths[2])))


def load_section_models(art: RunArtifacts) -> dict[str, SectionModel]:
    return {key: load_section_model(art, key) for key in SECTION_KEYS}


def vectorize(records, models) -> tuple[np.ndarray, np.ndarray]:
    return score_vectors(records, models), np.array([r.label for r in records], dtype=int)


def records_for(records, which: str):
    split, fold = VECTOR_SETS[which]
    return _select(records, split, fold)


def save_scorer(art: RunArtifacts, kind: str, model, seed: int) -> Path:
    path = art.scorer(kind)
    save_json(path, {**model.to_dict(), "seed": seed, "bit_convention": BIT_CONVENTION,
                     "features": list(SECTION_KEYS)})
    return path


def load_scorer(path):
    return scorer_from_dict(load_json(path))


def evaluate(model, X, y) -> dict:
    _, preds = predict(model, np.atleast_2d(X))
    return metrics(preds, y)


def train_baseline(records, config: TrainConfig):
    """Single QCNN on full-file 64x64 images: trained on scorer_train, tested on test."""
    train = [r for r in _select(records, "scorer_train") if r.full is not None]
    test = [r for r in _select(records, "test") if r.full is not None]
    if len(train) < 8:
        raise EmptyDataset("too few full images in scorer_train for the baseline")
    pixels = np.stack([r.full for r in train])
    labels = np.array([r.label for r in train])
    model, history = fit_image_model(pixels, labels, config, "full")
    tpix = np.stack([r.full for r in test]) if test else np.zeros((0, 64, 64))
    report = {
        "n_train": len(train),
        "n_test": len(test),
        "train": _split_scores(model, pixels, labels),
        "test": _split_scores(model, tpix, np.array([r.label for r in test])),
        "best_epoch": history.best_epoch,
    }
    return model, history, report


def predict_file(path, art: RunArtifacts, kind: str = "gbt") -> dict:
    data = Path(path).read_bytes()
    record = build_record(data, 0)
    models = load_section_models(art)
    scores = score_vectors([record], models)[0]
    scorer = load_scorer(art.scorer(kind))
    proba, label = predict(scorer, scores)
    return {
        "path": str(path),
        "sha256": record.sha256,
        "scores": {k: float(s) for k, s in zip(SECTION_KEYS, scores)},
        "scorer": kind,
        "probability": proba,
        "label": label,
        "verdict": "malware" if label else "benign",
    }


# --------------------------------------------------------------- full run


@dataclass
class RunOptions:
    corpus: CorpusConfig
    train: TrainConfig
    scorer_seed: int = 0
    figures: bool = True


def run_all(out, options: RunOptions) -> dict:
    """Generate, extract, train every stage, evaluate, and write reports/metrics.json."""
    from . import plotting

    art = RunArtifacts(out).ensure()
    t0 = time.perf_counter()
    manifest = generate(art.root, options.corpus)
    records = extract(manifest)
    write_records(art.records, records)
    log.info("extracted %d records in %.1fs", len(records), time.perf_counter() - t0)

    models, histories, section_report = train_sections(records, options.train)
    for key, model in models.items():
        save_section_model(art, key, model, options.train)
        histories[key].to_csv(art.reports / f"{key}.history.csv")

    vectors = {}
    for which in VECTOR_SETS:
        X, y = vectorize(records_for(records, which), models)
        write_vectors(art.vectors(which), X, y)
        vectors[which] = (X, y)

    scorers = {}
    for kind in SCORER_KINDS:
        model = train_scorer(*vectors["train"], kind, seed=options.scorer_seed)
        save_scorer(art, kind, model, options.scorer_seed)
        scorers[kind] = {which: evaluate(model, *vectors[which]) for which in VECTOR_SETS}

    base_model, base_history, base_report = train_baseline(records, options.train)
    save_section_model(art, "full", base_model, options.train)
    base_history.to_csv(art.reports / "full.history.csv")

    report = {
        "seeds": {"corpus": options.corpus.seed, "train": options.train.seed,
                  "scorer": options.scorer_seed},
        "bit_convention": BIT_CONVENTION,
        "shared_params": options.train.shared_params,
        "counts": {split: len(_select(records, split)) for split in ("qcnn_train", "scorer_train", "test")},
        "sections": section_report,
        "scorers": scorers,
        "baseline": base_report,
    }
    save_json(art.reports / "metrics.json", report)
    if options.figures:
        plotting.render_all(art, histories, base_history, vectors, report)
    log.info("full run finished in %.1fs", time.perf_counter() - t0)
    return report


def load_records(path) -> list[FileRecord]:
    return read_records(path)
