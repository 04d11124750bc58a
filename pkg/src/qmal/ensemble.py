"""Five-score vectors, scoring functions that fuse them, and binary metrics."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import SECTION_KEYS
from .errors import EmptyInput, LengthMismatch, MissingModel
from .features import AngleScaler, PcaModel, pca_transform, scaler_apply
from .imaging import FileRecord
from .qcnn import QcnnModel, forward_batch
from .trees import BoostConfig, ForestConfig, TreeEnsemble, train_gbt, train_random_forest

MISSING = -1.0
VECTOR_HEADER = list(SECTION_KEYS) + ["label"]
SCORER_KINDS = ("majority", "rf", "gbt")


@dataclass
class SectionModel:
    """The three fitted stages that turn one section image into a malware probability."""

    pca: PcaModel
    scaler: AngleScaler
    qcnn: QcnnModel

    def angles(self, pixels) -> np.ndarray:
        flat = np.asarray(pixels, dtype=float).reshape(-1, self.pca.dim)
        return scaler_apply(self.scaler, pca_transform(self.pca, flat))

    def score(self, pixels) -> np.ndarray:
        p = forward_batch(self.qcnn.params, self.angles(pixels), self.qcnn.plan, self.qcnn.shared)
        # (1 - <Z>)/2 can leave [0, 1] by one ulp
        return np.clip(np.asarray(p), 0.0, 1.0)


def score_vector(record: FileRecord, models: dict[str, SectionModel]) -> np.ndarray:
    """Per-section malware scores ordered (text, data, rdata, rsrc, reloc); -1 where absent."""
    return score_vectors([record], models)[0]


def score_vectors(records, models: dict[str, SectionModel]) -> np.ndarray:
    missing = [k for k in SECTION_KEYS if k not in models]
    if missing:
        raise MissingModel(f"no model for sections {missing}")
    out = np.full((len(records), len(SECTION_KEYS)), MISSING)
    for j, key in enumerate(SECTION_KEYS):
        rows = [i for i, rec in enumerate(records) if rec.present(key)]
        if not rows:
            continue
        pixels = np.stack([records[i].sections[key] for i in rows])
        out[rows, j] = models[key].score(pixels)
    return out


def majority_vote(v) -> int:
    """1 (malware) if malware votes >= benign votes among present sections, or none present."""
    v = np.asarray(v, dtype=float)
    present = v[v != MISSING]
    malware = int(np.sum(present >= 0.5))
    return int(malware >= present.size - malware)


class MajorityVote:
    kind = "majority"

    def predict_proba(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return np.array([float(majority_vote(row)) for row in X])

    def to_dict(self) -> dict:
        return {"kind": "majority", "missing_sentinel": MISSING, "tie": "malware",
                "no_votes": "malware"}


def train_scorer(X, y, kind: str, seed: int = 0):
    if kind == "majority":
        return MajorityVote()
    if kind == "rf":
        return train_random_forest(X, y, ForestConfig(seed=seed))
    if kind == "gbt":
        return train_gbt(X, y, BoostConfig(seed=seed))
    raise ValueError(f"unknown scorer kind {kind!r}; expected one of {SCORER_KINDS}")


def predict(model, v):
    """(probability, label) for one score vector, or arrays of both for a batch."""
    v = np.asarray(v, dtype=float)
    proba = model.predict_proba(np.atleast_2d(v))
    labels = (proba >= 0.5).astype(int)
    if v.ndim == 1:
        return float(proba[0]), int(labels[0])
    return proba, labels


def scorer_to_dict(model) -> dict:
    return model.to_dict()


def scorer_from_dict(obj: dict):
    if obj["kind"] == "majority":
        return MajorityVote()
    return TreeEnsemble.from_dict(obj)


def confusion(preds, labels) -> dict:
    preds = np.asarray(preds, dtype=int).reshape(-1)
    labels = np.asarray(labels, dtype=int).reshape(-1)
    if preds.size != labels.size:
        raise LengthMismatch(f"{preds.size} predictions for {labels.size} labels")
    if preds.size == 0:
        raise EmptyInput("metrics of an empty prediction set")
    return {
        "tp": int(np.sum((preds == 1) & (labels == 1))),
        "fp": int(np.sum((preds == 1) & (labels == 0))),
        "fn": int(np.sum((preds == 0) & (labels == 1))),
        "tn": int(np.sum((preds == 0) & (labels == 0))),
    }


def metrics(preds, labels) -> dict:
    """Accuracy, precision, recall and F1 with malware (1) as the positive class.

    Zero denominators yield 0 rather than NaN.
    """
    cm = confusion(preds, labels)
    tp, fp, fn, tn = cm["tp"], cm["fp"], cm["fn"], cm["tn"]
    n = tp + fp + fn + tn
    return {
        "accuracy": (tp + tn) / n,
        "precision": tp / (tp + fp) if tp + fp else 0.0,
        "recall": tp / (tp + fn) if tp + fn else 0.0,
        "f1": 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0,
        "confusion": cm,
        "n": n,
    }


def write_vectors(path, vectors, labels) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(VECTOR_HEADER)
        for row, label in zip(np.asarray(vectors, dtype=float), labels):
            writer.writerow([_fmt(v) for v in row] + [int(label)])


def _fmt(v: float) -> str:
    return "-1" if v == MISSING else repr(float(v))


def read_vectors(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != VECTOR_HEADER:
            raise ValueError(f"expected header {','.join(VECTOR_HEADER)}, got {header}")
        rows = [r for r in reader if r]
    X = np.array([[float(v) for v in r[:5]] for r in rows], dtype=float).reshape(-1, 5)
    y = np.array([int(r[5]) for r in rows], dtype=int)
    bad = (X != MISSING) & ((X < 0) | (X > 1))
    if bad.any():
        raise ValueError("score vectors may only hold values in [0, 1] or -1")
    return X, y
