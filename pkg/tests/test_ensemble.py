import numpy as np
import pytest

from oracles import brute_confusion
from qmal import SECTION_KEYS
from qmal.errors import EmptyInput, LengthMismatch, MissingModel
from qmal.ensemble import (MISSING, MajorityVote, SectionModel, majority_vote, metrics, predict,
                           read_vectors, score_vector, score_vectors, scorer_from_dict,
                           scorer_to_dict, train_scorer, write_vectors)
from qmal.features import pca_fit, pca_transform, scaler_apply, scaler_fit
from qmal.imaging import FileRecord
from qmal.qcnn import QcnnModel, forward


@pytest.fixture(scope="module")
def models():
    rng = np.random.default_rng(7)
    out = {}
    for key in SECTION_KEYS:
        pixels = rng.integers(0, 256, size=(30, 64)).astype(float)
        pca = pca_fit(pixels)
        scaler = scaler_fit(pca_transform(pca, pixels))
        out[key] = SectionModel(pca, scaler, QcnnModel(rng.uniform(0, 2 * np.pi, size=12)))
    return out


def image(rng):
    return rng.integers(0, 256, size=(8, 8), dtype=np.uint8)


def test_no_sections_gives_all_missing(models):
    rec = FileRecord("0" * 64, 1)
    assert score_vector(rec, models).tolist() == [-1.0] * 5


def test_text_only(models, rng):
    rec = FileRecord("0" * 64, 0, sections={"text": image(rng)})
    v = score_vector(rec, models)
    assert 0 <= v[0] <= 1
    assert v[1:].tolist() == [-1.0] * 4


def test_score_matches_stage_by_stage(models, rng):
    rec = FileRecord("0" * 64, 0, sections={k: image(rng) for k in SECTION_KEYS})
    v = score_vector(rec, models)
    for j, key in enumerate(SECTION_KEYS):
        m = models[key]
        x = rec.sections[key].reshape(-1).astype(float)
        p = forward(m.qcnn, scaler_apply(m.scaler, pca_transform(m.pca, x)))
        assert abs(v[j] - p) < 1e-12


def test_batch_matches_single(models, rng):
    recs = [FileRecord("0" * 64, 0, sections={k: image(rng) for k in SECTION_KEYS
                                              if rng.random() < 0.6}) for _ in range(10)]
    batch = score_vectors(recs, models)
    for rec, row in zip(recs, batch):
        assert np.allclose(score_vector(rec, models), row, atol=1e-14)
    present = batch != MISSING
    assert np.all((batch[present] >= 0) & (batch[present] <= 1))


def test_missing_model(models):
    partial = {k: v for k, v in models.items() if k != "reloc"}
    with pytest.raises(MissingModel):
        score_vector(FileRecord("0" * 64, 0), partial)


@pytest.mark.parametrize("v, label", [
    ((0.9, 0.9, 0.1, -1, -1), 1),
    ((0.1, 0.1, 0.1, 0.1, 0.1), 0),
    ((0.9, 0.1, -1, -1, -1), 1),
    ((-1, -1, -1, -1, -1), 1),
    ((0.5, 0.49, 0.2, -1, -1), 0),
])
def test_majority_vote(v, label):
    assert majority_vote(v) == label
    assert predict(MajorityVote(), np.array(v, dtype=float)) == (float(label), label)


@pytest.mark.parametrize("kind", ["majority", "rf", "gbt"])
def test_scorers_predict_and_serialize(rng, kind):
    X = rng.uniform(size=(80, 5))
    X[rng.random(size=X.shape) < 0.2] = MISSING
    y = (X[:, 3] > 0.5).astype(int)
    model = train_scorer(X, y, kind, seed=1)
    proba, labels = predict(model, X)
    assert np.array_equal(labels, (proba >= 0.5).astype(int))
    back = scorer_from_dict(scorer_to_dict(model))
    assert np.array_equal(back.predict_proba(X), model.predict_proba(X))
    p, lab = predict(model, X[0])
    assert isinstance(p, float) and lab in (0, 1)


def test_unknown_scorer_kind():
    with pytest.raises(ValueError):
        train_scorer(np.zeros((2, 5)), [0, 1], "svm")


def test_metrics_fixtures():
    m = metrics([1, 1, 0, 0], [1, 0, 1, 0])
    assert m["accuracy"] == 0.5 and m["f1"] == 0.5
    assert m["precision"] == 0.5 and m["recall"] == 0.5
    perfect = metrics([1, 0, 1], [1, 0, 1])
    assert all(perfect[k] == 1.0 for k in ("accuracy", "precision", "recall", "f1"))
    benign = metrics([0, 0, 0, 0], [1, 1, 0, 0])
    assert benign["accuracy"] == 0.5 and benign["f1"] == 0.0 and benign["precision"] == 0.0
    none = metrics([0, 0], [0, 0])
    assert none["f1"] == 0.0 and none["recall"] == 0.0 and none["accuracy"] == 1.0


def test_metrics_match_brute_force(rng):
    for _ in range(50):
        n = int(rng.integers(1, 40))
        preds, labels = rng.integers(0, 2, size=n), rng.integers(0, 2, size=n)
        tp, fp, fn, tn = brute_confusion(preds.tolist(), labels.tolist())
        m = metrics(preds, labels)
        assert m["confusion"] == {"tp": tp, "fp": fp, "fn": fn, "tn": tn}
        assert m["accuracy"] == (tp + tn) / n
        assert m["f1"] == (2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0)


def test_metrics_errors():
    with pytest.raises(LengthMismatch):
        metrics([1, 0], [1])
    with pytest.raises(EmptyInput):
        metrics([], [])


def test_vector_csv_round_trip(tmp_path, rng):
    X = rng.uniform(size=(6, 5))
    X[0] = MISSING
    X[3, 2] = MISSING
    y = np.array([0, 1, 0, 1, 1, 0])
    path = tmp_path / "v.csv"
    write_vectors(path, X, y)
    lines = path.read_text().splitlines()
    assert lines[0] == "text,data,rdata,rsrc,reloc,label"
    assert lines[1] == "-1,-1,-1,-1,-1,0"
    back, labels = read_vectors(path)
    assert np.array_equal(back, X) and np.array_equal(labels, y)


def test_vector_csv_validation(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("text,data,rdata,rsrc,reloc,label\n0.5,-0.5,0,0,0,1\n")
    with pytest.raises(ValueError):
        read_vectors(bad)
    bad.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_vectors(bad)
