import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qmal.errors import DegenerateData, DimensionMismatch, TooFewRows
from qmal.features import (AngleScaler, PcaModel, pca_fit, pca_transform, scaler_apply,
                           scaler_fit)


def rank8_rows(rng, n=40, d=64):
    basis = np.linalg.qr(rng.normal(size=(d, 8)))[0].T
    coeffs = rng.normal(size=(n, 8)) * np.array([9, 8, 7, 6, 5, 4, 3, 2])
    return 50 + coeffs @ basis


def test_orthonormal_and_sorted(rng):
    model = pca_fit(rng.integers(0, 256, size=(100, 64)))
    gram = model.components @ model.components.T
    assert np.max(np.abs(gram - np.eye(8))) < 1e-10
    assert np.all(np.diff(model.explained) <= 0)
    assert np.all(model.explained >= 0)


def test_exact_reconstruction_on_rank8_data(rng):
    X = rank8_rows(rng)
    model = pca_fit(X)
    P = model.components
    recon = model.mean + (X - model.mean) @ P.T @ P
    assert np.max(np.abs(recon - X)) < 1e-8


def test_hand_checked_2d_direction():
    X = np.zeros((2, 64))
    X[0, :2] = 1
    X[1, :2] = -1
    model = pca_fit(X, k=1)
    expected = np.zeros(64)
    expected[:2] = 1 / np.sqrt(2)
    assert np.allclose(model.components[0], expected, atol=1e-12)
    # centered rows (1,1),(-1,-1): covariance [[2,2],[2,2]], top eigenvalue 4
    assert model.explained[0] == pytest.approx(4.0)


def test_hand_checked_2d_direction_at_k8():
    X = np.zeros((8, 64))
    X[::2, :2] = 1
    X[1::2, :2] = -1
    with pytest.warns(DegenerateData):
        model = pca_fit(X)
    expected = np.zeros(64)
    expected[:2] = 1 / np.sqrt(2)
    assert np.allclose(model.components[0], expected, atol=1e-12)
    assert np.all(model.explained[1:] == 0)
    assert np.max(np.abs(model.components @ model.components.T - np.eye(8))) < 1e-10


def test_identical_rows():
    X = np.tile(np.arange(64.0), (10, 1))
    with pytest.warns(DegenerateData):
        model = pca_fit(X)
    assert np.all(model.explained == 0)
    assert np.allclose(pca_transform(model, X[0]), 0)
    assert model.degenerate


def test_too_few_rows(rng):
    with pytest.raises(TooFewRows):
        pca_fit(rng.normal(size=(7, 64)))


def test_sign_convention(rng):
    model = pca_fit(rng.normal(size=(30, 64)))
    for row in model.components:
        assert row[np.argmax(np.abs(row))] >= 0


def test_transform_cases(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateData)
        model = pca_fit(rng.normal(size=(20, 64)))
    assert np.allclose(pca_transform(model, model.mean), 0)
    unit = pca_transform(model, model.mean + model.components[0])
    assert np.allclose(unit, np.eye(8)[0], atol=1e-12)
    x = rng.normal(size=64)
    naive = [sum(model.components[i, j] * (x[j] - model.mean[j]) for j in range(64))
             for i in range(8)]
    assert np.max(np.abs(pca_transform(model, x) - naive)) < 1e-10


def test_transform_dimension_mismatch(rng):
    model = pca_fit(rng.normal(size=(20, 64)))
    with pytest.raises(DimensionMismatch):
        pca_transform(model, np.zeros(63))


def test_full_image_dimension(rng):
    model = pca_fit(rng.integers(0, 256, size=(12, 4096)))
    assert model.components.shape == (8, 4096)
    assert np.max(np.abs(model.components @ model.components.T - np.eye(8))) < 1e-10


def test_pca_json_round_trip(rng):
    model = pca_fit(rng.normal(size=(20, 64)))
    back = PcaModel.from_dict(json.loads(json.dumps(model.to_dict())))
    assert np.array_equal(back.components, model.components)
    assert np.array_equal(back.mean, model.mean)


def test_scaler_endpoints_and_clamp():
    rows = np.array([[0.0, -2.0] + [1.0] * 6, [4.0, 2.0] + [3.0] * 6])
    scaler = scaler_fit(rows)
    assert np.allclose(scaler_apply(scaler, scaler.lo), 0)
    assert np.allclose(scaler_apply(scaler, scaler.hi), np.pi / 2)
    beyond = scaler.hi + 10
    assert np.allclose(scaler_apply(scaler, beyond), np.pi / 2)
    assert np.allclose(scaler_apply(scaler, scaler.lo - 10), 0)
    mid = scaler_apply(scaler, (scaler.lo + scaler.hi) / 2)
    assert np.allclose(mid, np.pi / 4)


def test_scaler_flat_feature_maps_to_quarter_pi():
    rows = np.ones((5, 8))
    rows[:, 0] = np.arange(5)
    scaler = scaler_fit(rows)
    out = scaler_apply(scaler, np.full(8, 1.0))
    assert np.allclose(out[1:], np.pi / 4)


def test_scaler_json_round_trip():
    scaler = AngleScaler(np.zeros(8), np.arange(8.0))
    back = AngleScaler.from_dict(json.loads(json.dumps(scaler.to_dict())))
    assert np.array_equal(back.hi, scaler.hi)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6), min_size=8, max_size=8))
def test_scaler_output_in_range(x):
    scaler = AngleScaler(np.full(8, -3.0), np.linspace(-2.0, 5.0, 8))
    out = scaler_apply(scaler, x)
    assert np.all(out >= 0) and np.all(out <= np.pi / 2)
