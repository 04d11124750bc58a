"""PCA down to the circuit width and min-max scaling into encoding angles."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateData, DimensionMismatch, TooFewRows

N_COMPONENTS = 8
HALF_PI = np.pi / 2
# singular values below this fraction of the largest (or absolute, for all-zero
# data) count as zero variance
_RANK_TOL = 1e-10


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    explained: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @property
    def k(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "kind": "pca",
            "d": self.dim,
            "k": self.k,
            "mean": self.mean.tolist(),
            "components": self.components.tolist(),
            "explained": self.explained.tolist(),
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PcaModel":
        model = cls(
            mean=np.asarray(obj["mean"], dtype=float),
            components=np.asarray(obj["components"], dtype=float),
            explained=np.asarray(obj["explained"], dtype=float),
            degenerate=bool(obj.get("degenerate", False)),
        )
        if model.components.shape != (obj["k"], obj["d"]) or model.dim != obj["d"]:
            raise DimensionMismatch("serialized PCA dimensions do not match its arrays")
        return model


def pca_fit(rows, k: int = N_COMPONENTS) -> PcaModel:
    """Fit a k-component PCA by thin SVD of the centered data.

    Each component is sign-fixed so its largest-magnitude entry is
    non-negative. When the data has rank below k the remaining rows come from
    the SVD's orthonormal completion, their explained variance is set to 0 and
    a DegenerateData warning is emitted.
    """
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2:
        raise DimensionMismatch(f"expected an n x d matrix, got shape {X.shape}")
    n, d = X.shape
    if n < k:
        raise TooFewRows(f"need at least {k} rows to fit {k} components, got {n}")
    if d < k:
        raise DimensionMismatch(f"cannot keep {k} components of {d}-dim data")
    mean = X.mean(axis=0)
    centered = X - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    components = vt[:k].copy()
    sv = s[:k]
    cutoff = _RANK_TOL * max(float(s[0]) if s.size else 0.0, 1.0)
    explained = np.where(sv > cutoff, sv**2 / max(n - 1, 1), 0.0)

    degenerate = bool(np.any(sv <= cutoff))
    if degenerate:
        warnings.warn(
            f"data rank {int(np.sum(sv > cutoff))} < {k}; trailing components are arbitrary",
            DegenerateData,
            stacklevel=2,
        )
    pivot = np.argmax(np.abs(components), axis=1)
    signs = np.where(components[np.arange(k), pivot] < 0, -1.0, 1.0)
    components *= signs[:, None]
    return PcaModel(mean=mean, components=components, explained=explained, degenerate=degenerate)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    """Project one d-vector (or an n x d batch) onto the model's components."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != model.dim:
        raise DimensionMismatch(f"expected dimension {model.dim}, got {x.shape[-1]}")
    return (x - model.mean) @ model.components.T


@dataclass
class AngleScaler:
    lo: np.ndarray
    hi: np.ndarray

    def to_dict(self) -> dict:
        return {"kind": "angle_scaler", "k": int(self.lo.size),
                "lo": self.lo.tolist(), "hi": self.hi.tolist()}

    @classmethod
    def from_dict(cls, obj: dict) -> "AngleScaler":
        lo = np.asarray(obj["lo"], dtype=float)
        hi = np.asarray(obj["hi"], dtype=float)
        if lo.size != obj["k"] or hi.size != obj["k"]:
            raise DimensionMismatch("serialized scaler dimensions do not match its arrays")
        return cls(lo, hi)


def scaler_fit(rows) -> AngleScaler:
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty n x k matrix, got shape {X.shape}")
    return AngleScaler(lo=X.min(axis=0), hi=X.max(axis=0))


def scaler_apply(scaler: AngleScaler, x) -> np.ndarray:
    """Map features into [0, pi/2], clamping values outside the fitted range.

    A feature with zero fitted width maps to pi/4.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != scaler.lo.size:
        raise DimensionMismatch(f"expected {scaler.lo.size} features, got {x.shape[-1]}")
    width = scaler.hi - scaler.lo
    flat = width == 0
    safe = np.where(flat, 1.0, width)
    unit = np.clip((x - scaler.lo) / safe, 0.0, 1.0)
    unit = np.where(flat, 0.5, unit)
    return unit * HALF_PI
