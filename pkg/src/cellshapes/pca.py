"""PCA shape modes on registered, aligned contour coordinates.

Contours are flattened to interleaved (x1, y1, ..., xN, yN) vectors; the
basis comes from an SVD of the centered data matrix, truncated at the
smallest component count whose cumulative explained-variance ratio reaches
the threshold. Component signs are fixed so each component's
largest-magnitude entry is positive, which makes fitted bases reproducible.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .contour_io import Contour
from .errors import (
    DegenerateVarianceWarning,
    DimensionMismatch,
    InsufficientData,
    SchemaError,
)
from .preprocess import RegisteredContour

_NOISE_FLOOR = 1e-12  # relative singular-value cutoff for "no variance"


def flatten(rc: RegisteredContour) -> np.ndarray:
    return rc.points.reshape(-1)


@dataclass
class PcaModel:
    mean: np.ndarray                 # (2N,)
    components: np.ndarray           # (k, 2N), orthonormal rows
    explained_variance: np.ndarray   # (k,), non-increasing
    variance_threshold: float

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def feature_names(self) -> list[str]:
        return [f"pca_{i}" for i in range(1, self.n_components + 1)]


def fit(batch: Sequence[RegisteredContour], threshold: float) -> PcaModel:
    """Fit the shape-mode basis on a training batch only."""
    if len(batch) < 2:
        raise InsufficientData("PCA needs at least 2 contours")
    if not 0.0 < threshold <= 1.0:
        raise InsufficientData(f"threshold {threshold} outside (0, 1]")
    data = np.stack([flatten(rc) for rc in batch])  # (B, 2N)
    mean = data.mean(axis=0)
    centered = data - mean
    # SVD of the data matrix is numerically stabler than forming covariance
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    variances = s ** 2 / (len(batch) - 1)
    total = float(variances.sum())
    # identical rows leave 1-ulp residue after mean subtraction; treat
    # anything at float-noise level relative to the data as zero variance
    scale = float(np.abs(data).max()) + 1e-300
    if total <= 0 or s[0] <= 1e-12 * scale:
        warnings.warn("training batch has zero shape variance",
                      DegenerateVarianceWarning)
        return PcaModel(mean=mean, components=np.empty((0, data.shape[1])),
                        explained_variance=np.empty(0),
                        variance_threshold=threshold)
    real = s > _NOISE_FLOOR * s[0]
    variances = variances[real]
    vt = vt[real]
    ratio = np.cumsum(variances) / float(variances.sum())
    k = int(np.searchsorted(ratio, threshold - 1e-15) + 1)
    k = min(k, len(variances))
    components = vt[:k].copy()
    # sign convention: largest-magnitude entry of each component positive
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean=mean, components=components,
                    explained_variance=variances[:k],
                    variance_threshold=threshold)


def project(model: PcaModel, rc: RegisteredContour) -> np.ndarray:
    vec = flatten(rc)
    if vec.shape != model.mean.shape:
        raise DimensionMismatch(
            f"contour dimension {vec.shape[0]} != model {model.mean.shape[0]}")
    return model.components @ (vec - model.mean)


def project_batch(model: PcaModel, batch: Sequence[RegisteredContour]) -> np.ndarray:
    if not batch:
        return np.empty((0, model.n_components))
    data = np.stack([flatten(rc) for rc in batch])
    if data.shape[1] != model.mean.shape[0]:
        raise DimensionMismatch(
            f"contour dimension {data.shape[1]} != model {model.mean.shape[0]}")
    return (data - model.mean) @ model.components.T


def reconstruct(model: PcaModel, coeffs: np.ndarray) -> Contour:
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape != (model.n_components,):
        raise DimensionMismatch(
            f"expected {model.n_components} coefficients, got {coeffs.shape}")
    vec = model.mean + coeffs @ model.components
    return Contour(id=-1, points=vec.reshape(-1, 2))


def save(model: PcaModel, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(to_dict(model), fh)


def to_dict(model: PcaModel) -> dict:
    return {
        "mean": model.mean.tolist(),
        "components": model.components.tolist(),
        "explained_variance": model.explained_variance.tolist(),
        "threshold": model.variance_threshold,
    }


def from_dict(doc: dict) -> PcaModel:
    try:
        mean = np.asarray(doc["mean"], dtype=np.float64)
        components = np.asarray(doc["components"], dtype=np.float64)
        variances = np.asarray(doc["explained_variance"], dtype=np.float64)
        threshold = float(doc["threshold"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad PCA model document: {exc}") from exc
    if components.size == 0:
        components = components.reshape(0, mean.shape[0])
    if components.ndim != 2 or components.shape[1] != mean.shape[0]:
        raise SchemaError("component length does not match mean length")
    if components.shape[0] != variances.shape[0]:
        raise SchemaError("explained_variance length does not match components")
    return PcaModel(mean=mean, components=components,
                    explained_variance=variances,
                    variance_threshold=threshold)


def load(path) -> PcaModel:
    with open(path, "r", encoding="ascii") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
    return from_dict(doc)
