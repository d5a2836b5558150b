"""PCA shape modes: fitting, projection, reconstruction, serialization."""

import numpy as np
import pytest

from conftest import ellipse_points

from cellshapes.contour_io import Contour
from cellshapes.errors import (
    DegenerateVarianceWarning,
    DimensionMismatch,
    InsufficientData,
    SchemaError,
)
from cellshapes import pca
from cellshapes.preprocess import RegisteredContour, normalize, procrustes_align
import cellshapes.synthgen as synthgen


def ellipse_batch(n=40, seed=0):
    rng = np.random.default_rng(seed)
    batch = []
    for i in range(n):
        pts = ellipse_points(1.0, float(rng.uniform(0.3, 0.9)), 300)
        batch.append(normalize(Contour(id=i, points=pts)))
    return batch


@pytest.fixture(scope="module")
def synth_model():
    cfg = synthgen.GenConfig(n_per_class=60, seed=19)
    registered = [normalize(c) for c in synthgen.generate(cfg)]
    aligned, _ = procrustes_align(registered)
    return pca.fit(aligned, 0.99), aligned


class TestFit:
    def test_identical_batch_degenerate(self):
        rc = normalize(Contour(id=0, points=ellipse_points(1.5, 1.0, 200)))
        batch = [RegisteredContour(id=i, points=rc.points.copy()) for i in range(5)]
        with pytest.warns(DegenerateVarianceWarning):
            model = pca.fit(batch, 0.95)
        assert model.n_components == 0

    def test_ellipse_family_one_dominant_mode(self):
        # [DERIVED oracle]: family varies only in axis ratio -> one mode
        model = pca.fit(ellipse_batch(), 0.95)
        total = 0.0
        batch = ellipse_batch()
        data = np.stack([rc.points.reshape(-1) for rc in batch])
        total = np.sum((data - data.mean(0)) ** 2) / (len(batch) - 1)
        assert model.explained_variance[0] / total >= 0.99

    def test_insufficient_data(self):
        with pytest.raises(InsufficientData):
            pca.fit(ellipse_batch(1), 0.95)

    def test_orthonormal_and_sorted(self, synth_model):
        model, _ = synth_model
        gram = model.components @ model.components.T
        assert np.max(np.abs(gram - np.eye(model.n_components))) < 1e-9
        ev = model.explained_variance
        assert np.all(np.diff(ev) <= 1e-12)
        assert model.n_components >= 2

    def test_threshold_rule_smallest_k(self, synth_model):
        model, aligned = synth_model
        data = np.stack([rc.points.reshape(-1) for rc in aligned])
        c = data - data.mean(0)
        var = np.linalg.svd(c, compute_uv=False) ** 2 / (len(data) - 1)
        ratio = np.cumsum(var) / var.sum()
        expected = int(np.searchsorted(ratio, 0.99 - 1e-15) + 1)
        assert model.n_components == expected


class TestProjectReconstruct:
    def test_mean_projects_to_zero(self, synth_model):
        model, _ = synth_model
        rc = RegisteredContour(id=0, points=model.mean.reshape(-1, 2))
        assert np.max(np.abs(pca.project(model, rc))) < 1e-9

    def test_component_projects_to_unit(self, synth_model):
        model, _ = synth_model
        vec = model.mean + 2.0 * model.components[0]
        rc = RegisteredContour(id=0, points=vec.reshape(-1, 2))
        coeffs = pca.project(model, rc)
        assert abs(coeffs[0] - 2.0) < 1e-9
        assert np.max(np.abs(coeffs[1:])) < 1e-9

    def test_zero_coeffs_reconstruct_mean(self, synth_model):
        model, _ = synth_model
        rec = pca.reconstruct(model, np.zeros(model.n_components))
        assert np.allclose(rec.points.reshape(-1), model.mean)

    def test_reconstruction_error_monotone_in_k(self, synth_model):
        model, aligned = synth_model
        rc = aligned[7]
        vec = rc.points.reshape(-1)
        coeffs = pca.project(model, rc)
        prev = np.inf
        for k in range(1, model.n_components + 1):
            approx = model.mean + coeffs[:k] @ model.components[:k]
            err = float(np.sum((approx - vec) ** 2))
            assert err <= prev + 1e-12
            prev = err

    def test_residual_energy_bound(self, synth_model):
        # [DERIVED oracle]: mean squared residual over the training set is
        # bounded by the unretained share of the total scatter (the bound
        # carries a 2x slack)
        model, aligned = synth_model
        data = np.stack([rc.points.reshape(-1) for rc in aligned])
        scatter = float(np.sum((data - data.mean(0)) ** 2))
        coeffs = pca.project_batch(model, aligned)
        recon = coeffs @ model.components + model.mean
        mean_residual = float(np.mean(np.sum((recon - data) ** 2, axis=1)))
        bound = (1.0 - model.variance_threshold) * scatter * 2.0 / len(data)
        assert mean_residual <= bound

    def test_shape_mode_sweep_valid_contours(self, synth_model):
        # mean +/- 2 sigma along each of the first 10 modes stays a usable
        # closed contour
        from cellshapes.preprocess import signed_area
        model, _ = synth_model
        for i in range(min(10, model.n_components)):
            sigma = np.sqrt(model.explained_variance[i])
            for sign in (-2.0, 2.0):
                coeffs = np.zeros(model.n_components)
                coeffs[i] = sign * sigma
                c = pca.reconstruct(model, coeffs)
                assert len(c.points) == 100
                assert np.all(np.isfinite(c.points))
                assert abs(signed_area(c.points)) > 0.2
                normalize(c)  # does not raise

    def test_dimension_mismatch(self, synth_model):
        model, _ = synth_model
        with pytest.raises(DimensionMismatch):
            pca.project(model, RegisteredContour(id=0, points=np.zeros((7, 2))))
        with pytest.raises(DimensionMismatch):
            pca.reconstruct(model, np.zeros(model.n_components + 1))


class TestSerialization:
    def test_round_trip_bit_identical_projections(self, synth_model, tmp_path):
        model, aligned = synth_model
        path = tmp_path / "pca.json"
        pca.save(model, path)
        back = pca.load(path)
        p1 = pca.project_batch(model, aligned[:5])
        p2 = pca.project_batch(back, aligned[:5])
        assert np.array_equal(p1, p2)

    def test_rejects_length_mismatch(self, synth_model, tmp_path):
        import json
        model, _ = synth_model
        doc = pca.to_dict(model)
        doc["components"] = [row[:-1] for row in doc["components"]]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        with pytest.raises(SchemaError):
            pca.load(path)
