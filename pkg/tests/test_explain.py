"""Tests for the multi-method explanation pipeline."""

import numpy as np
import pytest

from xaidesk.core.exceptions import CapabilityException
from xaidesk.models.dataset import gen_shapes_dataset
from xaidesk.models.network import ModelHandle
from xaidesk.schemas.explanation import LimeConfig
from xaidesk.schemas.pipeline import ExplainOptions
from xaidesk.services.explain_service import explain_image, overlay_row, resolve_class
from xaidesk.services.report_service import deletion_auc


def test_grid_defaults_per_method():
    """Test LIME 8x8, SHAP 3x3 and a shared 3x3 grid for several methods."""
    assert ExplainOptions(methods=["lime"]).grid_shape() == (8, 8)
    assert ExplainOptions(methods=["shap"]).grid_shape() == (3, 3)
    assert ExplainOptions(methods=["lime", "shap"]).grid_shape() == (3, 3)
    assert ExplainOptions(methods=["lime"], grid=(2, 4)).grid_shape() == (2, 4)


def test_resolve_class_uses_argmax(model, disk_image):
    """Test auto class selection and explicit passthrough."""
    probabilities, _ = model.predict(disk_image)
    assert resolve_class(model, disk_image, None) == int(np.argmax(probabilities))
    assert resolve_class(model, disk_image, 3) == 3


def test_all_methods_share_segmentation(model, disk_image):
    """Test one run per method in canonical order with deletion AUCs in [0, 1]."""
    options = ExplainOptions(lime=LimeConfig(n_samples=40))
    segmentation, runs = explain_image(model, disk_image, 0, options)
    assert segmentation.region_count == 9
    assert [run.name for run in runs] == ["lime", "shap", "gradcam", "guided"]
    for run in runs:
        assert 0.0 <= run.deletion_auc <= 1.0
        assert run.entry().model_calls == run.model_calls
    assert runs[1].model_calls == 512
    assert runs[0].attribution.segmentation is runs[1].attribution.segmentation


def test_lime_top_k_capped_to_region_count(model, disk_image):
    """Test that a top_k above K is capped rather than rejected."""
    options = ExplainOptions(methods=["lime"], grid=(2, 2), lime=LimeConfig(n_samples=20, top_k=8))
    _, runs = explain_image(model, disk_image, 1, options)
    assert runs[0].config["top_k"] == 4


def test_stability_runs(model, disk_image):
    """Test that stability is reported only when requested."""
    options = ExplainOptions(methods=["lime"], grid=(2, 2), lime=LimeConfig(n_samples=20, top_k=2), stability_runs=3)
    _, runs = explain_image(model, disk_image, 0, options)
    assert 0.0 <= runs[0].stability <= 1.0
    assert runs[0].entry().stability == runs[0].stability


def test_gradient_methods_checked_first(disk_image):
    """Test that an opaque model fails before any perturbation work."""
    calls = []

    def probabilities(image):
        calls.append(1)
        return np.array([0.5, 0.5])

    options = ExplainOptions(methods=["shap", "gradcam"])
    with pytest.raises(CapabilityException):
        explain_image(ModelHandle.opaque(probabilities), disk_image, 0, options)
    assert not calls


def test_pixel_entries_reference_map_files(model, disk_image):
    """Test that per-pixel methods serialize a map file and superpixel methods their values."""
    _, runs = explain_image(model, disk_image, 2, ExplainOptions(methods=["shap", "guided"]))
    shap, guided = (run.entry() for run in runs)
    assert shap.attribution.kind == "superpixel" and len(shap.attribution.values) == 9
    assert guided.attribution.map_file == "guided_map.pgm"


def test_overlay_row(model, disk_image):
    """Test that a row holds the original followed by one overlay per method."""
    _, runs = explain_image(model, disk_image, 0, ExplainOptions(methods=["gradcam", "guided"]))
    row = overlay_row(disk_image, runs, 0.5)
    assert len(row) == 3
    assert row[0] is disk_image


def test_deterministic_report_entries(model, disk_image):
    """Test that repeated pipeline runs serialize identically."""
    options = ExplainOptions(lime=LimeConfig(n_samples=30))
    first = [run.entry().model_dump_json() for run in explain_image(model, disk_image, 1, options)[1]]
    second = [run.entry().model_dump_json() for run in explain_image(model, disk_image, 1, options)[1]]
    assert first == second


@pytest.mark.slow
def test_attributions_beat_random_ranking(trained_network):
    """Test that Grad-CAM and SHAP deletion AUCs undercut a random ranking by 0.05 over 50 images."""
    model = ModelHandle.from_network(trained_network)
    rng = np.random.default_rng(0)
    aucs = {"shap": [], "gradcam": [], "random": []}
    options = ExplainOptions(methods=["shap", "gradcam"])
    for sample in gen_shapes_dataset(50, 777):
        _, runs = explain_image(model, sample.image, sample.label, options)
        for run in runs:
            aucs[run.name].append(run.deletion_auc)
        aucs["random"].append(deletion_auc(model, sample.image, rng.uniform(size=(64, 64)), sample.label))
    assert np.mean(aucs["gradcam"]) <= np.mean(aucs["random"]) - 0.05
    assert np.mean(aucs["shap"]) <= np.mean(aucs["random"]) - 0.05
