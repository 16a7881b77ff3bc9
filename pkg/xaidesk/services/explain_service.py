"""Run the explainers on an image and assemble report entries."""

import logging
import time
from typing import Dict, List, Optional, Tuple

import numpy as np

from xaidesk.models.network import ModelHandle, predicted_class
from xaidesk.schemas.explanation import GradCamConfig, GuidedConfig
from xaidesk.schemas.pipeline import ExplainOptions
from xaidesk.schemas.report import Attribution, AttributionRecord, MethodEntry
from xaidesk.services.gradcam_service import gradcam_heatmap
from xaidesk.services.guided_service import guided_backprop
from xaidesk.services.lime_service import explain_lime, lime_stability
from xaidesk.services.report_service import deletion_auc, render_overlay
from xaidesk.services.segmentation_service import Segmentation, grid_segment, slic_segment
from xaidesk.services.shap_service import explain_shap

logger = logging.getLogger(__name__)


class MethodRun:
    """One explainer's attribution together with its report metadata."""

    def __init__(
            self,
            name: str,
            attribution: Attribution,
            config: Dict[str, object],
            model_calls: int,
            stability: Optional[float] = None,
    ):
        self.name = name
        self.attribution = attribution
        self.config = config
        self.model_calls = model_calls
        self.stability = stability
        self.deletion_auc: Optional[float] = None

    def __repr__(self) -> str:
        return f"<MethodRun(name={self.name}, calls={self.model_calls}, auc={self.deletion_auc})>"

    def entry(self) -> MethodEntry:
        attribution = self.attribution
        if attribution.kind == "superpixel":
            record = AttributionRecord(
                kind="superpixel",
                values=[float(v) for v in attribution.scores],
                segmentation=attribution.segmentation.describe(),
                baseline=attribution.baseline,
            )
        else:
            record = AttributionRecord(
                kind="pixel",
                map_file=f"{self.name}_map.pgm",
                max_before_normalize=attribution.max_before_normalize,
            )
        return MethodEntry(
            name=self.name,
            config=self.config,
            attribution=record,
            deletion_auc=self.deletion_auc,
            model_calls=self.model_calls,
            stability=self.stability,
        )


def resolve_class(model: ModelHandle, image: np.ndarray, requested: Optional[int]) -> int:
    """The requested class, or the predicted argmax (ties to the lowest index)."""
    if requested is not None:
        return requested
    return predicted_class(model.predict(image)[0])


def build_segmentation(image: np.ndarray, options: ExplainOptions) -> Segmentation:
    if options.segmenter == "slic":
        slic = options.slic
        return slic_segment(image, slic.n_segments, slic.compactness, slic.iterations)
    rows, cols = options.grid_shape()
    return grid_segment(image, rows, cols)


def _run_lime(model, image, segmentation, class_index, options: ExplainOptions) -> MethodRun:
    config = options.lime.model_copy(update={"baseline": options.baseline})
    if config.top_k > segmentation.region_count:
        logger.warning(f"LIME top_k={config.top_k} capped at K={segmentation.region_count}")
        config = config.model_copy(update={"top_k": segmentation.region_count})
    explanation = explain_lime(model, image, segmentation, class_index, config, options.workers)
    stability = None
    calls = explanation.model_calls
    if options.stability_runs >= 2:
        seeds = [config.seed + run for run in range(options.stability_runs)]
        stability = lime_stability(model, image, segmentation, class_index, config, seeds, options.workers)
        calls += explanation.model_calls * len(seeds)
    echo = config.model_dump(exclude={"baseline"})
    echo.update(baseline=config.baseline.describe(), segmentation=segmentation.describe(),
                intercept=explanation.intercept, r_squared=explanation.r_squared)
    attribution = Attribution(
        method="lime",
        class_index=class_index,
        scores=explanation.coefficients,
        segmentation=segmentation,
        baseline=config.baseline.describe(),
    )
    return MethodRun("lime", attribution, echo, calls, stability)


def _run_shap(model, image, segmentation, class_index, options: ExplainOptions) -> MethodRun:
    config = options.shap.model_copy(update={"baseline": options.baseline})
    result = explain_shap(model, image, segmentation, class_index, config, options.workers)
    echo = config.model_dump(exclude={"baseline"})
    echo.update(baseline=config.baseline.describe(), segmentation=segmentation.describe(),
                v_full=result.v_full, v_empty=result.v_empty)
    if result.standard_errors is not None:
        echo["standard_errors"] = [float(v) for v in result.standard_errors]
    attribution = Attribution(
        method="shap",
        class_index=class_index,
        scores=result.values,
        segmentation=segmentation,
        baseline=config.baseline.describe(),
    )
    return MethodRun("shap", attribution, echo, result.model_calls)


def _run_gradcam(model, image, segmentation, class_index, options: ExplainOptions) -> MethodRun:
    result = gradcam_heatmap(model, image, class_index, options.tap_layer)
    attribution = Attribution(
        method="gradcam",
        class_index=class_index,
        pixel_map=result.normalized,
        max_before_normalize=result.max_before_normalize,
    )
    echo = GradCamConfig(tap_layer=result.tap_layer).model_dump()
    return MethodRun("gradcam", attribution, echo, 1)


def _run_guided(model, image, segmentation, class_index, options: ExplainOptions) -> MethodRun:
    result = guided_backprop(model, image, class_index)
    attribution = Attribution(
        method="guided",
        class_index=class_index,
        pixel_map=result.reduced,
        max_before_normalize=result.max_before_normalize,
    )
    return MethodRun("guided", attribution, GuidedConfig().model_dump(), 1)


RUNNERS = {
    "lime": _run_lime,
    "shap": _run_shap,
    "gradcam": _run_gradcam,
    "guided": _run_guided,
}


def explain_image(
        model: ModelHandle,
        image: np.ndarray,
        class_index: int,
        options: ExplainOptions,
) -> Tuple[Segmentation, List[MethodRun]]:
    """
    Run every requested method on one image with a shared segmentation.

    Gradient methods are checked for capability before any perturbation
    work starts. Each run gets its deletion AUC.

    Returns:
        tuple: (segmentation, runs in the requested method order).
    """
    if {"gradcam", "guided"} & set(options.methods):
        model.require_network()
    segmentation = build_segmentation(image, options)
    runs = []
    for name in options.methods:
        started = time.perf_counter()
        run = RUNNERS[name](model, image, segmentation, class_index, options)
        run.deletion_auc = deletion_auc(
            model, image, run.attribution, class_index, options.deletion_steps, options.baseline
        )
        logger.info(
            f"{name}: deletion AUC {run.deletion_auc:.4f}, {run.model_calls} model calls, "
            f"{time.perf_counter() - started:.2f}s"
        )
        runs.append(run)
    return segmentation, runs


def overlay_row(image: np.ndarray, runs: List[MethodRun], alpha: float) -> List[np.ndarray]:
    """Original image followed by one overlay per method run."""
    return [image] + [render_overlay(image, run.attribution, alpha) for run in runs]
