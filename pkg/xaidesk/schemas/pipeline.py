"""Options shared by the explain and grid commands."""

from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field

from xaidesk.config import settings
from xaidesk.schemas.explanation import LimeConfig, ShapConfig
from xaidesk.schemas.report import METHOD_ORDER, MethodName
from xaidesk.schemas.segmentation import Baseline, SlicConfig


class ExplainOptions(BaseModel):
    """Everything needed to explain one image with one or more methods."""

    methods: List[MethodName] = list(METHOD_ORDER)
    grid: Optional[Tuple[int, int]] = None
    segmenter: Literal["grid", "slic"] = "grid"
    slic: SlicConfig = Field(default_factory=SlicConfig)
    baseline: Baseline = Field(default_factory=lambda: Baseline.gray(settings.BASELINE_GRAY))
    lime: LimeConfig = Field(default_factory=LimeConfig)
    shap: ShapConfig = Field(default_factory=ShapConfig)
    tap_layer: str = settings.GRADCAM_TAP
    deletion_steps: int = Field(settings.DELETION_STEPS, ge=2)
    alpha: float = Field(settings.OVERLAY_ALPHA, ge=0.0, le=1.0)
    stability_runs: int = Field(0, ge=0)
    workers: int = Field(settings.WORKERS, ge=1)

    def grid_shape(self) -> Tuple[int, int]:
        """Explicit grid, else the per-method default, else the shared grid."""
        if self.grid is not None:
            return self.grid
        if self.methods == ["lime"]:
            return settings.LIME_GRID
        if self.methods == ["shap"]:
            return settings.SHAP_GRID
        return settings.SHARED_GRID
