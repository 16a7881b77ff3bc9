"""Explainer configuration and result schemas."""

from typing import List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from xaidesk.schemas.segmentation import Baseline

EXACT_K_CEILING = 20


class LimeConfig(BaseModel):
    """Sampling, proximity kernel and surrogate settings for LIME."""

    n_samples: int = Field(1000, ge=3)
    kernel_width: float = Field(0.25, gt=0)
    ridge_lambda: float = Field(1e-3, ge=0)
    top_k: int = Field(8, ge=1)
    sampling: Literal["random", "exhaustive"] = "random"
    baseline: Baseline = Field(default_factory=Baseline.gray)
    seed: int = Field(0, ge=0)

    def validate_for(self, region_count: int) -> "LimeConfig":
        """Check the config against a segmentation with region_count superpixels."""
        if self.top_k > region_count:
            raise ValueError(f"top_k={self.top_k} exceeds region count {region_count}")
        if self.sampling == "random" and self.n_samples < region_count + 2:
            raise ValueError(f"n_samples={self.n_samples} must be >= K + 2 = {region_count + 2}")
        if self.sampling == "exhaustive" and region_count > EXACT_K_CEILING:
            raise ValueError(f"exhaustive sampling needs K <= {EXACT_K_CEILING}")
        return self


class LimeExplanation(BaseModel):
    """Sparse weighted linear surrogate fitted around one instance."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    coefficients: np.ndarray
    intercept: float
    r_squared: float
    selected: List[int]
    class_index: int
    model_calls: int
    config: LimeConfig


class ShapConfig(BaseModel):
    """Exact enumeration or Monte-Carlo permutation sampling."""

    mode: Literal["exact", "mc"] = "exact"
    n_permutations: int = Field(1000, ge=1)
    baseline: Baseline = Field(default_factory=Baseline.gray)
    seed: int = Field(0, ge=0)
    exact_k_limit: int = Field(12, ge=1, le=EXACT_K_CEILING)


class ShapleyAttribution(BaseModel):
    """Per-superpixel Shapley values with the game's end points."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray
    v_full: float
    v_empty: float
    standard_errors: Optional[np.ndarray] = None
    class_index: Optional[int] = None
    model_calls: int = 0
    mode: Literal["exact", "mc"] = "exact"

    @property
    def efficiency_gap(self) -> float:
        return float(abs(self.values.sum() - (self.v_full - self.v_empty)))


class GradCamConfig(BaseModel):
    tap_layer: str = "relu2"
    activation: Literal["post-relu"] = "post-relu"
    upsample: Literal["bilinear-half-pixel"] = "bilinear-half-pixel"
    normalize: Literal["max-then-upsample"] = "max-then-upsample"


class GradCamResult(BaseModel):
    """Class activation map at tap resolution and upsampled to the input."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    raw: np.ndarray
    normalized: np.ndarray
    alphas: np.ndarray
    tap_layer: str
    class_index: int
    max_before_normalize: float

    @model_validator(mode="after")
    def check_ranges(self) -> "GradCamResult":
        if np.any(self.raw < 0):
            raise ValueError("raw heatmap must be nonnegative")
        if np.any(self.normalized < 0) or np.any(self.normalized > 1):
            raise ValueError("normalized heatmap must lie in [0, 1]")
        return self


class GuidedConfig(BaseModel):
    policy: Literal["guided"] = "guided"
    reduction: Literal["max-abs"] = "max-abs"


class GuidedBackpropResult(BaseModel):
    """Signed input gradient under the guided rule and its per-pixel reduction."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    gradient: np.ndarray
    reduced: np.ndarray
    class_index: int
    max_before_normalize: float
