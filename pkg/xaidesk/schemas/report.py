"""Attribution and report.json schemas."""

from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

MethodName = Literal["lime", "shap", "gradcam", "guided"]
METHOD_ORDER = ("lime", "shap", "gradcam", "guided")


class Attribution(BaseModel):
    """
    One method's output in a common shape.

    Exactly one payload is set: per-superpixel scores together with the
    segmentation they index, or a per-pixel map in [0, 1].
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    method: MethodName
    class_index: int
    scores: Optional[np.ndarray] = None
    segmentation: Optional[Any] = None
    pixel_map: Optional[np.ndarray] = None
    max_before_normalize: Optional[float] = None
    baseline: Optional[str] = None

    @model_validator(mode="after")
    def check_payload(self) -> "Attribution":
        if (self.scores is None) == (self.pixel_map is None):
            raise ValueError("exactly one of scores or pixel_map must be set")
        if self.scores is not None:
            if self.segmentation is None:
                raise ValueError("superpixel scores need their segmentation")
            if self.scores.shape != (self.segmentation.region_count,):
                raise ValueError("score count must equal the region count")
        elif np.any(self.pixel_map < 0) or np.any(self.pixel_map > 1):
            raise ValueError("pixel maps must lie in [0, 1]")
        return self

    @property
    def kind(self) -> str:
        return "superpixel" if self.scores is not None else "pixel"


class AttributionRecord(BaseModel):
    """Serialized payload: raw signed scores, or the file holding the map."""

    kind: Literal["superpixel", "pixel"]
    values: Optional[List[float]] = None
    map_file: Optional[str] = None
    segmentation: Optional[Dict[str, Any]] = None
    max_before_normalize: Optional[float] = None
    baseline: Optional[str] = None

    @model_validator(mode="after")
    def check_payload(self) -> "AttributionRecord":
        if (self.values is None) == (self.map_file is None):
            raise ValueError("exactly one of values or map_file must be set")
        return self


class MethodEntry(BaseModel):
    name: MethodName
    config: Dict[str, Any]
    attribution: AttributionRecord
    deletion_auc: float
    model_calls: int
    stability: Optional[float] = None


class ReportDocument(BaseModel):
    """Top-level report.json document; field order is the serialized key order."""

    version: str
    model_digest: str
    image: str
    class_index: int
    methods: List[MethodEntry] = []
