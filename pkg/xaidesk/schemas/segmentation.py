"""Baseline schema: what replaces an absent superpixel."""

from typing import Literal, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator


class Baseline(BaseModel):
    """Constant fill used for removed superpixels and deleted pixels."""

    kind: Literal["gray", "mean"] = "gray"
    value: Tuple[int, int, int] = (128, 128, 128)

    @model_validator(mode="after")
    def check_values(self) -> "Baseline":
        if any(not 0 <= v <= 255 for v in self.value):
            raise ValueError("baseline channel values must lie in [0, 255]")
        if self.kind == "gray" and len(set(self.value)) != 1:
            raise ValueError("gray baseline needs equal channel values")
        return self

    @classmethod
    def gray(cls, level: int = 128) -> "Baseline":
        return cls(kind="gray", value=(level, level, level))

    @classmethod
    def channel_mean(cls, means) -> "Baseline":
        """Per-channel dataset mean, rounded half-up to 8 bits."""
        rounded = tuple(int(np.floor(float(m) + 0.5)) for m in means)
        return cls(kind="mean", value=rounded)

    def color(self) -> np.ndarray:
        return np.asarray(self.value, dtype=np.uint8)

    def describe(self) -> str:
        if self.kind == "gray":
            return f"gray:{self.value[0]}"
        return "mean:" + ",".join(str(v) for v in self.value)


class SlicConfig(BaseModel):
    """Parameters of the simplified SLIC segmenter."""

    n_segments: int = Field(64, ge=1)
    compactness: float = Field(10.0, gt=0)
    iterations: int = Field(10, ge=1)
