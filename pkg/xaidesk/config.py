"""Configuration settings for the explainability engine."""

from typing import Literal, Tuple

from pydantic import BaseModel, Field, field_validator


class Settings(BaseModel):
    """Engine defaults. The command line is flags-only, so nothing is read from the environment."""

    # Segmentation defaults per method
    LIME_GRID: Tuple[int, int] = (8, 8)
    SHAP_GRID: Tuple[int, int] = (3, 3)
    # one segmentation for every column of --method all
    SHARED_GRID: Tuple[int, int] = (3, 3)

    # Perturbation baseline
    BASELINE_GRAY: int = Field(128, ge=0, le=255)

    # Rendering and faithfulness
    OVERLAY_ALPHA: float = Field(0.5, ge=0.0, le=1.0)
    DELETION_STEPS: int = Field(20, ge=2)
    GRID_GUTTER: int = 2

    # Gradient methods
    GRADCAM_TAP: str = "relu2"

    # Training
    TRAIN_EPOCHS: int = 5
    TRAIN_LR: float = 0.005
    EVAL_SAMPLES: int = 200

    # Execution
    WORKERS: int = Field(1, ge=1)
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    # Report
    REPORT_VERSION: str = "xaidesk-report-1"
    REPORT_FILE: str = "report.json"

    @field_validator("LIME_GRID", "SHAP_GRID", "SHARED_GRID")
    @classmethod
    def positive_grid(cls, v: Tuple[int, int]) -> Tuple[int, int]:
        if min(v) < 1:
            raise ValueError("grid dimensions must be positive")
        return v


settings = Settings()
