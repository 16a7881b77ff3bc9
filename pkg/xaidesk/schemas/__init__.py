"""Pydantic schemas for configuration and results."""

from xaidesk.schemas.explanation import (
    GradCamConfig,
    GradCamResult,
    GuidedBackpropResult,
    GuidedConfig,
    LimeConfig,
    LimeExplanation,
    ShapConfig,
    ShapleyAttribution,
)
from xaidesk.schemas.model import ArchitectureConfig
from xaidesk.schemas.oracle import OracleBudget, SuiteResult, VerificationReport
from xaidesk.schemas.report import Attribution, AttributionRecord, MethodEntry, ReportDocument
from xaidesk.schemas.segmentation import Baseline, SlicConfig
