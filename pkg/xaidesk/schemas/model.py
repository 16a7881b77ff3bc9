"""Model architecture schemas."""

from pydantic import BaseModel, Field, field_validator

TOYCNN_VERSION = "toycnn-v1"


class ArchitectureConfig(BaseModel):
    """Shape of the toy convolutional classifier."""

    input_size: int = Field(64, ge=4)
    conv1_channels: int = Field(16, ge=1)
    conv2_channels: int = Field(32, ge=1)
    hidden: int = Field(64, ge=1)
    classes: int = Field(4, ge=2)
    kernel: int = Field(3, ge=1)
    version: str = TOYCNN_VERSION

    @field_validator("input_size")
    @classmethod
    def input_divisible_by_four(cls, v: int) -> int:
        """Two 2x2 pools need an input side divisible by four."""
        if v % 4:
            raise ValueError("input_size must be divisible by 4")
        return v

    @field_validator("kernel")
    @classmethod
    def kernel_is_odd(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("kernel must be odd to keep spatial size")
        return v

    @property
    def flat_features(self) -> int:
        side = self.input_size // 4
        return self.conv2_channels * side * side

    @classmethod
    def reduced(cls) -> "ArchitectureConfig":
        """16x16 variant used for gradient soundness checks."""
        return cls(input_size=16, conv1_channels=4, conv2_channels=8, hidden=16)
