from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class EncoderConfig(BaseModel):
    """
    Model for the toy dual-encoder dimensions
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    d_model: int = Field(default=64, ge=1, description="Transformer width of both towers")
    n_layers: int = Field(default=2, ge=1, description="Transformer blocks per tower")
    n_heads: int = Field(default=4, ge=1, description="Attention heads per block")
    d_embed: int = Field(default=64, ge=1, description="Shared projection dimension")
    patch_size: int = Field(default=8, ge=1, description="Side of a square image patch")
    image_side: int = Field(default=64, ge=1, description="Input image width and height")
    context_len: int = Field(
        default=32,
        ge=3,
        description="Text context length L; 32 leaves room for M=24 prompt contexts",
    )

    @model_validator(mode="after")
    def _check_divisibility(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.image_side % self.patch_size != 0:
            raise ValueError(
                f"image_side ({self.image_side}) must be divisible by patch_size ({self.patch_size})"
            )
        return self

    @property
    def n_patches(self) -> int:
        return (self.image_side // self.patch_size) ** 2

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3


class StrategyKind(str, Enum):
    LINEAR_PROBE = "linear"
    FINE_TUNE = "finetune"
    PROMPT_TUNE = "prompt"
    ADAPTER = "adapter"


DEFAULT_LEARNING_RATES = {
    StrategyKind.LINEAR_PROBE: 1e-2,
    StrategyKind.FINE_TUNE: 1e-4,
    StrategyKind.PROMPT_TUNE: 5e-3,
    StrategyKind.ADAPTER: 3e-3,
}

PROMPT_LENGTHS = (4, 8, 16, 24)


class StrategySpec(BaseModel):
    """
    Model for one adaptation strategy and its hyperparameters
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: StrategyKind = Field(default=StrategyKind.PROMPT_TUNE, description="Adaptation strategy")
    m: int = Field(default=16, ge=1, description="Prompt context tokens (PromptTune)")
    position: str = Field(default="front", description="Context placement (PromptTune)")
    reduction: int = Field(default=2, ge=1, description="Bottleneck reduction r (Adapter)")
    alpha: float = Field(default=0.2, ge=0.0, le=1.0, description="Residual blend ratio (Adapter)")
    lr: Optional[float] = Field(
        default=None, gt=0.0, description="Learning rate; None picks the per-kind default"
    )
    augment: bool = Field(
        default=False, description="Train on randomly blurred/JPEG-compressed images"
    )

    @model_validator(mode="after")
    def _check_position(self):
        if self.position != "front":
            raise ValueError("Only 'front' context placement is supported")
        return self

    @property
    def learning_rate(self) -> float:
        return self.lr if self.lr is not None else DEFAULT_LEARNING_RATES[self.kind]

    def check_against(self, config: EncoderConfig) -> None:
        """Raise ValueError when the strategy does not fit the encoder dimensions"""
        if self.kind == StrategyKind.ADAPTER and config.d_embed % self.reduction != 0:
            raise ValueError(
                f"reduction {self.reduction} does not divide d_embed {config.d_embed}"
            )
