"""
Trainable-parameter accounting per strategy.
"""

from typing import List, Optional

import pandas as pd

from ..models.config_models import PROMPT_LENGTHS, EncoderConfig, StrategyKind, StrategySpec

# Width of the ViT-Large text transformer and shared embedding
FULL_SCALE_WIDTH = 768
# Parameter count of the ViT-Large dual encoder (~427M)
FULL_SCALE_BACKBONE_TOTAL = 427_616_513


def trainable_parameter_count(spec: StrategySpec, config: EncoderConfig, backbone_total: int) -> int:
    """
    Closed-form trainable parameter count.

    Args:
        spec: Strategy and hyperparameters
        config: Encoder dimensions
        backbone_total: Total backbone parameters (FineTune trains all of them)

    Returns:
        PromptTune M*d_model, LinearProbe d_model+1,
        Adapter 2*d_embed*(d_embed/r) + d_embed/r + d_embed, FineTune backbone_total
    """
    if spec.kind == StrategyKind.PROMPT_TUNE:
        return spec.m * config.d_model
    if spec.kind == StrategyKind.LINEAR_PROBE:
        return config.d_model + 1
    if spec.kind == StrategyKind.ADAPTER:
        hidden = config.d_embed // spec.reduction
        return 2 * config.d_embed * hidden + hidden + config.d_embed
    return backbone_total


def parameter_ledger(config: EncoderConfig, backbone_total: int, spec: Optional[StrategySpec] = None) -> pd.DataFrame:
    """
    Trainable counts for every strategy at toy scale and at d=768.

    Args:
        config: Toy encoder dimensions
        backbone_total: Toy backbone parameter count
        spec: Base spec for reduction; one PromptTune row is emitted per prompt length M

    Returns:
        DataFrame with columns strategy, setting, toy, full_scale
    """
    spec = spec or StrategySpec()
    full = EncoderConfig(d_model=FULL_SCALE_WIDTH, d_embed=FULL_SCALE_WIDTH, n_heads=12, patch_size=14, image_side=224)
    rows: List[dict] = []

    def add(row_spec: StrategySpec, setting: str) -> None:
        rows.append(
            {
                "strategy": row_spec.kind.value,
                "setting": setting,
                "toy": trainable_parameter_count(row_spec, config, backbone_total),
                "full_scale": trainable_parameter_count(row_spec, full, FULL_SCALE_BACKBONE_TOTAL),
            }
        )

    add(spec.model_copy(update={"kind": StrategyKind.LINEAR_PROBE}), "")
    for m in PROMPT_LENGTHS:
        add(spec.model_copy(update={"kind": StrategyKind.PROMPT_TUNE, "m": m}), f"m={m}")
    add(spec.model_copy(update={"kind": StrategyKind.ADAPTER}), f"r={spec.reduction}")
    add(spec.model_copy(update={"kind": StrategyKind.FINE_TUNE}), "")
    return pd.DataFrame(rows, columns=["strategy", "setting", "toy", "full_scale"])
