from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class GeneratorFamily(str, Enum):
    REAL = "real"
    GAN_LIKE = "gan_like"
    DIFFUSION_LIKE = "diffusion_like"
    COMMERCIAL_LIKE = "commercial_like"

    @property
    def label(self) -> int:
        return 0 if self is GeneratorFamily.REAL else 1


FAKE_FAMILIES = (
    GeneratorFamily.GAN_LIKE,
    GeneratorFamily.DIFFUSION_LIKE,
    GeneratorFamily.COMMERCIAL_LIKE,
)


class SplitEntry(BaseModel):
    """
    Model for one line of a split manifest: enough to regenerate the sample
    """

    model_config = ConfigDict(frozen=True)

    family: GeneratorFamily = Field(description="Generator family of the sample")
    category: int = Field(ge=0, description="Object category index")
    seed: int = Field(ge=0, lt=2**64, description="Provenance seed")
    label: int = Field(ge=0, le=1, description="0 = real, 1 = fake")

    def to_line(self) -> str:
        return f"{self.family.value},{self.category},{self.seed},{self.label}"

    @classmethod
    def from_line(cls, line: str) -> "SplitEntry":
        family, category, seed, label = line.strip().split(",")
        return cls(family=family, category=int(category), seed=int(seed), label=int(label))


class SampleRecord(BaseModel):
    """
    Model for a generated sample: planar float32 pixels [3, H, W] plus provenance
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    image: np.ndarray = Field(description="Planar RGB pixels in [0, 1], shape (3, H, W)")
    label: int = Field(ge=0, le=1, description="0 = real, 1 = fake")
    family: GeneratorFamily = Field(description="Generator family of the sample")
    category: int = Field(ge=0, description="Object category index")
    seed: int = Field(ge=0, lt=2**64, description="Provenance seed")
    caption: str = Field(default="", description="Descriptor caption used for pre-training")

    @property
    def entry(self) -> SplitEntry:
        return SplitEntry(
            family=self.family, category=self.category, seed=self.seed, label=self.label
        )


class SplitSpec(BaseModel):
    """
    Model for a train/eval split request
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    train_size: int = Field(default=10000, ge=0, description="Balanced REAL + GAN_LIKE train samples")
    eval_size: int = Field(default=1000, ge=0, description="Balanced samples per eval family")
    categories: int = Field(default=20, ge=1, description="Object categories C")
    train_family: GeneratorFamily = Field(
        default=GeneratorFamily.GAN_LIKE, description="The single fake family used for training"
    )
    eval_families: Tuple[GeneratorFamily, ...] = Field(
        default=FAKE_FAMILIES, description="Fake families with one eval set each"
    )
    seed: int = Field(default=7, ge=0, lt=2**64, description="Split seed")

    @model_validator(mode="after")
    def _check_sizes(self):
        if self.train_family is GeneratorFamily.REAL or GeneratorFamily.REAL in self.eval_families:
            raise ValueError("REAL is paired automatically and cannot be a fake family")
        return self


class Split(BaseModel):
    """
    Model for a built split: manifests only, pixels are regenerated on demand
    """

    train: List[SplitEntry] = Field(description="Interleaved real/fake train entries")
    evaluation: Dict[GeneratorFamily, List[SplitEntry]] = Field(
        description="Balanced eval entries per fake family"
    )
    spec: Optional[SplitSpec] = Field(default=None, description="Spec the split was built from")
