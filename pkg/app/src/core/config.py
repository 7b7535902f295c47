import hashlib
from functools import lru_cache
from typing import Dict, Mapping, Tuple

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from ..models.config_models import EncoderConfig, StrategySpec
from ..models.sample_models import FAKE_FAMILIES, GeneratorFamily
from .errors import ConfigError

# Load environment variables from .env file
load_dotenv()

FULL_ABLATION_SIZES = (20000, 40000, 60000, 80000)


class Settings(BaseSettings):
    VLM_RUN_ROOT: str = "runs"
    LOG_LEVEL: str = "INFO"

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore")


@lru_cache()
def get_settings():
    return Settings()


def _split_csv(value):
    if isinstance(value, str):
        return tuple(part.strip() for part in value.split(",") if part.strip())
    return value


class DataSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    train_size: int = Field(default=10000, ge=2, description="Balanced train samples (REAL + GAN_LIKE)")
    eval_size: int = Field(default=1000, ge=2, description="Balanced samples per eval family")
    categories: int = Field(default=20, ge=1, description="Object categories C")
    families: Tuple[GeneratorFamily, ...] = Field(
        default=FAKE_FAMILIES, description="Fake families evaluated"
    )
    pretrain_size: int = Field(default=2000, ge=2, description="Captioned pre-training samples")
    scale_factor: float = Field(
        default=0.1, gt=0.0, description="Multiplier applied to the full-size ablation sizes"
    )

    @field_validator("families", mode="before")
    @classmethod
    def _families_csv(cls, value):
        return _split_csv(value)

    @property
    def ablation_sizes(self) -> Tuple[int, ...]:
        # keep every size even so the split stays balanced
        return tuple(2 * max(1, round(size * self.scale_factor / 2)) for size in FULL_ABLATION_SIZES)


class TrainingSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    epochs: int = Field(default=10, ge=0, description="Adaptation epochs")
    batch: int = Field(default=64, ge=1, description="Minibatch size")
    seed: int = Field(default=7, ge=0, lt=2**64, description="Training and data seed")
    pretrain_epochs: int = Field(default=10, ge=0, description="Contrastive pre-training epochs")
    pretrain_lr: float = Field(default=1e-3, gt=0.0, description="Contrastive pre-training learning rate")


class EvalSection(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    qualities: Tuple[int, ...] = Field(default=(75, 50), description="JPEG qualities of the sweep")
    sigmas: Tuple[float, ...] = Field(default=(1.0, 2.0), description="Blur sigmas of the sweep")
    kshot: int = Field(default=16, ge=1, description="Few-shot samples per class per category")

    @field_validator("qualities", "sigmas", mode="before")
    @classmethod
    def _grid_csv(cls, value):
        return _split_csv(value)


class ExperimentConfig(BaseModel):
    """
    Model for a full experiment; serialises to flat ``section.key=value`` text
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    model: EncoderConfig = Field(default_factory=EncoderConfig)
    strategy: StrategySpec = Field(default_factory=StrategySpec)
    data: DataSection = Field(default_factory=DataSection)
    training: TrainingSection = Field(default_factory=TrainingSection)
    eval: EvalSection = Field(default_factory=EvalSection)

    def flat(self) -> Dict[str, str]:
        flat: Dict[str, str] = {}
        for section, values in self.model_dump(mode="json").items():
            for key, value in values.items():
                flat[f"{section}.{key}"] = _format_value(value)
        return flat

    def to_canonical_text(self) -> str:
        return "".join(f"{key}={value}\n" for key, value in sorted(self.flat().items()))

    def digest(self) -> str:
        return hashlib.sha256(self.to_canonical_text().encode("utf-8")).hexdigest()

    @classmethod
    def from_flat(cls, values: Mapping[str, str]) -> "ExperimentConfig":
        nested: Dict[str, Dict[str, object]] = {}
        for key, raw in values.items():
            section, sep, name = key.partition(".")
            if not sep or section not in cls.model_fields:
                raise ConfigError(f"Unknown config key: {key}")
            nested.setdefault(section, {})[name] = None if raw == "none" else raw
        try:
            return cls.model_validate(nested)
        except ValidationError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e

    @classmethod
    def from_canonical_text(cls, text: str) -> "ExperimentConfig":
        return cls.from_flat(parse_key_values(text))

    def with_overrides(self, overrides: Mapping[str, str]) -> "ExperimentConfig":
        if not overrides:
            return self
        merged = self.flat()
        for key in overrides:
            if key not in merged:
                raise ConfigError(f"Unknown config key: {key}")
        merged.update(overrides)
        return self.from_flat(merged)


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_key_values(text: str) -> Dict[str, str]:
    """
    Parse ``key=value`` lines; blank lines and ``#`` comments are skipped

    Args:
        text: Config file contents

    Returns:
        Ordered mapping of keys to raw string values
    """
    values: Dict[str, str] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"Line {number} is not key=value: {line!r}")
        values[key.strip()] = value.strip()
    return values
