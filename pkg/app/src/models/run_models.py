from datetime import datetime
from typing import List, Optional

from pydantic import BaseModel, Field


class ArtifactEntry(BaseModel):
    """
    Model for one output file of a run
    """

    path: str = Field(description="Path relative to the run directory")
    sha256: str = Field(description="Content hash of the file")


class RunManifest(BaseModel):
    """
    Model for the reproducibility record written next to every run's outputs
    """

    command: str = Field(description="Subcommand that produced the run")
    config_digest: str = Field(description="SHA-256 of the canonical experiment config")
    code_version: str = Field(description="Package version string")
    seed: int = Field(description="Training/data seed")
    started_at: datetime = Field(description="UTC start time")
    finished_at: Optional[datetime] = Field(default=None, description="UTC end time")
    outputs: List[ArtifactEntry] = Field(default_factory=list, description="Files with hashes")


class FreezeReport(BaseModel):
    """
    Model for the outcome of a freeze-contract check
    """

    applicable: bool = Field(description="False for FineTune, where everything trains")
    frozen_ok: Optional[bool] = Field(
        default=None, description="True iff every frozen parameter is bitwise unchanged"
    )
    first_diff: Optional[str] = Field(
        default=None, description="Name of the first parameter whose bytes changed"
    )
