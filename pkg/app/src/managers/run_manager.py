import hashlib
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Union

from ... import __version__
from ..core.config import ExperimentConfig, get_settings
from ..models.run_models import ArtifactEntry, RunManifest
from .checkpoint_manager import atomic_write_bytes

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def file_sha256(path: Union[str, Path]) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManager:
    """
    Owns the run directory of one command and its manifest.

    The directory defaults to ``<VLM_RUN_ROOT>/<command>-<digest prefix>-seed<seed>``,
    so identical configs land in the same place.
    """

    def __init__(
        self,
        command: str,
        config: ExperimentConfig,
        seed: int,
        out_dir: Optional[Union[str, Path]] = None,
    ):
        self.command = command
        self.config = config
        self.seed = seed
        if out_dir is None:
            out_dir = Path(get_settings().VLM_RUN_ROOT) / f"{command}-{config.digest()[:12]}-seed{seed}"
        self.run_dir = Path(out_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.manifest = RunManifest(
            command=command,
            config_digest=config.digest(),
            code_version=__version__,
            seed=seed,
            started_at=datetime.now(timezone.utc),
        )
        logger.info(f"Run directory: {self.run_dir}")

    def path(self, name: str) -> Path:
        return self.run_dir / name

    def record(self, paths: Iterable[Union[str, Path]]) -> None:
        """Add output files to the manifest with their content hashes"""
        for path in paths:
            path = Path(path)
            relative = path.resolve().relative_to(self.run_dir.resolve()).as_posix()
            self.manifest.outputs = [e for e in self.manifest.outputs if e.path != relative]
            self.manifest.outputs.append(ArtifactEntry(path=relative, sha256=file_sha256(path)))

    def finish(self) -> Path:
        """Write the config and the manifest; returns the manifest path"""
        config_path = atomic_write_bytes(
            self.path("config.txt"), self.config.to_canonical_text().encode("utf-8")
        )
        self.record([config_path])
        self.manifest.finished_at = datetime.now(timezone.utc)
        manifest_path = atomic_write_bytes(
            self.path(MANIFEST_NAME), (self.manifest.model_dump_json(indent=2) + "\n").encode("utf-8")
        )
        logger.info(f"Run finished: {len(self.manifest.outputs)} outputs listed in {manifest_path}")
        return manifest_path
