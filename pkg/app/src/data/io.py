from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
from PIL import Image

from ..core.errors import DataError
from ..models.sample_models import SplitEntry

PathLike = Union[str, Path]


def to_uint8(image: np.ndarray) -> np.ndarray:
    """Planar [3, H, W] floats in [0, 1] -> interleaved [H, W, 3] bytes"""
    return np.clip(np.rint(np.asarray(image, np.float64) * 255.0), 0, 255).astype(np.uint8).transpose(1, 2, 0)


def save_ppm(image: np.ndarray, path: PathLike) -> Path:
    """Write a binary PPM (P6, maxval 255)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(to_uint8(image))).save(path, format="PPM")
    return path


def load_ppm(path: PathLike) -> np.ndarray:
    """Read a PPM as planar float32 [3, H, W] in [0, 1]"""
    with Image.open(path) as img:
        if img.format != "PPM":
            raise DataError(f"{path} is not a PPM file")
        pixels = np.asarray(img.convert("RGB"), dtype=np.float32)
    return (pixels / 255.0).transpose(2, 0, 1).copy()


def write_manifest(entries: Iterable[SplitEntry], path: PathLike) -> Path:
    """One ``family,category,seed,label`` line per entry"""
    path = Path(path)
    path.write_text("".join(f"{e.to_line()}\n" for e in entries), encoding="utf-8")
    return path


def read_manifest(path: PathLike) -> List[SplitEntry]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Split manifest not found: {path}")
    entries = []
    for number, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entries.append(SplitEntry.from_line(line))
        except ValueError as e:
            raise DataError(f"{path}:{number}: malformed manifest line {line!r}") from e
    return entries
