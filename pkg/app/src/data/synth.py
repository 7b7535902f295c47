"""
Procedural generator families.

Every family starts from the same kind of base texture: a band-limited 1/f
noise field overlaid with a category pattern and tint.  REAL adds per-pixel
sensor noise to it; fake families never carry that noise and instead leave
their own trace:

- GAN_LIKE adds a non-negative periodic checkerboard (upsampling fingerprint)
  whose period is fixed per category.
- DIFFUSION_LIKE low-passes the base and shifts its tone.
- COMMERCIAL_LIKE blends both mechanisms with random strengths.
"""

import logging
from typing import Iterable, List, Tuple, Union

import numpy as np

from ..core.errors import DataError
from ..models.sample_models import GeneratorFamily, SampleRecord, SplitEntry
from ..prompts.captions import CATEGORY_PATTERNS, CATEGORY_TINTS, SCALE_WORDS, describe
from ..tensor.rng import SeededRng, derive_seed
from .perturb import gaussian_blur

logger = logging.getLogger(__name__)

DEFAULT_SIDE = 64
SPECTRAL_SLOPES = (2.2, 1.4)  # coarse, fine
ARTIFACT_PERIODS = (2, 4, 8)
CHECKER_AMPLITUDE = 0.08
SENSOR_NOISE = 0.02
DIFFUSION_SIGMA = 1.2
DIFFUSION_TONE = 0.05

TINT_GAINS = {
    "red": (1.15, 0.9, 0.9),
    "green": (0.9, 1.15, 0.9),
    "blue": (0.9, 0.9, 1.15),
    "gray": (1.0, 1.0, 1.0),
}


def artifact_period(category: int) -> int:
    """Checkerboard period in pixels of GAN_LIKE samples of a category"""
    return ARTIFACT_PERIODS[category % len(ARTIFACT_PERIODS)]


def artifact_frequency(category: int, side: int) -> int:
    """FFT bin (along both axes) of the GAN_LIKE checkerboard"""
    return side // artifact_period(category)


def _spectral_noise(rng: SeededRng, side: int, slope: float) -> np.ndarray:
    white = rng.normal((3, side, side))
    fy = np.fft.fftfreq(side)[:, None]
    fx = np.fft.rfftfreq(side)[None, :]
    radius = np.sqrt(fy * fy + fx * fx)
    radius[0, 0] = 1.0
    falloff = radius ** (-slope / 2.0)
    falloff[0, 0] = 0.0
    field = np.fft.irfft2(np.fft.rfft2(white) * falloff, s=(side, side))
    field -= field.mean(axis=(1, 2), keepdims=True)
    return field / (field.std() + 1e-12)


def _pattern(name: str, rng: SeededRng, side: int) -> np.ndarray:
    y, x = np.mgrid[0:side, 0:side].astype(np.float64) / side
    phase = rng.uniform(2, high=2 * np.pi)
    freq = 3.0 + 3.0 * rng.uniform(1)[0]
    if name == "stripes":
        return np.sin(2 * np.pi * freq * x + phase[0])
    if name == "waves":
        return np.sin(2 * np.pi * freq * (x + 0.15 * np.sin(2 * np.pi * 2 * y + phase[1])))
    if name == "rings":
        cy, cx = rng.uniform(2, 0.3, 0.7)
        return np.cos(2 * np.pi * freq * np.hypot(y - cy, x - cx) + phase[0])
    if name == "blobs":
        centers = rng.uniform((4, 2))
        field = np.zeros((side, side))
        for cy, cx in centers:
            field += np.exp(-((y - cy) ** 2 + (x - cx) ** 2) / (2 * 0.08**2))
        return 2.0 * field / max(field.max(), 1e-12) - 1.0
    if name == "grain":
        return rng.uniform((side, side), -1.0, 1.0)
    raise DataError(f"Unknown category pattern: {name}")


def _checkerboard(side: int, period: int) -> np.ndarray:
    y, x = np.mgrid[0:side, 0:side].astype(np.float64)
    wave = 2 * np.pi / period
    # in [0, 1]: the upsampling trace also lifts the mean
    return 0.5 * (np.cos(wave * y) * np.cos(wave * x) + 1.0)


def base_texture(category: int, seed: int, side: int = DEFAULT_SIDE) -> Tuple[np.ndarray, int]:
    """
    Noise-free base image shared by all families.

    Returns:
        (planar float64 image, spectral scale index)
    """
    rng = SeededRng(derive_seed(seed, "base", category))
    scale_index = int(rng.integers(0, len(SCALE_WORDS), 1)[0])
    pattern_name = CATEGORY_PATTERNS[(category // len(CATEGORY_TINTS)) % len(CATEGORY_PATTERNS)]
    tint = TINT_GAINS[CATEGORY_TINTS[category % len(CATEGORY_TINTS)]]

    texture = _spectral_noise(rng.split("texture"), side, SPECTRAL_SLOPES[scale_index])
    pattern = _pattern(pattern_name, rng.split("pattern"), side)
    image = 0.5 + 0.12 * texture + 0.1 * pattern[None]
    image = (image - 0.5) * np.asarray(tint)[:, None, None] + 0.5
    return image, scale_index


def generate_sample(
    family: Union[GeneratorFamily, str],
    category: int,
    seed: int,
    side: int = DEFAULT_SIDE,
) -> SampleRecord:
    """
    Deterministically generate one sample.

    Args:
        family: Generator family (enum or its value)
        category: Object category index
        seed: Provenance seed; (family, category, seed) fixes the pixels
        side: Image side in pixels (a multiple of 8)

    Returns:
        SampleRecord with float32 planar pixels in [0, 1] and a caption
    """
    try:
        family = GeneratorFamily(family)
    except ValueError:
        raise DataError(f"Unknown generator family: {family!r}") from None
    if category < 0:
        raise DataError(f"category must be non-negative, got {category}")
    if side < 8 or side % 8 != 0:
        raise DataError(f"image side must be a positive multiple of 8, got {side}")

    image, scale_index = base_texture(category, seed, side)
    rng = SeededRng(derive_seed(seed, "artifact", family.value, category))

    if family is GeneratorFamily.REAL:
        image = image + rng.split("sensor").normal((3, side, side), std=SENSOR_NOISE)
    elif family is GeneratorFamily.GAN_LIKE:
        image = image + CHECKER_AMPLITUDE * _checkerboard(side, artifact_period(category))[None]
    elif family is GeneratorFamily.DIFFUSION_LIKE:
        image = gaussian_blur(image, DIFFUSION_SIGMA) + DIFFUSION_TONE
    elif family is GeneratorFamily.COMMERCIAL_LIKE:
        smooth_weight, checker_weight = rng.uniform(2, 0.3, 0.8)
        period = ARTIFACT_PERIODS[int(rng.integers(0, len(ARTIFACT_PERIODS), 1)[0])]
        smoothed = gaussian_blur(image, DIFFUSION_SIGMA)
        image = smooth_weight * smoothed + (1.0 - smooth_weight) * image
        image = image + checker_weight * CHECKER_AMPLITUDE * _checkerboard(side, period)[None]
        image = image + DIFFUSION_TONE * smooth_weight

    image = np.clip(image, 0.0, 1.0).astype(np.float32)
    return SampleRecord(
        image=image,
        label=family.label,
        family=family,
        category=category,
        seed=seed,
        caption=describe(family.value, category, scale_index),
    )


def materialize(entries: Iterable[SplitEntry], side: int = DEFAULT_SIDE) -> List[SampleRecord]:
    """Regenerate the samples behind manifest entries, in order"""
    return [generate_sample(e.family, e.category, e.seed, side) for e in entries]


def pretraining_corpus(size: int, categories: int, seed: int, side: int = DEFAULT_SIDE) -> List[SampleRecord]:
    """
    Captioned samples drawn evenly from every family for contrastive pre-training
    """
    families = list(GeneratorFamily)
    samples = []
    for i in range(size):
        family = families[i % len(families)]
        category = (i // len(families)) % categories
        samples.append(generate_sample(family, category, derive_seed(seed, "pretrain", i), side))
    logger.info(f"Generated {size} captioned pre-training samples")
    return samples
