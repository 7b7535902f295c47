"""
Synthetic generator families, perturbations, splits and their file formats.
"""

from .io import load_ppm, read_manifest, save_ppm, write_manifest
from .perturb import (
    augment_images,
    gaussian_blur,
    gaussian_kernel,
    jpeg_roundtrip,
    psnr,
    quality_scale,
    scaled_table,
)
from .splits import build_splits, kshot_subset
from .synth import artifact_frequency, generate_sample, materialize, pretraining_corpus

__all__ = [
    "artifact_frequency",
    "augment_images",
    "build_splits",
    "gaussian_blur",
    "gaussian_kernel",
    "generate_sample",
    "jpeg_roundtrip",
    "kshot_subset",
    "load_ppm",
    "materialize",
    "pretraining_corpus",
    "psnr",
    "quality_scale",
    "read_manifest",
    "save_ppm",
    "scaled_table",
    "write_manifest",
]
