"""
Post-processing perturbations: JPEG quantisation round-trip and Gaussian blur.

Images are planar float arrays ``[3, H, W]`` with values in [0, 1].
"""

import math

import numpy as np
from scipy.fft import dctn, idctn
from scipy.ndimage import correlate1d

from ..core.errors import DataError

BLOCK = 8

# IJG base tables (quality 50)
LUMA_QUANT = np.array(
    [
        [16, 11, 10, 16, 24, 40, 51, 61],
        [12, 12, 14, 19, 26, 58, 60, 55],
        [14, 13, 16, 24, 40, 57, 69, 56],
        [14, 17, 22, 29, 51, 87, 80, 62],
        [18, 22, 37, 56, 68, 109, 103, 77],
        [24, 35, 55, 64, 81, 104, 113, 92],
        [49, 64, 78, 87, 103, 121, 120, 101],
        [72, 92, 95, 98, 112, 100, 103, 99],
    ],
    dtype=np.int64,
)

CHROMA_QUANT = np.array(
    [
        [17, 18, 24, 47, 99, 99, 99, 99],
        [18, 21, 26, 66, 99, 99, 99, 99],
        [24, 26, 56, 99, 99, 99, 99, 99],
        [47, 66, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
        [99, 99, 99, 99, 99, 99, 99, 99],
    ],
    dtype=np.int64,
)

# ITU-R BT.601 full range
RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
YCBCR_TO_RGB = np.array(
    [
        [1.0, 0.0, 1.402],
        [1.0, -0.344136, -0.714136],
        [1.0, 1.772, 0.0],
    ]
)
CHROMA_OFFSET = np.array([0.0, 128.0, 128.0])


def quality_scale(quality: int) -> int:
    """IJG scaling percentage for a quality in [1, 100]"""
    if not isinstance(quality, (int, np.integer)) or not 1 <= quality <= 100:
        raise DataError(f"JPEG quality must be an integer in [1, 100], got {quality!r}")
    return 5000 // quality if quality < 50 else 200 - 2 * int(quality)


def scaled_table(base: np.ndarray, quality: int) -> np.ndarray:
    s = quality_scale(quality)
    return np.clip((base * s + 50) // 100, 1, 255)


def _blockify(plane: np.ndarray) -> np.ndarray:
    h, w = plane.shape
    return plane.reshape(h // BLOCK, BLOCK, w // BLOCK, BLOCK).transpose(0, 2, 1, 3)


def _unblockify(blocks: np.ndarray) -> np.ndarray:
    bh, bw = blocks.shape[:2]
    return blocks.transpose(0, 2, 1, 3).reshape(bh * BLOCK, bw * BLOCK)


def _quantize_plane(plane: np.ndarray, table: np.ndarray) -> np.ndarray:
    blocks = _blockify(plane - 128.0)
    coeffs = dctn(blocks, type=2, norm="ortho", axes=(-2, -1))
    coeffs = np.rint(coeffs / table) * table
    return _unblockify(idctn(coeffs, type=2, norm="ortho", axes=(-2, -1))) + 128.0


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[0] != 3 or img.shape[1] < 1 or img.shape[2] < 1:
        raise DataError(f"expected a planar RGB image of shape (3, H, W), got {img.shape}")
    return img


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    """
    Lossy JPEG round-trip without entropy coding or chroma subsampling.

    Args:
        img: Planar RGB image [3, H, W] in [0, 1]; sides that are not multiples
            of 8 are padded symmetrically and cropped back
        quality: IJG quality in [1, 100]

    Returns:
        Decoded image with the input's dtype, on the 8-bit grid
    """
    img = _check_image(img)
    luma = scaled_table(LUMA_QUANT, quality)
    chroma = scaled_table(CHROMA_QUANT, quality)
    _, h, w = img.shape
    pad_h, pad_w = -h % BLOCK, -w % BLOCK
    rgb = np.pad(img.astype(np.float64), ((0, 0), (0, pad_h), (0, pad_w)), mode="symmetric") * 255.0

    ycc = np.einsum("ij,jhw->ihw", RGB_TO_YCBCR, rgb) + CHROMA_OFFSET[:, None, None]
    ycc = np.stack(
        [_quantize_plane(ycc[0], luma), _quantize_plane(ycc[1], chroma), _quantize_plane(ycc[2], chroma)]
    )
    out = np.einsum("ij,jhw->ihw", YCBCR_TO_RGB, ycc - CHROMA_OFFSET[:, None, None])
    out = np.clip(np.rint(out), 0, 255)[:, :h, :w] / 255.0
    return out.astype(img.dtype)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised 1-D kernel on [-ceil(3 sigma), ceil(3 sigma)]"""
    if not sigma > 0:
        raise DataError(f"blur sigma must be positive, got {sigma!r}")
    radius = int(math.ceil(3 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def gaussian_blur(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur per channel, horizontal then vertical, reflect padding"""
    img = _check_image(img)
    kernel = gaussian_kernel(sigma)
    out = correlate1d(img.astype(np.float64), kernel, axis=2, mode="reflect")
    out = correlate1d(out, kernel, axis=1, mode="reflect")
    return out.astype(img.dtype)


def psnr(img: np.ndarray, reference: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images; inf when identical"""
    mse = float(np.mean((np.asarray(img, np.float64) - np.asarray(reference, np.float64)) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


AUGMENT_SIGMAS = (1.0, 2.0)
AUGMENT_QUALITIES = (75, 50)


def augment_images(images: np.ndarray, rng) -> np.ndarray:
    """
    Train-time corruption: each image is blurred with probability 1/2
    (sigma 1 or 2), then JPEG round-tripped with probability 1/2 (quality 75 or 50).

    Args:
        images: Planar batch [n, 3, H, W]
        rng: SeededRng; the draw sequence depends only on n
    """
    n = len(images)
    coins = rng.uniform((n, 4))
    out = np.array(images, copy=True)
    for i in range(n):
        if coins[i, 0] < 0.5:
            out[i] = gaussian_blur(out[i], AUGMENT_SIGMAS[int(coins[i, 1] * len(AUGMENT_SIGMAS))])
        if coins[i, 2] < 0.5:
            out[i] = jpeg_roundtrip(out[i], AUGMENT_QUALITIES[int(coins[i, 3] * len(AUGMENT_QUALITIES))])
    return out
