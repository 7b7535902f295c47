import numpy as np
import pytest
from pydantic import ValidationError

from app.src.core.errors import DataError
from app.src.data import (
    artifact_frequency,
    augment_images,
    build_splits,
    gaussian_blur,
    gaussian_kernel,
    generate_sample,
    jpeg_roundtrip,
    kshot_subset,
    load_ppm,
    psnr,
    quality_scale,
    read_manifest,
    save_ppm,
    scaled_table,
    write_manifest,
)
from app.src.data.perturb import CHROMA_QUANT, LUMA_QUANT
from app.src.models.sample_models import GeneratorFamily, SplitSpec
from app.src.tensor.rng import SeededRng


def _sample(family=GeneratorFamily.REAL, category=1, seed=11, side=32):
    return generate_sample(family, category, seed, side)


# JPEG


def test_quality_50_uses_base_tables():
    np.testing.assert_array_equal(scaled_table(LUMA_QUANT, 50), LUMA_QUANT)
    np.testing.assert_array_equal(scaled_table(CHROMA_QUANT, 50), CHROMA_QUANT)


def test_quality_extremes_clamp_tables():
    assert np.all(scaled_table(LUMA_QUANT, 100) == 1)
    assert np.all(scaled_table(LUMA_QUANT, 1) == 255)
    assert quality_scale(25) == 200
    assert quality_scale(75) == 50


@pytest.mark.parametrize("quality", [0, 101, 50.5, "50"])
def test_quality_out_of_range(quality):
    with pytest.raises(DataError):
        quality_scale(quality)


def test_jpeg_constant_image():
    img = np.full((3, 16, 16), 0.5)
    out = jpeg_roundtrip(img, 50)
    assert out.shape == img.shape
    assert np.max(np.abs(out - img)) <= 1 / 255


def test_jpeg_output_is_on_8bit_grid():
    out = jpeg_roundtrip(_sample().image, 75).astype(np.float64)
    assert out.min() >= 0.0 and out.max() <= 1.0
    np.testing.assert_allclose(out * 255.0, np.rint(out * 255.0), atol=1e-3)


def test_jpeg_pads_odd_sizes():
    img = SeededRng(2).uniform((3, 10, 13))
    assert jpeg_roundtrip(img, 60).shape == (3, 10, 13)


def test_jpeg_quality_orders_distortion():
    img = _sample().image
    assert psnr(jpeg_roundtrip(img, 100), img) > 40.0
    assert psnr(jpeg_roundtrip(img, 90), img) > psnr(jpeg_roundtrip(img, 10), img)


@pytest.mark.parametrize("seed", [11, 12, 13])
def test_jpeg_error_grows_as_quality_drops(seed):
    img = _sample(GeneratorFamily.GAN_LIKE, seed=seed).image.astype(np.float64)
    errors = [np.mean((jpeg_roundtrip(img, q).astype(np.float64) - img) ** 2) for q in (100, 75, 50)]
    assert errors[0] <= errors[1] <= errors[2]


def test_jpeg_rejects_non_planar_images():
    with pytest.raises(DataError):
        jpeg_roundtrip(np.zeros((16, 16, 3)), 50)


# blur


def test_blur_impulse_response_is_separable_kernel():
    img = np.zeros((3, 15, 15))
    img[:, 7, 7] = 1.0
    kernel = gaussian_kernel(1.0)
    assert len(kernel) == 7
    out = gaussian_blur(img, 1.0)
    for channel in out:
        np.testing.assert_allclose(channel[4:11, 4:11], np.outer(kernel, kernel), atol=1e-6)


def test_blur_sigma_two_kernel_has_thirteen_taps():
    kernel = gaussian_kernel(2.0)
    assert len(kernel) == 13
    assert kernel.sum() == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(kernel, kernel[::-1])


def test_blur_is_linear():
    a = SeededRng(3).uniform((3, 16, 16))
    b = SeededRng(4).uniform((3, 16, 16))
    mixed = gaussian_blur(0.7 * a - 1.3 * b, 1.5)
    np.testing.assert_allclose(mixed, 0.7 * gaussian_blur(a, 1.5) - 1.3 * gaussian_blur(b, 1.5), atol=1e-5)


def test_blur_keeps_constant_images():
    img = np.full((3, 8, 8), 0.25)
    np.testing.assert_allclose(gaussian_blur(img, 2.0), img, atol=1e-12)


@pytest.mark.parametrize("sigma", [0.0, -1.0])
def test_blur_sigma_must_be_positive(sigma):
    with pytest.raises(DataError):
        gaussian_blur(np.zeros((3, 8, 8)), sigma)


def test_psnr_of_identical_images_is_infinite():
    img = _sample().image
    assert psnr(img, img) == float("inf")


def test_augmentation_is_deterministic():
    batch = np.stack([_sample(seed=s).image for s in range(4)])
    a = augment_images(batch, SeededRng(5))
    b = augment_images(batch, SeededRng(5))
    assert a.shape == batch.shape and a.dtype == batch.dtype
    assert a.tobytes() == b.tobytes()


# generator families


def test_generate_sample_is_deterministic():
    a = _sample(GeneratorFamily.COMMERCIAL_LIKE)
    b = _sample(GeneratorFamily.COMMERCIAL_LIKE)
    assert a.image.tobytes() == b.image.tobytes()
    assert a.caption == b.caption


@pytest.mark.parametrize("family", list(GeneratorFamily))
def test_sample_record_fields(family):
    sample = _sample(family)
    assert sample.image.shape == (3, 32, 32)
    assert sample.image.dtype == np.float32
    assert sample.image.min() >= 0.0 and sample.image.max() <= 1.0
    assert sample.label == (0 if family is GeneratorFamily.REAL else 1)
    assert sample.caption.split()[:2] == ["stripes", "green"]


def test_gan_like_checkerboard_peak():
    side, category = 64, 1
    real = _sample(GeneratorFamily.REAL, category, side=side).image.astype(np.float64)
    fake = _sample(GeneratorFamily.GAN_LIKE, category, side=side).image.astype(np.float64)
    spectrum = np.abs(np.fft.fft2((fake - real).mean(axis=0)))
    assert (fake - real).mean() > 0.0
    spectrum[0, 0] = 0.0
    f = artifact_frequency(category, side)
    assert f == 16
    assert spectrum[f, f] >= 0.9 * spectrum.max()


def test_diffusion_like_is_smoother_than_real():
    real = _sample(GeneratorFamily.REAL).image.astype(np.float64)
    smooth = _sample(GeneratorFamily.DIFFUSION_LIKE).image.astype(np.float64)

    def roughness(img):
        return np.abs(np.diff(img, axis=2)).mean()

    assert roughness(smooth) < roughness(real)


@pytest.mark.parametrize(
    "family, category, side",
    [("photoshop", 0, 32), (GeneratorFamily.REAL, -1, 32), (GeneratorFamily.REAL, 0, 12)],
)
def test_generate_sample_errors(family, category, side):
    with pytest.raises(DataError):
        generate_sample(family, category, 1, side)


# splits


def test_build_splits_is_balanced_and_disjoint(split):
    assert len(split.train) == 40
    assert sum(e.label for e in split.train) == 20
    assert {e.family for e in split.train} == {GeneratorFamily.REAL, GeneratorFamily.GAN_LIKE}
    seeds = {e.seed for e in split.train}
    for family, entries in split.evaluation.items():
        assert len(entries) == 12
        assert sum(e.label for e in entries) == 6
        assert {e.family for e in entries} == {GeneratorFamily.REAL, family}
        assert seeds.isdisjoint(e.seed for e in entries)


def test_smaller_split_is_a_prefix():
    small = build_splits(SplitSpec(train_size=10, eval_size=4, categories=3, seed=9))
    large = build_splits(SplitSpec(train_size=30, eval_size=8, categories=3, seed=9))
    assert large.train[:10] == small.train
    for family in small.evaluation:
        assert large.evaluation[family][:4] == small.evaluation[family]


def test_odd_split_size():
    with pytest.raises(DataError):
        build_splits(SplitSpec(train_size=9, eval_size=4, categories=2))


def test_real_cannot_be_an_eval_family():
    with pytest.raises(ValidationError):
        SplitSpec(eval_families=(GeneratorFamily.REAL,))


def test_kshot_subset(split):
    subset = kshot_subset(split.train, 2, seed=1, categories=4)
    assert len(subset) == 16
    for category in range(4):
        for label in (0, 1):
            assert sum(1 for e in subset if e.category == category and e.label == label) == 2
    assert kshot_subset(split.train, 2, seed=1, categories=4) == subset
    assert kshot_subset(split.train, 0, seed=1) == []


def test_kshot_shortfall_names_the_gap(split):
    with pytest.raises(DataError, match="short by 1"):
        kshot_subset(split.train, 6, seed=1, categories=4)
    with pytest.raises(DataError, match="category 5"):
        kshot_subset(split.train, 1, seed=1, categories=6)


# file formats


def test_ppm_round_trip(tmp_path):
    img = _sample().image
    path = save_ppm(img, tmp_path / "sample.ppm")
    assert path.read_bytes()[:2] == b"P6"
    loaded = load_ppm(path)
    assert loaded.shape == img.shape
    assert np.max(np.abs(loaded - img)) <= 0.5 / 255 + 1e-6


def test_manifest_round_trip(split, tmp_path):
    path = write_manifest(split.train, tmp_path / "train.txt")
    assert read_manifest(path) == split.train
    first = path.read_text().splitlines()[0]
    assert first.startswith("real,0,")


def test_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_manifest(tmp_path / "missing.txt")
    bad = tmp_path / "bad.txt"
    bad.write_text("real,0,12\n")
    with pytest.raises(DataError, match="bad.txt:1"):
        read_manifest(bad)
