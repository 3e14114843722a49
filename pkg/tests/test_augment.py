import numpy as np
import pytest

from splatrig.augment import AugmentParams, augment_image
from splatrig.renderer import Image


def img_from(arr):
    arr = np.asarray(arr, dtype=np.uint8)
    return Image(width=arr.shape[1], height=arr.shape[0], pixels=arr)


IDENTITY = AugmentParams(noise_sigma=0.0, erase_prob=0.0,
                         brightness_range=(1.0, 1.0), contrast_range=(1.0, 1.0))


def test_identity_settings(rng):
    im = img_from(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    out = augment_image(im, IDENTITY, 0)
    assert np.array_equal(out.pixels, im.pixels)


def test_deterministic_per_seed_and_index(rng):
    im = img_from(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    params = AugmentParams(seed=7)
    a = augment_image(im, params, 3)
    b = augment_image(im, params, 3)
    assert np.array_equal(a.pixels, b.pixels)


def test_index_changes_output(rng):
    im = img_from(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    params = AugmentParams(seed=7)
    a = augment_image(im, params, 0)
    b = augment_image(im, params, 1)
    assert not np.array_equal(a.pixels, b.pixels)


def test_seed_changes_output(rng):
    im = img_from(rng.integers(0, 256, (32, 32, 3), dtype=np.uint8))
    a = augment_image(im, AugmentParams(seed=1), 0)
    b = augment_image(im, AugmentParams(seed=2), 0)
    assert not np.array_equal(a.pixels, b.pixels)


def test_noise_statistics_at_mid_gray():
    # clamping is negligible at mid-gray, so output std ~ noise_sigma
    im = img_from(np.full((256, 256, 3), 128, dtype=np.uint8))
    params = AugmentParams(noise_sigma=10.0, erase_prob=0.0,
                           brightness_range=(1.0, 1.0), contrast_range=(1.0, 1.0), seed=5)
    out = augment_image(im, params, 0)
    std = out.pixels.astype(np.float64).std()
    assert 9.5 <= std <= 10.5


def test_erase_always_fires_at_prob_one(rng):
    im = img_from(np.full((64, 64, 3), 128, dtype=np.uint8))
    params = AugmentParams(noise_sigma=0.0, erase_prob=1.0, erase_area=(0.1, 0.1),
                           brightness_range=(1.0, 1.0), contrast_range=(1.0, 1.0), seed=3)
    out = augment_image(im, params, 0)
    changed = np.any(out.pixels != 128, axis=2)
    # rectangle of ~10% of the pixels overwritten with one gray value
    assert 0.05 <= changed.mean() <= 0.2
    vals = out.pixels[changed]
    assert len(np.unique(vals)) <= 3  # one gray, rounded per channel


def test_brightness_scales_intensity():
    im = img_from(np.full((16, 16, 3), 100, dtype=np.uint8))
    params = AugmentParams(noise_sigma=0.0, erase_prob=0.0,
                           brightness_range=(1.2, 1.2), contrast_range=(1.0, 1.0))
    out = augment_image(im, params, 0)
    assert np.all(out.pixels == 120)


def test_contrast_pivots_at_128():
    im = img_from(np.full((16, 16, 3), 128, dtype=np.uint8))
    params = AugmentParams(noise_sigma=0.0, erase_prob=0.0,
                           brightness_range=(1.0, 1.0), contrast_range=(0.5, 0.5))
    out = augment_image(im, params, 0)
    assert np.all(out.pixels == 128)


def test_invalid_params():
    with pytest.raises(ValueError):
        AugmentParams(noise_sigma=-1)
    with pytest.raises(ValueError):
        AugmentParams(erase_prob=1.5)
    with pytest.raises(ValueError):
        AugmentParams(brightness_range=(1.2, 0.8))
    with pytest.raises(ValueError):
        AugmentParams(erase_area=(0.5, 1.5))
