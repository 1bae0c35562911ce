import numpy as np
import pytest

from spillseg.config.schema.models import AugmentationConfig
from spillseg.core.errors import ShapeError
from spillseg.data.augment import (
    Transform,
    apply_geometry,
    apply_transform,
    augment,
    augment_batch,
    sample_transform,
)
from spillseg.domain.metrics import confusion


def _pair(rng, size=8):
    image = rng.random((1, 1, size, size))
    mask = (rng.random((1, 1, size, size)) < 0.3).astype(np.float64)
    return image, mask


def test_disabled_augmentation_is_identity(rng):
    image, mask = _pair(rng)

    out_image, out_mask = augment(image, mask, AugmentationConfig.disabled(), rng)

    assert np.array_equal(out_image, image)
    assert np.array_equal(out_mask, mask)


def test_horizontal_flip_is_an_involution(rng):
    image, mask = _pair(rng)
    flip = Transform(hflip=True)

    once = apply_transform(image, mask, flip)
    twice = apply_transform(*once, flip)

    assert not np.array_equal(once[0], image)
    assert np.array_equal(twice[0], image)
    assert np.array_equal(twice[1], mask)


def test_mask_follows_the_recorded_geometry(rng):
    cfg = AugmentationConfig()
    for _ in range(50):
        image, mask = _pair(rng)
        t = sample_transform(cfg, rng)

        _, out_mask = apply_transform(image, mask, t)
        counts = confusion(out_mask, apply_geometry(mask, t))

        assert counts.fp == counts.fn == 0
        assert set(np.unique(out_mask)) <= {0.0, 1.0}


def test_contrast_scales_image_only_and_clamps(rng):
    image, mask = _pair(rng)

    out_image, out_mask = apply_transform(image, mask, Transform(contrast=1.5))

    assert np.allclose(out_image, np.clip(image * 1.5, 0.0, 1.0))
    assert out_image.max() <= 1.0
    assert np.array_equal(out_mask, mask)


def test_rot90_then_inverse_restores(rng):
    image, _ = _pair(rng)

    turned = apply_geometry(image, Transform(k=1))
    back = apply_geometry(turned, Transform(k=3))

    assert np.array_equal(back, image)


def test_arbitrary_rotation_keeps_mask_binary(rng):
    image, mask = _pair(rng, size=16)

    out_image, out_mask = apply_transform(image, mask, Transform(angle=17.0))

    assert out_image.shape == image.shape
    assert set(np.unique(out_mask)) <= {0.0, 1.0}


def test_draw_count_does_not_depend_on_config():
    a = np.random.default_rng(3)
    b = np.random.default_rng(3)

    sample_transform(AugmentationConfig(), a)
    sample_transform(AugmentationConfig.disabled(), b)

    assert a.random() == b.random()


def test_batch_items_get_independent_transforms(rng):
    images = np.repeat(rng.random((1, 1, 8, 8)), 6, axis=0)
    masks = np.zeros_like(images)

    out_images, out_masks = augment_batch(images, masks, AugmentationConfig(), rng)

    assert out_images.shape == images.shape
    assert not all(np.array_equal(out_images[0], out_images[i]) for i in range(1, 6))


def test_shape_mismatch_is_rejected(rng):
    with pytest.raises(ShapeError, match="does not match"):
        apply_transform(np.zeros((1, 1, 8, 8)), np.zeros((1, 1, 8, 6)), Transform())
