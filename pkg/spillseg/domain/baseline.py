"""Single global intensity threshold baseline (Otsu)."""

from __future__ import annotations

import numpy as np

BINS = 256


def otsu_threshold(image) -> float:
    """Threshold maximising between-class variance of a [0, 1] image.

    Returns the upper edge of the last dark bin; ties resolve to the first
    maximum. A constant image has no valid split and yields 0.0.
    """
    values = np.clip(np.asarray(image, dtype=np.float64).ravel(), 0.0, 1.0)
    hist, edges = np.histogram(values, bins=BINS, range=(0.0, 1.0))
    prob = hist / max(values.size, 1)
    centers = (edges[:-1] + edges[1:]) / 2.0

    w0 = np.cumsum(prob)
    mu = np.cumsum(prob * centers)
    mu_total = mu[-1]
    denom = w0 * (1.0 - w0)
    valid = denom > 1e-12
    between = np.full(BINS, -1.0)
    between[valid] = (mu_total * w0[valid] - mu[valid]) ** 2 / denom[valid]
    if not np.any(valid):
        return 0.0
    return float(edges[int(np.argmax(between)) + 1])


def threshold_baseline(images) -> np.ndarray:
    """Mark pixels darker than their image's Otsu threshold as spill.

    *images* is (n, c, h, w); the result is a uint8 mask of the same shape.
    """
    images = np.asarray(images, dtype=np.float64)
    masks = np.zeros(images.shape, dtype=np.uint8)
    for i in range(images.shape[0]):
        t = otsu_threshold(images[i])
        masks[i] = images[i] < t
    return masks


def darkness_scores(images) -> np.ndarray:
    """Per-pixel spill score for ROC analysis of the baseline."""
    return 1.0 - np.asarray(images, dtype=np.float64)
