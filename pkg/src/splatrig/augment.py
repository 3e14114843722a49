"""Training-time image augmentations: contrast, brightness, Gaussian noise
and random erasing, in that fixed order.

All randomness derives from (seed, frame index) through a SeedSequence, so
a frame's augmentation is reproducible independently of batch order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .renderer import Image


@dataclass(frozen=True)
class AugmentParams:
    noise_sigma: float = 5.0            # gray levels on the 0..255 scale
    erase_prob: float = 0.5
    erase_area: tuple = (0.02, 0.2)     # fraction of image area
    brightness_range: tuple = (0.8, 1.2)
    contrast_range: tuple = (0.8, 1.2)
    seed: int = 0

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")
        if not 0.0 <= self.erase_prob <= 1.0:
            raise ValueError("erase_prob must be in [0, 1]")
        for name in ("erase_area", "brightness_range", "contrast_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name} must be ordered (lo, hi)")
        lo, hi = self.erase_area
        if not (0.0 <= lo and hi <= 1.0):
            raise ValueError("erase_area fractions must be in [0, 1]")


def augment_image(img: Image, params: AugmentParams, index: int) -> Image:
    """Deterministic augmentation of one frame, keyed by (params.seed, index)."""
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, index]))
    px = img.pixels.astype(np.float64)

    c = rng.uniform(*params.contrast_range)
    b = rng.uniform(*params.brightness_range)
    px = np.clip(c * (px - 128.0) + 128.0, 0.0, 255.0) * b

    if params.noise_sigma > 0:
        px = px + rng.normal(0.0, params.noise_sigma, size=px.shape)

    if rng.uniform() < params.erase_prob:
        area = rng.uniform(*params.erase_area) * img.width * img.height
        aspect = rng.uniform(0.5, 2.0)
        eh = max(1, min(img.height, int(round(np.sqrt(area * aspect)))))
        ew = max(1, min(img.width, int(round(np.sqrt(area / aspect)))))
        y0 = int(rng.integers(0, img.height - eh + 1))
        x0 = int(rng.integers(0, img.width - ew + 1))
        px[y0 : y0 + eh, x0 : x0 + ew, :] = rng.uniform(0.0, 255.0)

    out = np.clip(np.floor(px + 0.5), 0, 255).astype(np.uint8)
    return Image(img.width, img.height, out)
