"""Self-supervised blend synthesis: region masks, corruptions, blending.

A blend replaces one facial region of a real image with the corresponding
area of its manipulated counterpart.  The blend itself is a pure per-pixel
selection (every output pixel comes verbatim from one of the two sources);
the named corruption that makes the forgery type truthful is applied to the
manipulated source *before* blending.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import numpy as np
from scipy import ndimage

from .samples import FORGERY_TYPES, REGIONS, ImageSample, InvalidPairError

# Axis-aligned region boxes as (top, bottom, left, right) fractions of the
# aligned face frame.  Landmarks are out of scope; aligned faces make fixed
# fractional boxes a reasonable stand-in.
REGION_BOXES: Dict[str, Tuple[float, float, float, float]] = {
    "eyes": (0.25, 0.45, 0.15, 0.85),
    "nose": (0.40, 0.65, 0.35, 0.65),
    "mouth": (0.65, 0.85, 0.30, 0.70),
    "whole_face": (0.0, 1.0, 0.0, 1.0),
}


def region_bounds(size: int, region: str) -> Tuple[int, int, int, int]:
    """Pixel bounds (top, bottom, left, right) of a region box."""
    if region not in REGION_BOXES:
        raise ValueError(f"unknown region {region!r}")
    top, bottom, left, right = REGION_BOXES[region]
    return (
        int(round(top * size)),
        int(round(bottom * size)),
        int(round(left * size)),
        int(round(right * size)),
    )


def region_mask(size: int, region: str) -> np.ndarray:
    """Binary keep-mask M: 0 inside the chosen region, 1 elsewhere."""
    mask = np.ones((size, size), dtype=np.float64)
    top, bottom, left, right = region_bounds(size, region)
    mask[top:bottom, left:right] = 0.0
    return mask


def blend_pixels(real: np.ndarray, fake: np.ndarray, keep_mask: np.ndarray) -> np.ndarray:
    """Per-pixel selection: keep_mask=1 takes the real pixel, 0 the fake one.

    Uses np.where so output values are bit-exact copies of one source.
    """
    real = np.asarray(real)
    fake = np.asarray(fake)
    if real.shape != fake.shape:
        raise InvalidPairError(f"shape mismatch: {real.shape} vs {fake.shape}")
    if keep_mask.shape != real.shape[:2]:
        raise InvalidPairError(
            f"mask shape {keep_mask.shape} does not match image {real.shape[:2]}"
        )
    selector = (keep_mask > 0.5)[..., None]
    return np.where(selector, real, fake)


def sample_region(rng: np.random.Generator) -> str:
    """Uniform draw over the four regions."""
    return REGIONS[int(rng.integers(len(REGIONS)))]


def sample_forgery_type(rng: np.random.Generator) -> str:
    """Uniform draw over the registered corruption kinds."""
    return FORGERY_TYPES[int(rng.integers(len(FORGERY_TYPES)))]


def apply_forgery_type(
    pixels: np.ndarray, region: str, ftype: str, rng: np.random.Generator
) -> np.ndarray:
    """Apply the named corruption to the region of a copy of ``pixels``.

    blend_boundary applies no pixel change (the blend seam itself is the
    cue).  The registry has an open slot for additional kinds.
    """
    px = np.array(pixels, dtype=np.float64, copy=True)
    size = px.shape[0]
    top, bottom, left, right = region_bounds(size, region)
    crop = px[top:bottom, left:right]
    if ftype == "blur":
        sigma = float(rng.uniform(1.5, 2.5))
        crop = np.stack(
            [ndimage.gaussian_filter(crop[..., c], sigma, mode="nearest") for c in range(3)],
            axis=-1,
        )
    elif ftype == "color_difference":
        shift = rng.uniform(0.05, 0.15, size=3) * rng.choice([-1.0, 1.0], size=3)
        crop = np.clip(crop + shift[None, None, :], 0.0, 1.0)
    elif ftype == "structure_abnormal":
        dy, dx = 0, 0
        while dy == 0 and dx == 0:
            dy = int(rng.integers(-3, 4))
            dx = int(rng.integers(-3, 4))
        crop = np.roll(np.roll(crop, dy, axis=0), dx, axis=1)
    elif ftype == "blend_boundary":
        pass
    else:
        raise ValueError(f"unknown forgery type {ftype!r}")
    px[top:bottom, left:right] = crop
    return np.clip(px, 0.0, 1.0)


def make_blend(
    real: ImageSample,
    fake: ImageSample,
    region: str,
    rng_seed: int,
    forgery_type: Optional[str] = None,
) -> ImageSample:
    """Blend one region of ``fake`` into ``real``.

    The output pixels are M*real + (1-M)*fake with M = 0 inside the region
    box and 1 outside; the stored mask is 1-M (it marks the forged area).
    ``forgery_type`` records which corruption was applied to the fake source
    beforehand; when omitted it is drawn uniformly with the seeded generator
    (callers corrupting the source should pass the type they applied).
    """
    if real.label != "real":
        raise InvalidPairError(f"first input must be a real sample, got {real.label!r}")
    if fake.source_real_id is not None and fake.source_real_id != real.id:
        raise InvalidPairError(
            f"fake sample {fake.id!r} pairs with {fake.source_real_id!r}, not {real.id!r}"
        )
    real_px = np.asarray(real.pixels)
    fake_px = np.asarray(fake.pixels)
    if real_px.shape != fake_px.shape:
        raise InvalidPairError(f"shape mismatch: {real_px.shape} vs {fake_px.shape}")
    if region not in REGIONS:
        raise ValueError(f"unknown region {region!r}")
    rng = np.random.default_rng(rng_seed)
    if forgery_type is None:
        forgery_type = sample_forgery_type(rng)
    if forgery_type not in FORGERY_TYPES:
        raise ValueError(f"unknown forgery type {forgery_type!r}")
    keep = region_mask(real_px.shape[0], region)
    blended = blend_pixels(real_px, fake_px, keep)
    return ImageSample(
        id=f"{real.id}_blend",
        pixels=blended,
        label="blend",
        mask=1.0 - keep,
        source_real_id=real.id,
        forgery_region=region,
        forgery_type=forgery_type,
    ).validate()
