"""Numeric face-quality indicators and their three-level bucketing.

The six scores feed both the quality answers of the dataset and the expert
routing of the hybrid LoRA layers.  The sharpness score is an edge-width
proxy, not the psychometric blur metric it stands in for: it keeps the same
[0, 1] range and the blur-monotonicity contract, nothing more.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from scipy import ndimage

from .templates import QUALITY_ATTRIBUTES

LOW_THRESHOLD = 0.3
HIGH_THRESHOLD = 0.7

# Central crop treated as the face when scoring visibility and integrity.
FACE_BOX = (0.1, 0.9, 0.1, 0.9)

# A period-2 flicker pattern maxes the difference-energy ratio at 8
# (4 * sin^2(w/2) per axis at the axis Nyquist frequency).
_MAX_DIFF_ENERGY_RATIO = 8.0


def luminance(pixels: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an HxWx3 array in [0, 1]."""
    px = np.asarray(pixels, dtype=np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def sharpness_score(pixels: np.ndarray) -> float:
    """Relative high-frequency energy of the luminance, in [0, 1].

    Computed as sqrt of the forward-difference energy divided by the total
    AC energy (both normalized so a period-2 flicker scores 1).  Because the
    difference operator's frequency response grows with frequency while a
    Gaussian blur's shrinks, the score is monotonically non-increasing under
    repeated Gaussian blur of the same image.  A constant image has no AC
    energy and scores 0; non-clipping brightness shifts leave the score
    unchanged.
    """
    lum = luminance(pixels)
    ac_energy = float(np.sum((lum - lum.mean()) ** 2))
    if ac_energy <= 0.0:
        return 0.0
    dx = np.diff(lum, axis=1)
    dy = np.diff(lum, axis=0)
    diff_energy = float(np.sum(dx**2) + np.sum(dy**2))
    ratio = diff_energy / (_MAX_DIFF_ENERGY_RATIO * ac_energy)
    return float(np.clip(np.sqrt(ratio), 0.0, 1.0))


def illumination_scores(pixels: np.ndarray) -> Tuple[float, float]:
    """(intensity, uniformity): mean luminance and 1 - cell-wise dispersion.

    Uniformity splits the image into a 4x4 grid, takes the standard
    deviation of cell means, normalizes by the maximum possible spread
    (0.5) and clips to [0, 1].
    """
    lum = luminance(pixels)
    intensity = float(np.clip(lum.mean(), 0.0, 1.0))
    h, w = lum.shape
    rows = np.array_split(np.arange(h), 4)
    cols = np.array_split(np.arange(w), 4)
    cells = np.array([lum[np.ix_(r, c)].mean() for r in rows for c in cols])
    uniformity = float(np.clip(1.0 - cells.std() / 0.5, 0.0, 1.0))
    return intensity, uniformity


def integrity_score(pixels: np.ndarray) -> float:
    """Fraction of the face box with non-clipped luminance (in [0.05, 0.95])."""
    lum = luminance(pixels)
    box = _face_crop(lum)
    ok = (box >= 0.05) & (box <= 0.95)
    return float(ok.mean())


def visibility_score(pixels: np.ndarray) -> float:
    """Sharpness proxy restricted to the face box."""
    top, bottom, left, right = _face_bounds(pixels.shape[0], pixels.shape[1])
    return sharpness_score(np.asarray(pixels)[top:bottom, left:right])


def bucketize(score: float) -> str:
    """Map a [0, 1] score to low (< 0.3), mid (< 0.7) or high."""
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"score must be in [0, 1], got {score!r}")
    if score < LOW_THRESHOLD:
        return "low"
    if score < HIGH_THRESHOLD:
        return "mid"
    return "high"


@dataclass
class QualityIndicators:
    """The six-score quality vector with derived bucket levels."""

    overall: float
    integrity: float
    intensity: float
    uniformity: float
    clarity: float
    visibility: float

    @classmethod
    def from_image(cls, pixels: np.ndarray) -> "QualityIndicators":
        intensity, uniformity = illumination_scores(pixels)
        clarity = sharpness_score(pixels)
        visibility = visibility_score(pixels)
        integrity = integrity_score(pixels)
        overall = float(np.mean([integrity, intensity, uniformity, clarity, visibility]))
        return cls(
            overall=overall,
            integrity=integrity,
            intensity=intensity,
            uniformity=uniformity,
            clarity=clarity,
            visibility=visibility,
        )

    @classmethod
    def from_vector(cls, vector) -> "QualityIndicators":
        values = [float(v) for v in vector]
        if len(values) != len(QUALITY_ATTRIBUTES):
            raise ValueError(f"expected {len(QUALITY_ATTRIBUTES)} scores, got {len(values)}")
        return cls(**dict(zip(QUALITY_ATTRIBUTES, values)))

    def vector(self) -> np.ndarray:
        """Fixed attribute order: overall, integrity, intensity, uniformity, clarity, visibility."""
        return np.array([getattr(self, a) for a in QUALITY_ATTRIBUTES], dtype=np.float64)

    @property
    def levels(self) -> Dict[str, str]:
        return {a: bucketize(getattr(self, a)) for a in QUALITY_ATTRIBUTES}

    def validate(self) -> "QualityIndicators":
        for attr in QUALITY_ATTRIBUTES:
            value = getattr(self, attr)
            if not (0.0 <= value <= 1.0):
                raise ValueError(f"{attr} score {value!r} outside [0, 1]")
        return self


def _face_bounds(h: int, w: int) -> Tuple[int, int, int, int]:
    top, bottom, left, right = FACE_BOX
    return int(top * h), int(bottom * h), int(left * w), int(right * w)


def _face_crop(lum: np.ndarray) -> np.ndarray:
    top, bottom, left, right = _face_bounds(*lum.shape)
    return lum[top:bottom, left:right]
