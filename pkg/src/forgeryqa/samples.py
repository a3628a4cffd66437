"""Core dataset record types: images, QA pairs, serialized rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

LABELS = ("real", "fake", "blend")
REGIONS = ("mouth", "nose", "eyes", "whole_face")
# Four named corruption kinds; the list is extensible (see forgeryqa.blending).
FORGERY_TYPES = ("blur", "structure_abnormal", "color_difference", "blend_boundary")
QA_KINDS = ("local", "common", "classify", "quality")


class InvalidPairError(ValueError):
    """Real/fake inputs are not a usable pair (mismatched ids or shapes)."""


class IncompleteSampleError(ValueError):
    """A sample is missing fields required by the requested operation."""


@dataclass
class ImageSample:
    """An aligned face image with its provenance.

    ``pixels`` is an H x W x 3 float array in [0, 1].  Blend samples carry the
    binary forged-area mask (1 = forged) plus the region/type that produced it.
    """

    id: str
    pixels: np.ndarray
    label: str
    mask: Optional[np.ndarray] = None
    source_real_id: Optional[str] = None
    forgery_region: Optional[str] = None
    forgery_type: Optional[str] = None

    def validate(self) -> "ImageSample":
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] != px.shape[1]:
            raise ValueError(f"pixels must be square HxWx3, got {px.shape}")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        if self.label == "blend":
            missing = [
                name
                for name, value in (
                    ("mask", self.mask),
                    ("forgery_region", self.forgery_region),
                    ("forgery_type", self.forgery_type),
                    ("source_real_id", self.source_real_id),
                )
                if value is None
            ]
            if missing:
                raise IncompleteSampleError(
                    f"blend sample {self.id!r} is missing {', '.join(missing)}"
                )
        if self.label == "real" and self.mask is not None and self.mask.any():
            raise ValueError(f"real sample {self.id!r} has a nonzero mask")
        if self.forgery_region is not None and self.forgery_region not in REGIONS:
            raise ValueError(f"unknown region {self.forgery_region!r}")
        return self

    @property
    def is_fake(self) -> bool:
        return self.label in ("fake", "blend")

    @property
    def size(self) -> int:
        return int(np.asarray(self.pixels).shape[0])


@dataclass
class QAPair:
    """One question/answer record bound to an image.

    ``authenticity_word_index`` is the token position of the literal word
    "real" or "fake" inside the answer (tokenized by forgeryqa.lm.tokenize),
    present only for answers that state authenticity.
    """

    image_id: str
    kind: str
    question: str
    answer: str
    authenticity_word_index: Optional[int] = None
    is_fake_label: bool = False

    def validate(self) -> "QAPair":
        if self.kind not in QA_KINDS:
            raise ValueError(f"unknown QA kind {self.kind!r}")
        return self


@dataclass
class DatasetRecord:
    """One serialized dataset row: an image reference plus one QA pair."""

    image_path: str
    image_id: str
    label: str
    kind: str
    question: str
    answer: str
    is_fake_label: bool
    authenticity_word_index: Optional[int] = None
    region: Optional[str] = None
    forgery_type: Optional[str] = None
    mask_path: Optional[str] = None
    quality: Optional[list] = field(default=None)
