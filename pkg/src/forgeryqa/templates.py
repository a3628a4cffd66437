"""Fixed template sentences used to compose dataset answers.

Every answer the builder emits is assembled from these lists; the language
model's vocabulary is closed over them.  Sentences describing regions, types
and quality deliberately avoid the words "real" and "fake" so each composed
answer contains the authenticity word exactly once (or not at all for
quality answers).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .samples import FORGERY_TYPES, REGIONS

QUESTION_LOCAL = "Do you think this image is of a real face or an altered fake one?"
QUESTION_CLASSIFY = "Is this image real or fake?"
QUESTION_QUALITY = "Please evaluate the quality of this face image."

FAKE_STATEMENT = "This is an example of a fake face."
REAL_FACE_ANSWER = "It is a real face."

QUALITY_ATTRIBUTES = ("overall", "integrity", "intensity", "uniformity", "clarity", "visibility")
LEVELS = ("low", "mid", "high")

_REGION_TEXTS: Dict[str, List[str]] = {
    "mouth": [
        "The area around the mouth looks tampered with.",
        "The mouth region appears to have been altered.",
        "Something is off in the mouth area.",
        "The mouth does not match the rest of the face.",
    ],
    "nose": [
        "The area around the nose looks tampered with.",
        "The nose region appears to have been altered.",
        "Something is off in the nose area.",
        "The nose does not match the rest of the face.",
    ],
    "eyes": [
        "The area around the eyes looks tampered with.",
        "The eye region appears to have been altered.",
        "Something is off around the eyes.",
        "The eyes do not match the rest of the face.",
    ],
    "whole_face": [
        "The whole face appears to have been replaced.",
        "The entire face region looks synthetic.",
        "The complete face seems to have been swapped in.",
        "Nothing about the whole face looks original.",
    ],
}

_TYPE_TEXTS: Dict[str, List[str]] = {
    "blur": [
        "The pasted area is noticeably blurry.",
        "There is unnatural blurriness in the manipulated region.",
        "The altered region lacks sharp detail.",
        "Fine texture is smeared out in the edited area.",
    ],
    "structure_abnormal": [
        "The facial structure in that region is distorted.",
        "Features in the altered area are warped out of place.",
        "The geometry of the region looks misaligned.",
        "Parts of the region appear displaced.",
    ],
    "color_difference": [
        "The color tone of the region does not match the surrounding skin.",
        "There is a visible color mismatch in the altered area.",
        "The edited region shows an unnatural tint.",
        "Skin color changes abruptly inside the region.",
    ],
    "blend_boundary": [
        "A faint boundary line is visible around the edited region.",
        "The edges of the pasted region do not blend smoothly.",
        "There is a visible seam around the manipulated area.",
        "The transition at the region border looks artificial.",
    ],
}

_CLASSIFY_TEXTS: Dict[bool, List[str]] = {
    True: [
        "It is a fake face.",
        "This face is fake.",
        "The image shows a fake face.",
        "This is a fake face.",
        "The face in this image is fake.",
    ],
    False: [
        "It is a real face.",
        "This face is real.",
        "The image shows a real face.",
        "This is a real face.",
        "The face in this image is real.",
    ],
}

_QUALITY_TEXTS: Dict[Tuple[str, str], List[str]] = {
    ("overall", "low"): [
        "The overall quality of this image is poor.",
        "Overall, the image quality is bad.",
        "This image leaves a poor overall impression.",
        "The general quality of the picture is low.",
        "Overall, this is a low quality image.",
    ],
    ("overall", "mid"): [
        "The overall quality of this image is moderate.",
        "Overall, the image quality is acceptable.",
        "This image leaves an average overall impression.",
        "The general quality of the picture is fair.",
        "Overall, this is a medium quality image.",
    ],
    ("overall", "high"): [
        "The overall quality of this image is excellent.",
        "Overall, the image quality is very good.",
        "This image leaves a strong overall impression.",
        "The general quality of the picture is high.",
        "Overall, this is a high quality image.",
    ],
    ("integrity", "low"): [
        "Large parts of the face are cut off or washed out.",
        "The face is badly clipped in this picture.",
        "Much of the face is not properly captured.",
        "The facial area is heavily truncated or saturated.",
        "The face is far from complete in this image.",
    ],
    ("integrity", "mid"): [
        "Some parts of the face are clipped or washed out.",
        "The face is mostly complete with minor defects.",
        "A few facial areas are not properly captured.",
        "The facial area shows some truncation or saturation.",
        "The face is only partly complete in this image.",
    ],
    ("integrity", "high"): [
        "The face is fully present and intact.",
        "The entire face is properly captured.",
        "The facial area is complete and well preserved.",
        "No part of the face is clipped or washed out.",
        "The face appears whole and undamaged.",
    ],
    ("intensity", "low"): [
        "The brightness level on the face is dim.",
        "The face is poorly lit.",
        "Lighting on the face is quite dark.",
        "The face appears underexposed.",
        "Illumination of the face is weak.",
    ],
    ("intensity", "mid"): [
        "The brightness level on the face is moderate.",
        "The face is reasonably lit.",
        "Lighting on the face is neither dark nor bright.",
        "The face shows medium exposure.",
        "Illumination of the face is adequate.",
    ],
    ("intensity", "high"): [
        "The brightness level on the face is strong.",
        "The face is brightly lit.",
        "Lighting on the face is intense.",
        "The face appears well exposed.",
        "Illumination of the face is powerful.",
    ],
    ("uniformity", "low"): [
        "Lighting across the face is very uneven.",
        "There are harsh lighting differences across the face.",
        "One side of the face is much brighter than the other.",
        "Illumination varies strongly over the face.",
        "The face shows patchy, inconsistent lighting.",
    ],
    ("uniformity", "mid"): [
        "Lighting across the face is somewhat uneven.",
        "There are mild lighting differences across the face.",
        "Parts of the face are a bit brighter than others.",
        "Illumination varies moderately over the face.",
        "The face shows slightly inconsistent lighting.",
    ],
    ("uniformity", "high"): [
        "Lighting across the face is very even.",
        "The face is uniformly illuminated.",
        "Brightness is consistent over the whole face.",
        "Illumination hardly varies over the face.",
        "The face shows smooth, even lighting.",
    ],
    ("clarity", "low"): [
        "The image is quite blurry.",
        "Fine details of the face are smeared.",
        "The picture lacks sharpness.",
        "Facial details are hard to make out due to blur.",
        "The image looks out of focus.",
    ],
    ("clarity", "mid"): [
        "The image is moderately sharp.",
        "Some fine facial details are visible.",
        "The picture has acceptable sharpness.",
        "Facial details are partly distinguishable.",
        "The image is mostly in focus.",
    ],
    ("clarity", "high"): [
        "The image is very sharp.",
        "Fine details of the face are crisp.",
        "The picture has excellent sharpness.",
        "Facial details are clearly distinguishable.",
        "The image is perfectly in focus.",
    ],
    ("visibility", "low"): [
        "The facial visibility is low.",
        "The face is hard to see in this image.",
        "The face is barely visible.",
        "Facial features are difficult to discern.",
        "Visibility of the face is poor.",
    ],
    ("visibility", "mid"): [
        "The facial visibility is mid.",
        "The face is partly visible.",
        "The face can be seen with some effort.",
        "Facial features are somewhat discernible.",
        "Visibility of the face is average.",
    ],
    ("visibility", "high"): [
        "The face is clearly visible.",
        "The facial visibility is high.",
        "The face can be seen distinctly.",
        "Facial features are easy to discern.",
        "Visibility of the face is excellent.",
    ],
}


@dataclass(frozen=True)
class TemplateStore:
    """Per-attribute sentence lists with uniform seeded selection."""

    quality: Dict[Tuple[str, str], List[str]] = field(
        default_factory=lambda: dict(_QUALITY_TEXTS)
    )
    regions: Dict[str, List[str]] = field(default_factory=lambda: dict(_REGION_TEXTS))
    types: Dict[str, List[str]] = field(default_factory=lambda: dict(_TYPE_TEXTS))
    classify: Dict[bool, List[str]] = field(default_factory=lambda: dict(_CLASSIFY_TEXTS))

    def validate(self) -> "TemplateStore":
        for attr in QUALITY_ATTRIBUTES:
            for level in LEVELS:
                if not self.quality.get((attr, level)):
                    raise ValueError(f"no quality templates for ({attr}, {level})")
        for region in REGIONS:
            if not self.regions.get(region):
                raise ValueError(f"no region templates for {region}")
        for ftype in FORGERY_TYPES:
            if not self.types.get(ftype):
                raise ValueError(f"no type templates for {ftype}")
        for flag in (True, False):
            if not self.classify.get(flag):
                raise ValueError(f"no classify templates for is_fake={flag}")
        return self

    def pick_quality(self, attribute: str, level: str, rng: np.random.Generator) -> str:
        return _pick(self.quality[(attribute, level)], rng)

    def pick_region(self, region: str, rng: np.random.Generator) -> str:
        return _pick(self.regions[region], rng)

    def pick_type(self, ftype: str, rng: np.random.Generator) -> str:
        return _pick(self.types[ftype], rng)

    def pick_classify(self, is_fake: bool, rng: np.random.Generator) -> str:
        return _pick(self.classify[is_fake], rng)

    def all_texts(self) -> List[str]:
        """Every sentence and question the builder can emit (vocabulary source)."""
        texts = [
            QUESTION_LOCAL,
            QUESTION_CLASSIFY,
            QUESTION_QUALITY,
            FAKE_STATEMENT,
            REAL_FACE_ANSWER,
        ]
        for sentences in self.quality.values():
            texts.extend(sentences)
        for sentences in self.regions.values():
            texts.extend(sentences)
        for sentences in self.types.values():
            texts.extend(sentences)
        for sentences in self.classify.values():
            texts.extend(sentences)
        return texts


def _pick(options: List[str], rng: np.random.Generator) -> str:
    return options[int(rng.integers(len(options)))]


DEFAULT_TEMPLATES = TemplateStore().validate()
