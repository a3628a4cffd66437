"""Answer composition: local (region/type), classification and quality QA."""

from __future__ import annotations

from typing import List, Optional

import numpy as np

from .quality import QualityIndicators
from .samples import ImageSample, IncompleteSampleError, QAPair
from .templates import (
    FAKE_STATEMENT,
    QUESTION_CLASSIFY,
    QUESTION_LOCAL,
    QUESTION_QUALITY,
    QUALITY_ATTRIBUTES,
    REAL_FACE_ANSWER,
    TemplateStore,
)
from .text import authenticity_index


class IncompleteIndicatorsError(ValueError):
    """Quality indicators are missing a score or bucket level."""


def compose_local_answer(
    sample: ImageSample, templates: TemplateStore, rng_seed: int
) -> QAPair:
    """Region/type answer: fixed fake statement plus region and type sentences.

    Real samples answer with the fixed real-face sentence.  Fully fake
    samples without an annotated region are described as whole-face; their
    type sentence is included only when a type is recorded.
    """
    rng = np.random.default_rng(rng_seed)
    if sample.label == "real":
        answer = REAL_FACE_ANSWER
    else:
        region = sample.forgery_region
        ftype = sample.forgery_type
        if sample.label == "blend" and (region is None or ftype is None):
            raise IncompleteSampleError(
                f"blend sample {sample.id!r} is missing forgery region/type"
            )
        parts = [FAKE_STATEMENT, templates.pick_region(region or "whole_face", rng)]
        if ftype is not None:
            parts.append(templates.pick_type(ftype, rng))
        answer = " ".join(parts)
    return QAPair(
        image_id=sample.id,
        kind="local",
        question=QUESTION_LOCAL,
        answer=answer,
        authenticity_word_index=authenticity_index(answer),
        is_fake_label=sample.is_fake,
    )


def compose_classify_answer(
    sample: ImageSample, templates: TemplateStore, rng_seed: int
) -> QAPair:
    rng = np.random.default_rng(rng_seed)
    answer = templates.pick_classify(sample.is_fake, rng)
    return QAPair(
        image_id=sample.id,
        kind="classify",
        question=QUESTION_CLASSIFY,
        answer=answer,
        authenticity_word_index=authenticity_index(answer),
        is_fake_label=sample.is_fake,
    )


def compose_quality_answer(
    q: QualityIndicators,
    templates: TemplateStore,
    rng_seed: int,
    image_id: str = "",
    is_fake: bool = False,
) -> QAPair:
    """Six quality sentences in fixed attribute order, one per bucket level."""
    try:
        levels = q.validate().levels
    except ValueError as exc:
        raise IncompleteIndicatorsError(str(exc)) from exc
    rng = np.random.default_rng(rng_seed)
    sentences = [templates.pick_quality(attr, levels[attr], rng) for attr in QUALITY_ATTRIBUTES]
    return QAPair(
        image_id=image_id,
        kind="quality",
        question=QUESTION_QUALITY,
        answer=" ".join(sentences),
        authenticity_word_index=None,
        is_fake_label=is_fake,
    )


def assemble_qa_set(
    sample: ImageSample,
    q: QualityIndicators,
    templates: TemplateStore,
    rng_seed: int,
    common: Optional[QAPair] = None,
) -> List[QAPair]:
    """All QA pairs for one image: local, classify, quality, optional common.

    The common pair, when supplied from external human annotation, is passed
    through verbatim (only the image binding is filled in).
    """
    rng = np.random.default_rng(rng_seed)
    seeds = [int(s) for s in rng.integers(0, 2**31 - 1, size=3)]
    pairs = [
        compose_local_answer(sample, templates, seeds[0]),
        compose_classify_answer(sample, templates, seeds[1]),
        compose_quality_answer(
            q, templates, seeds[2], image_id=sample.id, is_fake=sample.is_fake
        ),
    ]
    if common is not None:
        pairs.append(
            QAPair(
                image_id=sample.id,
                kind="common",
                question=common.question,
                answer=common.answer,
                authenticity_word_index=common.authenticity_word_index,
                is_fake_label=sample.is_fake,
            )
        )
    return pairs
