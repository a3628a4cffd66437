"""End-to-end dataset construction from a directory of paired face images.

Input layout: ``<input>/real/<id>.png`` paired with ``<input>/fake/<id>.png``.
Output: resized image copies, synthesized blends with masks, and a
``dataset.jsonl`` of QA records.  Every random choice derives its seed from
(global seed, pair id), so rebuilding with the same seed is byte-identical.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .blending import apply_forgery_type, make_blend, sample_forgery_type, sample_region
from .dataset_io import load_image, save_image, save_mask, serialize_dataset
from .qa import assemble_qa_set
from .quality import QualityIndicators
from .samples import DatasetRecord, ImageSample, QAPair
from .seeding import derive_seed
from .templates import DEFAULT_TEMPLATES, TemplateStore
from .text import authenticity_index

_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp")


@dataclass
class BuildResult:
    dataset_path: Path
    num_pairs: int
    num_images: int
    num_records: int


def synthesize_blend(
    real: ImageSample, fake: ImageSample, rng: np.random.Generator
) -> ImageSample:
    """Draw region and type, corrupt the fake source accordingly, then blend."""
    region = sample_region(rng)
    ftype = sample_forgery_type(rng)
    corrupted = dataclasses.replace(
        fake, pixels=apply_forgery_type(fake.pixels, region, ftype, rng)
    )
    return make_blend(real, corrupted, region, rng_seed=0, forgery_type=ftype)


def discover_pairs(input_dir) -> List[str]:
    input_dir = Path(input_dir)
    real_dir = input_dir / "real"
    fake_dir = input_dir / "fake"
    if not real_dir.is_dir() or not fake_dir.is_dir():
        raise FileNotFoundError(f"{input_dir} must contain real/ and fake/ subdirectories")
    pair_ids = []
    for path in sorted(real_dir.iterdir()):
        if path.suffix.lower() not in _IMAGE_SUFFIXES:
            continue
        for suffix in _IMAGE_SUFFIXES:
            if (fake_dir / (path.stem + suffix)).exists():
                pair_ids.append(path.stem)
                break
    if not pair_ids:
        raise FileNotFoundError(f"no real/fake pairs found under {input_dir}")
    return pair_ids


def load_common_annotations(path) -> Dict[str, QAPair]:
    """External human-annotated QA, keyed by full image id."""
    annotations: Dict[str, QAPair] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        payload = json.loads(line)
        answer = payload["answer"]
        annotations[payload["id"]] = QAPair(
            image_id=payload["id"],
            kind="common",
            question=payload["question"],
            answer=answer,
            authenticity_word_index=payload.get("auth_index", authenticity_index(answer)),
            is_fake_label=bool(payload.get("is_fake", False)),
        )
    return annotations


def build_dataset(
    input_dir,
    out_dir,
    seed: int = 0,
    size: int = 336,
    templates: TemplateStore = DEFAULT_TEMPLATES,
    common_path=None,
) -> BuildResult:
    input_dir = Path(input_dir)
    out_dir = Path(out_dir)
    pair_ids = discover_pairs(input_dir)
    common = load_common_annotations(common_path) if common_path else {}

    records: List[DatasetRecord] = []
    num_images = 0
    for pid in pair_ids:
        rng = np.random.default_rng(derive_seed(seed, pid))
        real_px = load_image(_find_image(input_dir / "real", pid), size=size)
        fake_px = load_image(_find_image(input_dir / "fake", pid), size=size)
        real = ImageSample(id=f"{pid}:real", pixels=real_px, label="real")
        fake = ImageSample(
            id=f"{pid}:fake", pixels=fake_px, label="fake", source_real_id=real.id
        )
        blend = dataclasses.replace(synthesize_blend(real, fake, rng), id=f"{pid}:blend")

        real_path = save_image(real.pixels, out_dir / "images" / "real" / f"{pid}.png")
        fake_path = save_image(fake.pixels, out_dir / "images" / "fake" / f"{pid}.png")
        blend_path = save_image(blend.pixels, out_dir / "images" / "blend" / f"{pid}.png")
        mask_path = save_mask(blend.mask, out_dir / "masks" / f"{pid}.png")
        num_images += 3

        for sample, path in ((real, real_path), (fake, fake_path), (blend, blend_path)):
            indicators = QualityIndicators.from_image(sample.pixels)
            qa_seed = derive_seed(seed, sample.id, "qa")
            pairs = assemble_qa_set(
                sample, indicators, templates, qa_seed, common=common.get(sample.id)
            )
            for pair in pairs:
                records.append(
                    DatasetRecord(
                        image_path=str(path.relative_to(out_dir)),
                        image_id=sample.id,
                        label=sample.label,
                        kind=pair.kind,
                        question=pair.question,
                        answer=pair.answer,
                        is_fake_label=pair.is_fake_label,
                        authenticity_word_index=pair.authenticity_word_index,
                        region=sample.forgery_region,
                        forgery_type=sample.forgery_type,
                        mask_path=str(mask_path.relative_to(out_dir))
                        if sample.label == "blend"
                        else None,
                        quality=[float(v) for v in indicators.vector()],
                    )
                )

    dataset_path = serialize_dataset(records, out_dir / "dataset.jsonl")
    return BuildResult(
        dataset_path=dataset_path,
        num_pairs=len(pair_ids),
        num_images=num_images,
        num_records=len(records),
    )


def _find_image(directory: Path, stem: str) -> Path:
    for suffix in _IMAGE_SUFFIXES:
        candidate = directory / (stem + suffix)
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"no image for {stem!r} under {directory}")
