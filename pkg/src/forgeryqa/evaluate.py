"""Generation-based evaluation: detection metrics, BLEU, per-kind breakdown."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np
import torch

from .dataset_io import load_image
from .metrics import bleu4, detection_metrics, parse_authenticity
from .model import ForgeryVLM, quality_tensor
from .samples import DatasetRecord

# Quality answers carry no authenticity word by construction, so they are
# excluded from the detection metrics (they still count toward BLEU).
DETECTION_KINDS = ("local", "classify", "common")


def evaluate_model(
    model: ForgeryVLM,
    records: Sequence[DatasetRecord],
    root,
    max_tokens: int = 32,
    detection_kinds: Sequence[str] = DETECTION_KINDS,
) -> Dict:
    """Generate an answer per record and score detection + text quality."""
    if not records:
        raise ValueError("no records to evaluate")
    root = Path(root)
    model.eval()
    pixel_cache: Dict[str, torch.Tensor] = {}
    quality_cache: Dict[str, torch.Tensor] = {}

    pairs = []
    bleu_scores: List[float] = []
    per_kind: Dict[str, Dict[str, float]] = {}
    generations: List[Dict] = []
    for record in records:
        if record.image_id not in pixel_cache:
            pixels = load_image(root / record.image_path)
            pixel_cache[record.image_id] = torch.tensor(
                pixels.transpose(2, 0, 1), dtype=torch.get_default_dtype()
            )
            quality_cache[record.image_id] = quality_tensor(record.quality, pixels)
        answer = model.answer_question(
            pixel_cache[record.image_id],
            quality_cache[record.image_id],
            record.question,
            max_tokens=max_tokens,
        )
        predicted = parse_authenticity(answer)
        score = bleu4(answer, [record.answer])
        bleu_scores.append(score)
        bucket = per_kind.setdefault(
            record.kind, {"count": 0, "bleu4": 0.0, "correct": 0, "ambiguous": 0}
        )
        bucket["count"] += 1
        bucket["bleu4"] += score
        if predicted == "ambiguous":
            bucket["ambiguous"] += 1
        if predicted == ("fake" if record.is_fake_label else "real"):
            bucket["correct"] += 1
        if record.kind in detection_kinds:
            pairs.append((predicted, bool(record.is_fake_label)))
        generations.append(
            {
                "image_id": record.image_id,
                "kind": record.kind,
                "generated": answer,
                "reference": record.answer,
                "predicted": predicted,
            }
        )

    for bucket in per_kind.values():
        bucket["bleu4"] /= max(bucket["count"], 1)
        bucket["acc"] = bucket.pop("correct") / max(bucket["count"], 1)

    detection = detection_metrics(pairs).as_dict() if pairs else None
    return {
        "num_records": len(records),
        "detection": detection,
        "detection_kinds": list(detection_kinds),
        "bleu4": float(np.mean(bleu_scores)),
        "per_kind": per_kind,
        "ambiguous": detection["ambiguous"] if detection else 0,
        "generations": generations,
    }


def write_report(report: Dict, path, include_generations: bool = False) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = dict(report)
    if not include_generations:
        payload.pop("generations", None)
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False), encoding="utf-8")
    return path
