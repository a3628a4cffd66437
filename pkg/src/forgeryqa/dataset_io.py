"""Line-oriented dataset serialization and image file helpers.

One JSON object per line, UTF-8, stable key order; image and mask paths are
stored relative to the dataset file so a dataset directory is relocatable.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Optional

import numpy as np
from PIL import Image

from .samples import DatasetRecord

_FIELDS = [
    ("image", "image_path"),
    ("id", "image_id"),
    ("label", "label"),
    ("kind", "kind"),
    ("question", "question"),
    ("answer", "answer"),
    ("is_fake", "is_fake_label"),
    ("auth_index", "authenticity_word_index"),
    ("region", "region"),
    ("type", "forgery_type"),
    ("mask", "mask_path"),
    ("quality", "quality"),
]


def record_to_json(record: DatasetRecord) -> str:
    payload = {key: getattr(record, attr) for key, attr in _FIELDS}
    if payload["quality"] is not None:
        payload["quality"] = [round(float(v), 10) for v in payload["quality"]]
    return json.dumps(payload, ensure_ascii=False)


def record_from_json(line: str) -> DatasetRecord:
    payload = json.loads(line)
    kwargs = {attr: payload.get(key) for key, attr in _FIELDS}
    return DatasetRecord(**kwargs)


def serialize_dataset(records: List[DatasetRecord], path) -> Path:
    """Write one record per line; returns the written path."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for record in records:
                fh.write(record_to_json(record))
                fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed to write dataset to {path}: {exc}") from exc
    return path


def deserialize_dataset(path) -> List[DatasetRecord]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise OSError(f"failed to read dataset from {path}: {exc}") from exc
    return [record_from_json(line) for line in lines if line.strip()]


def save_image(pixels: np.ndarray, path) -> Path:
    """Quantize [0, 1] floats to an 8-bit PNG."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.clip(np.asarray(pixels), 0.0, 1.0)
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8)).save(path)
    return path


def load_image(path, size: Optional[int] = None) -> np.ndarray:
    """Load an RGB image as H x W x 3 floats in [0, 1], optionally resized."""
    with Image.open(path) as img:
        img = img.convert("RGB")
        if size is not None and img.size != (size, size):
            img = img.resize((size, size), Image.BILINEAR)
        return np.asarray(img, dtype=np.float64) / 255.0


def save_mask(mask: np.ndarray, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = (np.asarray(mask) > 0.5).astype(np.uint8) * 255
    Image.fromarray(arr, mode="L").save(path)
    return path


def load_mask(path) -> np.ndarray:
    with Image.open(path) as img:
        return (np.asarray(img.convert("L"), dtype=np.float64) / 255.0 > 0.5).astype(
            np.float64
        )
