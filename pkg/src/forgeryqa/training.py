"""Three-stage training schedule with per-stage freezing and loss masking.

Stage 1 trains the segmentation decoder and classification head on image
supervision; stage 2 trains the image projector and prompt parameters
against the answer text through the frozen LM; stage 3 trains the adapter
experts, routers and prompt vectors on the full loss.  Parameters outside a
stage's trainable set are bit-identical before and after the stage.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .config import STAGE_TRAINABLE, TrainConfig
from .dataset_io import load_image, load_mask
from .losses import (
    cosine_similarity,
    loss_binary,
    loss_fine_grained,
    loss_fine_grained_aux,
    loss_segmentation,
    loss_text,
    loss_text_calibration,
    total_loss,
)
from .model import ForgeryVLM
from .samples import DatasetRecord
from .seeding import derive_seed

VISION_SIDE_GROUPS = {"vision_encoder", "seg_decoder", "cls_head"}


@dataclass
class CorpusImage:
    image_id: str
    pixels: np.ndarray
    label: str
    is_fake: bool
    quality: np.ndarray
    mask: Optional[np.ndarray] = None


@dataclass
class TrainingCorpus:
    """Dataset records plus decoded images, grouped for batching."""

    images: Dict[str, CorpusImage]
    qa_records: List[DatasetRecord]
    triplets: List[Tuple[str, str, str]] = field(default_factory=list)

    @classmethod
    def load(cls, records: Sequence[DatasetRecord], root) -> "TrainingCorpus":
        root = Path(root)
        images: Dict[str, CorpusImage] = {}
        for record in records:
            if record.image_id in images:
                continue
            pixels = load_image(root / record.image_path)
            mask = load_mask(root / record.mask_path) if record.mask_path else None
            quality = (
                np.asarray(record.quality, dtype=np.float64)
                if record.quality is not None
                else _quality_of(pixels)
            )
            images[record.image_id] = CorpusImage(
                image_id=record.image_id,
                pixels=pixels,
                label=record.label,
                is_fake=bool(record.is_fake_label),
                quality=quality,
                mask=mask,
            )
        return cls(images=images, qa_records=list(records), triplets=_group_triplets(images))

    @property
    def image_ids(self) -> List[str]:
        return sorted(self.images)

    def pixels_tensor(self, ids: Sequence[str], dtype=None) -> torch.Tensor:
        dtype = dtype or torch.get_default_dtype()
        stack = np.stack([self.images[i].pixels.transpose(2, 0, 1) for i in ids])
        return torch.tensor(stack, dtype=dtype)

    def quality_tensor(self, ids: Sequence[str], dtype=None) -> torch.Tensor:
        dtype = dtype or torch.get_default_dtype()
        return torch.tensor(np.stack([self.images[i].quality for i in ids]), dtype=dtype)

    def label_tensor(self, ids: Sequence[str], dtype=None) -> torch.Tensor:
        dtype = dtype or torch.get_default_dtype()
        return torch.tensor([float(self.images[i].is_fake) for i in ids], dtype=dtype)

    def mask_targets(self, ids: Sequence[str]) -> Tuple[torch.Tensor, List[int]]:
        """(targets at image resolution, kept indices): real images contribute
        all-zero masks, blends their stored mask; unmasked fakes are skipped.
        The segmentation loss resizes targets to the logit resolution."""
        targets, kept = [], []
        for pos, image_id in enumerate(ids):
            item = self.images[image_id]
            if item.label == "real":
                targets.append(np.zeros(item.pixels.shape[:2]))
            elif item.mask is not None:
                targets.append(item.mask)
            else:
                continue
            kept.append(pos)
        if not kept:
            return torch.zeros((0, 0, 0)), []
        return torch.tensor(np.stack(targets), dtype=torch.get_default_dtype()), kept


@dataclass
class StageResult:
    stage: int
    history: List[Dict[str, float]]
    missing_auth_warnings: int = 0
    triplet_fallbacks: int = 0

    def totals(self) -> List[float]:
        return [row["total"] for row in self.history]


def run_stage(
    model: ForgeryVLM,
    corpus: TrainingCorpus,
    train_cfg: TrainConfig,
    log_path=None,
) -> StageResult:
    """Run one stage in place on ``model``; returns the per-step loss history."""
    train_cfg.validate()
    stage = train_cfg.stage
    trainable_groups = STAGE_TRAINABLE[stage]
    trainable = model.set_trainable(trainable_groups)
    active = set(train_cfg.resolved_active_losses())
    weights = train_cfg.loss_weights()
    batch_size = train_cfg.resolved_batch_size()

    torch.manual_seed(derive_seed(train_cfg.seed, "torch", stage))
    rng = np.random.default_rng(derive_seed(train_cfg.seed, "batches", stage))
    optimizer = torch.optim.Adam(trainable, lr=train_cfg.resolved_lr(), betas=train_cfg.betas)

    vision_cache = None
    if not (VISION_SIDE_GROUPS & set(trainable_groups)):
        vision_cache = _build_vision_cache(model, corpus)

    result = StageResult(stage=stage, history=[])
    model.train()
    for step in range(train_cfg.steps):
        optimizer.zero_grad()
        if stage == 1:
            components = _detection_losses(model, corpus, rng, batch_size, active)
        else:
            components = _qa_losses(
                model, corpus, rng, batch_size, active, train_cfg, vision_cache, result
            )
        total = total_loss(components, weights)
        if total.requires_grad:
            total.backward()
            optimizer.step()
        row = {"step": float(step), "total": float(total.detach())}
        for name in ("text", "binary", "segmentation", "fine_grained", "calibration"):
            value = components.get(name)
            row[name] = float(value.detach()) if value is not None else 0.0
        result.history.append(row)
    model.eval()

    if log_path is not None:
        _write_log(log_path, result.history)
    return result


# ----- per-stage loss assembly ----------------------------------------------


def _detection_losses(model, corpus, rng, batch_size, active):
    ids = _sample_ids_balanced(corpus, rng, batch_size)
    pixels = corpus.pixels_tensor(ids)
    y_hat, mask_logits, _ = model.forward_detection(pixels)
    components = {}
    if "binary" in active:
        components["binary"] = loss_binary(y_hat, corpus.label_tensor(ids))
    if "segmentation" in active:
        targets, kept = corpus.mask_targets(ids)
        if kept:
            components["segmentation"] = loss_segmentation(mask_logits[kept], targets)
    return components


def _qa_losses(model, corpus, rng, batch_size, active, train_cfg, vision_cache, result):
    records = [
        corpus.qa_records[i]
        for i in rng.choice(
            len(corpus.qa_records),
            size=min(batch_size, len(corpus.qa_records)),
            replace=len(corpus.qa_records) < batch_size,
        )
    ]
    ids = [r.image_id for r in records]
    quality = corpus.quality_tensor(ids)
    question_ids = [
        torch.tensor(model.vocab.encode(r.question), dtype=torch.long) for r in records
    ]
    answer_ids = [
        torch.tensor(
            model.vocab.encode(r.answer) + [model.vocab.eos_id], dtype=torch.long
        )
        for r in records
    ]
    if vision_cache is not None:
        cached = {key: vision_cache[key][[vision_cache["index"][i] for i in ids]]
                  for key in ("patch", "pooled", "mask_logits", "seg_feature", "class_logit")}
        pixels = torch.zeros(len(ids), 3, model.config.image_size, model.config.image_size)
        out = model.forward_qa_batch(pixels, quality, question_ids, answer_ids, cached_vision=cached)
    else:
        pixels = corpus.pixels_tensor(ids)
        out = model.forward_qa_batch(pixels, quality, question_ids, answer_ids)

    components = {}
    if "text" in active:
        flat_logits = torch.cat(out.answer_logits, dim=0)
        flat_targets = torch.cat(answer_ids, dim=0)
        components["text"] = loss_text(flat_logits, flat_targets)
    if "calibration" in active:
        reals, fakes, labels = [], [], []
        for record, logits in zip(records, out.answer_logits):
            if record.authenticity_word_index is None:
                if record.kind != "quality":
                    result.missing_auth_warnings += 1
                continue
            from .lm import authenticity_logits

            lr, lf = authenticity_logits(logits, record.authenticity_word_index, model.vocab)
            reals.append(lr)
            fakes.append(lf)
            labels.append(float(record.is_fake_label))
        if reals:
            components["calibration"] = loss_text_calibration(
                torch.stack(reals), torch.stack(fakes), torch.tensor(labels)
            )
    if "binary" in active:
        components["binary"] = loss_binary(out.y_hat, corpus.label_tensor(ids))
    if "segmentation" in active:
        targets, kept = corpus.mask_targets(ids)
        if kept:
            components["segmentation"] = loss_segmentation(out.mask_logits[kept], targets)
    if "fine_grained" in active:
        fg = _fine_grained_loss(model, corpus, rng, train_cfg, vision_cache, result)
        if fg is not None:
            components["fine_grained"] = fg
    return components


def _fine_grained_loss(model, corpus, rng, train_cfg, vision_cache, result):
    k = min(train_cfg.triplets_per_step, len(corpus.triplets)) if corpus.triplets else 0
    if k == 0:
        triplet_ids = _fallback_triplets(corpus, rng, train_cfg.triplets_per_step)
        if not triplet_ids:
            return None
        result.triplet_fallbacks += len(triplet_ids)
    else:
        picks = rng.choice(len(corpus.triplets), size=k, replace=False)
        triplet_ids = [corpus.triplets[i] for i in picks]

    flat_ids = [i for triple in triplet_ids for i in triple]
    feats = _contrastive_features(model, corpus, flat_ids, train_cfg, vision_cache)
    p, n, h = feats[0::3], feats[1::3], feats[2::3]
    loss = loss_fine_grained(cosine_similarity(n, h), cosine_similarity(p, h))
    if train_cfg.fine_grained_aux and len(triplet_ids) >= 2:
        p2, n2 = p.roll(1, dims=0), n.roll(1, dims=0)
        loss = loss + loss_fine_grained_aux(
            cosine_similarity(p, p2),
            cosine_similarity(n, n2),
            cosine_similarity(p, n2),
        )
    return loss


def _contrastive_features(model, corpus, ids, train_cfg, vision_cache):
    if vision_cache is not None:
        pooled = vision_cache["pooled"][[vision_cache["index"][i] for i in ids]]
    else:
        pooled = model.encode_image(corpus.pixels_tensor(ids)).pooled
    if train_cfg.contrastive_source == "projected":
        return model.proj(pooled)
    return pooled


def _fallback_triplets(corpus, rng, count):
    reals = [i for i, item in corpus.images.items() if item.label == "real"]
    fakes = [i for i, item in corpus.images.items() if item.label == "fake"]
    blends = [i for i, item in corpus.images.items() if item.label == "blend"]
    if not blends or not reals or not fakes:
        return []
    return [
        (
            reals[int(rng.integers(len(reals)))],
            fakes[int(rng.integers(len(fakes)))],
            blends[int(rng.integers(len(blends)))],
        )
        for _ in range(count)
    ]


# ----- helpers ----------------------------------------------------------------


def _build_vision_cache(model: ForgeryVLM, corpus: TrainingCorpus):
    """Frozen vision-side outputs per image (stages that never touch them)."""
    model.eval()
    ids = corpus.image_ids
    cache = {"index": {image_id: i for i, image_id in enumerate(ids)}}
    with torch.no_grad():
        pixels = corpus.pixels_tensor(ids)
        features = model.encode_image(pixels)
        seg_out = model.decode_segmentation(features)
    cache["patch"] = features.patch_embeddings
    cache["pooled"] = features.pooled
    cache["mask_logits"] = seg_out.mask_logits
    cache["seg_feature"] = seg_out.seg_feature
    cache["class_logit"] = seg_out.class_logit
    return cache


def _sample_ids(ids: List[str], rng: np.random.Generator, batch_size: int) -> List[str]:
    picks = rng.choice(len(ids), size=min(batch_size, len(ids)), replace=len(ids) < batch_size)
    return [ids[i] for i in picks]


def _sample_ids_balanced(corpus: TrainingCorpus, rng: np.random.Generator, batch_size: int) -> List[str]:
    """Half real, half forged per detection batch (real images are otherwise
    outnumbered 2:1 by fakes plus blends, which invites classifier collapse)."""
    reals = [i for i in corpus.image_ids if not corpus.images[i].is_fake]
    forged = [i for i in corpus.image_ids if corpus.images[i].is_fake]
    if not reals or not forged:
        return _sample_ids(corpus.image_ids, rng, batch_size)
    half = max(batch_size // 2, 1)
    return _sample_ids(reals, rng, half) + _sample_ids(forged, rng, batch_size - half)


def _group_triplets(images: Dict[str, CorpusImage]) -> List[Tuple[str, str, str]]:
    """(real, fake, blend) triples sharing a pair stem ("<pid>:<role>" ids)."""
    by_pair: Dict[str, Dict[str, str]] = {}
    for image_id, item in images.items():
        if ":" not in image_id:
            continue
        pid, _, _ = image_id.rpartition(":")
        by_pair.setdefault(pid, {})[item.label] = image_id
    triplets = []
    for pid in sorted(by_pair):
        roles = by_pair[pid]
        if {"real", "fake", "blend"} <= set(roles):
            triplets.append((roles["real"], roles["fake"], roles["blend"]))
    return triplets


def _quality_of(pixels: np.ndarray) -> np.ndarray:
    from .quality import QualityIndicators

    return QualityIndicators.from_image(pixels).vector()


def _write_log(path, history: List[Dict[str, float]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fields = ["step", "total", "text", "binary", "segmentation", "fine_grained", "calibration"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for row in history:
            writer.writerow({k: row.get(k, 0.0) for k in fields})
    return path
