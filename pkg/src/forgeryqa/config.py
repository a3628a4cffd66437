"""Model and training configuration with per-stage defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from .lm import LMConfig
from .lora import LoRAConfig
from .losses import LossWeights
from .vision import VisionConfig

STAGES = (1, 2, 3)

STAGE_DEFAULT_LR = {1: 4e-5, 2: 4e-5, 3: 1e-6}
STAGE_DEFAULT_BATCH = {1: 64, 2: 64, 3: 48}

# Which parameter groups train in each stage; everything else stays frozen.
STAGE_TRAINABLE: Dict[int, Tuple[str, ...]] = {
    1: ("seg_decoder", "cls_head"),
    2: ("image_projector", "prompt_ctx", "seg_projector"),
    3: ("lora", "prompt_ctx"),
}

# Which loss terms are active per stage (binary/segmentation stay on in
# later stages by default; set train.active_losses to override).
STAGE_ACTIVE_LOSSES: Dict[int, Tuple[str, ...]] = {
    1: ("binary", "segmentation"),
    2: ("text", "binary", "segmentation", "fine_grained"),
    3: ("text", "binary", "segmentation", "fine_grained", "calibration"),
}


@dataclass
class ModelConfig:
    image_size: int = 64
    patch: int = 8
    vision_dim: int = 64
    vision_layers: int = 2
    vision_heads: int = 4
    seg_channels: int = 32
    seg_feature_dim: int = 32
    mask_size: int = 32
    lm_dim: int = 64
    lm_layers: int = 2
    lm_heads: int = 4
    context: int = 256
    prompt_m: int = 8
    prompt_l: int = 4
    lora_rank: int = 4
    lora_alpha: float = 8.0
    lora_dropout: float = 0.05
    router_hidden: int = 16
    lora_targets: Tuple[str, ...] = ("q_proj", "k_proj", "v_proj", "o_proj", "fc1", "fc2")

    def vision_config(self) -> VisionConfig:
        return VisionConfig(
            image_size=self.image_size,
            patch=self.patch,
            dim=self.vision_dim,
            layers=self.vision_layers,
            heads=self.vision_heads,
            seg_channels=self.seg_channels,
            seg_feature_dim=self.seg_feature_dim,
            seg_tokens=self.prompt_l,
            mask_size=self.mask_size,
        )

    def lm_config(self, vocab_size: int) -> LMConfig:
        return LMConfig(
            dim=self.lm_dim,
            layers=self.lm_layers,
            heads=self.lm_heads,
            context=self.context,
            vocab_size=vocab_size,
        )

    def lora_config(self) -> LoRAConfig:
        return LoRAConfig(
            rank=self.lora_rank,
            alpha=self.lora_alpha,
            dropout=self.lora_dropout,
            router_hidden=self.router_hidden,
            vision_dim=self.vision_dim,
            target_layers=tuple(self.lora_targets),
        )


@dataclass
class TrainConfig:
    stage: int = 1
    steps: int = 200
    seed: int = 0
    batch_size: Optional[int] = None   # stage default when None
    lr: Optional[float] = None         # stage default when None
    betas: Tuple[float, float] = (0.9, 0.995)
    lambdas: Tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    active_losses: Optional[Tuple[str, ...]] = None  # stage default when None
    contrastive_source: str = "vision_pooled"        # or "projected"
    fine_grained_aux: bool = True
    triplets_per_step: int = 2
    dataset: Optional[str] = None
    out_dir: Optional[str] = None

    def resolved_lr(self) -> float:
        return self.lr if self.lr is not None else STAGE_DEFAULT_LR[self.stage]

    def resolved_batch_size(self) -> int:
        return (
            self.batch_size
            if self.batch_size is not None
            else STAGE_DEFAULT_BATCH[self.stage]
        )

    def resolved_active_losses(self) -> Tuple[str, ...]:
        return (
            tuple(self.active_losses)
            if self.active_losses is not None
            else STAGE_ACTIVE_LOSSES[self.stage]
        )

    def loss_weights(self) -> LossWeights:
        l1, l2, l3, l4 = self.lambdas
        return LossWeights(
            binary=l1, segmentation=l2, fine_grained=l3, calibration=l4
        ).validate()

    def validate(self) -> "TrainConfig":
        if self.stage not in STAGES:
            raise ValueError(f"stage must be one of {STAGES}, got {self.stage}")
        if self.contrastive_source not in ("vision_pooled", "projected"):
            raise ValueError(f"unknown contrastive source {self.contrastive_source!r}")
        self.loss_weights()
        return self


@dataclass
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)


def _merge(cls, payload: dict):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(payload) - known
    if unknown:
        raise ValueError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    coerced = {}
    for key, value in payload.items():
        if isinstance(value, list):
            value = tuple(value)
        coerced[key] = value
    return cls(**coerced)


def load_config(path) -> RunConfig:
    """Read a JSON config file with optional "model" and "train" sections."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    model = _merge(ModelConfig, payload.get("model", {}))
    train = _merge(TrainConfig, payload.get("train", {}))
    train.validate()
    return RunConfig(model=model, train=train)


def save_config(config: RunConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "model": dataclasses.asdict(config.model),
        "train": dataclasses.asdict(config.train),
    }
    path.write_text(json.dumps(payload, indent=2), encoding="utf-8")
    return path
