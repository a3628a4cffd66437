"""Toy vision encoder, segmentation decoder and forgery classification head."""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .blocks import TransformerBlock


class ShapeError(ValueError):
    """Input tensor does not match the configured geometry."""


@dataclass
class VisionConfig:
    image_size: int = 64
    patch: int = 8
    dim: int = 64
    layers: int = 2
    heads: int = 4
    seg_channels: int = 32
    seg_feature_dim: int = 32
    seg_tokens: int = 4       # L, matches the location-prompt length
    mask_size: int = 32       # segmentation logit resolution

    @property
    def grid(self) -> int:
        if self.image_size % self.patch != 0:
            raise ValueError("image_size must be divisible by patch")
        return self.image_size // self.patch

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid


@dataclass
class VisionFeatures:
    patch_embeddings: torch.Tensor  # (B, P, D)
    pooled: torch.Tensor            # (B, D)


@dataclass
class SegOutput:
    mask_logits: torch.Tensor   # (B, H', W')
    seg_feature: torch.Tensor   # (B, L, seg_feature_dim)
    class_logit: torch.Tensor   # (B,)


class PatchEncoder(nn.Module):
    """Patch projection plus a small transformer; pooled output is the mean token."""

    def __init__(self, config: VisionConfig):
        super().__init__()
        self.config = config
        self.patch_proj = nn.Conv2d(3, config.dim, kernel_size=config.patch, stride=config.patch)
        self.pos_emb = nn.Parameter(torch.zeros(config.num_patches, config.dim))
        self.blocks = nn.ModuleList(
            TransformerBlock(config.dim, config.heads) for _ in range(config.layers)
        )
        self.norm = nn.LayerNorm(config.dim)
        nn.init.normal_(self.pos_emb, std=0.02)

    def forward(self, pixels: torch.Tensor) -> VisionFeatures:
        # pixels: (B, 3, H, W) or (3, H, W)
        if pixels.dim() == 3:
            pixels = pixels.unsqueeze(0)
        size = self.config.image_size
        if pixels.shape[1:] != (3, size, size):
            raise ShapeError(
                f"expected (B, 3, {size}, {size}) pixels, got {tuple(pixels.shape)}"
            )
        x = self.patch_proj(pixels)                      # (B, D, g, g)
        x = x.flatten(2).transpose(1, 2)                 # (B, P, D)
        x = x + self.pos_emb
        for block in self.blocks:
            x = block(x)
        x = self.norm(x)
        return VisionFeatures(patch_embeddings=x, pooled=x.mean(dim=1))


class SegDecoder(nn.Module):
    """Two upsample+conv stages over the patch grid, with mask and token heads."""

    def __init__(self, config: VisionConfig):
        super().__init__()
        self.config = config
        c = config.seg_channels
        self.conv1 = nn.Conv2d(config.dim, c, kernel_size=3, padding=1)
        self.conv2 = nn.Conv2d(c, c, kernel_size=3, padding=1)
        self.mask_head = nn.Conv2d(c, 1, kernel_size=1)
        self.token_head = nn.Linear(2 * c, config.seg_tokens * config.seg_feature_dim)

    def forward(self, features: VisionFeatures):
        """Returns (mask_logits, seg_feature, pooled_decoder_feature).

        The pooled feature concatenates mean- and max-pooling so a small hot
        region (a localized forgery) is not averaged away before the
        classification head.
        """
        cfg = self.config
        b, p, d = features.patch_embeddings.shape
        if p != cfg.num_patches:
            raise ShapeError(f"expected {cfg.num_patches} patches, got {p}")
        grid = cfg.grid
        x = features.patch_embeddings.transpose(1, 2).reshape(b, d, grid, grid)
        x = F.gelu(self.conv1(F.interpolate(x, scale_factor=2, mode="nearest")))
        x = F.gelu(self.conv2(F.interpolate(x, scale_factor=2, mode="nearest")))
        logits = self.mask_head(x)
        if logits.shape[-1] != cfg.mask_size:
            logits = F.interpolate(
                logits, size=(cfg.mask_size, cfg.mask_size), mode="bilinear",
                align_corners=False,
            )
        pooled = torch.cat([x.mean(dim=(2, 3)), x.amax(dim=(2, 3))], dim=-1)  # (B, 2C)
        tokens = self.token_head(pooled).view(b, cfg.seg_tokens, cfg.seg_feature_dim)
        return logits.squeeze(1), tokens, pooled


class ClassHead(nn.Module):
    """Linear real/fake head on the pooled (mean + max) last decoder feature."""

    def __init__(self, config: VisionConfig):
        super().__init__()
        self.fc = nn.Linear(2 * config.seg_channels, 1)

    def forward(self, pooled_decoder_feature: torch.Tensor) -> torch.Tensor:
        return self.fc(pooled_decoder_feature).squeeze(-1)


def decode_segmentation(
    decoder: SegDecoder, cls_head: ClassHead, features: VisionFeatures
) -> SegOutput:
    mask_logits, seg_feature, pooled = decoder(features)
    return SegOutput(
        mask_logits=mask_logits,
        seg_feature=seg_feature,
        class_logit=cls_head(pooled),
    )
