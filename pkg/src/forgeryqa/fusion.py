"""Prediction fusion with an external detector.

A small trained head maps the model's pooled vision feature plus the
external score to a fused probability, which is then blended with the
external prediction: final = w * external + (1 - w) * fused.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


class FusionHead(nn.Module):
    """One hidden layer over [pooled vision feature, external score]."""

    def __init__(self, feature_dim: int, hidden: int = 32):
        super().__init__()
        self.fc1 = nn.Linear(feature_dim + 1, hidden)
        self.fc2 = nn.Linear(hidden, 1)

    def forward(self, features: torch.Tensor, p_external: torch.Tensor) -> torch.Tensor:
        x = torch.cat([features, p_external.unsqueeze(-1)], dim=-1)
        return torch.sigmoid(self.fc2(F.relu(self.fc1(x)))).squeeze(-1)


def blend_predictions(p_external, p_fused, w: float):
    """w * external + (1 - w) * fused, all inputs validated to [0, 1]."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"fusion weight must be in [0, 1], got {w}")
    for name, value in (("external", p_external), ("fused", p_fused)):
        tensor = value if torch.is_tensor(value) else torch.tensor(float(value))
        if not bool(torch.all((tensor >= 0.0) & (tensor <= 1.0))):
            raise ValueError(f"{name} prediction outside [0, 1]: {value!r}")
    return w * p_external + (1.0 - w) * p_fused


def fuse_predictions(
    p_external: torch.Tensor,
    features: torch.Tensor,
    head: FusionHead,
    w: float = 0.5,
) -> torch.Tensor:
    """Final probability blending the external score with the trained head."""
    p_fused = head(features, _as_prob(p_external, features))
    return blend_predictions(_as_prob(p_external, features), p_fused, w)


def fit_fusion_head(
    head: FusionHead,
    features: torch.Tensor,
    p_external: torch.Tensor,
    labels: torch.Tensor,
    steps: int = 300,
    lr: float = 1e-2,
) -> list:
    """Train the head with BCE on ground-truth labels; returns loss history."""
    optimizer = torch.optim.Adam(head.parameters(), lr=lr)
    history = []
    for _ in range(steps):
        optimizer.zero_grad()
        fused = head(features, p_external)
        loss = F.binary_cross_entropy(fused.clamp(1e-7, 1 - 1e-7), labels.to(fused.dtype))
        loss.backward()
        optimizer.step()
        history.append(float(loss.detach()))
    return history


def _as_prob(value, like: torch.Tensor) -> torch.Tensor:
    if torch.is_tensor(value):
        tensor = value
    else:
        tensor = torch.tensor(float(value), dtype=like.dtype)
    if not bool(torch.all((tensor >= 0.0) & (tensor <= 1.0))):
        raise ValueError(f"external prediction outside [0, 1]: {value!r}")
    return tensor
