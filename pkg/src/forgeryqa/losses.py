"""Loss functions for the staged training schedule.

All losses are plain differentiable tensor expressions; the analytic anchor
values (ln 2 at symmetric inputs, ln V under uniform logits, ...) are pinned
by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional

import torch
import torch.nn.functional as F

_EPS = 1e-7

LOSS_NAMES = ("text", "binary", "segmentation", "fine_grained", "calibration")


@dataclass
class LossWeights:
    """lambda weights for the binary, segmentation, fine-grained and
    calibration terms (the text loss has implicit weight 1)."""

    binary: float = 1.0
    segmentation: float = 1.0
    fine_grained: float = 1.0
    calibration: float = 1.0

    def validate(self) -> "LossWeights":
        for name in ("binary", "segmentation", "fine_grained", "calibration"):
            if getattr(self, name) < 0:
                raise ValueError(f"lambda for {name} must be >= 0")
        return self


def loss_binary(y_hat, y) -> torch.Tensor:
    """Binary cross-entropy on the image-level forgery probability."""
    y_hat = _as_tensor(y_hat).clamp(_EPS, 1.0 - _EPS)
    y = _as_tensor(y).to(y_hat.dtype)
    return (-(y * torch.log(y_hat) + (1.0 - y) * torch.log(1.0 - y_hat))).mean()


def loss_segmentation(mask_logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean per-pixel binary cross-entropy; the target mask is resized
    (area-averaged) to the logit resolution when shapes differ."""
    if mask.shape[-2:] != mask_logits.shape[-2:]:
        squeeze = mask.dim() == 2
        m = mask[None, None] if squeeze else mask[:, None]
        m = F.adaptive_avg_pool2d(m.to(mask_logits.dtype), mask_logits.shape[-2:])
        mask = m[0, 0] if squeeze else m[:, 0]
    return F.binary_cross_entropy_with_logits(mask_logits, mask.to(mask_logits.dtype))


def loss_fine_grained(sim_nh, sim_ph) -> torch.Tensor:
    """Two-way softmax pulling the blend toward the fully fake image:

        -log exp(sim(N,H)) / (exp(sim(N,H)) + exp(sim(P,H)))
    """
    sim_nh = _as_tensor(sim_nh)
    sim_ph = _as_tensor(sim_ph)
    return F.softplus(sim_ph - sim_nh).mean()


def loss_fine_grained_aux(sim_pp, sim_nn, sim_pn) -> torch.Tensor:
    """Symmetric pair term: pull same-label pairs together, push real away
    from fake, in the same two-way softmax form as the main term."""
    sim_pp = _as_tensor(sim_pp)
    sim_nn = _as_tensor(sim_nn)
    sim_pn = _as_tensor(sim_pn)
    return (F.softplus(sim_pn - sim_pp) + F.softplus(sim_pn - sim_nn)).mean()


def loss_text(answer_logits: torch.Tensor, answer_ids: torch.Tensor) -> torch.Tensor:
    """Mean autoregressive cross-entropy over answer tokens (0 if empty)."""
    if answer_ids.numel() == 0:
        return torch.zeros((), dtype=answer_logits.dtype, device=answer_logits.device)
    return F.cross_entropy(
        answer_logits.reshape(-1, answer_logits.shape[-1]), answer_ids.reshape(-1)
    )


def loss_text_calibration(logit_real, logit_fake, is_fake) -> torch.Tensor:
    """BCE on the two-way softmax over the real/fake logits at the marked
    answer position."""
    z = _as_tensor(logit_fake) - _as_tensor(logit_real)  # log p_fake - log p_real
    target = _as_tensor(is_fake).to(z.dtype)
    return F.binary_cross_entropy_with_logits(z, target)


def cosine_similarity(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return F.cosine_similarity(a, b, dim=-1)


def total_loss(
    components: Dict[str, Optional[torch.Tensor]], weights: LossWeights
) -> torch.Tensor:
    """text + l1*binary + l2*segmentation + l3*fine_grained + l4*calibration.

    Missing / inactive components contribute zero.
    """
    unknown = set(components) - set(LOSS_NAMES)
    if unknown:
        raise ValueError(f"unknown loss components: {sorted(unknown)}")
    lam = {
        "text": 1.0,
        "binary": weights.binary,
        "segmentation": weights.segmentation,
        "fine_grained": weights.fine_grained,
        "calibration": weights.calibration,
    }
    total = torch.zeros(())
    for name, value in components.items():
        if value is None:
            continue
        total = total.to(value.dtype) + lam[name] * value
    return total


def _as_tensor(value) -> torch.Tensor:
    if torch.is_tensor(value):
        return value
    return torch.tensor(float(value), dtype=torch.float64)
