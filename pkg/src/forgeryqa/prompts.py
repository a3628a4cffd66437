"""Prompt construction: probability prompt, location prompt, input assembly.

The probability prompt scales a learnable "fake" phrase by the classifier's
forgery probability and a learnable "real" phrase by its complement, so the
LM input literally carries the classifier's confidence.  The location prompt
adds projected segmentation tokens to learnable vectors.  Both are fully
differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Tuple

import torch
import torch.nn as nn

from .lm import TinyLM, Vocabulary
from .vision import ShapeError

SUFFIX_FAKE_TEXT = "it is fake"
SUFFIX_REAL_TEXT = "it is real"


class IncompleteBundleError(ValueError):
    """A prompt segment required for assembly is missing."""


class ContextVectors(nn.Module):
    """Learnable context vectors plus frozen authenticity suffix embeddings."""

    def __init__(self, m: int, l: int, dim: int, lm: TinyLM, vocab: Vocabulary):
        super().__init__()
        self.m = m
        self.l = l
        self.dim = dim
        self.fake_context = nn.Parameter(torch.empty(m, dim).normal_(std=0.02))
        self.real_context = nn.Parameter(torch.empty(m, dim).normal_(std=0.02))
        self.location_context = nn.Parameter(torch.empty(l, dim).normal_(std=0.02))
        # Suffixes are snapshots of the LM token embeddings, frozen: only the
        # context vectors train.
        with torch.no_grad():
            fake_ids = torch.tensor(vocab.encode(SUFFIX_FAKE_TEXT))
            real_ids = torch.tensor(vocab.encode(SUFFIX_REAL_TEXT))
            self.register_buffer("fake_suffix", lm.embed_tokens(fake_ids).detach().clone())
            self.register_buffer("real_suffix", lm.embed_tokens(real_ids).detach().clone())

    @property
    def fake_phrase(self) -> torch.Tensor:
        return torch.cat([self.fake_context, self.fake_suffix], dim=0)

    @property
    def real_phrase(self) -> torch.Tensor:
        return torch.cat([self.real_context, self.real_suffix], dim=0)

    @property
    def probability_length(self) -> int:
        return self.fake_phrase.shape[0] + self.real_phrase.shape[0]


def probability_prompt(y_hat, ctx: ContextVectors) -> torch.Tensor:
    """concat(y_hat * fake_phrase, (1 - y_hat) * real_phrase).

    ``y_hat`` may be a float, a 0-d tensor, or a (B,) tensor; the output is
    (S_p, D) or (B, S_p, D) accordingly.
    """
    y = y_hat if torch.is_tensor(y_hat) else torch.tensor(float(y_hat))
    if not bool(torch.all((y >= 0.0) & (y <= 1.0))):
        raise ValueError(f"forgery probability outside [0, 1]: {y_hat!r}")
    fake = ctx.fake_phrase
    real = ctx.real_phrase
    if y.dim() == 0:
        return torch.cat([y * fake, (1.0 - y) * real], dim=0)
    y = y.view(-1, 1, 1)
    batched = torch.cat([y * fake.unsqueeze(0).expand(y.shape[0], -1, -1),
                         (1.0 - y) * real.unsqueeze(0).expand(y.shape[0], -1, -1)], dim=1)
    return batched


def location_prompt(
    seg_feature: torch.Tensor, ctx: ContextVectors, projector: nn.Linear
) -> torch.Tensor:
    """project(seg_feature) + location context, elementwise."""
    if seg_feature.shape[-2] != ctx.l:
        raise ShapeError(
            f"expected {ctx.l} segmentation tokens, got {seg_feature.shape[-2]}"
        )
    if seg_feature.shape[-1] != projector.in_features:
        raise ShapeError(
            f"segmentation feature dim {seg_feature.shape[-1]} does not match "
            f"projector input {projector.in_features}"
        )
    return projector(seg_feature) + ctx.location_context


@dataclass
class PromptBundle:
    """The four LM input segments in fixed order with recorded boundaries."""

    probability: torch.Tensor
    location: torch.Tensor
    question: torch.Tensor
    vision: torch.Tensor

    @property
    def boundaries(self) -> List[int]:
        """Start offset of each segment in the flat sequence."""
        s_p = self.probability.shape[-2]
        l = self.location.shape[-2]
        s_q = self.question.shape[-2]
        return [0, s_p, s_p + l, s_p + l + s_q]

    @property
    def total_length(self) -> int:
        return self.boundaries[3] + self.vision.shape[-2]

    def flat(self) -> torch.Tensor:
        return torch.cat(
            [self.probability, self.location, self.question, self.vision], dim=-2
        )

    def segments(self) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """Re-slice the flat sequence back into the four segments."""
        flat = self.flat()
        b = self.boundaries
        return (
            flat[..., b[0] : b[1], :],
            flat[..., b[1] : b[2], :],
            flat[..., b[2] : b[3], :],
            flat[..., b[3] :, :],
        )


def assemble_llm_input(
    probability: Optional[torch.Tensor],
    location: Optional[torch.Tensor],
    question: Optional[torch.Tensor],
    vision: Optional[torch.Tensor],
) -> PromptBundle:
    segments = {
        "probability": probability,
        "location": location,
        "question": question,
        "vision": vision,
    }
    missing = [name for name, seg in segments.items() if seg is None]
    if missing:
        raise IncompleteBundleError(f"missing prompt segments: {', '.join(missing)}")
    dims = {seg.shape[-1] for seg in segments.values()}
    if len(dims) != 1:
        raise ShapeError(f"segment embedding dims differ: {sorted(dims)}")
    return PromptBundle(
        probability=probability, location=location, question=question, vision=vision
    )
