"""Full model assembly: vision encoder, segmentation decoder, prompts,
hybrid-LoRA language model, and the batched QA forward pass."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn as nn

from .config import ModelConfig
from .lm import TinyLM, Vocabulary
from .lora import iter_hybrid_linears, routed, wrap_lm_with_experts
from .prompts import (
    ContextVectors,
    SUFFIX_FAKE_TEXT,
    SUFFIX_REAL_TEXT,
    assemble_llm_input,
    location_prompt,
    probability_prompt,
)
from .templates import DEFAULT_TEMPLATES
from .vision import ClassHead, PatchEncoder, SegDecoder, SegOutput, decode_segmentation

PARAMETER_GROUPS = (
    "vision_encoder",
    "seg_decoder",
    "cls_head",
    "image_projector",
    "prompt_ctx",
    "seg_projector",
    "lm_base",
    "lora",
)


def build_vocabulary(extra_texts: Sequence[str] = ()) -> Vocabulary:
    """Vocabulary over all template texts, prompt suffixes and extras."""
    texts = DEFAULT_TEMPLATES.all_texts() + [SUFFIX_FAKE_TEXT, SUFFIX_REAL_TEXT]
    texts.extend(extra_texts)
    return Vocabulary.build(texts)


class PromptModule(nn.Module):
    """Context vectors plus the segmentation-feature projector."""

    def __init__(self, config: ModelConfig, lm: TinyLM, vocab: Vocabulary):
        super().__init__()
        self.ctx = ContextVectors(config.prompt_m, config.prompt_l, config.lm_dim, lm, vocab)
        self.seg_projector = nn.Linear(config.seg_feature_dim, config.lm_dim)


@dataclass
class QAForward:
    """Everything one training step needs from a batched QA forward pass."""

    answer_logits: List[torch.Tensor]  # per sample: (T_i, vocab)
    y_hat: torch.Tensor                # (B,)
    mask_logits: torch.Tensor          # (B, H', W')
    pooled_vision: torch.Tensor        # (B, D_v)
    pooled_projected: torch.Tensor     # (B, D_lm)


class ForgeryVLM(nn.Module):
    """Vision encoder + segmentation decoder + prompted, LoRA-adapted LM."""

    def __init__(self, config: ModelConfig, vocab: Vocabulary):
        super().__init__()
        self.config = config
        self.vocab = vocab
        vcfg = config.vision_config()
        self.vision = PatchEncoder(vcfg)
        self.seg = SegDecoder(vcfg)
        self.cls = ClassHead(vcfg)
        self.proj = nn.Linear(config.vision_dim, config.lm_dim)
        self.lm = TinyLM(config.lm_config(len(vocab)))
        wrap_lm_with_experts(self.lm, config.lora_config())
        self.prompt = PromptModule(config, self.lm, vocab)

    # ----- component passes -------------------------------------------------

    def encode_image(self, pixels: torch.Tensor):
        return self.vision(pixels)

    def decode_segmentation(self, features) -> SegOutput:
        return decode_segmentation(self.seg, self.cls, features)

    def question_embedding(self, question_ids: torch.Tensor) -> torch.Tensor:
        return self.lm.embed_tokens(question_ids)

    def build_prompt(
        self, pixels: torch.Tensor, question_ids: torch.Tensor
    ) -> Tuple[torch.Tensor, SegOutput, torch.Tensor]:
        """Flat prompt embedding for a single image + question.

        Returns (flat prompt (S, D), segmentation output, pooled vision).
        """
        features = self.encode_image(pixels)
        seg_out = self.decode_segmentation(features)
        y_hat = torch.sigmoid(seg_out.class_logit)[0]
        bundle = assemble_llm_input(
            probability=probability_prompt(y_hat, self.prompt.ctx),
            location=location_prompt(
                seg_out.seg_feature[0], self.prompt.ctx, self.prompt.seg_projector
            ),
            question=self.question_embedding(question_ids),
            vision=self.proj(features.patch_embeddings[0]),
        )
        return bundle.flat(), seg_out, features.pooled[0]

    # ----- batched QA forward ----------------------------------------------

    def forward_qa_batch(
        self,
        pixels: torch.Tensor,                 # (B, 3, H, W)
        quality: torch.Tensor,                # (B, 6)
        question_ids: Sequence[torch.Tensor],  # B tensors (S_q_i,)
        answer_ids: Sequence[torch.Tensor],    # B tensors (T_i,)
        cached_vision: Optional[dict] = None,
    ) -> QAForward:
        b = pixels.shape[0]
        if cached_vision is None:
            features = self.encode_image(pixels)
            seg_out = self.decode_segmentation(features)
            patch, pooled = features.patch_embeddings, features.pooled
        else:
            patch = cached_vision["patch"]
            pooled = cached_vision["pooled"]
            seg_out = SegOutput(
                mask_logits=cached_vision["mask_logits"],
                seg_feature=cached_vision["seg_feature"],
                class_logit=cached_vision["class_logit"],
            )
        y_hat = torch.sigmoid(seg_out.class_logit)
        prob = probability_prompt(y_hat, self.prompt.ctx)          # (B, S_p, D)
        loc = location_prompt(seg_out.seg_feature, self.prompt.ctx, self.prompt.seg_projector)
        vis = self.proj(patch)                                     # (B, S_v, D)

        seqs, answer_starts = [], []
        for i in range(b):
            q_emb = self.question_embedding(question_ids[i])
            a_emb = self.lm.embed_tokens(answer_ids[i])
            flat = torch.cat([prob[i], loc[i], q_emb, vis[i], a_emb], dim=0)
            answer_starts.append(flat.shape[0] - a_emb.shape[0])
            seqs.append(flat)

        max_len = max(s.shape[0] for s in seqs)
        dim = seqs[0].shape[-1]
        padded = pixels.new_zeros((b, max_len, dim))
        key_mask = torch.zeros(b, max_len, dtype=torch.bool, device=pixels.device)
        for i, s in enumerate(seqs):
            padded[i, : s.shape[0]] = s
            key_mask[i, : s.shape[0]] = True

        with routed(self.lm, pooled.detach(), quality):
            hidden = self.lm.forward_hidden(padded, key_mask=key_mask)

        answer_logits = []
        for i in range(b):
            t = answer_ids[i].shape[0]
            start = answer_starts[i]
            answer_logits.append(self.lm.head(hidden[i, start - 1 : start + t - 1]))
        return QAForward(
            answer_logits=answer_logits,
            y_hat=y_hat,
            mask_logits=seg_out.mask_logits,
            pooled_vision=pooled,
            pooled_projected=self.proj(pooled),
        )

    def forward_detection(self, pixels: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor, "SegOutput"]:
        """Stage-1 pass: (y_hat, mask_logits, full segmentation output)."""
        features = self.encode_image(pixels)
        seg_out = self.decode_segmentation(features)
        return torch.sigmoid(seg_out.class_logit), seg_out.mask_logits, seg_out

    @torch.no_grad()
    def answer_question(
        self, pixels: torch.Tensor, quality: torch.Tensor, question: str,
        max_tokens: int = 32,
    ) -> str:
        """Greedy-decoded answer text for one image + question."""
        was_training = self.training
        self.eval()
        try:
            question_ids = torch.tensor(self.vocab.encode(question), dtype=torch.long)
            flat, _, pooled = self.build_prompt(pixels, question_ids)
            with routed(self.lm, pooled.unsqueeze(0), quality.reshape(1, -1)):
                out = self.lm.generate(flat, max_tokens=max_tokens, vocab=self.vocab)
        finally:
            if was_training:
                self.train()
        return out.text

    # ----- parameter bookkeeping --------------------------------------------

    def parameter_groups(self) -> Dict[str, Dict[str, nn.Parameter]]:
        """Exact partition of all parameters into the named groups."""
        groups: Dict[str, Dict[str, nn.Parameter]] = {g: {} for g in PARAMETER_GROUPS}
        for name, param in self.named_parameters():
            groups[classify_parameter(name)][name] = param
        return groups

    def set_trainable(self, trainable_groups: Sequence[str]) -> List[nn.Parameter]:
        """Freeze everything outside ``trainable_groups``; returns trainables."""
        unknown = set(trainable_groups) - set(PARAMETER_GROUPS)
        if unknown:
            raise ValueError(f"unknown parameter groups: {sorted(unknown)}")
        trainable: List[nn.Parameter] = []
        for group, params in self.parameter_groups().items():
            flag = group in trainable_groups
            for param in params.values():
                param.requires_grad_(flag)
                if flag:
                    trainable.append(param)
        return trainable

    def wrapped_layers(self):
        return iter_hybrid_linears(self.lm)


def classify_parameter(name: str) -> str:
    """Map a named_parameters() entry to its parameter group."""
    if name.startswith("vision."):
        return "vision_encoder"
    if name.startswith("seg."):
        return "seg_decoder"
    if name.startswith("cls."):
        return "cls_head"
    if name.startswith("proj."):
        return "image_projector"
    if name.startswith("prompt.ctx."):
        return "prompt_ctx"
    if name.startswith("prompt.seg_projector."):
        return "seg_projector"
    if name.startswith("lm."):
        if ".experts." in name or ".global_expert." in name or ".router." in name:
            return "lora"
        return "lm_base"
    raise ValueError(f"cannot classify parameter {name!r}")


def quality_tensor(quality: Optional[Sequence[float]], pixels: np.ndarray) -> torch.Tensor:
    """Quality vector as a tensor, computed from pixels when not provided."""
    from .quality import QualityIndicators

    if quality is not None:
        return torch.tensor([float(v) for v in quality], dtype=torch.get_default_dtype())
    vec = QualityIndicators.from_image(pixels).vector()
    return torch.tensor(vec, dtype=torch.get_default_dtype())
