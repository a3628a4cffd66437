"""Word-level vocabulary and a tiny decoder-only LM over embedded prompts.

The LM consumes pre-embedded prompt sequences (prompts carry image, prompt
and question content) followed by answer token embeddings; only answer
positions produce logits used by the losses.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import torch
import torch.nn as nn

from .blocks import TransformerBlock
from .text import detokenize, tokenize

PAD, BOS, EOS = "<pad>", "<bos>", "<eos>"
SPECIAL_TOKENS = (PAD, BOS, EOS)

VOCAB_FORMAT_VERSION = 1


class SequenceTooLongError(RuntimeError):
    """Assembled input exceeds the model context length."""


@dataclass
class Vocabulary:
    """Closed word-level vocabulary with explicit real/fake ids."""

    token_to_id: Dict[str, int]

    @classmethod
    def build(cls, texts: Iterable[str]) -> "Vocabulary":
        words = set()
        for text in texts:
            words.update(tokenize(text))
        words.update(("real", "fake"))
        mapping = {tok: i for i, tok in enumerate(SPECIAL_TOKENS)}
        for tok in sorted(words):
            mapping[tok] = len(mapping)
        return cls(token_to_id=mapping)

    def __post_init__(self):
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}

    def __len__(self) -> int:
        return len(self.token_to_id)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def bos_id(self) -> int:
        return self.token_to_id[BOS]

    @property
    def eos_id(self) -> int:
        return self.token_to_id[EOS]

    @property
    def real_id(self) -> int:
        return self.token_to_id["real"]

    @property
    def fake_id(self) -> int:
        return self.token_to_id["fake"]

    def encode(self, text: str) -> List[int]:
        try:
            return [self.token_to_id[tok] for tok in tokenize(text)]
        except KeyError as exc:
            raise KeyError(f"token {exc.args[0]!r} not in vocabulary (closed corpus)") from exc

    def decode(self, ids: Iterable[int]) -> str:
        tokens = [self.id_to_token[int(i)] for i in ids if int(i) not in
                  (self.pad_id, self.bos_id, self.eos_id)]
        return detokenize(tokens)

    def save(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {"version": VOCAB_FORMAT_VERSION,
                   "tokens": dict(sorted(self.token_to_id.items(), key=lambda kv: kv[1]))}
        path.write_text(json.dumps(payload, ensure_ascii=False, indent=0), encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "Vocabulary":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("version") != VOCAB_FORMAT_VERSION:
            raise ValueError(f"unsupported vocab version {payload.get('version')!r}")
        return cls(token_to_id={str(k): int(v) for k, v in payload["tokens"].items()})


@dataclass
class LMConfig:
    dim: int = 64
    layers: int = 2
    heads: int = 4
    context: int = 256
    vocab_size: int = 0  # filled from the vocabulary


@dataclass
class GeneratedText:
    ids: List[int]
    text: str


class TinyLM(nn.Module):
    """Decoder-only transformer over pre-embedded inputs."""

    def __init__(self, config: LMConfig):
        super().__init__()
        if config.vocab_size <= 0:
            raise ValueError("vocab_size must be set")
        self.config = config
        self.token_emb = nn.Embedding(config.vocab_size, config.dim)
        self.pos_emb = nn.Parameter(torch.zeros(config.context, config.dim))
        self.blocks = nn.ModuleList(
            TransformerBlock(config.dim, config.heads, causal=True)
            for _ in range(config.layers)
        )
        self.norm = nn.LayerNorm(config.dim)
        self.head = nn.Linear(config.dim, config.vocab_size)
        nn.init.normal_(self.token_emb.weight, std=0.02)
        nn.init.normal_(self.pos_emb, std=0.02)

    def embed_tokens(self, ids: torch.Tensor) -> torch.Tensor:
        return self.token_emb(ids)

    def forward_hidden(
        self,
        inputs_embeds: torch.Tensor,
        key_mask: Optional[torch.Tensor] = None,
        position_ids: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Hidden states for a (B, S, D) embedded sequence."""
        b, s, _ = inputs_embeds.shape
        if s > self.config.context:
            raise SequenceTooLongError(f"sequence of {s} exceeds context {self.config.context}")
        if position_ids is None:
            position_ids = torch.arange(s, device=inputs_embeds.device).expand(b, s)
        x = inputs_embeds + self.pos_emb[position_ids]
        for block in self.blocks:
            x = block(x, key_mask=key_mask)
        return self.norm(x)

    def forward_logits(
        self,
        prompt_embeds: torch.Tensor,
        answer_ids: torch.Tensor,
        key_mask: Optional[torch.Tensor] = None,
        position_ids: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Per-answer-position vocabulary logits (teacher forcing).

        ``prompt_embeds``: (S, D) or (B, S, D) conditioning sequence.
        ``answer_ids``: (T,) or (B, T); logits[t] predicts answer_ids[t].
        Prompt positions are conditioning only and produce no logits.
        """
        squeeze = prompt_embeds.dim() == 2
        if squeeze:
            prompt_embeds = prompt_embeds.unsqueeze(0)
            answer_ids = answer_ids.unsqueeze(0)
        b, s, _ = prompt_embeds.shape
        t = answer_ids.shape[1]
        seq = torch.cat([prompt_embeds, self.embed_tokens(answer_ids)], dim=1)
        hidden = self.forward_hidden(seq, key_mask=key_mask, position_ids=position_ids)
        logits = self.head(hidden[:, s - 1 : s + t - 1, :])
        return logits.squeeze(0) if squeeze else logits

    @torch.no_grad()
    def generate(
        self,
        prompt_embeds: torch.Tensor,
        max_tokens: int,
        vocab: Vocabulary,
    ) -> GeneratedText:
        """Greedy decoding until EOS or ``max_tokens``."""
        if prompt_embeds.dim() == 2:
            prompt_embeds = prompt_embeds.unsqueeze(0)
        seq = prompt_embeds
        ids: List[int] = []
        for _ in range(max_tokens):
            hidden = self.forward_hidden(seq)
            logits = self.head(hidden[:, -1, :])
            next_id = int(torch.argmax(logits, dim=-1).item())
            if next_id == vocab.eos_id:
                break
            ids.append(next_id)
            next_emb = self.embed_tokens(torch.tensor([[next_id]], device=seq.device))
            seq = torch.cat([seq, next_emb], dim=1)
        return GeneratedText(ids=ids, text=vocab.decode(ids))


def authenticity_logits(
    logits: torch.Tensor, authenticity_word_index: int, vocab: Vocabulary
) -> Tuple[torch.Tensor, torch.Tensor]:
    """Extract (logit_real, logit_fake) at the marked answer position."""
    if logits.dim() != 2:
        raise ValueError(f"expected (answer_len, vocab) logits, got {tuple(logits.shape)}")
    if not 0 <= authenticity_word_index < logits.shape[0]:
        raise IndexError(
            f"authenticity index {authenticity_word_index} outside answer of "
            f"length {logits.shape[0]}"
        )
    row = logits[authenticity_word_index]
    return row[vocab.real_id], row[vocab.fake_id]
