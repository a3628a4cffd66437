"""Attribute-routed hybrid low-rank adapters over frozen LM linears.

Each wrapped linear keeps its frozen base transform and gains four specific
low-rank experts, one global expert and a router.  The router maps the
pooled vision feature and the six quality scores to a 4-way softmax; the
top-1 expert (lowest index on ties) is blended with the global expert:

    output = p* . E_sel(x) + (1 - p*) . E_glob(x) + base(x)

Routing decisions are threaded through a context variable so nested linears
see the per-batch decision without plumbing arguments through the blocks;
context variables keep concurrent forward passes isolated.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import torch
import torch.nn as nn

from .vision import ShapeError

QUALITY_DIM = 6
NUM_SPECIFIC_EXPERTS = 4

_ROUTING: ContextVar[Optional[Dict[int, "ExpertRouting"]]] = ContextVar(
    "hybrid_lora_routing", default=None
)


class ConfigurationError(RuntimeError):
    """Invalid wrap/unwrap request (e.g. wrapping an already-wrapped layer)."""


class RoutingNotSetError(RuntimeError):
    """A hybrid linear ran outside a routing context."""


@dataclass
class LoRAConfig:
    rank: int = 4
    alpha: float = 8.0
    dropout: float = 0.05
    router_hidden: int = 16
    vision_dim: int = 64
    target_layers: Tuple[str, ...] = ("q_proj", "k_proj", "v_proj", "o_proj", "fc1", "fc2")

    @property
    def scaling(self) -> float:
        return self.alpha / self.rank


@dataclass
class ExpertRouting:
    """Per-layer routing decision; tensors carry an optional batch dim."""

    probabilities: torch.Tensor  # (4,) or (B, 4)
    selected_index: torch.Tensor  # () or (B,) long
    p_star: torch.Tensor          # () or (B,)


class LoRAExpert(nn.Module):
    """scaling * B(A(x)) with zero-initialized B (an identity adapter at init)."""

    def __init__(self, d_in: int, d_out: int, rank: int, scaling: float):
        super().__init__()
        self.A = nn.Linear(d_in, rank, bias=False)
        self.B = nn.Linear(rank, d_out, bias=False)
        self.scaling = scaling
        nn.init.kaiming_uniform_(self.A.weight, a=math.sqrt(5))
        nn.init.zeros_(self.B.weight)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.B(self.A(x)) * self.scaling


class Router(nn.Module):
    """(vision feature, quality vector) -> 4 expert logits."""

    def __init__(self, vision_dim: int, hidden: int):
        super().__init__()
        self.l_v = nn.Linear(vision_dim, hidden)
        self.l_q = nn.Linear(QUALITY_DIM, hidden)
        self.l_s = nn.Linear(2 * hidden, NUM_SPECIFIC_EXPERTS)

    def forward(self, f_v: torch.Tensor, q: torch.Tensor) -> torch.Tensor:
        if f_v.shape[-1] != self.l_v.in_features:
            raise ShapeError(
                f"vision feature dim {f_v.shape[-1]} != router input {self.l_v.in_features}"
            )
        if q.shape[-1] != QUALITY_DIM:
            raise ShapeError(f"quality vector must have {QUALITY_DIM} entries")
        v_s = self.l_v(f_v)
        q_s = self.l_q(q)
        return self.l_s(torch.cat([v_s, q_s], dim=-1))


def routing_from_logits(logits: torch.Tensor) -> ExpertRouting:
    """Softmax-normalize logits and select top-1 (first index wins ties)."""
    probabilities = torch.softmax(logits, dim=-1)
    selected = torch.argmax(probabilities, dim=-1)
    p_star = torch.gather(
        probabilities, -1, selected.unsqueeze(-1)
    ).squeeze(-1) if probabilities.dim() > 1 else probabilities[selected]
    return ExpertRouting(probabilities=probabilities, selected_index=selected, p_star=p_star)


class HybridLinear(nn.Module):
    """A frozen linear plus routed specific/global low-rank experts."""

    def __init__(self, base: nn.Linear, config: LoRAConfig):
        super().__init__()
        if isinstance(base, HybridLinear):
            raise ConfigurationError("layer is already wrapped")
        self.config = config
        self.base = base
        for p in self.base.parameters():
            p.requires_grad_(False)
        d_in, d_out = base.in_features, base.out_features
        self.experts = nn.ModuleList(
            LoRAExpert(d_in, d_out, config.rank, config.scaling)
            for _ in range(NUM_SPECIFIC_EXPERTS)
        )
        self.global_expert = LoRAExpert(d_in, d_out, config.rank, config.scaling)
        self.router = Router(config.vision_dim, config.router_hidden)
        self.dropout = nn.Dropout(config.dropout)

    def route(self, f_v: torch.Tensor, q: torch.Tensor) -> ExpertRouting:
        return routing_from_logits(self.router(f_v, q))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        ctx = _ROUTING.get()
        routing = ctx.get(id(self)) if ctx is not None else None
        if routing is None:
            raise RoutingNotSetError(
                "hybrid linear called outside a routing context; "
                "wrap the forward pass in routed(...)"
            )
        out = self.base(x)
        a_in = self.dropout(x)
        glob = self.global_expert(a_in)
        sel = torch.zeros_like(glob)
        index = routing.selected_index
        p_star = routing.p_star
        if index.dim() == 0:
            sel = self.experts[int(index)](a_in)
            p = p_star
        else:
            # x is (B, ..., d_in); route per batch element
            for k in range(NUM_SPECIFIC_EXPERTS):
                picked = index == k
                if bool(picked.any()):
                    sel[picked] = self.experts[k](a_in[picked])
            p = p_star.view(-1, *([1] * (x.dim() - 1)))
        return out + p * sel + (1.0 - p) * glob


def _block_holders(lm: nn.Module):
    for b, block in enumerate(lm.blocks):
        yield block.attn, f"blocks.{b}.attn"
        yield block, f"blocks.{b}"


def wrap_lm_with_experts(lm: nn.Module, config: LoRAConfig) -> List[Tuple[str, HybridLinear]]:
    """Replace the targeted linears inside every LM block with HybridLinear.

    Returns (dotted name, layer) in module-traversal order; the position in
    this list is the layer's checkpoint index.
    """
    count = 0
    for holder, prefix in _block_holders(lm):
        for name in config.target_layers:
            layer = getattr(holder, name, None)
            if isinstance(layer, HybridLinear):
                raise ConfigurationError(f"{prefix}.{name} is already wrapped")
            if isinstance(layer, nn.Linear):
                setattr(holder, name, HybridLinear(layer, config))
                count += 1
    if count == 0:
        raise ConfigurationError("no target layers found to wrap")
    return iter_hybrid_linears(lm)


def unwrap_lm(lm: nn.Module) -> int:
    """Strip every HybridLinear, restoring the original base linears."""
    count = 0
    for holder, _ in _block_holders(lm):
        for name, child in list(holder.named_children()):
            if isinstance(child, HybridLinear):
                for p in child.base.parameters():
                    p.requires_grad_(True)
                setattr(holder, name, child.base)
                count += 1
    return count


def iter_hybrid_linears(lm: nn.Module) -> List[Tuple[str, HybridLinear]]:
    """All wrapped layers in deterministic module-traversal order."""
    found: List[Tuple[str, HybridLinear]] = []
    for holder, prefix in _block_holders(lm):
        for name, child in holder.named_children():
            if isinstance(child, HybridLinear):
                found.append((f"{prefix}.{name}", child))
    return found


def compute_routings(
    lm: nn.Module, f_v: torch.Tensor, q: torch.Tensor
) -> Dict[int, ExpertRouting]:
    return {id(layer): layer.route(f_v, q) for _, layer in iter_hybrid_linears(lm)}


@contextmanager
def routed(lm: nn.Module, f_v: torch.Tensor, q: torch.Tensor):
    """Compute per-layer routing for (f_v, q) and expose it to forward passes."""
    current = _ROUTING.get() or {}
    token = _ROUTING.set({**current, **compute_routings(lm, f_v, q)})
    try:
        yield
    finally:
        _ROUTING.reset(token)
