"""Checkpoint save/load with canonical key names and a group manifest.

Canonical keys: ``vision.*``, ``seg.*``, ``cls.*``, ``proj.*``, ``prompt.*``,
``lm.*`` for the base language model (adapter wrappers are transparent:
``...q_proj.base.weight`` is stored as ``...q_proj.weight``), and
``lora.layer<i>.{expert<k>,global,router}.*`` for the adapter stacks, with
``<i>`` the wrap-order layer index.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path
from typing import Dict, Tuple

import torch

from .config import ModelConfig
from .lm import Vocabulary
from .model import ForgeryVLM, classify_parameter

CHECKPOINT_FORMAT_VERSION = 1


class StageOrderError(RuntimeError):
    """A stage was started without the checkpoint of the previous stage."""


def _key_maps(model: ForgeryVLM) -> Tuple[Dict[str, str], Dict[str, str]]:
    """(module key -> canonical key) for parameters and buffers."""
    layer_index = {name: i for i, (name, _) in enumerate(model.wrapped_layers())}

    def canonical(module_key: str) -> str:
        if module_key.startswith("lm."):
            inner = module_key[len("lm.") :]
            for lname, idx in layer_index.items():
                prefix = lname + "."
                if inner.startswith(prefix):
                    tail = inner[len(prefix) :]
                    if tail.startswith("base."):
                        return f"lm.{lname}.{tail[len('base.'):]}"
                    if tail.startswith("experts."):
                        rest = tail[len("experts.") :]
                        k, sub = rest.split(".", 1)
                        return f"lora.layer{idx}.expert{k}.{sub}"
                    if tail.startswith("global_expert."):
                        return f"lora.layer{idx}.global.{tail[len('global_expert.'):]}"
                    if tail.startswith("router."):
                        return f"lora.layer{idx}.{tail}"
        return module_key

    params = {name: canonical(name) for name, _ in model.named_parameters()}
    buffers = {name: canonical(name) for name, _ in model.named_buffers()}
    return params, buffers


def model_state_dict(model: ForgeryVLM) -> Dict[str, torch.Tensor]:
    """State dict under canonical key names (parameters and buffers)."""
    params, buffers = _key_maps(model)
    state: Dict[str, torch.Tensor] = {}
    named_p = dict(model.named_parameters())
    named_b = dict(model.named_buffers())
    for module_key, canon in params.items():
        state[canon] = named_p[module_key].detach().clone()
    for module_key, canon in buffers.items():
        state[canon] = named_b[module_key].detach().clone()
    return state


def load_model_state(model: ForgeryVLM, state: Dict[str, torch.Tensor]) -> None:
    params, buffers = _key_maps(model)
    named_p = dict(model.named_parameters())
    named_b = dict(model.named_buffers())
    missing = []
    for module_key, canon in {**params, **buffers}.items():
        if canon not in state:
            missing.append(canon)
            continue
        target = named_p.get(module_key, named_b.get(module_key))
        with torch.no_grad():
            target.copy_(state[canon])
    if missing:
        raise KeyError(f"checkpoint is missing keys: {missing[:5]}{'...' if len(missing) > 5 else ''}")


def parameter_manifest(model: ForgeryVLM) -> Dict[str, list]:
    """Parameter-group manifest over canonical keys."""
    params, _ = _key_maps(model)
    manifest: Dict[str, list] = {}
    for module_key, canon in params.items():
        manifest.setdefault(classify_parameter(module_key), []).append(canon)
    return {group: sorted(keys) for group, keys in sorted(manifest.items())}


def save_checkpoint(path, model: ForgeryVLM, stage: int, extra: dict | None = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "stage": int(stage),
        "manifest": parameter_manifest(model),
        "model_config": dataclasses.asdict(model.config),
        "vocab": dict(model.vocab.token_to_id),
        "state": model_state_dict(model),
    }
    if extra:
        payload["extra"] = extra
    torch.save(payload, path)
    return path


def load_checkpoint(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    payload = torch.load(path, map_location="cpu", weights_only=False)
    version = payload.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version!r}")
    return payload


def model_from_checkpoint(payload: dict) -> ForgeryVLM:
    config = ModelConfig(**_tupled(payload["model_config"]))
    vocab = Vocabulary(token_to_id={str(k): int(v) for k, v in payload["vocab"].items()})
    model = ForgeryVLM(config, vocab)
    load_model_state(model, payload["state"])
    return model


def require_prior_stage(payload: dict, stage: int) -> None:
    """A stage > 1 must start from the previous stage's checkpoint (or its
    own, when resuming)."""
    got = payload.get("stage")
    if got not in (stage - 1, stage):
        raise StageOrderError(
            f"stage {stage} requires a stage-{stage - 1} checkpoint, got stage {got!r}"
        )


def _tupled(config_dict: dict) -> dict:
    return {
        key: tuple(value) if isinstance(value, list) else value
        for key, value in config_dict.items()
    }
