"""Command-line entry points.

Subcommands: build-dataset, demo-corpus, train, evaluate, inspect-routing,
fuse.  Usage errors exit 2 (argparse); a train stage started without its
prior-stage checkpoint also exits 2.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from . import __version__
from .builder import build_dataset
from .checkpoint import (
    StageOrderError,
    load_checkpoint,
    model_from_checkpoint,
    require_prior_stage,
    save_checkpoint,
)
from .config import RunConfig, load_config
from .dataset_io import deserialize_dataset, load_image
from .evaluate import evaluate_model, write_report
from .fusion import FusionHead, blend_predictions, fit_fusion_head
from .metrics import detection_metrics
from .model import ForgeryVLM, build_vocabulary
from .synthetic import write_corpus
from .training import TrainingCorpus, run_stage


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except StageOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FileNotFoundError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="forgeryqa",
        description="Self-blended forgery QA datasets and a toy prompted VLM detector.",
    )
    parser.add_argument("--version", action="version", version=f"forgeryqa {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-dataset", help="synthesize the QA dataset from paired images")
    p.add_argument("--input", required=True, help="directory with real/ and fake/ images")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=336, help="square image size (default 336)")
    p.add_argument("--common", default=None, help="optional human-annotated QA jsonl")
    p.set_defaults(handler=_cmd_build_dataset)

    p = sub.add_parser("demo-corpus", help="generate a synthetic paired face corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--pairs", type=int, default=32)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=_cmd_demo_corpus)

    p = sub.add_parser("train", help="run one training stage")
    p.add_argument("--stage", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--dataset", default=None, help="dataset.jsonl (overrides config)")
    p.add_argument("--out", default=None, help="checkpoint directory (overrides config)")
    p.add_argument("--init-from", default=None, help="explicit prior checkpoint")
    p.add_argument("--steps", type=int, default=None, help="override config steps")
    p.set_defaults(handler=_cmd_train)

    p = sub.add_parser("evaluate", help="generate answers and score a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--report", required=True, help="output JSON report path")
    p.add_argument("--max-tokens", type=int, default=32)
    p.add_argument("--include-generations", action="store_true")
    p.set_defaults(handler=_cmd_evaluate)

    p = sub.add_parser("inspect-routing", help="print per-layer expert routing for an image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.set_defaults(handler=_cmd_inspect_routing)

    p = sub.add_parser("fuse", help="fuse external detector scores with model features")
    p.add_argument("--external-scores", required=True, help="CSV with id,score rows")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--weight", type=float, default=0.5)
    p.add_argument("--steps", type=int, default=300)
    p.add_argument("--report", default=None)
    p.set_defaults(handler=_cmd_fuse)
    return parser


def _cmd_build_dataset(args) -> int:
    result = build_dataset(
        args.input, args.out, seed=args.seed, size=args.size, common_path=args.common
    )
    print(
        f"wrote {result.num_records} records for {result.num_pairs} pairs "
        f"({result.num_images} images) to {result.dataset_path}"
    )
    return 0


def _cmd_demo_corpus(args) -> int:
    out = write_corpus(args.out, num_pairs=args.pairs, size=args.size, seed=args.seed)
    print(f"wrote {args.pairs} synthetic pairs under {out}")
    return 0


def _cmd_train(args) -> int:
    config = load_config(args.config) if args.config else RunConfig()
    train_cfg = dataclasses.replace(config.train, stage=args.stage)
    if args.steps is not None:
        train_cfg = dataclasses.replace(train_cfg, steps=args.steps)
    dataset_path = args.dataset or train_cfg.dataset
    if not dataset_path:
        raise ValueError("no dataset given (use --dataset or the config dataset key)")
    out_dir = Path(args.out or train_cfg.out_dir or "runs")

    records = deserialize_dataset(dataset_path)
    corpus = TrainingCorpus.load(records, Path(dataset_path).parent)

    if args.stage == 1:
        vocab = build_vocabulary(
            [r.question for r in records] + [r.answer for r in records]
        )
        torch.manual_seed(train_cfg.seed)
        model = ForgeryVLM(config.model, vocab)
    else:
        prior_path = Path(args.init_from) if args.init_from else out_dir / f"stage{args.stage - 1}.pt"
        if not prior_path.exists():
            raise StageOrderError(
                f"stage {args.stage} needs the stage-{args.stage - 1} checkpoint "
                f"(looked for {prior_path})"
            )
        payload = load_checkpoint(prior_path)
        require_prior_stage(payload, args.stage)
        model = model_from_checkpoint(payload)

    log_path = out_dir / f"stage{args.stage}_losses.csv"
    result = run_stage(model, corpus, train_cfg, log_path=log_path)
    ckpt_path = save_checkpoint(
        out_dir / f"stage{args.stage}.pt",
        model,
        stage=args.stage,
        extra={"train_config": dataclasses.asdict(train_cfg)},
    )
    model.vocab.save(out_dir / "vocab.json")
    first = result.history[0]["total"] if result.history else float("nan")
    last = result.history[-1]["total"] if result.history else float("nan")
    print(
        f"stage {args.stage}: {train_cfg.steps} steps, loss {first:.4f} -> {last:.4f}; "
        f"checkpoint {ckpt_path}, log {log_path}"
    )
    if result.missing_auth_warnings:
        print(f"warning: {result.missing_auth_warnings} answers missing authenticity index")
    if result.triplet_fallbacks:
        print(f"warning: {result.triplet_fallbacks} contrastive triplets used random pairing")
    return 0


def _cmd_evaluate(args) -> int:
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    records = deserialize_dataset(args.dataset)
    report = evaluate_model(
        model, records, Path(args.dataset).parent, max_tokens=args.max_tokens
    )
    write_report(report, args.report, include_generations=args.include_generations)
    det = report["detection"]
    print(
        f"evaluated {report['num_records']} records: "
        f"acc {det['acc']:.4f} recall {det['recall']:.4f} "
        f"precision {det['precision']:.4f} f1 {det['f1']:.4f} "
        f"bleu4 {report['bleu4']:.4f} ambiguous {report['ambiguous']}"
    )
    print(f"report written to {args.report}")
    return 0


def _cmd_inspect_routing(args) -> int:
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    model.eval()
    pixels_np = load_image(args.image, size=model.config.image_size)
    pixels = torch.tensor(pixels_np.transpose(2, 0, 1), dtype=torch.get_default_dtype())
    from .model import quality_tensor

    quality = quality_tensor(None, pixels_np).reshape(1, -1)
    with torch.no_grad():
        pooled = model.encode_image(pixels).pooled
        print(f"image: {args.image}")
        print(f"quality vector: {[round(float(v), 4) for v in quality[0]]}")
        for name, layer in model.wrapped_layers():
            routing = layer.route(pooled, quality)
            probs = [round(float(v), 4) for v in routing.probabilities[0]]
            total = float(routing.probabilities[0].sum())
            print(
                f"{name}: probabilities {probs} sum {total:.4f} "
                f"selected expert {int(routing.selected_index[0])} "
                f"p* {float(routing.p_star[0]):.4f}"
            )
    return 0


def _cmd_fuse(args) -> int:
    model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    model.eval()
    records = deserialize_dataset(args.dataset)
    root = Path(args.dataset).parent
    scores = _read_scores(args.external_scores)

    by_image = {}
    for record in records:
        by_image.setdefault(record.image_id, record)
    ids = [i for i in sorted(by_image) if i in scores]
    if not ids:
        raise ValueError("no dataset image ids match the external scores file")

    with torch.no_grad():
        pixels = torch.stack(
            [
                torch.tensor(
                    load_image(root / by_image[i].image_path).transpose(2, 0, 1),
                    dtype=torch.get_default_dtype(),
                )
                for i in ids
            ]
        )
        features = model.encode_image(pixels).pooled
    p_external = torch.tensor([scores[i] for i in ids], dtype=features.dtype)
    labels = torch.tensor([float(by_image[i].is_fake_label) for i in ids])

    head = FusionHead(features.shape[-1])
    fit_fusion_head(head, features, p_external, labels, steps=args.steps)
    with torch.no_grad():
        p_fused = head(features, p_external)
        p_final = blend_predictions(p_external, p_fused, args.weight)

    pairs = [
        ("fake" if float(p) >= 0.5 else "real", bool(by_image[i].is_fake_label))
        for p, i in zip(p_final, ids)
    ]
    metrics = detection_metrics(pairs)
    print(
        f"fused {len(ids)} images at w={args.weight}: acc {metrics.acc:.4f} "
        f"f1 {metrics.f1:.4f} (external-only and head blended)"
    )
    if args.report:
        payload = {
            "weight": args.weight,
            "num_images": len(ids),
            "detection": metrics.as_dict(),
            "final_scores": {i: float(p) for i, p in zip(ids, p_final)},
        }
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        print(f"report written to {args.report}")
    return 0


def _read_scores(path) -> dict:
    scores = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.reader(fh):
            if not row or row[0].strip().lower() in ("id", ""):
                continue
            scores[row[0].strip()] = float(row[1])
    return scores


if __name__ == "__main__":
    sys.exit(main())
