import json

import pytest

from forgeryqa.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Corpus + dataset + tiny config + stage-1 checkpoint, shared by tests."""
    root = tmp_path_factory.mktemp("cli")
    assert main(["demo-corpus", "--out", str(root / "corpus"), "--pairs", "3",
                 "--size", "32", "--seed", "4"]) == 0
    assert main(["build-dataset", "--input", str(root / "corpus"), "--out",
                 str(root / "data"), "--seed", "4", "--size", "32"]) == 0
    config = {
        "model": {
            "image_size": 32, "patch": 8, "vision_dim": 32, "vision_layers": 1,
            "vision_heads": 2, "seg_channels": 16, "seg_feature_dim": 16,
            "mask_size": 16, "lm_dim": 32, "lm_layers": 1, "lm_heads": 2,
            "context": 224, "prompt_m": 4, "prompt_l": 4, "lora_rank": 2,
            "lora_alpha": 4.0, "router_hidden": 8,
        },
        "train": {"steps": 3, "batch_size": 4, "lr": 1e-3, "seed": 0},
    }
    (root / "config.json").write_text(json.dumps(config))
    assert main(["train", "--stage", "1", "--config", str(root / "config.json"),
                 "--dataset", str(root / "data" / "dataset.jsonl"),
                 "--out", str(root / "runs")]) == 0
    return root


def test_stage1_artifacts(workspace):
    assert (workspace / "runs" / "stage1.pt").exists()
    assert (workspace / "runs" / "stage1_losses.csv").exists()
    assert (workspace / "runs" / "vocab.json").exists()


def test_train_stage2_without_stage1_checkpoint_exits_2(workspace, tmp_path):
    code = main(["train", "--stage", "2", "--config", str(workspace / "config.json"),
                 "--dataset", str(workspace / "data" / "dataset.jsonl"),
                 "--out", str(tmp_path / "empty_runs")])
    assert code == 2


def test_train_stage_chain(workspace):
    for stage in ("2", "3"):
        code = main(["train", "--stage", stage, "--config", str(workspace / "config.json"),
                     "--dataset", str(workspace / "data" / "dataset.jsonl"),
                     "--out", str(workspace / "runs")])
        assert code == 0
    assert (workspace / "runs" / "stage3.pt").exists()


def test_stage3_rejects_stage1_checkpoint(workspace, tmp_path):
    code = main(["train", "--stage", "3", "--config", str(workspace / "config.json"),
                 "--dataset", str(workspace / "data" / "dataset.jsonl"),
                 "--out", str(tmp_path / "r"),
                 "--init-from", str(workspace / "runs" / "stage1.pt")])
    assert code == 2


def test_evaluate_writes_report(workspace, tmp_path):
    report_path = tmp_path / "report.json"
    code = main(["evaluate", "--checkpoint", str(workspace / "runs" / "stage1.pt"),
                 "--dataset", str(workspace / "data" / "dataset.jsonl"),
                 "--report", str(report_path), "--max-tokens", "4"])
    assert code == 0
    report = json.loads(report_path.read_text())
    for key in ("acc", "recall", "precision", "f1", "tp", "fp", "tn", "fn"):
        assert key in report["detection"]
    assert report["num_records"] == 27
    assert "per_kind" in report and "quality" in report["per_kind"]
    assert "ambiguous" in report


def test_inspect_routing_prints_probabilities(workspace, capsys):
    image = workspace / "data" / "images" / "real" / "0000.png"
    code = main(["inspect-routing", "--checkpoint", str(workspace / "runs" / "stage1.pt"),
                 "--image", str(image)])
    assert code == 0
    out = capsys.readouterr().out
    lines = [l for l in out.splitlines() if "probabilities" in l]
    assert len(lines) == 6  # 1 block x (4 attention + 2 mlp linears)
    for line in lines:
        assert "sum 1.0000" in line
        assert "p*" in line


def test_fuse_subcommand(workspace, tmp_path):
    scores = tmp_path / "scores.csv"
    rows = ["id,score"]
    for i in range(3):
        rows.append(f"{i:04d}:real,0.2")
        rows.append(f"{i:04d}:fake,0.8")
        rows.append(f"{i:04d}:blend,0.7")
    scores.write_text("\n".join(rows) + "\n")
    report = tmp_path / "fusion.json"
    code = main(["fuse", "--external-scores", str(scores),
                 "--checkpoint", str(workspace / "runs" / "stage1.pt"),
                 "--dataset", str(workspace / "data" / "dataset.jsonl"),
                 "--weight", "0.5", "--steps", "50", "--report", str(report)])
    assert code == 0
    payload = json.loads(report.read_text())
    assert payload["num_images"] == 9
    assert 0.0 <= payload["detection"]["acc"] <= 1.0
    assert all(0.0 <= v <= 1.0 for v in payload["final_scores"].values())


def test_unknown_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["evaluate", "--nonsense"])
    assert exc.value.code == 2


def test_missing_dataset_is_error(tmp_path):
    code = main(["evaluate", "--checkpoint", str(tmp_path / "nope.pt"),
                 "--dataset", str(tmp_path / "nope.jsonl"),
                 "--report", str(tmp_path / "r.json")])
    assert code == 1
