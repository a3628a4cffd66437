import numpy as np
import pytest
import torch

from forgeryqa.model import ForgeryVLM, build_vocabulary, classify_parameter, quality_tensor
from forgeryqa.prompts import SUFFIX_FAKE_TEXT, SUFFIX_REAL_TEXT
from forgeryqa.templates import QUESTION_CLASSIFY
from forgeryqa.vision import ShapeError


def test_vocabulary_covers_templates_and_suffixes(vocab):
    for text in (SUFFIX_FAKE_TEXT, SUFFIX_REAL_TEXT, QUESTION_CLASSIFY):
        vocab.encode(text)
    for extra in ("zebra",):
        with pytest.raises(KeyError):
            vocab.encode(extra)
    extended = build_vocabulary(["zebra stripes"])
    extended.encode("zebra")


def test_build_prompt_segment_order(tiny_model):
    tiny_model.eval()
    px = torch.rand(3, 32, 32)
    qids = torch.tensor(tiny_model.vocab.encode(QUESTION_CLASSIFY))
    flat, seg_out, pooled = tiny_model.build_prompt(px, qids)
    cfg = tiny_model.config
    s_p = 2 * cfg.prompt_m + 6
    s_v = (cfg.image_size // cfg.patch) ** 2
    assert flat.shape == (s_p + cfg.prompt_l + len(qids) + s_v, cfg.lm_dim)
    assert pooled.shape == (cfg.vision_dim,)
    assert seg_out.mask_logits.shape[-1] == cfg.mask_size

    # the question segment sits between location and vision segments
    q_emb = tiny_model.question_embedding(qids)
    start = s_p + cfg.prompt_l
    assert torch.allclose(flat[start : start + len(qids)], q_emb)


def test_answer_question_deterministic(tiny_model):
    px = torch.rand(3, 32, 32)
    q = torch.rand(6)
    a = tiny_model.answer_question(px, q, QUESTION_CLASSIFY, max_tokens=6)
    b = tiny_model.answer_question(px, q, QUESTION_CLASSIFY, max_tokens=6)
    assert a == b


def test_answer_question_restores_training_mode(tiny_model):
    tiny_model.train()
    tiny_model.answer_question(torch.rand(3, 32, 32), torch.rand(6), QUESTION_CLASSIFY, max_tokens=2)
    assert tiny_model.training


def test_forward_qa_batch_variable_lengths(tiny_model):
    tiny_model.eval()
    vocab = tiny_model.vocab
    px = torch.rand(2, 3, 32, 32)
    quality = torch.rand(2, 6)
    questions = [
        torch.tensor(vocab.encode("Is this image real or fake?")),
        torch.tensor(vocab.encode("Please evaluate the quality of this face image.")),
    ]
    answers = [
        torch.tensor(vocab.encode("It is a real face.") + [vocab.eos_id]),
        torch.tensor(vocab.encode("The face is brightly lit.") + [vocab.eos_id]),
    ]
    out = tiny_model.forward_qa_batch(px, quality, questions, answers)
    assert [t.shape[0] for t in out.answer_logits] == [len(a) for a in answers]
    assert out.y_hat.shape == (2,)
    # single-sample forward agrees with the batched one
    single = tiny_model.forward_qa_batch(
        px[:1], quality[:1], questions[:1], answers[:1]
    )
    assert torch.allclose(single.answer_logits[0], out.answer_logits[0], atol=1e-5)


def test_model_rejects_wrong_image_size(tiny_model):
    with pytest.raises(ShapeError):
        tiny_model.encode_image(torch.rand(1, 3, 64, 64))


def test_classify_parameter_covers_all_names(tiny_model):
    for name, _ in tiny_model.named_parameters():
        group = classify_parameter(name)
        assert group in tiny_model.parameter_groups()
    with pytest.raises(ValueError):
        classify_parameter("mystery.weight")


def test_quality_tensor_prefers_stored_values():
    pixels = np.full((16, 16, 3), 0.5)
    stored = quality_tensor([0.1, 0.2, 0.3, 0.4, 0.5, 0.6], pixels)
    assert torch.allclose(stored, torch.tensor([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]))
    computed = quality_tensor(None, pixels)
    assert computed.shape == (6,)
    assert float(computed[2]) == pytest.approx(0.5, abs=1e-6)  # intensity of mid-gray


def test_set_trainable_partitions(tiny_model):
    trainable = tiny_model.set_trainable(["cls_head"])
    names = {n for n, p in tiny_model.named_parameters() if p.requires_grad}
    assert names == set(tiny_model.parameter_groups()["cls_head"])
    assert len(trainable) == len(names)
    with pytest.raises(ValueError):
        tiny_model.set_trainable(["nonexistent_group"])
