import pytest
import torch

from forgeryqa.losses import loss_segmentation
from forgeryqa.vision import (
    ClassHead,
    PatchEncoder,
    SegDecoder,
    ShapeError,
    VisionConfig,
    decode_segmentation,
)

CFG = VisionConfig(
    image_size=32, patch=8, dim=32, layers=2, heads=2,
    seg_channels=16, seg_feature_dim=16, seg_tokens=4, mask_size=16,
)


def test_zero_image_zeroed_encoder_gives_zero_embeddings():
    torch.manual_seed(0)
    enc = PatchEncoder(CFG)
    with torch.no_grad():
        for p in enc.parameters():
            p.zero_()
    out = enc(torch.zeros(1, 3, 32, 32))
    assert torch.all(out.patch_embeddings == 0)
    assert torch.all(out.pooled == 0)


def test_encoder_deterministic():
    torch.manual_seed(1)
    enc = PatchEncoder(CFG).eval()
    x = torch.rand(2, 3, 32, 32)
    a = enc(x).patch_embeddings
    b = enc(x).patch_embeddings
    assert torch.equal(a, b)


def test_single_patch_perturbation_changes_that_row():
    torch.manual_seed(2)
    enc = PatchEncoder(CFG).eval()
    x = torch.rand(1, 3, 32, 32)
    y = x.clone()
    # patch grid is 4x4; perturb patch (1, 2) -> flat index 6
    y[0, :, 8:16, 16:24] += 0.5
    a = enc(x).patch_embeddings[0]
    b = enc(y).patch_embeddings[0]
    assert not torch.allclose(a[6], b[6])


def test_encoder_rejects_wrong_size():
    enc = PatchEncoder(CFG)
    with pytest.raises(ShapeError):
        enc(torch.rand(1, 3, 16, 16))


def test_decoder_shapes_and_probability_range():
    torch.manual_seed(3)
    enc = PatchEncoder(CFG).eval()
    dec = SegDecoder(CFG).eval()
    cls = ClassHead(CFG).eval()
    out = decode_segmentation(dec, cls, enc(torch.rand(2, 3, 32, 32)))
    assert out.mask_logits.shape == (2, 16, 16)
    assert out.seg_feature.shape == (2, 4, 16)
    assert out.class_logit.shape == (2,)
    prob = torch.sigmoid(out.class_logit)
    assert torch.all((prob > 0) & (prob < 1))


def test_decoder_mask_resize_path():
    cfg = VisionConfig(
        image_size=32, patch=8, dim=32, layers=1, heads=2,
        seg_channels=16, seg_feature_dim=16, seg_tokens=4, mask_size=20,
    )
    torch.manual_seed(4)
    out = SegDecoder(cfg)(PatchEncoder(cfg)(torch.rand(1, 3, 32, 32)))
    assert out[0].shape == (1, 20, 20)


def test_short_training_halves_segmentation_loss():
    # oracle: 20 synthetic samples with box masks, 200 steps of decoder
    # training must cut the pixel loss by at least half
    torch.manual_seed(5)
    enc = PatchEncoder(CFG)
    dec = SegDecoder(CFG)
    for p in enc.parameters():
        p.requires_grad_(False)

    images = torch.rand(20, 3, 32, 32)
    masks = torch.zeros(20, 16, 16)
    for i in range(20):
        r, c = 2 + i % 6, 3 + i % 5
        masks[i, r : r + 6, c : c + 6] = 1.0
        images[i, :, 2 * r : 2 * (r + 6), 2 * c : 2 * (c + 6)] += 0.8
    images = images.clamp(0, 1)

    with torch.no_grad():
        features = enc(images)
    optimizer = torch.optim.Adam(dec.parameters(), lr=5e-3)
    initial = None
    for step in range(200):
        optimizer.zero_grad()
        logits, _, _ = dec(features)
        loss = loss_segmentation(logits, masks)
        if step == 0:
            initial = float(loss.detach())
        loss.backward()
        optimizer.step()
    final = float(loss_segmentation(dec(features)[0], masks))
    assert final <= 0.5 * initial
