import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from forgeryqa.fusion import FusionHead, blend_predictions, fit_fusion_head, fuse_predictions


def test_blend_weight_extremes():
    assert blend_predictions(0.8, 0.4, 1.0) == pytest.approx(0.8)
    assert blend_predictions(0.8, 0.4, 0.0) == pytest.approx(0.4)


def test_blend_arithmetic():
    assert blend_predictions(0.8, 0.4, 0.5) == pytest.approx(0.6)


def test_blend_rejects_out_of_range():
    with pytest.raises(ValueError):
        blend_predictions(1.2, 0.5, 0.5)
    with pytest.raises(ValueError):
        blend_predictions(0.5, -0.1, 0.5)
    with pytest.raises(ValueError):
        blend_predictions(0.5, 0.5, 1.5)


def test_fuse_predictions_uses_head():
    torch.manual_seed(0)
    head = FusionHead(feature_dim=8)
    features = torch.randn(5, 8)
    p_ext = torch.rand(5)
    out = fuse_predictions(p_ext, features, head, w=0.0)
    with torch.no_grad():
        expected = head(features, p_ext)
    assert torch.allclose(out, expected)
    out_all_ext = fuse_predictions(p_ext, features, head, w=1.0)
    assert torch.allclose(out_all_ext, p_ext)


@settings(max_examples=50, deadline=None)
@given(
    st.floats(min_value=0.0, max_value=1.0),
    st.floats(min_value=0.0, max_value=1.0),
    st.integers(min_value=0, max_value=2**31 - 1),
)
def test_fused_output_bounded(w, p_ext, seed):
    torch.manual_seed(seed)
    head = FusionHead(feature_dim=4)
    features = torch.randn(3, 4)
    out = fuse_predictions(torch.full((3,), p_ext), features, head, w=w)
    assert torch.all((out >= 0.0) & (out <= 1.0))


def test_fit_fusion_head_learns_separable_labels():
    torch.manual_seed(1)
    features = torch.cat([torch.randn(30, 6) + 2.0, torch.randn(30, 6) - 2.0])
    labels = torch.cat([torch.ones(30), torch.zeros(30)])
    p_ext = torch.full((60,), 0.5)
    head = FusionHead(feature_dim=6)
    history = fit_fusion_head(head, features, p_ext, labels, steps=200)
    assert history[-1] < history[0] * 0.5
    with torch.no_grad():
        pred = head(features, p_ext)
    acc = float(((pred > 0.5).float() == labels).float().mean())
    assert acc > 0.9
