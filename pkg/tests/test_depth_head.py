import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bevlift import (
    CAM_VEC_LEN,
    ConfigurationError,
    DepthHeadParams,
    FeatureGrid,
    TAG_DEPTH_ONEHOT,
    TAG_IMAGE_FEATURE,
    ValidationError,
    bce_depth_loss,
    camera_param_vector,
    channel_gates,
    depth_logits,
    predict_depth,
    se_gate,
    softmax_over_bins,
)

from conftest import make_camera, random_camera


def zeroed_params(channels=4, bins=6, hidden=5):
    return DepthHeadParams(
        mlp_w1=np.zeros((hidden, CAM_VEC_LEN)),
        mlp_b1=np.zeros(hidden),
        mlp_w2=np.zeros((channels, hidden)),
        mlp_b2=np.zeros(channels),
        proj_w=np.zeros((bins, channels)),
        proj_b=np.zeros(bins),
    )


def one_hot_grid(data):
    return FeatureGrid(data, TAG_DEPTH_ONEHOT)


def test_camera_param_vector_layout():
    cam = make_camera(translation=np.array([0.5, -1.5, 2.0]))
    vec = camera_param_vector(cam)
    assert vec.shape == (CAM_VEC_LEN,)
    assert np.array_equal(vec[:9], np.eye(3).ravel())
    assert np.array_equal(vec[9:12], [0.5, -1.5, 2.0])
    assert np.array_equal(vec[12:], cam.intrinsics.ravel())


def test_zero_params_gate_exactly_half():
    cam = make_camera()
    params = zeroed_params()
    gates = channel_gates(camera_param_vector(cam), params)
    assert np.array_equal(gates, np.full(4, 0.5))
    feat = FeatureGrid(np.ones((4, 2, 3)), TAG_IMAGE_FEATURE)
    gated = se_gate(feat, camera_param_vector(cam), params)
    assert np.array_equal(gated.data, 0.5 * feat.data)


def test_gate_of_zero_input_is_zero():
    cam = make_camera()
    params = DepthHeadParams.seeded(0, 4, 6)
    feat = FeatureGrid(np.zeros((4, 2, 3)), TAG_IMAGE_FEATURE)
    gated = se_gate(feat, camera_param_vector(cam), params)
    assert np.array_equal(gated.data, np.zeros((4, 2, 3)))


def test_gate_is_constant_per_channel():
    rng = np.random.default_rng(8)
    cam = random_camera(rng)
    params = DepthHeadParams.seeded(3, 4, 6)
    feat = FeatureGrid(rng.standard_normal((4, 5, 7)) + 3.0, TAG_IMAGE_FEATURE)
    gated = se_gate(feat, camera_param_vector(cam), params)
    ratio = gated.data / feat.data
    gates = channel_gates(camera_param_vector(cam), params)
    for c in range(4):
        assert np.max(np.abs(ratio[c] - gates[c])) < 1e-12
        assert 0.0 < gates[c] < 1.0


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_gating_preserves_sign_and_shrinks(seed):
    rng = np.random.default_rng(seed)
    cam = random_camera(rng)
    params = DepthHeadParams.seeded(seed % 1000, 3, 4)
    feat = FeatureGrid(rng.standard_normal((3, 4, 4)), TAG_IMAGE_FEATURE)
    gated = se_gate(feat, camera_param_vector(cam), params)
    assert np.all(np.sign(gated.data) == np.sign(feat.data))
    assert np.all(np.abs(gated.data) <= np.abs(feat.data))


def test_predict_uniform_for_zero_params():
    params = zeroed_params(channels=4, bins=6)
    feat = FeatureGrid(np.zeros((4, 3, 2)), TAG_IMAGE_FEATURE)
    dist = predict_depth(feat, params)
    assert np.max(np.abs(dist.data - 1.0 / 6.0)) < 1e-15


def test_softmax_spike_formula():
    logits = np.zeros((5, 1, 1))
    logits[2, 0, 0] = 10.0
    dist = softmax_over_bins(logits)
    expected_peak = math.exp(10.0) / (math.exp(10.0) + 4.0)
    assert dist.data[2, 0, 0] == pytest.approx(expected_peak, rel=1e-12)
    assert dist.data.sum() == pytest.approx(1.0, abs=1e-12)


def test_predict_columns_are_normalized():
    rng = np.random.default_rng(12)
    params = DepthHeadParams.seeded(5, 8, 16)
    feat = FeatureGrid(rng.standard_normal((8, 6, 9)), TAG_IMAGE_FEATURE)
    dist = predict_depth(feat, params)
    sums = dist.data.sum(axis=0)
    assert np.max(np.abs(sums - 1.0)) < 1e-12
    assert np.all(dist.data > 0.0)


def test_logits_match_per_pixel_matmul():
    rng = np.random.default_rng(2)
    params = DepthHeadParams.seeded(7, 3, 5)
    feat = FeatureGrid(rng.standard_normal((3, 2, 2)), TAG_IMAGE_FEATURE)
    logits = depth_logits(feat, params)
    for h in range(2):
        for w in range(2):
            expected = params.proj_w @ feat.data[:, h, w] + params.proj_b
            assert np.max(np.abs(logits[:, h, w] - expected)) < 1e-12


def test_bce_hand_computed_uniform_case():
    # one supervised pixel, four bins, uniform prediction 0.25:
    # loss = (-ln 0.25 - 3 ln 0.75) / 4
    pred = FeatureGrid(np.full((4, 1, 1), 0.25), TAG_IMAGE_FEATURE)
    y = np.zeros((4, 1, 1))
    y[1, 0, 0] = 1.0
    expected = (-math.log(0.25) - 3.0 * math.log(0.75)) / 4.0
    result = bce_depth_loss(pred, one_hot_grid(y))
    assert result.loss == pytest.approx(expected, abs=1e-12)
    assert result.supervised_pixels == 1
    assert not result.no_supervision


def test_bce_perfect_prediction_is_tiny():
    # clamped one-hot prediction: loss is at the clamp floor, about 2e-7
    y = np.zeros((4, 2, 2))
    y[0, :, :] = 1.0
    result = bce_depth_loss(one_hot_grid(y), one_hot_grid(y))
    assert 0.0 < result.loss < 1e-6
    assert result.supervised_pixels == 4


def test_bce_ignores_unsupervised_pixels():
    rng = np.random.default_rng(4)
    params = DepthHeadParams.seeded(2, 3, 4)
    feat = FeatureGrid(rng.standard_normal((3, 2, 3)), TAG_IMAGE_FEATURE)
    pred = predict_depth(feat, params)
    y = np.zeros((4, 2, 3))
    y[2, 0, 0] = 1.0
    y[0, 1, 2] = 1.0
    masked = bce_depth_loss(pred, one_hot_grid(y))
    # mutating predictions at unsupervised pixels must not move the loss
    tweaked = pred.data.copy()
    tweaked[:, 0, 1] = np.roll(tweaked[:, 0, 1], 1)
    retweaked = bce_depth_loss(FeatureGrid(tweaked, TAG_IMAGE_FEATURE), one_hot_grid(y))
    assert retweaked.loss == masked.loss
    assert np.array_equal(masked.grad_logits[:, 0, 1], np.zeros(4))


def test_bce_no_supervision_flag():
    pred = FeatureGrid(np.full((4, 2, 2), 0.25), TAG_IMAGE_FEATURE)
    result = bce_depth_loss(pred, one_hot_grid(np.zeros((4, 2, 2))))
    assert result.loss == 0.0
    assert result.no_supervision
    assert np.array_equal(result.grad_logits, np.zeros((4, 2, 2)))


def test_bce_rejects_shape_mismatch():
    pred = FeatureGrid(np.full((4, 1, 1), 0.25), TAG_IMAGE_FEATURE)
    with pytest.raises(ConfigurationError, match="shape"):
        bce_depth_loss(pred, one_hot_grid(np.zeros((5, 1, 1))))


def test_bce_rejects_fractional_targets():
    pred = FeatureGrid(np.full((4, 1, 1), 0.25), TAG_IMAGE_FEATURE)
    y = np.full((4, 1, 1), 0.25)  # columns sum to 1 but are not one-hot
    with pytest.raises(ValidationError, match="one-hot"):
        bce_depth_loss(pred, FeatureGrid(y, TAG_IMAGE_FEATURE))


def test_bce_rejects_multi_hot_column():
    pred = FeatureGrid(np.full((4, 1, 1), 0.25), TAG_IMAGE_FEATURE)
    y = np.zeros((4, 1, 1))
    y[0, 0, 0] = 1.0
    y[2, 0, 0] = 1.0
    with pytest.raises(ValidationError, match="sum"):
        bce_depth_loss(pred, FeatureGrid(y, TAG_IMAGE_FEATURE))


def test_bce_rejects_out_of_range_probabilities():
    pred = FeatureGrid(np.full((4, 1, 1), 1.5), TAG_IMAGE_FEATURE)
    y = np.zeros((4, 1, 1))
    y[0, 0, 0] = 1.0
    with pytest.raises(ValidationError, match="0, 1"):
        bce_depth_loss(pred, one_hot_grid(y))


def _loss_of_logits(logits, gt):
    return bce_depth_loss(softmax_over_bins(logits), gt).loss


def test_gradient_matches_central_finite_differences():
    rng = np.random.default_rng(31)
    bins, h, w = 6, 3, 3
    logits = rng.standard_normal((bins, h, w))
    y = np.zeros((bins, h, w))
    for (hh, ww) in [(0, 0), (1, 2), (2, 1)]:
        y[rng.integers(bins), hh, ww] = 1.0
    gt = one_hot_grid(y)
    grad = bce_depth_loss(softmax_over_bins(logits), gt).grad_logits
    eps = 1e-6
    for k in range(bins):
        for hh in range(h):
            for ww in range(w):
                up = logits.copy()
                up[k, hh, ww] += eps
                down = logits.copy()
                down[k, hh, ww] -= eps
                fd = (_loss_of_logits(up, gt) - _loss_of_logits(down, gt)) / (2.0 * eps)
                assert grad[k, hh, ww] == pytest.approx(fd, abs=1e-6)


def test_gradient_sums_to_zero_per_pixel():
    rng = np.random.default_rng(77)
    logits = rng.standard_normal((8, 4, 4)) * 3.0
    y = np.zeros((8, 4, 4))
    for hh in range(4):
        for ww in range(4):
            if (hh + ww) % 2 == 0:
                y[rng.integers(8), hh, ww] = 1.0
    grad = bce_depth_loss(softmax_over_bins(logits), one_hot_grid(y)).grad_logits
    assert np.max(np.abs(grad.sum(axis=0))) < 1e-12


def test_seeded_params_are_deterministic():
    a = DepthHeadParams.seeded(9, 8, 112)
    b = DepthHeadParams.seeded(9, 8, 112)
    assert np.array_equal(a.mlp_w1, b.mlp_w1)
    assert np.array_equal(a.proj_w, b.proj_w)
    c = DepthHeadParams.seeded(10, 8, 112)
    assert not np.array_equal(a.mlp_w1, c.mlp_w1)


def test_params_reject_inconsistent_shapes():
    with pytest.raises(ConfigurationError, match="mlp_w2"):
        DepthHeadParams(
            mlp_w1=np.zeros((5, CAM_VEC_LEN)),
            mlp_b1=np.zeros(5),
            mlp_w2=np.zeros((4, 6)),
            mlp_b2=np.zeros(4),
            proj_w=np.zeros((8, 4)),
            proj_b=np.zeros(8),
        )


def test_se_gate_rejects_channel_mismatch():
    params = DepthHeadParams.seeded(0, 4, 6)
    feat = FeatureGrid(np.zeros((5, 2, 2)), TAG_IMAGE_FEATURE)
    with pytest.raises(ConfigurationError, match="channels"):
        se_gate(feat, camera_param_vector(make_camera()), params)
