import numpy as np
import pytest

from ddfe import nn
from ddfe.beams import beam_profile
from ddfe.embedding import (
    EmbeddingConfig,
    EmbeddingParams,
    TrainConfig,
    checkpoint_tensors,
    confusion_matrix,
    ddfe_forward,
    encode_point_features,
    encode_scene,
    encode_voxel_features,
    evaluate,
    feature_similarity_matrix,
    forward_encoded,
    inverse_frequency_weights,
    iou_scores,
    model_from_tensors,
    point_attention,
    scene_loss,
    train,
)
from ddfe.sensors import ProjectionParams, SensorConfig
from ddfe.simulate import make_dataset
from ddfe.stats import ClipParams
from ddfe import io as dio

SIM = SensorConfig("sim16", 128, 16, -20.0, 4.0)
PROJ = ProjectionParams()


@pytest.fixture(scope="module")
def profile():
    return beam_profile(SIM, PROJ)


@pytest.fixture(scope="module")
def small_scene(profile):
    rng = np.random.default_rng(2)
    cloud = np.stack([
        rng.uniform(3.0, 20.0, 60),
        rng.uniform(-6.0, 6.0, 60),
        rng.uniform(-2.0, 1.0, 60),
    ], axis=1)
    labels = rng.integers(0, 4, size=60)
    return encode_scene(cloud, profile, PROJ, 0.2, labels, True)


def _params(seed=0, **kwargs):
    return EmbeddingParams(EmbeddingConfig(**kwargs), np.random.default_rng(seed))


def _clip():
    return ClipParams.from_mid_span(np.full(4, 0.05), np.full(4, 0.04))


def test_forward_shapes(small_scene):
    params = _params()
    point_feats, voxel_feats = forward_encoded(small_scene, params, _clip())
    n = small_scene.cloud.shape[0]
    m = small_scene.grid.num_voxels
    assert point_feats.data.shape == (n, 16)
    assert voxel_feats.data.shape == (m, 32)


def test_forward_deterministic(small_scene):
    params = _params()
    a = forward_encoded(small_scene, params, _clip())
    b = forward_encoded(small_scene, params, _clip())
    assert np.array_equal(a[0].data, b[0].data)
    assert np.array_equal(a[1].data, b[1].data)


def test_full_pipeline_permutation_equivariance(profile):
    rng = np.random.default_rng(3)
    cloud = np.stack([
        rng.uniform(3.0, 20.0, 80),
        rng.uniform(-6.0, 6.0, 80),
        rng.uniform(-2.0, 1.0, 80),
    ], axis=1)
    params = _params()
    clip = _clip()
    perm = rng.permutation(80)
    fp_a, fv_a, grid_a = ddfe_forward(cloud, profile, clip, params, PROJ)
    fp_b, fv_b, grid_b = ddfe_forward(cloud[perm], profile, clip, params, PROJ)
    assert np.allclose(fp_b, fp_a[perm], atol=1e-12)
    # voxel features match when voxels are aligned via their cell indices
    cells_a = {tuple(c): i for i, c in enumerate(grid_a.cells)}
    align = [cells_a[tuple(c)] for c in grid_b.cells]
    assert np.allclose(fv_b, fv_a[align], atol=1e-12)


def test_gates_keep_feature_magnitudes(small_scene):
    params = _params()
    point_feats = encode_point_features(small_scene.offsets, params)
    gated = point_attention(small_scene.density_raw, point_feats, params)
    assert np.all(np.abs(gated.data) <= np.abs(point_feats.data))
    nonzero = point_feats.data != 0
    assert np.all(np.abs(gated.data[nonzero]) < np.abs(point_feats.data[nonzero]))


def test_attention_disabled_passes_features_through(small_scene):
    params = _params()
    point_feats = encode_point_features(small_scene.offsets, params)
    gated = point_attention(small_scene.density_raw, point_feats, params,
                            use_attention=False)
    assert gated is point_feats


def test_zero_weight_voxel_mlp_broadcasts_bias(small_scene):
    params = _params()
    for name in ("voxel_mlp.w1", "voxel_mlp.w2", "voxel_mlp.b1"):
        params[name].data[:] = 0.0
    params["voxel_mlp.b2"].data[:] = np.arange(16.0)
    out = encode_voxel_features(small_scene.grid, params)
    assert np.allclose(out.data, np.arange(16.0))


def test_saturated_gate_is_identity(small_scene):
    params = _params()
    params["attn_point.w2"].data[:] = 0.0
    params["attn_point.b2"].data[:] = 1e3  # sigmoid -> 1.0 exactly in float
    point_feats = encode_point_features(small_scene.offsets, params)
    gated = point_attention(small_scene.density_raw, point_feats, params)
    assert np.array_equal(gated.data, point_feats.data)


def test_clip_identity_point_matches_unclipped(profile):
    # a point whose raw density equals the clip midpoint is unaffected by
    # clipping, so both modes yield identical features
    cloud = np.array([[8.0, 1.0, -1.0]])
    scene = encode_scene(cloud, profile, PROJ, 0.2, None, True)
    mid = scene.density_raw[0]
    clip = ClipParams.from_mid_span(mid, np.full(4, 0.01))
    params_clip = _params(use_clip=True)
    params_plain = _params(use_clip=False)
    fp_a, fv_a = forward_encoded(scene, params_clip, clip)
    fp_b, fv_b = forward_encoded(scene, params_plain, None)
    assert np.allclose(fp_a.data, fp_b.data, atol=1e-12)
    assert np.allclose(fv_a.data, fv_b.data, atol=1e-12)


def test_end_to_end_gradients(small_scene):
    params = _params()
    weights = inverse_frequency_weights(small_scene.labels, 4)
    err = nn.grad_check(
        lambda: scene_loss(small_scene, params, _clip(), weights),
        params.parameters())
    assert err < 1e-4


def test_inverse_frequency_weights():
    labels = np.array([0] * 97 + [1] * 2 + [2])
    weights = inverse_frequency_weights(labels, 4)
    assert weights[0] == pytest.approx(0.25 / 0.97, rel=1e-9)
    assert weights[1] == 10.0   # clamped
    assert weights[2] == 10.0
    assert weights[3] == 10.0   # absent class gets the clamp ceiling
    with pytest.raises(ValueError, match="weight table"):
        inverse_frequency_weights(np.array([5]), 4)


def test_iou_scores_examples():
    # predictions == labels -> mIoU 1.0
    pred = np.array([0, 1, 2, 1])
    conf = confusion_matrix(pred, pred, 3)
    iou, miou = iou_scores(conf)
    assert miou == 1.0
    # all class 0 on a half/half ground truth -> IoU {0.5, 0.0}, mIoU 0.25
    labels = np.array([0] * 50 + [1] * 50)
    conf = confusion_matrix(np.zeros(100, dtype=int), labels, 2)
    iou, miou = iou_scores(conf)
    assert iou[0] == 0.5 and iou[1] == 0.0
    assert miou == 0.25


def test_iou_ignores_classes_absent_from_ground_truth():
    labels = np.zeros(10, dtype=int)
    pred = np.zeros(10, dtype=int)
    pred[0] = 1  # spurious prediction of an absent class
    conf = confusion_matrix(pred, labels, 3)
    iou, miou = iou_scores(conf)
    assert np.isnan(iou[2])
    assert miou == pytest.approx(0.9)  # only class 0 is present


def test_train_is_bit_reproducible_and_learns():
    data = make_dataset(6, SIM, seed=21)
    hyper = TrainConfig(epochs=3, seed=1)
    model_a = train(data, SIM, hyper)
    model_b = train(data, SIM, hyper)
    for name in model_a.params.tensors:
        assert np.array_equal(model_a.params.tensors[name].data,
                              model_b.params.tensors[name].data)
    report = evaluate(data, model_a, SIM)
    assert report.miou > 0.2  # 3 epochs: sanity only


def test_train_validates_labels_and_empty_dataset():
    with pytest.raises(ValueError, match="empty"):
        train([], SIM)
    cloud = np.array([[5.0, 0.0, -1.0]])
    with pytest.raises(ValueError, match="labels"):
        train([(cloud, np.array([9]))], SIM, TrainConfig(epochs=1, num_classes=4))


def test_checkpoint_round_trip_preserves_model(tmp_path, small_scene):
    data = make_dataset(2, SIM, seed=33)
    model = train(data, SIM, TrainConfig(epochs=1, seed=0))
    path = tmp_path / "m.ckpt"
    dio.save_checkpoint(checkpoint_tensors(model), path)
    loaded = model_from_tensors(dio.load_checkpoint(path))
    assert loaded.config == model.config
    assert np.array_equal(loaded.clip.mid, model.clip.mid)
    assert np.array_equal(loaded.clip.half_span, model.clip.half_span)
    fp_a, fv_a = forward_encoded(small_scene, model.params, model.clip)
    fp_b, fv_b = forward_encoded(small_scene, loaded.params, loaded.clip)
    assert np.array_equal(fp_a.data, fp_b.data)
    assert np.array_equal(fv_a.data, fv_b.data)


def test_checkpoint_without_clip_for_ablation(tmp_path):
    data = make_dataset(2, SIM, seed=33)
    model = train(data, SIM, TrainConfig(epochs=1, seed=0), use_clip=False)
    assert model.clip is None
    path = tmp_path / "m.ckpt"
    dio.save_checkpoint(checkpoint_tensors(model), path)
    loaded = model_from_tensors(dio.load_checkpoint(path))
    assert loaded.clip is None
    assert loaded.config.use_clip is False


def test_model_from_tensors_validates(tmp_path):
    data = make_dataset(2, SIM, seed=33)
    model = train(data, SIM, TrainConfig(epochs=1, seed=0))
    tensors = checkpoint_tensors(model)
    missing = dict(tensors)
    del missing["fuse.w"]
    with pytest.raises(ValueError, match="missing tensor"):
        model_from_tensors(missing)
    wrong = dict(tensors)
    wrong["fuse.w"] = np.zeros((2, 2))
    with pytest.raises(ValueError, match="shape"):
        model_from_tensors(wrong)


def test_train_config_file_round_trip(tmp_path):
    cfg = TrainConfig(epochs=7, batch_size=3, base_lr=0.005, lr_decay=0.98,
                      voxel_size=0.1, seed=9, num_classes=5)
    path = tmp_path / "train.cfg"
    cfg.to_file(path)
    assert TrainConfig.from_file(path) == cfg
    path.write_text("bogus = 3\n")
    with pytest.raises(ValueError, match="unknown training config key"):
        TrainConfig.from_file(path)


def test_feature_similarity_matrix():
    a = np.array([[0.0, 0.0], [1.0, 0.0]])
    b = np.array([[0.0, 0.0], [0.0, 2.0]])
    m = feature_similarity_matrix(a, b)
    assert m.shape == (2, 2)
    assert m[0, 0] == 0.0
    assert m[1, 1] == pytest.approx(np.sqrt(5.0))
