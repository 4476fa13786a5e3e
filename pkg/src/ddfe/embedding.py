"""Density-discriminative feature embedding (DDFE) for LiDAR clouds.

Points are encoded two ways: voxel centers in spherical form feed a voxel
MLP, intra-voxel offsets feed a point head.  Per-point multi-scale beam
density (soft-clipped to the training spectrum) drives sigmoid attention
gates over both streams; gated voxel features are fused with max-pooled
point features into 32-channel voxel features.  A small per-voxel
classifier head stands in for a full 3D backbone so the pipeline can be
trained and scored end to end at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .beams import BeamProfile, beam_profile, density_for_cloud
from .sensors import ProjectionParams, SensorConfig, spherical_of_cloud
from .stats import ClipParams, DensityReservoir, fit_clip, soft_clip
from .voxels import VoxelGrid, majority_label, voxel_offsets, voxelize


# Fixed input conditioning: ranges are fed in units of 25 m, intra-voxel
# offsets in half-voxel units, densities scaled toward O(1).  Constants, not
# data statistics, so nothing sensor- or dataset-dependent leaks into the
# features.
RANGE_SCALE = 25.0
DENSITY_SCALE = 25.0


@dataclass(frozen=True)
class EmbeddingConfig:
    """Architecture sizes and ablation switches."""

    num_classes: int = 4
    density_channels: int = 4
    point_channels: int = 16
    voxel_channels: int = 16
    fused_channels: int = 32
    hidden: int = 16
    voxel_size: float = 0.20
    use_clip: bool = True       # density soft clipping
    use_attention: bool = True  # density-driven gates (off: gates == 1)
    use_density: bool = True    # off: density channels zeroed at the source


class EmbeddingParams:
    """All trainable tensors, keyed by dotted layer names in fixed order."""

    def __init__(self, config: EmbeddingConfig, rng: np.random.Generator):
        c = config
        self.config = config
        self.tensors: dict[str, nn.Tensor] = {}

        def mlp(prefix, d_in, d_hidden, d_out):
            self._add(f"{prefix}.w1", (d_in, d_hidden), rng)
            self._add(f"{prefix}.b1", (d_hidden,), rng)
            self._add(f"{prefix}.w2", (d_hidden, d_out), rng)
            self._add(f"{prefix}.b2", (d_out,), rng)

        mlp("voxel_mlp", 4, c.hidden, c.voxel_channels)
        mlp("point_head", 3, c.hidden, c.point_channels)
        mlp("attn_point", c.density_channels, c.hidden, c.point_channels)
        mlp("attn_voxel", c.density_channels, c.hidden, c.voxel_channels)
        self._add("fuse.w", (c.voxel_channels + c.point_channels, c.fused_channels), rng)
        self._add("fuse.b", (c.fused_channels,), rng)
        mlp("toy_head", c.fused_channels, c.fused_channels, c.num_classes)
        self._add("point_classifier.w", (c.point_channels, c.num_classes), rng)
        self._add("point_classifier.b", (c.num_classes,), rng)

    def _add(self, name: str, shape: tuple[int, ...], rng: np.random.Generator):
        if len(shape) == 1:
            data = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            data = rng.uniform(-limit, limit, size=shape)
        self.tensors[name] = nn.Tensor(data, requires_grad=True)

    def __getitem__(self, name: str) -> nn.Tensor:
        return self.tensors[name]

    def parameters(self) -> list[nn.Tensor]:
        return list(self.tensors.values())

    def _mlp2(self, x, prefix: str, gate: bool = False) -> nn.Tensor:
        h = nn.relu(nn.linear(x, self[f"{prefix}.w1"], self[f"{prefix}.b1"]))
        y = nn.linear(h, self[f"{prefix}.w2"], self[f"{prefix}.b2"])
        return nn.sigmoid(y) if gate else y


@dataclass
class EncodedScene:
    """Parameter-independent per-scan precomputation (cacheable)."""

    cloud: np.ndarray
    grid: VoxelGrid
    segments: nn.SegmentMap
    offsets: np.ndarray       # (N, 3) intra-voxel offsets
    center_feats: np.ndarray  # (M, 4) voxel centers as (cos, sin, phi, r/25)
    density_raw: np.ndarray   # (N, density_channels) unclipped densities
    labels: np.ndarray | None = None
    voxel_labels: np.ndarray | None = None


def _center_features(centers: np.ndarray) -> np.ndarray:
    """Voxel centers as (cos az, sin az, elevation, range/25)."""
    theta, phi, r = spherical_of_cloud(centers)
    return np.stack([np.cos(theta), np.sin(theta), phi, r / RANGE_SCALE], axis=1)


def encode_scene(
    cloud: np.ndarray,
    profile: BeamProfile,
    proj: ProjectionParams,
    voxel_size: float,
    labels: np.ndarray | None = None,
    use_density: bool = True,
) -> EncodedScene:
    cloud = np.asarray(cloud, dtype=np.float64)
    grid = voxelize(cloud, voxel_size)
    center_feats = _center_features(grid.centers)
    if use_density:
        density_raw = density_for_cloud(profile, cloud, proj)
    else:
        density_raw = np.zeros((cloud.shape[0], profile.smooth_h.shape[0]))
    voxel_labels = None
    if labels is not None:
        labels = np.asarray(labels)
        voxel_labels = majority_label(grid, labels)
    return EncodedScene(
        cloud=cloud,
        grid=grid,
        segments=nn.SegmentMap(grid.point_to_voxel, grid.num_voxels),
        offsets=voxel_offsets(grid, cloud),
        center_feats=center_feats,
        density_raw=density_raw,
        labels=labels,
        voxel_labels=voxel_labels,
    )


def clipped_density(scene: EncodedScene, clip: ClipParams | None,
                    config: EmbeddingConfig) -> np.ndarray:
    if config.use_clip and clip is not None:
        return soft_clip(scene.density_raw, clip)
    return scene.density_raw


def encode_voxel_features(grid_or_feats, params: EmbeddingParams) -> nn.Tensor:
    """Voxel-wise features from the voxel centers' spherical coordinates."""
    if isinstance(grid_or_feats, VoxelGrid):
        feats = _center_features(grid_or_feats.centers)
    else:
        feats = np.asarray(grid_or_feats, dtype=np.float64)
    return params._mlp2(nn.Tensor(feats), "voxel_mlp")


def encode_point_features(offsets, params: EmbeddingParams) -> nn.Tensor:
    """Point-wise features from intra-voxel offsets (in half-voxel units)."""
    scaled = np.asarray(offsets, dtype=np.float64) * (2.0 / params.config.voxel_size)
    return params._mlp2(nn.Tensor(scaled), "point_head")


def point_attention(density_clipped, point_feats: nn.Tensor,
                    params: EmbeddingParams, use_attention: bool = True) -> nn.Tensor:
    """Gate point features by a sigmoid projection of their clipped density."""
    if not use_attention:
        return point_feats
    gate = params._mlp2(nn.Tensor(density_clipped * DENSITY_SCALE),
                        "attn_point", gate=True)
    return nn.multiply(gate, point_feats)


def voxel_fuse(density_clipped, segments: nn.SegmentMap, voxel_feats: nn.Tensor,
               point_feats_gated: nn.Tensor, params: EmbeddingParams,
               use_attention: bool = True) -> nn.Tensor:
    """Fused per-voxel features: gated voxel stream + max-pooled point stream.

    The voxel gate sees the mean clipped density of the member points; the
    pooled stream is the channel-wise max of the (gated) point features.
    """
    if use_attention:
        dc_voxel = nn.segment_mean(nn.Tensor(density_clipped * DENSITY_SCALE), segments)
        gate = params._mlp2(dc_voxel, "attn_voxel", gate=True)
        gated = nn.multiply(gate, voxel_feats)
    else:
        gated = voxel_feats
    pooled = nn.segment_max(point_feats_gated, segments)
    return nn.linear(nn.concat([gated, pooled], axis=1),
                     params["fuse.w"], params["fuse.b"])


def forward_encoded(scene: EncodedScene, params: EmbeddingParams,
                    clip: ClipParams | None) -> tuple[nn.Tensor, nn.Tensor]:
    """Differentiable forward pass on a pre-encoded scene."""
    config = params.config
    dc = clipped_density(scene, clip, config)
    voxel_feats = encode_voxel_features(scene.center_feats, params)
    point_feats = encode_point_features(scene.offsets, params)
    point_gated = point_attention(dc, point_feats, params, config.use_attention)
    fused = voxel_fuse(dc, scene.segments, voxel_feats, point_gated, params,
                       config.use_attention)
    return point_gated, fused


def ddfe_forward(
    cloud: np.ndarray,
    profile: BeamProfile,
    clip: ClipParams | None,
    params: EmbeddingParams,
    proj: ProjectionParams | None = None,
) -> tuple[np.ndarray, np.ndarray, VoxelGrid]:
    """Full pipeline: cloud -> (point features (N, 16), voxel features (M, 32), grid)."""
    proj = proj or ProjectionParams()
    scene = encode_scene(cloud, profile, proj, params.config.voxel_size,
                         use_density=params.config.use_density)
    point_gated, fused = forward_encoded(scene, params, clip)
    return point_gated.data, fused.data, scene.grid


# --- training -------------------------------------------------------------


@dataclass
class TrainConfig:
    """Training hyperparameters; serializable as a key=value text file.

    base_lr defaults above the usual 1e-3: a desk-scale run sees only a few
    hundred optimizer steps, so the schedule starts higher while keeping the
    0.99-per-epoch decay shape.
    """

    epochs: int = 30
    batch_size: int = 2
    base_lr: float = 1e-2
    lr_decay: float = 0.99
    voxel_size: float = 0.20
    seed: int = 0
    num_classes: int = 4

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        fields: dict[str, str] = {}
        with open(path, "r", encoding="ascii") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
                key, value = (part.strip() for part in line.split("=", 1))
                fields[key] = value
        known = {
            "epochs": int, "batch_size": int, "base_lr": float,
            "lr_decay": float, "voxel_size": float, "seed": int,
            "num_classes": int,
        }
        kwargs = {}
        for key, value in fields.items():
            if key not in known:
                raise ValueError(f"unknown training config key {key!r}")
            kwargs[key] = known[key](value)
        return cls(**kwargs)

    def to_file(self, path) -> None:
        with open(path, "w", encoding="ascii") as fh:
            for key in ("epochs", "batch_size", "base_lr", "lr_decay",
                        "voxel_size", "seed", "num_classes"):
                fh.write(f"{key} = {getattr(self, key)}\n")


def inverse_frequency_weights(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Per-class loss weights: mean frequency / class frequency, in [0.1, 10]."""
    counts = np.bincount(labels, minlength=num_classes).astype(np.float64)
    if counts.size > num_classes:
        raise ValueError(
            f"label {int(labels.max())} outside the {num_classes}-class weight table"
        )
    mean_count = counts.sum() / num_classes
    with np.errstate(divide="ignore"):
        weights = np.where(counts > 0, mean_count / np.maximum(counts, 1e-300), 10.0)
    return np.clip(weights, 0.1, 10.0)


@dataclass
class Model:
    """Trained bundle: architecture config, parameters, frozen clip."""

    config: EmbeddingConfig
    params: EmbeddingParams
    clip: ClipParams | None


def scene_loss(scene: EncodedScene, model_params: EmbeddingParams,
               clip: ClipParams | None, class_weights: np.ndarray) -> nn.Tensor:
    """Equal-weighted point and voxel losses (Lovasz + weighted CE each)."""
    point_gated, fused = forward_encoded(scene, model_params, clip)
    p = model_params
    point_logits = nn.linear(point_gated, p["point_classifier.w"], p["point_classifier.b"])
    voxel_logits = p._mlp2(fused, "toy_head")
    loss = nn.lovasz_softmax(nn.softmax(point_logits), scene.labels)
    loss = loss + nn.weighted_cross_entropy(point_logits, scene.labels, class_weights)
    loss = loss + nn.lovasz_softmax(nn.softmax(voxel_logits), scene.voxel_labels)
    loss = loss + nn.weighted_cross_entropy(voxel_logits, scene.voxel_labels, class_weights)
    return loss


def train(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    sensor_config: SensorConfig,
    hyper: TrainConfig | None = None,
    *,
    use_clip: bool = True,
    use_attention: bool = True,
    use_density: bool = True,
    proj: ProjectionParams | None = None,
    progress=None,
) -> Model:
    """Fit the embedding and heads on labeled clouds; deterministic per seed.

    Clip parameters are fit once from the training densities and frozen
    before any gradient step, mirroring deployment (training-domain clip).
    """
    if not dataset:
        raise ValueError("dataset is empty")
    hyper = hyper or TrainConfig()
    proj = proj or ProjectionParams()
    profile = beam_profile(sensor_config, proj)
    config = EmbeddingConfig(
        num_classes=hyper.num_classes, voxel_size=hyper.voxel_size,
        use_clip=use_clip, use_attention=use_attention, use_density=use_density,
    )

    scenes = []
    for cloud, labels in dataset:
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() >= hyper.num_classes):
            raise ValueError(
                f"labels must lie in [0, {hyper.num_classes}); got {int(labels.max())}"
            )
        scenes.append(encode_scene(cloud, profile, proj, hyper.voxel_size,
                                   labels, use_density))

    clip = None
    if use_clip:
        reservoir = DensityReservoir(num_channels=config.density_channels,
                                     seed=hyper.seed)
        for scene in scenes:
            reservoir.update(scene.density_raw)
        clip = fit_clip(reservoir)

    class_weights = inverse_frequency_weights(
        np.concatenate([s.labels for s in scenes]), hyper.num_classes)

    rng = np.random.default_rng(hyper.seed)
    params = EmbeddingParams(config, rng)
    optimizer = nn.Adam(params.parameters(), lr=hyper.base_lr)

    for epoch in range(hyper.epochs):
        optimizer.lr = nn.lr_schedule(epoch, hyper.base_lr, hyper.lr_decay)
        order = rng.permutation(len(scenes))
        for step, start in enumerate(range(0, len(scenes), hyper.batch_size)):
            batch = order[start : start + hyper.batch_size]
            optimizer.zero_grad()
            total = None
            for idx in batch:
                loss = scene_loss(scenes[idx], params, clip, class_weights) * (1.0 / batch.size)
                total = loss if total is None else total + loss
            if not np.isfinite(total.data):
                raise ValueError(
                    f"non-finite loss at epoch {epoch}, step {step}; training aborted"
                )
            total.backward()
            optimizer.step()
        if progress is not None:
            progress(epoch, float(total.data))

    return Model(config, params, clip)


# --- evaluation -----------------------------------------------------------


def point_predictions(scene: EncodedScene, model: Model) -> np.ndarray:
    """Per-point class: argmax of point logits plus the voxel head's logits."""
    point_gated, fused = forward_encoded(scene, model.params, model.clip)
    p = model.params
    point_logits = nn.linear(point_gated, p["point_classifier.w"], p["point_classifier.b"]).data
    voxel_logits = p._mlp2(fused, "toy_head").data
    return np.argmax(point_logits + voxel_logits[scene.grid.point_to_voxel], axis=1)


def confusion_matrix(pred: np.ndarray, labels: np.ndarray, num_classes: int) -> np.ndarray:
    pred = np.asarray(pred)
    labels = np.asarray(labels)
    matrix = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(matrix, (labels, pred), 1)
    return matrix


def iou_scores(confusion: np.ndarray) -> tuple[np.ndarray, float]:
    """Per-class IoU (NaN if the class never occurs) and mIoU over classes
    present in the ground truth."""
    tp = np.diag(confusion).astype(np.float64)
    fn = confusion.sum(axis=1) - tp
    fp = confusion.sum(axis=0) - tp
    denom = tp + fp + fn
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(denom > 0, tp / denom, np.nan)
    present = (tp + fn) > 0
    if not present.any():
        raise ValueError("no ground-truth points to evaluate")
    miou = float(np.mean(iou[present]))
    return iou, miou


@dataclass
class EvalReport:
    per_class_iou: np.ndarray
    miou: float
    confusion: np.ndarray

    def format(self, class_names=None) -> str:
        lines = []
        for c, iou in enumerate(self.per_class_iou):
            name = class_names[c] if class_names and c < len(class_names) else f"class{c}"
            text = "   n/a" if np.isnan(iou) else f"{iou:6.4f}"
            lines.append(f"  IoU[{name}] = {text}")
        lines.append(f"  mIoU = {self.miou:.4f}")
        return "\n".join(lines)


def evaluate(
    dataset: list[tuple[np.ndarray, np.ndarray]],
    model: Model,
    sensor_config: SensorConfig,
    proj: ProjectionParams | None = None,
) -> EvalReport:
    """Point-level IoU of the model on labeled clouds."""
    if not dataset:
        raise ValueError("dataset is empty")
    proj = proj or ProjectionParams()
    profile = beam_profile(sensor_config, proj)
    num_classes = model.config.num_classes
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    for cloud, labels in dataset:
        labels = np.asarray(labels)
        if labels.size and (labels.min() < 0 or labels.max() >= num_classes):
            raise ValueError(f"labels must lie in [0, {num_classes})")
        scene = encode_scene(cloud, profile, proj, model.config.voxel_size,
                             labels, model.config.use_density)
        pred = point_predictions(scene, model)
        confusion += confusion_matrix(pred, labels, num_classes)
    iou, miou = iou_scores(confusion)
    return EvalReport(iou, miou, confusion)


# --- checkpoints ----------------------------------------------------------

_META_FIELDS = (
    "num_classes", "density_channels", "point_channels", "voxel_channels",
    "fused_channels", "hidden",
)
_META_FLAGS = ("use_clip", "use_attention", "use_density")


def checkpoint_tensors(model: Model) -> dict[str, np.ndarray]:
    """Flatten a model into named arrays (clip appended as labeled tensors)."""
    out: dict[str, np.ndarray] = {}
    for field in _META_FIELDS:
        out[f"meta.{field}"] = np.float64(getattr(model.config, field))
    out["meta.voxel_size"] = np.float64(model.config.voxel_size)
    for flag in _META_FLAGS:
        out[f"meta.{flag}"] = np.float64(getattr(model.config, flag))
    for name, tensor in model.params.tensors.items():
        out[name] = tensor.data
    if model.clip is not None:
        out["clip.mid"] = model.clip.mid
        out["clip.half_span"] = model.clip.half_span
    return out


def model_from_tensors(tensors: dict[str, np.ndarray]) -> Model:
    config = EmbeddingConfig(
        **{f: int(tensors[f"meta.{f}"]) for f in _META_FIELDS},
        voxel_size=float(tensors["meta.voxel_size"]),
        **{f: bool(tensors[f"meta.{f}"]) for f in _META_FLAGS},
    )
    params = EmbeddingParams(config, np.random.default_rng(0))
    for name, tensor in params.tensors.items():
        if name not in tensors:
            raise ValueError(f"checkpoint is missing tensor {name!r}")
        if tensors[name].shape != tensor.data.shape:
            raise ValueError(
                f"checkpoint tensor {name!r} has shape {tensors[name].shape}, "
                f"expected {tensor.data.shape}"
            )
        tensor.data = tensors[name].copy()
    clip = None
    if "clip.mid" in tensors:
        clip = ClipParams.from_mid_span(tensors["clip.mid"], tensors["clip.half_span"])
    return Model(config, params, clip)


# --- cross-domain feature similarity ---------------------------------------


def binned_voxel_features(
    dataset: list[tuple[np.ndarray, np.ndarray]] | list[np.ndarray],
    model: Model,
    sensor_config: SensorConfig,
    bin_edges: np.ndarray | None = None,
    proj: ProjectionParams | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Mean fused voxel feature per voxel-center range bin.

    Returns (means (B, fused_channels), counts (B,)); bins default to 5 m
    steps over 0-50 m.  Empty bins yield NaN rows.
    """
    proj = proj or ProjectionParams()
    edges = np.arange(0.0, 55.0, 5.0) if bin_edges is None else np.asarray(bin_edges)
    profile = beam_profile(sensor_config, proj)
    n_bins = edges.size - 1
    sums = np.zeros((n_bins, model.config.fused_channels))
    counts = np.zeros(n_bins, dtype=np.int64)
    for item in dataset:
        cloud = item[0] if isinstance(item, tuple) else item
        scene = encode_scene(cloud, profile, proj, model.config.voxel_size,
                             use_density=model.config.use_density)
        _, fused = forward_encoded(scene, model.params, model.clip)
        ranges = np.linalg.norm(scene.grid.centers, axis=1)
        which = np.digitize(ranges, edges) - 1
        ok = (which >= 0) & (which < n_bins)
        for b in range(n_bins):
            rows = fused.data[ok & (which == b)]
            if rows.size:
                sums[b] += rows.sum(axis=0)
                counts[b] += rows.shape[0]
    with np.errstate(invalid="ignore"):
        means = sums / np.where(counts > 0, counts, np.nan)[:, None]
    return means, counts


def feature_similarity_matrix(means_a: np.ndarray, means_b: np.ndarray) -> np.ndarray:
    """Pairwise L2 distance between two sets of binned mean features."""
    diff = means_a[:, None, :] - means_b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))
