"""Density augmentation: beam sampling and scene mixing.

Beam sampling removes whole vertical beams to emulate sparser sensors;
scene mixing concatenates a second scan after a random yaw and a random
translation along the ego (+x) axis, widening the density spectrum the
training data covers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sensors import SensorConfig, beam_inclinations, spherical_of_cloud

KEEP_FRACTIONS = (0.5, 0.75)  # emulates 32- and 48-beam sensors from 64


@dataclass
class AugmentConfig:
    apply_prob: float = 0.5
    mix_translation_max: float = 20.0        # meters along ego +x
    mix_rotation: tuple[float, float] = (0.0, 2.0 * np.pi)  # yaw range
    keep_fractions: tuple[float, ...] = KEEP_FRACTIONS

    def __post_init__(self):
        if not 0.0 <= self.apply_prob <= 1.0:
            raise ValueError(f"apply_prob must be in [0, 1], got {self.apply_prob}")
        for f in self.keep_fractions:
            if not 0.0 < f <= 1.0:
                raise ValueError(f"keep fraction must be in (0, 1], got {f}")


def nearest_beam(cloud: np.ndarray, config: SensorConfig) -> np.ndarray:
    """Index (0-based) of the vertical beam nearest each point's elevation.

    Raw scans carry no beam ids, so membership is reconstructed from the
    inclination grid.
    """
    _, elevation_deg = beam_inclinations(config)
    _, phi, _ = spherical_of_cloud(cloud)
    phi_deg = np.degrees(phi)
    return np.argmin(np.abs(phi_deg[:, None] - elevation_deg[None, :]), axis=1)


def beam_sample(
    cloud: np.ndarray,
    labels: np.ndarray,
    config: SensorConfig,
    keep: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Drop every point whose nearest vertical beam is not in `keep`.

    keep holds 0-based beam indices into the config's vertical beams.
    Idempotent for a fixed keep set.
    """
    keep = np.unique(np.asarray(keep, dtype=np.int64))
    if keep.size == 0:
        raise ValueError("keep set is empty")
    if keep.min() < 0 or keep.max() >= config.v_beams:
        raise ValueError(
            f"keep indices must lie in [0, {config.v_beams}), got "
            f"[{keep.min()}, {keep.max()}]"
        )
    cloud = np.asarray(cloud, dtype=np.float64)
    labels = np.asarray(labels)
    mask = np.isin(nearest_beam(cloud, config), keep)
    return cloud[mask], labels[mask]


def rotate_yaw(cloud: np.ndarray, yaw: float) -> np.ndarray:
    """Rotate about +z by yaw; maps azimuth theta to (theta + yaw) mod 2pi."""
    c, s = np.cos(yaw), np.sin(yaw)
    out = np.empty_like(cloud)
    out[:, 0] = c * cloud[:, 0] - s * cloud[:, 1]
    out[:, 1] = s * cloud[:, 0] + c * cloud[:, 1]
    out[:, 2] = cloud[:, 2]
    return out


def enhanced_mix3d(
    scene_a: tuple[np.ndarray, np.ndarray],
    scene_b: tuple[np.ndarray, np.ndarray],
    cfg: AugmentConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Concatenate scene_b onto scene_a after a random yaw and ego-axis shift.

    scene_a is never modified; labels concatenate in (a, b) order.
    """
    cloud_a, labels_a = scene_a
    cloud_b, labels_b = scene_b
    yaw = rng.uniform(cfg.mix_rotation[0], cfg.mix_rotation[1])
    shift = rng.uniform(0.0, cfg.mix_translation_max)
    moved = rotate_yaw(np.asarray(cloud_b, dtype=np.float64), yaw)
    moved[:, 0] += shift
    cloud = np.concatenate([np.asarray(cloud_a, dtype=np.float64), moved])
    labels = np.concatenate([np.asarray(labels_a), np.asarray(labels_b)])
    return cloud, labels


def random_keep_set(config: SensorConfig, cfg: AugmentConfig,
                    rng: np.random.Generator) -> np.ndarray:
    fraction = cfg.keep_fractions[int(rng.integers(0, len(cfg.keep_fractions)))]
    n_keep = max(1, round(fraction * config.v_beams))
    return np.sort(rng.choice(config.v_beams, size=n_keep, replace=False))


def augment_pipeline(
    sample: tuple[np.ndarray, np.ndarray],
    config: SensorConfig,
    cfg: AugmentConfig,
    rng: np.random.Generator,
    pool,
) -> tuple[np.ndarray, np.ndarray]:
    """Apply scene mixing and beam sampling, each independently with
    probability cfg.apply_prob.

    pool is a zero-argument callable supplying a partner (cloud, labels)
    for mixing.  Deterministic for a fixed rng state.
    """
    cloud, labels = sample
    if rng.uniform() < cfg.apply_prob:
        cloud, labels = enhanced_mix3d((cloud, labels), pool(), cfg, rng)
    if rng.uniform() < cfg.apply_prob:
        keep = random_keep_set(config, cfg, rng)
        cloud, labels = beam_sample(cloud, labels, config, keep)
    return cloud, labels
