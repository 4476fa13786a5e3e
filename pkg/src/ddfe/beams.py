"""Beam density estimation.

The beam layout of a sensor is rasterized into binary indicator vectors on
the projected image axes, smoothed with a bank of 1-D Gaussians, and turned
into a per-point multi-scale density value: the smoothed vectors read as
"expected beams per pixel", and density falls off as 1/r with range because
emitted rays spread over spheres.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sensors import (
    ProjectionParams,
    SensorConfig,
    SphericalCoords,
    beam_inclinations,
    project_cols,
    project_rows,
    spherical_of_cloud,
)

DEFAULT_SIGMAS = (10.0, 30.0, 50.0, 70.0)  # pixels of the projected image


@dataclass(frozen=True)
class BeamProfile:
    """Raw and Gaussian-smoothed beam indicator vectors of one sensor.

    raw_h / raw_v are binary ({0, 1}); smooth_h / smooth_v hold one row per
    smoothing scale, ascending sigma, same length as the raw vectors.
    """

    raw_h: np.ndarray
    raw_v: np.ndarray
    smooth_h: np.ndarray
    smooth_v: np.ndarray
    sigmas: tuple[float, ...]


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Sum-normalized 1-D Gaussian truncated at +/- 4 sigma."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    radius = int(math.ceil(4.0 * sigma))
    t = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (t / sigma) ** 2)
    return kernel / kernel.sum()


def _convolve_circular(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    if radius >= x.size:
        raise ValueError(
            f"kernel radius {radius} exceeds vector length {x.size}"
        )
    padded = np.concatenate([x[-radius:], x, x[:radius]]) if radius else x
    full = np.convolve(padded, kernel)
    return full[2 * radius : 2 * radius + x.size]


def _convolve_zero_padded(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    radius = (kernel.size - 1) // 2
    full = np.convolve(x, kernel)
    return full[radius : radius + x.size]


def rasterize_beams(
    config: SensorConfig, params: ProjectionParams
) -> tuple[np.ndarray, np.ndarray]:
    """Binary beam indicators on the projected image axes.

    Beams falling into the same pixel OR together, so the popcount can be
    below the beam count.  The projections are algebraically rearranged
    (floor(i*W/H_b) instead of floor((2*pi*i/H_b)/(2*pi)*W), and degrees
    end to end vertically) so beams sitting exactly on pixel boundaries
    land where exact arithmetic puts them.
    """
    i = np.arange(1, config.h_beams + 1, dtype=np.float64)
    cols = np.floor(i * params.width / config.h_beams).astype(np.int64) % params.width
    raw_h = np.zeros(params.width, dtype=np.float64)
    raw_h[cols] = 1.0

    _, elevation_deg = beam_inclinations(config)
    proj_span = params.proj_fov_max_deg - params.proj_fov_min_deg
    rows = np.floor(
        (elevation_deg - params.proj_fov_min_deg) * params.height / proj_span
    ).astype(np.int64)
    rows = np.clip(rows, 0, params.height - 1)
    raw_v = np.zeros(params.height, dtype=np.float64)
    raw_v[rows] = 1.0
    return raw_h, raw_v


def smooth_profile(
    raw_h: np.ndarray,
    raw_v: np.ndarray,
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS,
) -> BeamProfile:
    """Smooth raw indicators with one Gaussian per scale.

    The horizontal axis is periodic (azimuth), so its convolution wraps;
    the vertical axis is zero-padded.  Kernels are sum-normalized, making
    smoothed values expected beams per pixel.
    """
    raw_h = np.asarray(raw_h, dtype=np.float64)
    raw_v = np.asarray(raw_v, dtype=np.float64)
    smooth_h = np.empty((len(sigmas), raw_h.size))
    smooth_v = np.empty((len(sigmas), raw_v.size))
    for k, sigma in enumerate(sigmas):
        kernel = gaussian_kernel(sigma)
        smooth_h[k] = _convolve_circular(raw_h, kernel)
        smooth_v[k] = _convolve_zero_padded(raw_v, kernel)
    return BeamProfile(raw_h, raw_v, smooth_h, smooth_v, tuple(sigmas))


def beam_profile(
    config: SensorConfig,
    params: ProjectionParams | None = None,
    sigmas: tuple[float, ...] = DEFAULT_SIGMAS,
) -> BeamProfile:
    """Rasterize and smooth in one step."""
    params = params or ProjectionParams()
    raw_h, raw_v = rasterize_beams(config, params)
    return smooth_profile(raw_h, raw_v, sigmas)


def point_density(
    profile: BeamProfile, coords: SphericalCoords, params: ProjectionParams
) -> np.ndarray:
    """Multi-scale beam density of one point: sqrt(Bh * Bv) / r per scale."""
    if coords.range <= 0:
        raise ValueError(f"range must be positive, got {coords.range}")
    col = int(project_cols(coords.azimuth, params))
    row = int(project_rows(coords.elevation, params))
    return np.sqrt(profile.smooth_h[:, col] * profile.smooth_v[:, row]) / coords.range


def density_for_cloud(
    profile: BeamProfile, cloud: np.ndarray, params: ProjectionParams
) -> np.ndarray:
    """Per-point density embedding of an (N, 3) cloud, shape (N, len(sigmas)).

    Row order follows the cloud; a zero-length point raises with its index.
    """
    cloud = np.asarray(cloud, dtype=np.float64)
    n_scales = profile.smooth_h.shape[0]
    if cloud.size == 0:
        return np.zeros((0, n_scales), dtype=np.float64)
    theta, phi, r = spherical_of_cloud(cloud)
    cols = project_cols(theta, params)
    rows = project_rows(phi, params)
    product = profile.smooth_h[:, cols] * profile.smooth_v[:, rows]
    return (np.sqrt(product) / r).T


def band_center_density(
    profile: BeamProfile,
    config: SensorConfig,
    params: ProjectionParams,
    distance: float,
) -> np.ndarray:
    """Density at the center of the sensor's beam band, per scale.

    Probes azimuth pi (any azimuth works, the horizontal comb covers the
    full circle) and the mid elevation of the vertical FOV, at the given
    range.  This is the natural operating point for comparing sensors.
    """
    mid_deg = 0.5 * (config.fov_min_deg + config.fov_max_deg)
    coords = SphericalCoords(math.pi, math.radians(mid_deg), float(distance))
    return point_density(profile, coords, params)
