import math

import numpy as np
import pytest

from ddfe.beams import (
    DEFAULT_SIGMAS,
    band_center_density,
    beam_profile,
    density_for_cloud,
    gaussian_kernel,
    point_density,
    rasterize_beams,
    smooth_profile,
)
from ddfe.sensors import (
    ProjectionParams,
    SensorConfig,
    SphericalCoords,
    get_preset,
)

PP = ProjectionParams()


def test_waymo_rasterization_every_second_column():
    raw_h, raw_v = rasterize_beams(get_preset("waymo"), PP)
    assert raw_h.sum() == 2560
    assert np.all(raw_h[0::2] == 1.0) and np.all(raw_h[1::2] == 0.0)
    assert raw_v.sum() == 64


def test_nuscenes_rasterization_popcounts():
    raw_h, raw_v = rasterize_beams(get_preset("nuscenes"), PP)
    assert raw_h.sum() == 1080
    assert raw_v.sum() == 32


def test_identical_inclinations_or_together():
    # two vertical beams crammed into a sliver of FOV land in one pixel
    cfg = SensorConfig("twins", 4, 2, 0.0, 1e-6)
    _, raw_v = rasterize_beams(cfg, PP)
    assert raw_v.sum() == 1


def test_raw_vectors_binary():
    for name in ("waymo", "nuscenes", "semanticposs"):
        raw_h, raw_v = rasterize_beams(get_preset(name), PP)
        assert set(np.unique(raw_h)) <= {0.0, 1.0}
        assert set(np.unique(raw_v)) <= {0.0, 1.0}


def test_smooth_zero_vector_stays_zero():
    profile = smooth_profile(np.zeros(512), np.zeros(512))
    assert np.all(profile.smooth_h == 0.0)
    assert np.all(profile.smooth_v == 0.0)


def test_smooth_single_impulse_peak():
    raw = np.zeros(1024)
    raw[500] = 1.0
    profile = smooth_profile(raw, raw.copy())
    for k, sigma in enumerate(DEFAULT_SIGMAS):
        expected_peak = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
        for smoothed in (profile.smooth_h[k], profile.smooth_v[k]):
            assert smoothed.argmax() == 500
            assert smoothed[500] == pytest.approx(expected_peak, rel=1e-4)
            assert np.all(smoothed >= 0.0)


def test_smooth_uniform_comb_reads_beams_per_pixel():
    # interior of a spacing-14 comb: smoothed value ~ 1/14, ripple < 1e-3
    spacing, height = 14, 512
    raw_v = np.zeros(height)
    raw_v[40::spacing] = 1.0
    profile = smooth_profile(np.zeros(1024), raw_v, sigmas=(10.0,))
    interior = profile.smooth_v[0][90:420]
    assert np.max(np.abs(interior * spacing - 1.0)) < 1e-3


def test_smooth_circular_preserves_mass():
    rng = np.random.default_rng(3)
    raw_h = (rng.uniform(size=5120) < 0.3).astype(float)
    profile = smooth_profile(raw_h, np.zeros(512))
    for k in range(len(DEFAULT_SIGMAS)):
        assert profile.smooth_h[k].sum() == pytest.approx(raw_h.sum(), rel=1e-9)


def test_smooth_rejects_bad_sigma():
    with pytest.raises(ValueError):
        smooth_profile(np.zeros(64), np.zeros(64), sigmas=(0.0,))
    with pytest.raises(ValueError):
        gaussian_kernel(-1.0)


def test_sigma_support_nesting():
    profile = beam_profile(get_preset("nuscenes"), PP)
    for k in range(len(DEFAULT_SIGMAS) - 1):
        small_v = profile.smooth_v[k] > 0
        large_v = profile.smooth_v[k + 1] > 0
        assert np.all(large_v[small_v])  # superset of the support
    # strictly larger while the axis is not yet saturated
    assert (profile.smooth_v[1] > 0).sum() > (profile.smooth_v[0] > 0).sum()


def test_point_density_halves_when_range_doubles():
    profile = beam_profile(get_preset("semantickitti"), PP)
    rng = np.random.default_rng(7)
    for _ in range(50):
        theta = rng.uniform(0.0, 2.0 * math.pi)
        phi = math.radians(rng.uniform(-24.8, 2.0))
        r = rng.uniform(2.0, 60.0)
        near = point_density(profile, SphericalCoords(theta, phi, r), PP)
        far = point_density(profile, SphericalCoords(theta, phi, 2.0 * r), PP)
        assert np.allclose(far * 2.0, near, rtol=1e-12)


def test_band_center_values_match_beam_rate_analysis():
    # beams-per-pixel estimates: sqrt((Hb/W) * (Vb/band_px)) / r
    nus = get_preset("nuscenes")
    way = get_preset("waymo")
    d_n = band_center_density(beam_profile(nus, PP), nus, PP, 12.0)[0]
    d_w = band_center_density(beam_profile(way, PP), way, PP, 35.0)[0]
    assert d_n == pytest.approx(0.01015, rel=0.02)
    assert d_w == pytest.approx(0.01071, rel=0.02)
    assert d_w == pytest.approx(d_n, rel=0.10)


def test_cross_sensor_density_equivalence():
    way, kit, nus = (get_preset(n) for n in ("waymo", "semantickitti", "nuscenes"))
    d_w = band_center_density(beam_profile(way, PP), way, PP, 35.0)[0]
    d_k = band_center_density(beam_profile(kit, PP), kit, PP, 25.0)[0]
    d_n = band_center_density(beam_profile(nus, PP), nus, PP, 12.0)[0]
    assert 0.8 <= d_w / d_n <= 1.25
    assert 0.75 <= d_k / d_n <= 1.35


def test_density_channel_order_follows_ascending_sigma():
    from ddfe.sensors import project_cols, project_rows

    profile = beam_profile(get_preset("waymo"), PP)
    coords = SphericalCoords(math.pi, math.radians(-7.6), 10.0)
    d = point_density(profile, coords, PP)
    col = int(project_cols(coords.azimuth, PP))
    row = int(project_rows(coords.elevation, PP))
    for k in range(len(DEFAULT_SIGMAS)):
        expected = math.sqrt(profile.smooth_h[k, col] * profile.smooth_v[k, row]) / 10.0
        assert d[k] == pytest.approx(expected, rel=1e-12)


def test_density_for_cloud_empty_and_single():
    profile = beam_profile(get_preset("semantickitti"), PP)
    empty = density_for_cloud(profile, np.zeros((0, 3)), PP)
    assert empty.shape == (0, 4)
    cloud = np.array([[5.0, 1.0, -1.0]])
    row = density_for_cloud(profile, cloud, PP)
    from ddfe.sensors import to_spherical

    single = point_density(profile, to_spherical(cloud[0]), PP)
    assert np.allclose(row[0], single, rtol=1e-12)
    assert np.all(row >= 0.0) and np.all(np.isfinite(row))


def test_density_for_cloud_permutation_equivariance():
    profile = beam_profile(get_preset("nuscenes"), PP)
    rng = np.random.default_rng(11)
    cloud = rng.uniform(-20.0, 20.0, size=(100, 3)) + np.array([5.0, 0.0, 0.0])
    perm = rng.permutation(100)
    base = density_for_cloud(profile, cloud, PP)
    permuted = density_for_cloud(profile, cloud[perm], PP)
    assert np.array_equal(permuted, base[perm])


def test_density_for_cloud_names_offending_point():
    profile = beam_profile(get_preset("nuscenes"), PP)
    cloud = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(ValueError, match="point index 1"):
        density_for_cloud(profile, cloud, PP)
