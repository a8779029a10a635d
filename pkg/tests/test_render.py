import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_scene
from oracles import box_corners, plan_centroid, projected_hull, band_violations
from seasynth.errors import ConfigError
from seasynth.geometry import apply_pose, parametric_whale
from seasynth.render import apply_sensor_noise, fresnel, load_mask, load_rgb, render, save_output, tone_map
from seasynth.scene import CameraSpec, NoiseSpec, SceneSpec, load_scene


# -- fresnel and tone curve ----------------------------------------------------

def test_fresnel_endpoints_and_midpoint():
    assert fresnel(1.0) == 0.02
    assert fresnel(0.0) == 1.0
    assert fresnel(0.5) == pytest.approx(0.02 + 0.98 * 0.5 ** 5, abs=1e-15)
    assert fresnel(0.5) == pytest.approx(0.050625, abs=1e-15)


@pytest.mark.parametrize("bad", [-0.01, 1.01, float("nan")])
def test_fresnel_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        fresnel(bad)


@settings(max_examples=100)
@given(st.floats(0, 1), st.floats(0, 1))
def test_fresnel_is_monotone_decreasing(a, b):
    lo, hi = sorted((a, b))
    assert fresnel(lo) >= fresnel(hi)
    assert 0.02 <= fresnel(a) <= 1.0


def test_tone_map_curve():
    v = np.array([-1.0, 0.0, 0.5, 1.0, 7.0])
    out = tone_map(v)
    assert out.dtype == np.uint8
    assert out.tolist() == [0, 0, int(np.floor(0.5 ** (1 / 2.2) * 255 + 0.5)), 255, 255]


# -- sensor noise ----------------------------------------------------------------

GRAY = np.full((140, 140, 3), 128, dtype=np.uint8)


def test_noise_free_spec_is_byte_identity():
    out = apply_sensor_noise(GRAY, NoiseSpec(), 9)
    assert out.tobytes() == GRAY.tobytes() and out is not GRAY


def test_gaussian_noise_mean_is_unbiased():
    sigma = 0.05
    out = apply_sensor_noise(GRAY, NoiseSpec(gaussian_sigma=sigma), 4)
    diff = out.astype(float) - GRAY
    bound = 3 * sigma * 255 / np.sqrt(140 * 140 * 3)
    for ch in range(3):
        assert abs(diff[..., ch].mean()) <= bound
    assert diff.std() == pytest.approx(sigma * 255, rel=0.05)


def test_noise_is_deterministic_per_seed():
    spec = NoiseSpec(gaussian_sigma=0.1, white_amount=0.05)
    a = apply_sensor_noise(GRAY, spec, 77)
    assert a.tobytes() == apply_sensor_noise(GRAY, spec, 77).tobytes()
    assert a.tobytes() != apply_sensor_noise(GRAY, spec, 78).tobytes()


def test_white_noise_replaces_the_requested_fraction():
    out = apply_sensor_noise(GRAY, NoiseSpec(white_amount=0.2), 1)
    changed = np.any(out != GRAY, axis=2).mean()
    # a replaced pixel keeps 128 in all channels with probability (1/256)^3
    assert changed == pytest.approx(0.2, abs=0.01)


@pytest.mark.parametrize("kw", [{"gaussian_sigma": -0.1}, {"gaussian_sigma": 1.5}, {"white_amount": 2}])
def test_noise_spec_validation(kw):
    with pytest.raises(ConfigError):
        NoiseSpec(**kw)


# -- camera ----------------------------------------------------------------------

def test_default_camera_footprint():
    cam = CameraSpec()
    assert cam.principal_point == (70.0, 70.0)
    # 140 px * 0.0147/140 m * 100 m / 0.035 m = 42 m
    assert cam.ground_sample_distance() * cam.width == pytest.approx(42.0, abs=1e-12)


def test_project_inverts_ray_model():
    cam = CameraSpec(altitude=80.0, x=3.0, y=-2.0)
    col, row = cam.project(3.0, -2.0, -5.0)
    assert (col, row) == (70.0, 70.0)
    col, row = cam.project(3.0 + cam.ground_sample_distance(), -2.0, 0.0)
    assert col == pytest.approx(71.0, abs=1e-12)


@pytest.mark.parametrize("kw", [{"width": 0}, {"height": 0}, {"altitude": -1}, {"focal_length": 0},
                                {"width": 30001}, {"supersample": 9}])
def test_camera_validation(kw):
    with pytest.raises(ConfigError):
        CameraSpec(**kw)


# -- render contracts ------------------------------------------------------------

def test_output_shapes_and_mask_values():
    out = render(small_scene(camera={"width": 37, "height": 23}), 0)
    assert out.image.shape == (23, 37, 3) and out.image.dtype == np.uint8
    assert out.mask.shape == (23, 37) and out.mask.dtype == np.uint8
    assert set(np.unique(out.mask).tolist()) <= {0, 255}
    assert out.mask.any()


def test_no_object_of_interest_gives_empty_mask():
    scene = small_scene(objects_of_interest=[],
                        objects_of_non_interest=[{"source": "rock", "pose": {"translation": [0, 0, 0]}}])
    out = render(scene, 3)
    assert not out.mask.any()
    assert np.ptp(out.image) > 0


def test_render_is_deterministic_across_workers_and_tiles():
    scene = small_scene(noise={"gaussian_sigma": 0.02, "white_amount": 0.01})
    ref = render(scene, 5)
    for workers, tile_rows in ((1, 48), (4, 1), (3, 7), (8, 32)):
        out = render(scene, 5, workers=workers, tile_rows=tile_rows)
        assert out.image.tobytes() == ref.image.tobytes()
        assert out.mask.tobytes() == ref.mask.tobytes()


def test_supersampling_is_deterministic_and_keeps_center_mask():
    base = small_scene()
    ss = small_scene(camera={"supersample": 3})
    a, b = render(ss, 2), render(ss, 2, workers=4, tile_rows=5)
    assert a.image.tobytes() == b.image.tobytes()
    assert a.mask.tobytes() == render(base, 2).mask.tobytes()


def test_mask_ignores_optics_noise_and_lighting():
    ref = render(small_scene(), 1).mask
    for change in (
        {"optics": {"turbidity": 1.0}},
        {"optics": {"color_index": 1029}},
        {"noise": {"gaussian_sigma": 0.3, "white_amount": 0.5}},
        {"light": {"sun_intensity": 0.0, "sky_ambient": 0.05, "sun_elevation": 0.3}},
        {"waves": {"metallic": 1.0}},
    ):
        assert render(small_scene(**change), 1).mask.tobytes() == ref.tobytes(), change


def test_dark_scene_is_uniformly_black():
    out = render(small_scene(light={"sun_intensity": 0.0, "sky_ambient": 0.0}), 0)
    assert not out.image.any()


def test_brighter_sun_never_darkens():
    a = render(small_scene(light={"sun_intensity": 0.5}), 0).image.astype(int)
    b = render(small_scene(light={"sun_intensity": 1.5}), 0).image.astype(int)
    assert np.all(b >= a)


def test_camera_below_scene_is_rejected():
    with pytest.raises(ConfigError, match="altitude"):
        render(small_scene(camera={"altitude": 0.1}), 0)
    high = {"source": "box", "params": {"size": [1, 1, 1]}, "pose": {"translation": [0, 0, 30]}}
    with pytest.raises(ConfigError, match="altitude"):
        render(small_scene(camera={"altitude": 25.0}, objects_of_interest=[high]), 0)


def test_memory_guard(monkeypatch):
    import os

    monkeypatch.setattr(os, "sysconf", lambda name: 1024 if name == "SC_AVPHYS_PAGES" else 4096)
    with pytest.raises(ConfigError, match="GiB"):
        render(small_scene(camera={"width": 30000, "height": 30000}), 0)


def test_centered_whale_mask_centroid():
    whale = parametric_whale()
    cx, cy = plan_centroid(apply_pose(whale, SceneSpec.from_dict(
        {"objects_of_interest": [{"pose": "lodging"}]}).objects_of_interest[0].pose))
    scene = SceneSpec.from_dict({
        "waves": {"strength": 0.0},
        "objects_of_interest": [{"pose": {"preset": "lodging", "translation": [-cx, -cy, -0.5]}}],
    })
    mask = render(scene, 0).mask
    rows, cols = np.nonzero(mask)
    px, py = scene.camera.principal_point
    assert abs(cols.mean() + 0.5 - px) <= 1.0
    assert abs(rows.mean() + 0.5 - py) <= 1.0


@pytest.mark.parametrize("seed", range(4))
def test_slab_mask_matches_projected_box(seed):
    rng = np.random.default_rng(seed)
    size = rng.uniform([2, 2, 0.2], [12, 12, 3])
    center = np.append(rng.uniform(-8, 8, 2), rng.uniform(-3, 1))
    scene = SceneSpec.from_dict({
        "camera": {"altitude": float(rng.uniform(50, 150))},
        "objects_of_interest": [{"source": "box", "params": {"size": size.tolist()},
                                 "pose": {"translation": center.tolist()}}],
    })
    mask = render(scene, seed).mask
    hull = projected_hull(scene.camera, box_corners(center, size))
    assert band_violations(mask, hull) == 0


def test_turbidity_reduces_contrast_of_submerged_whale():
    contrasts = []
    for t in (0.0, 0.25, 0.5, 0.75, 1.0):
        d = {"optics": {"turbidity": t}, "waves": {"phase_seed": 4}}
        with_whale = render(small_scene(objects_of_interest=[{"pose": "submerging"}], **d), 3)
        water = render(small_scene(objects_of_interest=[], **d), 3)
        m = with_whale.mask > 0
        contrasts.append(np.abs(with_whale.image.astype(int) - water.image.astype(int))[m].mean())
    assert all(a >= b for a, b in zip(contrasts, contrasts[1:]))
    assert contrasts[0] > contrasts[-1]


def test_non_interest_object_occludes_mask():
    whale = {"pose": "lodging"}
    cover = {"source": "box", "params": {"size": [6, 6, 1]}, "pose": {"translation": [0, 0, 3]}}
    visible = render(small_scene(objects_of_interest=[whale]), 0).mask
    hidden = render(small_scene(objects_of_interest=[whale], objects_of_non_interest=[cover]), 0).mask
    assert np.count_nonzero(hidden) < np.count_nonzero(visible)


def test_save_output_round_trip(tmp_path):
    out = render(small_scene(), 0)
    ip, mp = save_output(out, tmp_path / "r")
    assert np.array_equal(load_rgb(ip), out.image)
    assert np.array_equal(load_mask(mp), out.mask)
    meta = json.loads(json.dumps(out.metadata()))
    assert meta["seed"] == 0
    assert SceneSpec.from_dict(meta["scene"]) == out.scene


def test_scene_file_round_trip(tmp_path):
    scene = small_scene(noise={"gaussian_sigma": 0.01})
    path = tmp_path / "scene.json"
    path.write_text(scene.to_json())
    assert load_scene(path) == scene


@pytest.mark.parametrize("bad", [
    {"camera": {"zoom": 2}},
    {"seafloor_depth": 0},
    {"objects_of_interest": [{"pose": "cartwheel"}]},
    {"objects_of_interest": [{"source": "teapot"}]},
    {"objects_of_interest": [{"pose": "lodging"}] * 17},
])
def test_scene_validation(bad):
    with pytest.raises(ConfigError):
        SceneSpec.from_dict(bad)
