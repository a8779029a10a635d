"""Deterministic single-bounce ray-cast renderer.

One primary ray per pixel (or an n x n jittered grid) leaves a nadir pinhole
camera. The wave surface is found by fixed-step ray marching refined by
bisection; meshes and the flat seafloor are intersected exactly. Shading:

* geometry hit above the water: ``albedo * (sun * max(n.l, 0) + ambient)``
* otherwise ``F * reflected + (1 - F) * transmitted`` where ``F`` is
  Schlick's Fresnel term, ``reflected = metallic * sun_glint + ambient * sky``
  and ``transmitted = T(z) * albedo * irradiance + (1 - T(z)) * water * E``
  with ``z`` the straight-line in-water path to the geometry hit.

Linear radiance is clamped to [0, 1], gamma-encoded with exponent 1/2.2 and
quantized to 8 bits. The mask is purely geometric: a pixel is 255 when its
center ray's nearest mesh/seafloor hit belongs to an object of interest.

All per-ray arithmetic is elementwise, so the result does not depend on how
pixels are split into tiles or on the number of worker threads.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import hashing
from .errors import ConfigError
from .geometry import apply_pose, intersect_rays
from .ocean import surface_height, surface_height_grad, transmittance, water_palette
from .scene import NoiseSpec, SceneSpec

WATER_R0 = 0.02
GAMMA = 2.2
EXPOSURE = 1.0
SKY_COLOR = np.array([0.60, 0.75, 0.95])
GLINT_SHININESS = 200.0
GLINT_GAIN = 10.0
BISECTION_STEPS = 4
TILE_ROWS = 32

_STREAM_JITTER = hashing.name_id("jitter")
_STREAM_GAUSS = hashing.name_id("sensor-gaussian")
_STREAM_WHITE = hashing.name_id("sensor-white")
_STREAM_WHITE_VALUE = hashing.name_id("sensor-white-value")


@dataclass(frozen=True, eq=False)
class RenderOutput:
    """Rendered image (H, W, 3) uint8 and mask (H, W) uint8 in {0, 255}."""

    image: np.ndarray
    mask: np.ndarray
    scene: SceneSpec
    seed: int

    def metadata(self) -> dict:
        return {"seed": self.seed, "scene": self.scene.to_dict()}


def fresnel(cos_theta):
    """Schlick reflectance for water, ``R0 + (1 - R0) * (1 - cos)**5``."""
    c = np.asarray(cos_theta, dtype=np.float64)
    if np.any(np.isnan(c)) or np.any(c < 0.0) or np.any(c > 1.0):
        raise ValueError("cos_theta must lie in [0, 1]")
    m = 1.0 - c
    out = WATER_R0 + (1.0 - WATER_R0) * (m * m * m * m * m)
    return float(out) if out.ndim == 0 else out


def tone_map(radiance: np.ndarray) -> np.ndarray:
    """Linear radiance -> 8-bit: exposure, clamp, 1/2.2 encoding, round."""
    v = np.clip(radiance * EXPOSURE, 0.0, 1.0) ** (1.0 / GAMMA)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def apply_sensor_noise(image: np.ndarray, noise: NoiseSpec, seed: int) -> np.ndarray:
    """Gaussian then white (salt) noise, keyed by (seed, pixel, channel)."""
    img = np.asarray(image)
    if noise.gaussian_sigma == 0.0 and noise.white_amount == 0.0:
        return img.copy()
    h, w = img.shape[:2]
    channels = img.shape[2] if img.ndim == 3 else 1
    pix = np.arange(h * w, dtype=np.int64).reshape(h, w)
    out = img.astype(np.float64).reshape(h, w, channels)
    ch = np.arange(channels, dtype=np.int64)
    if noise.gaussian_sigma > 0.0:
        z = hashing.normal(int(seed), _STREAM_GAUSS, pix[..., None], ch)
        out = np.clip(np.rint(out + z * (noise.gaussian_sigma * 255.0)), 0.0, 255.0)
    if noise.white_amount > 0.0:
        hit = hashing.uniform(int(seed), _STREAM_WHITE, pix) < noise.white_amount
        values = np.floor(hashing.uniform(int(seed), _STREAM_WHITE_VALUE, pix[..., None], ch) * 256.0)
        out = np.where(hit[..., None], np.minimum(values, 255.0), out)
    return out.astype(np.uint8).reshape(img.shape)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Prepared:
    scene: SceneSpec
    seed: int
    meshes: tuple
    albedos: np.ndarray        # (n_objects + 1, 3); last row is the seafloor
    interest: np.ndarray       # (n_objects + 1,) bool
    water_rgb: np.ndarray
    sun: np.ndarray
    band: float                # max |wave elevation|


def _prepare(scene: SceneSpec, seed: int) -> _Prepared:
    meshes, albedos, interest = [], [], []
    for objs, flag in ((scene.objects_of_interest, True), (scene.objects_of_non_interest, False)):
        for obj in objs:
            meshes.append(apply_pose(obj.mesh(), obj.pose))
            albedos.append(obj.albedo)
            interest.append(flag)
    albedos.append(scene.seafloor_albedo)
    interest.append(False)
    band = scene.waves.max_elevation()
    top = max([band] + [float(m.bbox[1][2]) for m in meshes])
    if not scene.camera.altitude > top:
        raise ConfigError(
            f"camera altitude {scene.camera.altitude} m is not above the scene (highest point {top:.3f} m)")
    return _Prepared(scene, int(seed), tuple(meshes), np.array(albedos, dtype=np.float64),
                     np.array(interest), np.array(water_palette(scene.optics.color_index)),
                     np.array(scene.light.sun_direction), band)


def _check_memory(scene: SceneSpec):
    cam = scene.camera
    n = cam.width * cam.height
    # output buffers plus float radiance for the assembled image
    estimate = n * (3 + 1 + 3 * 8) + cam.width * TILE_ROWS * cam.supersample ** 2 * 4096
    try:
        avail = os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return
    if estimate > avail:
        raise ConfigError(f"{cam.width}x{cam.height} render needs about {estimate / 2**30:.1f} GiB, "
                          f"only {avail / 2**30:.1f} GiB available")


def _rays(prep: _Prepared, row0: int, row1: int, jitter: bool):
    """Ray directions for rows [row0, row1); one ray per (sub)sample."""
    cam = prep.scene.camera
    n = cam.supersample if jitter else 1
    rows = np.arange(row0, row1, dtype=np.int64)
    cols = np.arange(cam.width, dtype=np.int64)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    pix = (rr * cam.width + cc).ravel()
    if n == 1:
        fu = cc.ravel() + 0.5
        fv = rr.ravel() + 0.5
    else:
        s = np.arange(n * n, dtype=np.int64)
        p = pix[:, None]
        ju = hashing.uniform(prep.seed, _STREAM_JITTER, p, s, 0)
        jv = hashing.uniform(prep.seed, _STREAM_JITTER, p, s, 1)
        fu = (cc.ravel()[:, None] + ((s % n) + ju) / n).ravel()
        fv = (rr.ravel()[:, None] + ((s // n) + jv) / n).ravel()
    cx, cy = cam.principal_point
    pitch = cam.pixel_pitch
    dx = (fu - cx) * pitch
    dy = -(fv - cy) * pitch
    dz = np.full_like(dx, -cam.focal_length)
    inv = 1.0 / np.sqrt(dx * dx + dy * dy + dz * dz)
    d = np.stack([dx * inv, dy * inv, dz * inv], axis=1)
    o = np.broadcast_to(np.array([cam.x, cam.y, cam.altitude]), d.shape)
    return o, d


def _nearest_geometry(prep: _Prepared, o, d):
    """Nearest mesh or seafloor hit: (t, object index, normal)."""
    depth = prep.scene.seafloor_depth
    t_best = (prep.scene.camera.altitude + depth) / (-d[:, 2])
    obj = np.full(len(d), len(prep.meshes), dtype=np.int64)
    nrm = np.zeros_like(d)
    nrm[:, 2] = 1.0
    for i, mesh in enumerate(prep.meshes):
        t, tri, n = intersect_rays(o, d, mesh)
        closer = t < t_best
        t_best = np.where(closer, t, t_best)
        obj = np.where(closer, i, obj)
        nrm = np.where(closer[:, None], n, nrm)
    return t_best, obj, nrm


def _march_water(prep: _Prepared, o, d) -> np.ndarray:
    """Ray parameter of the first crossing of the wave surface."""
    waves = prep.scene.waves
    alt = prep.scene.camera.altitude
    down = -d[:, 2]
    if waves.strength == 0.0:
        return alt / down
    band = prep.band
    t_lo = (alt - band) / down
    t_end = (alt + band) / down
    step = waves.scale / 16.0

    def below(t, idx):
        x = o[idx, 0] + t * d[idx, 0]
        y = o[idx, 1] + t * d[idx, 1]
        z = o[idx, 2] + t * d[idx, 2]
        return z <= surface_height(x, y, waves)

    n = len(d)
    lo = t_lo.copy()
    hi = t_end.copy()
    active = np.arange(n)
    t_prev = t_lo.copy()
    k = 1
    while len(active):
        t = np.minimum(t_lo[active] + k * step, t_end[active])
        hit = below(t, active) | (t >= t_end[active])
        done = active[hit]
        lo[done] = t_prev[done]
        hi[done] = t[hit]
        t_prev[active] = t
        active = active[~hit]
        k += 1
    idx = np.arange(n)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        b = below(mid, idx)
        hi = np.where(b, mid, hi)
        lo = np.where(b, lo, mid)
    # secant step inside the final bracket
    f_lo = (o[:, 2] + lo * d[:, 2]) - surface_height(o[:, 0] + lo * d[:, 0], o[:, 1] + lo * d[:, 1], waves)
    f_hi = (o[:, 2] + hi * d[:, 2]) - surface_height(o[:, 0] + hi * d[:, 0], o[:, 1] + hi * d[:, 1], waves)
    denom = f_lo - f_hi
    frac = np.where(denom > 0.0, f_lo / np.where(denom > 0.0, denom, 1.0), 1.0)
    return lo + np.clip(frac, 0.0, 1.0) * (hi - lo)


def _shade(prep: _Prepared, o, d, t_geo, obj, n_geo) -> np.ndarray:
    scene = prep.scene
    light = scene.light
    L = prep.sun
    sun_i = light.sun_intensity
    amb = light.sky_ambient
    albedo = prep.albedos[obj]
    ndotl = n_geo[:, 0] * L[0] + n_geo[:, 1] * L[1] + n_geo[:, 2] * L[2]
    irradiance = sun_i * np.maximum(ndotl, 0.0) + amb
    direct = albedo * irradiance[:, None]

    t_w = _march_water(prep, o, d)
    above = t_geo < t_w
    px = o[:, 0] + t_w * d[:, 0]
    py = o[:, 1] + t_w * d[:, 1]
    _, gx, gy = surface_height_grad(px, py, scene.waves)
    inv = 1.0 / np.sqrt(gx * gx + gy * gy + 1.0)
    nx, ny, nz = -gx * inv, -gy * inv, inv
    d_dot_n = d[:, 0] * nx + d[:, 1] * ny + d[:, 2] * nz
    F = fresnel(np.clip(-d_dot_n, 0.0, 1.0))
    rx = d[:, 0] - 2.0 * d_dot_n * nx
    ry = d[:, 1] - 2.0 * d_dot_n * ny
    rz = d[:, 2] - 2.0 * d_dot_n * nz
    r_dot_l = np.maximum(rx * L[0] + ry * L[1] + rz * L[2], 0.0)
    glint = scene.waves.metallic * GLINT_GAIN * sun_i * r_dot_l ** GLINT_SHININESS
    reflected = glint[:, None] + amb * SKY_COLOR[None, :]

    path = np.maximum(t_geo - t_w, 0.0)
    T = transmittance(path, scene.optics)
    e_water = sun_i * L[2] + amb
    transmitted = T[:, None] * direct + (1.0 - T)[:, None] * (prep.water_rgb * e_water)[None, :]
    water = F[:, None] * reflected + (1.0 - F)[:, None] * transmitted
    return np.where(above[:, None], direct, water)


def _render_rows(prep: _Prepared, row0: int, row1: int):
    cam = prep.scene.camera
    o, d = _rays(prep, row0, row1, jitter=False)
    t_geo, obj, n_geo = _nearest_geometry(prep, o, d)
    mask = prep.interest[obj].reshape(row1 - row0, cam.width)
    if cam.supersample == 1:
        radiance = _shade(prep, o, d, t_geo, obj, n_geo)
    else:
        o, d = _rays(prep, row0, row1, jitter=True)
        t_geo, obj, n_geo = _nearest_geometry(prep, o, d)
        radiance = _shade(prep, o, d, t_geo, obj, n_geo)
        radiance = radiance.reshape(-1, cam.supersample ** 2, 3).mean(axis=1)
    return radiance.reshape(row1 - row0, cam.width, 3), mask


def render(scene: SceneSpec, seed: int = 0, workers: int | None = 1, tile_rows: int = TILE_ROWS) -> RenderOutput:
    """Render ``scene``; byte-identical for identical (scene, seed).

    ``workers`` threads process horizontal tiles of ``tile_rows`` rows; neither
    affects the output.
    """
    if tile_rows < 1:
        raise ValueError("tile_rows must be >= 1")
    _check_memory(scene)
    prep = _prepare(scene, seed)
    cam = scene.camera
    bounds = [(r, min(r + tile_rows, cam.height)) for r in range(0, cam.height, tile_rows)]
    if workers is None:
        workers = os.cpu_count() or 1
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda b: _render_rows(prep, *b), bounds))
    else:
        parts = [_render_rows(prep, *b) for b in bounds]
    image = np.empty((cam.height, cam.width, 3), dtype=np.uint8)
    mask = np.empty((cam.height, cam.width), dtype=np.uint8)
    for (r0, r1), (rad, m) in zip(bounds, parts):
        image[r0:r1] = tone_map(rad)
        mask[r0:r1] = np.where(m, 255, 0)
    image = apply_sensor_noise(image, scene.noise, seed)
    return RenderOutput(image, mask, scene, int(seed))


def save_png(array: np.ndarray, path) -> None:
    """Write an 8-bit RGB or grayscale PNG with fixed encoder settings."""
    from PIL import Image

    arr = np.ascontiguousarray(array, dtype=np.uint8)
    Image.fromarray(arr).save(path, format="PNG", compress_level=6, optimize=False)


def load_rgb(path) -> np.ndarray:
    from PIL import Image

    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def load_mask(path) -> np.ndarray:
    """Grayscale mask as {0, 255}; values above 127 count as foreground."""
    from PIL import Image

    with Image.open(path) as im:
        g = np.asarray(im.convert("L"))
    return np.where(g > 127, 255, 0).astype(np.uint8)


def save_output(out: RenderOutput, directory, stem_image="image", stem_mask="mask") -> tuple[str, str]:
    os.makedirs(directory, exist_ok=True)
    ip = os.path.join(directory, f"{stem_image}.png")
    mp = os.path.join(directory, f"{stem_mask}.png")
    save_png(out.image, ip)
    save_png(out.mask, mp)
    return ip, mp

