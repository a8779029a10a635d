"""Procedural wave heightfield and water optics.

The wave surface is a fractal sum of 2D gradient noise. Lattice gradients are
picked by a splitmix64 hash of (cell, seed) and the noise itself uses only
additions, multiplications and ``floor``, so heights are bit-identical on any
IEEE-754 platform.
"""

from __future__ import annotations

import colorsys
from dataclasses import asdict, dataclass
from functools import lru_cache

import numpy as np

from . import hashing
from .errors import ConfigError

PALETTE_SIZE = 1030
# Linear-RGB endpoints of the water palette: deep ocean blue -> coastal green.
PALETTE_BLUE = (0.010, 0.040, 0.160)
PALETTE_GREEN = (0.035, 0.150, 0.080)

K_MIN_DEFAULT = 0.05
K_MAX_DEFAULT = 3.0

_R = 0.7071067811865476
_GRAD_X = np.array([1.0, -1.0, 0.0, 0.0, _R, -_R, _R, -_R])
_GRAD_Y = np.array([0.0, 0.0, 1.0, -1.0, _R, _R, -_R, -_R])
# Peak magnitude of 2D gradient noise with unit gradients is sqrt(1/2).
_NOISE_GAIN = 1.4142135623730951
_S61 = np.uint64(61)


@dataclass(frozen=True)
class WaveParams:
    """Wave surface parameters.

    ``scale`` is the feature size in meters (larger means calmer water),
    ``detail`` the octave count, ``dimension`` the per-octave amplitude
    falloff, ``lacunarity`` the per-octave frequency ratio and ``strength``
    the elevation scale in meters. ``metallic`` only affects shading.

    ``tilt`` and ``sharpness`` are experimental crest-shape controls:
    ``tilt`` stretches the pattern along x by ``1 + tilt`` and ``sharpness``
    raises normalized positive elevations to that power. Their defaults
    leave the fractal sum untouched.
    """

    scale: float = 8.0
    detail: int = 4
    dimension: float = 0.5
    lacunarity: float = 2.0
    strength: float = 0.3
    metallic: float = 0.5
    tilt: float = 0.0
    sharpness: float = 1.0
    phase_seed: int = 0

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError(f"waves.scale must be > 0, got {self.scale}")
        if int(self.detail) != self.detail or not 1 <= self.detail <= 12:
            raise ConfigError(f"waves.detail must be an integer in [1, 12], got {self.detail}")
        object.__setattr__(self, "detail", int(self.detail))
        if not 0 < self.dimension <= 1:
            raise ConfigError(f"waves.dimension must be in (0, 1], got {self.dimension}")
        if not self.lacunarity > 1:
            raise ConfigError(f"waves.lacunarity must be > 1, got {self.lacunarity}")
        if not self.strength >= 0:
            raise ConfigError(f"waves.strength must be >= 0, got {self.strength}")
        if not 0 <= self.metallic <= 1:
            raise ConfigError(f"waves.metallic must be in [0, 1], got {self.metallic}")
        if not self.tilt >= 0:
            raise ConfigError(f"waves.tilt must be >= 0, got {self.tilt}")
        if not self.sharpness > 0:
            raise ConfigError(f"waves.sharpness must be > 0, got {self.sharpness}")
        object.__setattr__(self, "phase_seed", int(self.phase_seed) & hashing.MASK64)

    def amplitude_sum(self) -> float:
        """Sum of octave weights; ``strength * amplitude_sum()`` bounds |elevation|."""
        total = 0.0
        amp = 1.0
        for _ in range(self.detail):
            total = total + amp
            amp = amp * self.dimension
        return total

    def max_elevation(self) -> float:
        return self.strength * self.amplitude_sum()

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class WaterOptics:
    color_index: int = 300
    turbidity: float = 0.2
    k_min: float = K_MIN_DEFAULT
    k_max: float = K_MAX_DEFAULT

    def __post_init__(self):
        if int(self.color_index) != self.color_index or not 0 <= self.color_index < PALETTE_SIZE:
            raise ConfigError(f"optics.color_index must be an integer in [0, {PALETTE_SIZE - 1}]")
        object.__setattr__(self, "color_index", int(self.color_index))
        if not 0 <= self.turbidity <= 1:
            raise ConfigError(f"optics.turbidity must be in [0, 1], got {self.turbidity}")
        if not 0 < self.k_min < self.k_max:
            raise ConfigError("optics extinction bounds need 0 < k_min < k_max")

    @property
    def extinction(self) -> float:
        return self.k_min + self.turbidity * (self.k_max - self.k_min)

    def to_dict(self) -> dict:
        return asdict(self)


def _fade(t):
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


def _dfade(t):
    w = t * (t - 1.0)
    return 30.0 * w * w


def _noise(x, y, seed, with_grad=False):
    fx0 = np.floor(x)
    fy0 = np.floor(y)
    dx = x - fx0
    dy = y - fy0
    seed = np.uint64(int(seed) & hashing.MASK64)
    ix = hashing.as_u64(fx0.astype(np.int64))
    iy = hashing.as_u64(fy0.astype(np.int64))
    one = np.uint64(1)
    with np.errstate(over="ignore"):
        hx0 = hashing.splitmix64(ix ^ seed)
        hx1 = hashing.splitmix64((ix + one) ^ seed)
        iy1 = iy + one
    g00 = (hashing.splitmix64(hx0 ^ iy) >> _S61).astype(np.intp)
    g10 = (hashing.splitmix64(hx1 ^ iy) >> _S61).astype(np.intp)
    g01 = (hashing.splitmix64(hx0 ^ iy1) >> _S61).astype(np.intp)
    g11 = (hashing.splitmix64(hx1 ^ iy1) >> _S61).astype(np.intp)
    dx1 = dx - 1.0
    dy1 = dy - 1.0
    n00 = _GRAD_X[g00] * dx + _GRAD_Y[g00] * dy
    n10 = _GRAD_X[g10] * dx1 + _GRAD_Y[g10] * dy
    n01 = _GRAD_X[g01] * dx + _GRAD_Y[g01] * dy1
    n11 = _GRAD_X[g11] * dx1 + _GRAD_Y[g11] * dy1
    u = _fade(dx)
    v = _fade(dy)
    nx0 = n00 + u * (n10 - n00)
    nx1 = n01 + u * (n11 - n01)
    raw = _NOISE_GAIN * (nx0 + v * (nx1 - nx0))
    value = np.clip(raw, -1.0, 1.0)
    if not with_grad:
        return value
    du = _dfade(dx)
    dv = _dfade(dy)
    ax0 = _GRAD_X[g00] + du * (n10 - n00) + u * (_GRAD_X[g10] - _GRAD_X[g00])
    ax1 = _GRAD_X[g01] + du * (n11 - n01) + u * (_GRAD_X[g11] - _GRAD_X[g01])
    ay0 = _GRAD_Y[g00] + u * (_GRAD_Y[g10] - _GRAD_Y[g00])
    ay1 = _GRAD_Y[g01] + u * (_GRAD_Y[g11] - _GRAD_Y[g01])
    gx = ax0 + v * (ax1 - ax0)
    gy = ay0 + dv * (nx1 - nx0) + v * (ay1 - ay0)
    flat = raw != value
    gx = np.where(flat, 0.0, _NOISE_GAIN * gx)
    gy = np.where(flat, 0.0, _NOISE_GAIN * gy)
    return value, gx, gy


def gradient_noise(x, y, seed) -> np.ndarray:
    """Seeded 2D gradient noise in [-1, 1]; zero at every lattice point."""
    return _noise(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), seed)


def gradient_noise_grad(x, y, seed):
    """Noise value together with its analytic partial derivatives."""
    return _noise(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64), seed, True)


@lru_cache(maxsize=256)
def _octave_seed(phase_seed: int, octave: int) -> int:
    return int(hashing.key(phase_seed, octave, hashing.name_id("wave-octave")))


def surface_height(x, y, params: WaveParams, phase_seed: int | None = None) -> np.ndarray:
    """Water elevation (meters) at world coordinates ``(x, y)``.

    ``strength * sum_o dimension**o * noise(p * lacunarity**o / scale)``; each
    octave draws its lattice from its own hash of ``phase_seed`` (which
    defaults to ``params.phase_seed``).
    """
    if phase_seed is None:
        phase_seed = params.phase_seed
    phase_seed = int(phase_seed) & hashing.MASK64
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if params.strength == 0.0:
        return np.zeros(np.broadcast_shapes(x.shape, y.shape))
    if params.tilt != 0.0:
        x = x / (1.0 + params.tilt)
    total = np.zeros(np.broadcast_shapes(x.shape, y.shape))
    amp = 1.0
    freq = 1.0
    for octave in range(params.detail):
        n = gradient_noise((x * freq) / params.scale, (y * freq) / params.scale,
                           _octave_seed(phase_seed, octave))
        total = total + amp * n
        amp = amp * params.dimension
        freq = freq * params.lacunarity
    if params.sharpness != 1.0:
        bound = params.amplitude_sum()
        pos = total > 0.0
        total = np.where(pos, bound * (np.where(pos, total, 0.0) / bound) ** params.sharpness, total)
    return params.strength * total


def surface_height_grad(x, y, params: WaveParams, phase_seed: int | None = None):
    """Elevation and its analytic gradient ``(h, dh/dx, dh/dy)``."""
    if phase_seed is None:
        phase_seed = params.phase_seed
    phase_seed = int(phase_seed) & hashing.MASK64
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    shape = np.broadcast_shapes(x.shape, y.shape)
    if params.strength == 0.0:
        return np.zeros(shape), np.zeros(shape), np.zeros(shape)
    stretch = 1.0
    if params.tilt != 0.0:
        stretch = 1.0 + params.tilt
        x = x / stretch
    total = np.zeros(shape)
    gx = np.zeros(shape)
    gy = np.zeros(shape)
    amp = 1.0
    freq = 1.0
    for octave in range(params.detail):
        n, nx, ny = gradient_noise_grad((x * freq) / params.scale, (y * freq) / params.scale,
                                        _octave_seed(phase_seed, octave))
        total = total + amp * n
        k = amp * freq / params.scale
        gx = gx + k * nx
        gy = gy + k * ny
        amp = amp * params.dimension
        freq = freq * params.lacunarity
    gx = gx / stretch
    if params.sharpness != 1.0:
        bound = params.amplitude_sum()
        pos = total > 0.0
        ratio = np.where(pos, total, 0.0) / bound
        slope = np.where(pos, params.sharpness * ratio ** (params.sharpness - 1.0), 1.0)
        total = np.where(pos, bound * ratio ** params.sharpness, total)
        gx = gx * slope
        gy = gy * slope
    return params.strength * total, params.strength * gx, params.strength * gy


def surface_normal(x, y, params: WaveParams, phase_seed: int | None = None) -> np.ndarray:
    """Unit upward normal of the heightfield, shape ``broadcast(x, y) + (3,)``."""
    _, gx, gy = surface_height_grad(x, y, params, phase_seed)
    inv = 1.0 / np.sqrt(gx * gx + gy * gy + 1.0)
    return np.stack([-gx * inv, -gy * inv, inv], axis=-1)


@lru_cache(maxsize=1)
def _palette_table() -> np.ndarray:
    h0, s0, v0 = colorsys.rgb_to_hsv(*PALETTE_BLUE)
    h1, s1, v1 = colorsys.rgb_to_hsv(*PALETTE_GREEN)
    rows = []
    for i in range(PALETTE_SIZE):
        f = i / (PALETTE_SIZE - 1)
        rows.append(colorsys.hsv_to_rgb(h0 + f * (h1 - h0), s0 + f * (s1 - s0), v0 + f * (v1 - v0)))
    table = np.array(rows)
    table[0] = PALETTE_BLUE
    table[-1] = PALETTE_GREEN
    table.flags.writeable = False
    return table


def water_palette(index: int) -> tuple[float, float, float]:
    """Linear-RGB water color; 0 is deep blue, 1029 coastal green.

    Hue, saturation and value are interpolated linearly between the two
    endpoint colors, passing through teal.
    """
    if isinstance(index, bool) or int(index) != index or not 0 <= index < PALETTE_SIZE:
        raise ValueError(f"palette index must be an integer in [0, {PALETTE_SIZE - 1}], got {index!r}")
    r, g, b = _palette_table()[int(index)]
    return float(r), float(g), float(b)


def palette() -> np.ndarray:
    """The full (1030, 3) palette."""
    return _palette_table().copy()


def transmittance(depth, optics: WaterOptics):
    """Beer-Lambert transmittance ``exp(-k * depth)`` through turbid water."""
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise ValueError("depth must be non-negative")
    out = np.exp(-optics.extinction * d)
    return float(out) if out.ndim == 0 else out


def elevation_grid(params: WaveParams, extent: float, n: int = 256, phase_seed: int | None = None) -> np.ndarray:
    """Heights on an n x n grid covering [-extent/2, extent/2]^2."""
    c = (np.arange(n) + 0.5) * (extent / n) - 0.5 * extent
    xx, yy = np.meshgrid(c, c, indexing="xy")
    return surface_height(xx, yy, params, phase_seed)


__all__ = [
    "PALETTE_SIZE", "WaveParams", "WaterOptics", "gradient_noise", "surface_height",
    "surface_height_grad", "surface_normal", "water_palette", "palette", "transmittance", "elevation_grid",
]
