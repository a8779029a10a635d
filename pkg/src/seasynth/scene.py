"""Serializable scene description consumed by the renderer.

A :class:`SceneSpec` round-trips through plain JSON-compatible dicts
(``to_dict`` / ``from_dict``); the dict form is what dataset manifests echo
and what range configurations are written against.

Object mesh sources:

``"parametric"``
    built-in whale; params ``body_length``, ``fluke_span`` (meters)
``"box"``
    axis-aligned box; param ``size`` = [x, y, z] meters
``"rock"``
    lumpy blob; params ``radius``, ``roughness``, ``seed``
``"file:<path>"``
    Wavefront-style mesh file
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import ConfigError
from .geometry import Mesh, Pose, box, load_mesh, parametric_whale, rock
from .ocean import WaterOptics, WaveParams

MAX_OBJECTS = 16
MAX_IMAGE_SIDE = 30000

# Canned whale poses. Heading (yaw) is left at zero; override it per object.
POSE_PRESETS: dict[str, dict] = {
    # resting flat at the surface, back just breaking the water
    "lodging": {"pitch": 0.0, "roll": 0.0, "translation": [0.0, 0.0, -0.5]},
    # head raised vertically out of the water
    "spyhopping": {"pitch": -1.25, "roll": 0.0, "translation": [3.0, 0.0, -2.0]},
    # fully below the surface
    "submerging": {"pitch": 0.05, "roll": 0.0, "translation": [0.0, 0.0, -2.5]},
    # body clear of the water, nose up
    "breaching": {"pitch": -0.2, "roll": 0.1, "translation": [0.0, 0.0, 1.2]},
}


def _num(d: dict, key: str, default: float) -> float:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise ConfigError(f"{key} must be finite")
    return float(v)


def _int(d: dict, key: str, default: int) -> int:
    v = d.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or int(v) != v:
        raise ConfigError(f"{key} must be an integer, got {v!r}")
    return int(v)


def _rgb(v, what: str) -> tuple[float, float, float]:
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(f"{what} must be a list of three numbers")
    out = tuple(float(c) for c in v)
    if not all(0.0 <= c <= 1.0 for c in out):
        raise ConfigError(f"{what} components must lie in [0, 1]")
    return out


def _check_keys(d: dict, allowed: set[str], what: str):
    if not isinstance(d, dict):
        raise ConfigError(f"{what} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown {what} field(s): {', '.join(sorted(extra))}")


@dataclass(frozen=True)
class CameraSpec:
    """Nadir-looking pinhole camera centered above ``(x, y)``.

    Pixels are square with pitch ``sensor_width / width``. The principal
    point defaults to the image center; pixel (col, row) has its center at
    (col + 0.5, row + 0.5) and rows grow towards -y.
    """

    altitude: float = 100.0
    focal_length: float = 0.035
    sensor_width: float = 0.0147
    width: int = 140
    height: int = 140
    principal_x: float | None = None
    principal_y: float | None = None
    x: float = 0.0
    y: float = 0.0
    supersample: int = 1

    def __post_init__(self):
        if not self.focal_length > 0:
            raise ConfigError("camera.focal_length must be > 0")
        if not self.sensor_width > 0:
            raise ConfigError("camera.sensor_width must be > 0")
        if not self.altitude > 0:
            raise ConfigError(f"camera.altitude must be above the sea surface, got {self.altitude}")
        for name in ("width", "height"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ConfigError(f"camera.{name} must be a positive integer, got {v}")
            if v > MAX_IMAGE_SIDE:
                raise ConfigError(f"camera.{name} {v} exceeds the {MAX_IMAGE_SIDE} pixel maximum")
        if int(self.supersample) != self.supersample or not 1 <= self.supersample <= 8:
            raise ConfigError("camera.supersample must be an integer in [1, 8]")
        object.__setattr__(self, "width", int(self.width))
        object.__setattr__(self, "height", int(self.height))
        object.__setattr__(self, "supersample", int(self.supersample))

    @property
    def pixel_pitch(self) -> float:
        return self.sensor_width / self.width

    @property
    def principal_point(self) -> tuple[float, float]:
        cx = 0.5 * self.width if self.principal_x is None else float(self.principal_x)
        cy = 0.5 * self.height if self.principal_y is None else float(self.principal_y)
        return cx, cy

    def ground_sample_distance(self, elevation: float = 0.0) -> float:
        """Meters per pixel on the horizontal plane at ``elevation``."""
        return self.pixel_pitch * (self.altitude - elevation) / self.focal_length

    def project(self, x, y, z):
        """Pixel coordinates (col, row) of world points; inverse of the ray model."""
        cx, cy = self.principal_point
        k = self.focal_length / (self.pixel_pitch * (self.altitude - z))
        return cx + (x - self.x) * k, cy - (y - self.y) * k

    @classmethod
    def from_dict(cls, d: dict) -> "CameraSpec":
        _check_keys(d, set(cls.__dataclass_fields__), "camera")
        px, py = d.get("principal_x"), d.get("principal_y")
        return cls(
            altitude=_num(d, "altitude", cls.altitude),
            focal_length=_num(d, "focal_length", cls.focal_length),
            sensor_width=_num(d, "sensor_width", cls.sensor_width),
            width=_int(d, "width", cls.width),
            height=_int(d, "height", cls.height),
            principal_x=None if px is None else _num(d, "principal_x", 0.0),
            principal_y=None if py is None else _num(d, "principal_y", 0.0),
            x=_num(d, "x", 0.0),
            y=_num(d, "y", 0.0),
            supersample=_int(d, "supersample", 1),
        )

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class LightSpec:
    sun_elevation: float = 0.9
    sun_azimuth: float = 0.6
    sun_intensity: float = 1.0
    sky_ambient: float = 0.35

    def __post_init__(self):
        if not 0 < self.sun_elevation <= math.pi / 2:
            raise ConfigError("light.sun_elevation must be in (0, pi/2]")
        if not self.sun_intensity >= 0 or not self.sky_ambient >= 0:
            raise ConfigError("light intensity and ambient must be >= 0")

    @property
    def sun_direction(self) -> tuple[float, float, float]:
        ce = math.cos(self.sun_elevation)
        return (ce * math.cos(self.sun_azimuth), ce * math.sin(self.sun_azimuth),
                math.sin(self.sun_elevation))

    @classmethod
    def from_dict(cls, d: dict) -> "LightSpec":
        _check_keys(d, set(cls.__dataclass_fields__), "light")
        return cls(**{k: _num(d, k, getattr(cls, k)) for k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass(frozen=True)
class NoiseSpec:
    """Sensor noise: per-channel Gaussian std-dev (fraction of full scale) and
    the probability of a pixel being replaced by uniform white noise."""

    gaussian_sigma: float = 0.0
    white_amount: float = 0.0

    def __post_init__(self):
        if not 0 <= self.gaussian_sigma <= 1:
            raise ConfigError("noise.gaussian_sigma must be in [0, 1]")
        if not 0 <= self.white_amount <= 1:
            raise ConfigError("noise.white_amount must be in [0, 1]")

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        _check_keys(d, set(cls.__dataclass_fields__), "noise")
        return cls(**{k: _num(d, k, getattr(cls, k)) for k in cls.__dataclass_fields__})

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def pose_from_dict(d) -> Pose:
    """Pose from a dict; ``{"preset": name, ...}`` or a bare preset name starts
    from a canned pose and lets explicit fields override it."""
    if isinstance(d, str):
        d = {"preset": d}
    _check_keys(d, {"preset", "yaw", "pitch", "roll", "translation", "scale"}, "pose")
    base: dict = {}
    if "preset" in d:
        if d["preset"] not in POSE_PRESETS:
            raise ConfigError(f"unknown pose preset {d['preset']!r}; choose from {sorted(POSE_PRESETS)}")
        base = dict(POSE_PRESETS[d["preset"]])
    base.update({k: v for k, v in d.items() if k != "preset"})
    t = base.get("translation", [0.0, 0.0, 0.0])
    if not isinstance(t, (list, tuple)) or len(t) != 3:
        raise ConfigError("pose.translation must be a list of three numbers")
    try:
        return Pose(_num(base, "yaw", 0.0), _num(base, "pitch", 0.0), _num(base, "roll", 0.0),
                    tuple(float(c) for c in t), _num(base, "scale", 1.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


@dataclass(frozen=True)
class ObjectSpec:
    source: str = "parametric"
    params: dict = field(default_factory=dict)
    pose: Pose = field(default_factory=Pose)
    albedo: tuple[float, float, float] = (0.22, 0.22, 0.24)

    def __post_init__(self):
        if not (self.source in ("parametric", "box", "rock") or self.source.startswith("file:")):
            raise ConfigError(f"unknown object source {self.source!r}")

    def __hash__(self):
        return hash((self.source, json.dumps(self.params, sort_keys=True), self.pose, self.albedo))

    def mesh(self) -> Mesh:
        return _base_mesh(self.source, json.dumps(self.params, sort_keys=True))

    @classmethod
    def from_dict(cls, d: dict) -> "ObjectSpec":
        _check_keys(d, {"source", "params", "pose", "albedo"}, "object")
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ConfigError("object.params must be an object")
        return cls(
            source=str(d.get("source", "parametric")),
            params=dict(params),
            pose=pose_from_dict(d.get("pose", {})),
            albedo=_rgb(d.get("albedo", cls.albedo), "object.albedo"),
        )

    def to_dict(self) -> dict:
        return {"source": self.source, "params": dict(self.params), "pose": self.pose.to_dict(),
                "albedo": list(self.albedo)}


@lru_cache(maxsize=64)
def _base_mesh(source: str, params_json: str) -> Mesh:
    params = json.loads(params_json)
    try:
        if source == "parametric":
            return parametric_whale(**params)
        if source == "box":
            return box(params.get("size", (1.0, 1.0, 1.0)))
        if source == "rock":
            return rock(**params)
    except TypeError as exc:
        raise ConfigError(f"bad params for {source!r} object: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"bad params for {source!r} object: {exc}") from None
    return load_mesh(source[len("file:"):])


@dataclass(frozen=True)
class SceneSpec:
    """Everything that determines one render, apart from the seed."""

    camera: CameraSpec = field(default_factory=CameraSpec)
    light: LightSpec = field(default_factory=LightSpec)
    waves: WaveParams = field(default_factory=WaveParams)
    optics: WaterOptics = field(default_factory=WaterOptics)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    objects_of_interest: tuple[ObjectSpec, ...] = ()
    objects_of_non_interest: tuple[ObjectSpec, ...] = ()
    seafloor_depth: float = 40.0
    seafloor_albedo: tuple[float, float, float] = (0.42, 0.38, 0.28)

    def __post_init__(self):
        object.__setattr__(self, "objects_of_interest", tuple(self.objects_of_interest))
        object.__setattr__(self, "objects_of_non_interest", tuple(self.objects_of_non_interest))
        if len(self.objects_of_interest) + len(self.objects_of_non_interest) > MAX_OBJECTS:
            raise ConfigError(f"at most {MAX_OBJECTS} objects per scene")
        if not self.seafloor_depth > 0:
            raise ConfigError("seafloor_depth must be > 0")

    @classmethod
    def from_dict(cls, d: dict) -> "SceneSpec":
        _check_keys(d, set(cls.__dataclass_fields__), "scene")

        def sub(key, typ):
            v = d.get(key, {})
            _check_keys(v, set(typ.__dataclass_fields__), key)
            return v

        def objects(key):
            v = d.get(key, [])
            if not isinstance(v, list):
                raise ConfigError(f"{key} must be a list")
            return tuple(ObjectSpec.from_dict(o) for o in v)

        waves = sub("waves", WaveParams)
        optics = sub("optics", WaterOptics)
        return cls(
            camera=CameraSpec.from_dict(d.get("camera", {})),
            light=LightSpec.from_dict(d.get("light", {})),
            waves=WaveParams(**{k: (_int(waves, k, 0) if k in ("detail", "phase_seed") else _num(waves, k, 0.0))
                                for k in waves}),
            optics=WaterOptics(**{k: (_int(optics, k, 0) if k == "color_index" else _num(optics, k, 0.0))
                                  for k in optics}),
            noise=NoiseSpec.from_dict(d.get("noise", {})),
            objects_of_interest=objects("objects_of_interest"),
            objects_of_non_interest=objects("objects_of_non_interest"),
            seafloor_depth=_num(d, "seafloor_depth", cls.seafloor_depth),
            seafloor_albedo=_rgb(d.get("seafloor_albedo", cls.seafloor_albedo), "seafloor_albedo"),
        )

    def to_dict(self) -> dict:
        return {
            "camera": self.camera.to_dict(),
            "light": self.light.to_dict(),
            "waves": self.waves.to_dict(),
            "optics": self.optics.to_dict(),
            "noise": self.noise.to_dict(),
            "objects_of_interest": [o.to_dict() for o in self.objects_of_interest],
            "objects_of_non_interest": [o.to_dict() for o in self.objects_of_non_interest],
            "seafloor_depth": self.seafloor_depth,
            "seafloor_albedo": list(self.seafloor_albedo),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        return cls.from_dict(json.loads(text))


def load_scene(path) -> SceneSpec:
    with open(path, encoding="utf-8") as fh:
        return SceneSpec.from_dict(json.load(fh))
