"""Randomized dataset generation, manifests, augmentation and contact sheets.

Range configuration files are JSON::

    {
      "schema_version": 1,
      "sample_count": 1000,
      "master_seed": 7,
      "output_dir": "out/train",
      "scene": { ...a SceneSpec dict in which any value may be ranged... }
    }

Inside ``scene`` a value may be

* a plain value, copied verbatim;
* ``[min, max]`` (two numbers) or ``{"range": [min, max]}``, drawn uniformly.
  Integer fields (``detail``, ``color_index``, ``phase_seed``, ``width``,
  ``height``, ``supersample``, ``seed``) draw integers from the closed range;
* ``{"choice": [a, b, ...], "weights": [...]}``, a weighted pick whose result
  is resolved again (so choices may themselves contain ranges).

Every draw is ``hash(master_seed, sample index, field path)``, so a sample
never depends on which other samples were generated, or in what order.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import hashing
from .errors import ConfigError, GenerationError
from .render import load_mask, load_rgb, render, save_png
from .scene import SceneSpec

SCHEMA_VERSION = 1
MANIFEST_NAME = "manifest.jsonl"
INTEGER_FIELDS = frozenset({"detail", "color_index", "phase_seed", "width", "height", "supersample", "seed"})

# Default augmentation ranges for segmentation training.
PROTOCOL_AUGMENT = {
    "rotation_range": 90.0,
    "width_shift_range": 0.3,
    "height_shift_range": 0.3,
    "shear_range": 0.5,
    "zoom_range": 0.3,
    "horizontal_flip": True,
    "vertical_flip": True,
}


def image_name(index: int) -> str:
    return f"img_{index:06d}.png"


def mask_name(index: int) -> str:
    return f"mask_{index:06d}.png"


def default_workers() -> int:
    env = os.environ.get("SEASYNTH_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"SEASYNTH_WORKERS must be an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("SEASYNTH_WORKERS must be >= 1")
        return n
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Range configuration
# ---------------------------------------------------------------------------

def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _as_range(node):
    if isinstance(node, dict) and set(node) == {"range"}:
        node = node["range"]
        if not (isinstance(node, list) and len(node) == 2 and all(_is_number(v) for v in node)):
            raise ConfigError("'range' must be [min, max]")
        return node
    if isinstance(node, list) and len(node) == 2 and all(_is_number(v) for v in node):
        return node
    return None


def _validate_template(node, path: str):
    rng = _as_range(node)
    if rng is not None:
        lo, hi = rng
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigError(f"{path}: range bounds must be finite")
        if lo > hi:
            raise ConfigError(f"{path}: range min {lo} exceeds max {hi}")
        return
    if isinstance(node, dict) and "choice" in node:
        if set(node) - {"choice", "weights"}:
            raise ConfigError(f"{path}: a choice takes only 'choice' and 'weights'")
        options = node["choice"]
        if not isinstance(options, list) or not options:
            raise ConfigError(f"{path}: 'choice' must be a non-empty list")
        weights = node.get("weights", [1.0] * len(options))
        if (not isinstance(weights, list) or len(weights) != len(options)
                or not all(_is_number(w) and w >= 0 and math.isfinite(w) for w in weights)
                or sum(weights) <= 0):
            raise ConfigError(f"{path}: weights must be non-negative, one per option, with a positive sum")
        for i, opt in enumerate(options):
            _validate_template(opt, f"{path}#{i}")
        return
    if isinstance(node, dict):
        for k, v in node.items():
            _validate_template(v, f"{path}.{k}" if path else k)
    elif isinstance(node, list):
        for i, v in enumerate(node):
            _validate_template(v, f"{path}[{i}]")


def _leaf_name(path: str) -> str:
    tail = path.rsplit(".", 1)[-1]
    return tail.split("[", 1)[0].split("#", 1)[0]


def _resolve(node, path: str, master_seed: int, index: int):
    rng = _as_range(node)
    if rng is not None:
        lo, hi = rng
        if lo == hi:
            return lo
        u = float(hashing.uniform(master_seed, index, hashing.name_id(path)))
        if _leaf_name(path) in INTEGER_FIELDS:
            lo_i, hi_i = math.ceil(lo), math.floor(hi)
            return int(lo_i + min(int(u * (hi_i - lo_i + 1)), hi_i - lo_i))
        return lo + (hi - lo) * u
    if isinstance(node, dict) and "choice" in node:
        options = node["choice"]
        weights = np.asarray(node.get("weights", [1.0] * len(options)), dtype=np.float64)
        u = float(hashing.uniform(master_seed, index, hashing.name_id(path + "#choice")))
        cdf = np.cumsum(weights) / weights.sum()
        pick = int(min(np.searchsorted(cdf, u, side="right"), len(options) - 1))
        while weights[pick] == 0:
            pick -= 1
        return _resolve(options[pick], f"{path}#{pick}", master_seed, index)
    if isinstance(node, dict):
        return {k: _resolve(v, f"{path}.{k}" if path else k, master_seed, index) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve(v, f"{path}[{i}]", master_seed, index) for i, v in enumerate(node)]
    return node


@dataclass(frozen=True)
class RangeConfig:
    """Parsed range configuration; see the module docstring for the format."""

    scene: dict
    sample_count: int = 0
    master_seed: int = 0
    output_dir: str = "dataset"

    def __post_init__(self):
        if isinstance(self.sample_count, bool) or not isinstance(self.sample_count, int) or self.sample_count < 0:
            raise ConfigError("sample_count must be an integer >= 0")
        if isinstance(self.master_seed, bool) or not isinstance(self.master_seed, int):
            raise ConfigError("master_seed must be an integer")
        if not -(1 << 63) <= self.master_seed < (1 << 64):
            raise ConfigError("master_seed must fit in 64 bits")
        if not isinstance(self.scene, dict):
            raise ConfigError("scene must be an object")
        _validate_template(self.scene, "")

    @classmethod
    def from_dict(cls, d: dict) -> "RangeConfig":
        if not isinstance(d, dict):
            raise ConfigError("range configuration must be a JSON object")
        allowed = {"schema_version", "sample_count", "master_seed", "output_dir", "scene"}
        extra = set(d) - allowed
        if extra:
            raise ConfigError(f"unknown configuration field(s): {', '.join(sorted(extra))}")
        version = d.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        return cls(scene=d.get("scene", {}), sample_count=d.get("sample_count", 0),
                   master_seed=d.get("master_seed", 0), output_dir=str(d.get("output_dir", "dataset")))

    def to_dict(self) -> dict:
        return {"schema_version": SCHEMA_VERSION, "sample_count": self.sample_count,
                "master_seed": self.master_seed, "output_dir": self.output_dir, "scene": self.scene}


def load_config(path) -> RangeConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    cfg = RangeConfig.from_dict(data)
    out = Path(cfg.output_dir)
    if not out.is_absolute():
        # relative output paths are taken relative to the config file
        cfg = RangeConfig(cfg.scene, cfg.sample_count, cfg.master_seed, str(Path(path).parent / out))
    return cfg


def sample_scene(config: RangeConfig, index: int) -> SceneSpec:
    """Draw sample ``index`` of the configured distribution."""
    if not 0 <= index < config.sample_count:
        raise IndexError(f"sample index {index} outside [0, {config.sample_count})")
    resolved = _resolve(config.scene, "", config.master_seed & hashing.MASK64, index)
    try:
        return SceneSpec.from_dict(resolved)
    except ConfigError as exc:
        raise ConfigError(f"sample {index}: {exc}") from None
    except ValueError as exc:
        raise ConfigError(f"sample {index}: {exc}") from None


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class ManifestRecord:
    index: int
    image: str
    mask: str
    seed: int
    scene: dict
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        d = {"schema_version": SCHEMA_VERSION, "index": self.index, "image": self.image,
             "mask": self.mask, "seed": self.seed, "scene": self.scene}
        d.update(self.extra)
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ManifestRecord":
        core = {"schema_version", "index", "image", "mask", "seed", "scene"}
        return cls(int(d["index"]), d["image"], d["mask"], int(d["seed"]), d.get("scene", {}),
                   {k: v for k, v in d.items() if k not in core})


@dataclass
class DatasetManifest:
    """Ordered sample records; file paths are relative to ``root``."""

    records: list[ManifestRecord]
    root: Path = Path(".")

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def image_path(self, i: int) -> Path:
        return self.root / self.records[i].image

    def mask_path(self, i: int) -> Path:
        return self.root / self.records[i].mask

    def write(self, path=None) -> Path:
        path = Path(path) if path is not None else self.root / MANIFEST_NAME
        text = "".join(r.to_json() + "\n" for r in self.records)
        path.write_text(text, encoding="utf-8")
        return path

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        path = Path(path)
        records = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    records.append(ManifestRecord.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}:{lineno}: bad manifest record ({exc})") from None
        return cls(records, path.parent)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _generate_one(args):
    config, index, out_dir = args
    try:
        scene = sample_scene(config, index)
        seed = hashing.seed_for(config.master_seed, index)
        result = render(scene, seed, workers=1)
        save_png(result.image, os.path.join(out_dir, image_name(index)))
        save_png(result.mask, os.path.join(out_dir, mask_name(index)))
    except Exception as exc:  # reported with the failing index by the caller
        return index, None, f"{type(exc).__name__}: {exc}"
    return index, ManifestRecord(index, image_name(index), mask_name(index), seed, scene.to_dict()), None


def _cleanup(out_dir: Path, count: int):
    for i in range(count):
        for name in (image_name(i), mask_name(i)):
            try:
                (out_dir / name).unlink()
            except FileNotFoundError:
                pass
    try:
        (out_dir / MANIFEST_NAME).unlink()
    except FileNotFoundError:
        pass


def generate(config: RangeConfig, workers: int | None = None, output_dir=None, progress=None) -> DatasetManifest:
    """Render every sample of ``config`` and write PNGs plus ``manifest.jsonl``.

    Samples are distributed over ``workers`` processes; the output bytes do
    not depend on the worker count. On any failure, files written by this
    call are removed and :class:`GenerationError` names the failing index.
    """
    out_dir = Path(output_dir if output_dir is not None else config.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        probe = out_dir / ".write-test"
        probe.write_bytes(b"")
        probe.unlink()
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write to output directory {out_dir}: {exc.strerror or exc}") from None
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ConfigError("workers must be >= 1")

    n = config.sample_count
    tasks = [(config, i, str(out_dir)) for i in range(n)]
    records: list[ManifestRecord | None] = [None] * n
    failure = None
    if workers == 1 or n <= 1:
        results = map(_generate_one, tasks)
        pool = None
    else:
        pool = ProcessPoolExecutor(max_workers=min(workers, n))
        results = pool.map(_generate_one, tasks, chunksize=max(1, n // (8 * workers)))
    try:
        for done, (index, record, error) in enumerate(results, start=1):
            if error is not None:
                failure = (index, error)
                break
            records[index] = record
            if progress is not None:
                progress(done, n)
    finally:
        if pool is not None:
            pool.shutdown(wait=True, cancel_futures=True)
    if failure is not None:
        _cleanup(out_dir, n)
        raise GenerationError(f"sample {failure[0]} failed: {failure[1]}", index=failure[0])
    manifest = DatasetManifest(records, out_dir)
    manifest.write()
    return manifest


# ---------------------------------------------------------------------------
# Augmentation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AugmentSpec:
    """Random affine augmentation ranges.

    Rotation in degrees, shifts as fractions of width/height, shear as the
    dimensionless factor ``x += shear * y``, zoom as a fraction around 1
    (each axis drawn independently). Enabled flips fire with
    ``flip_probability``.
    """

    rotation_range: float = 0.0
    width_shift_range: float = 0.0
    height_shift_range: float = 0.0
    shear_range: float = 0.0
    zoom_range: float = 0.0
    horizontal_flip: bool = False
    vertical_flip: bool = False
    flip_probability: float = 0.5

    def __post_init__(self):
        for name in ("rotation_range", "width_shift_range", "height_shift_range", "shear_range", "zoom_range"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("width_shift_range", "height_shift_range", "zoom_range"):
            if getattr(self, name) > 1:
                raise ConfigError(f"{name} must be <= 1")
        if not 0 <= self.flip_probability <= 1:
            raise ConfigError("flip_probability must be in [0, 1]")

    @classmethod
    def protocol_default(cls) -> "AugmentSpec":
        return cls(**PROTOCOL_AUGMENT)

    @classmethod
    def from_dict(cls, d: dict) -> "AugmentSpec":
        extra = set(d) - set(cls.__dataclass_fields__)
        if extra:
            raise ConfigError(f"unknown augment field(s): {', '.join(sorted(extra))}")
        return cls(**d)

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def load_augment_spec(path) -> AugmentSpec:
    with open(path, encoding="utf-8") as fh:
        try:
            return AugmentSpec.from_dict(json.load(fh))
        except (json.JSONDecodeError, TypeError) as exc:
            raise ConfigError(f"{path}: {exc}") from None


def augment_params(spec: AugmentSpec, seed: int) -> dict:
    """The concrete transform parameters drawn for ``seed``."""
    def u(name):
        return float(hashing.uniform(int(seed), hashing.name_id("augment." + name)))

    def sym(name, r):
        return (2.0 * u(name) - 1.0) * r if r > 0 else 0.0

    return {
        "rotation": sym("rotation", spec.rotation_range),
        "shift_x": sym("shift_x", spec.width_shift_range),
        "shift_y": sym("shift_y", spec.height_shift_range),
        "shear": sym("shear", spec.shear_range),
        "zoom_x": 1.0 + sym("zoom_x", spec.zoom_range),
        "zoom_y": 1.0 + sym("zoom_y", spec.zoom_range),
        "flip_h": bool(spec.horizontal_flip and u("flip_h") < spec.flip_probability),
        "flip_v": bool(spec.vertical_flip and u("flip_v") < spec.flip_probability),
    }


def _affine_matrix(p: dict, h: int, w: int):
    """Output->input pixel mapping (row, col) about the image center."""
    th = math.radians(p["rotation"])
    c, s = math.cos(th), math.sin(th)
    # forward transform in (x=col, y=row) coordinates: rotate, shear, zoom
    rot = np.array([[c, -s], [s, c]])
    shear = np.array([[1.0, p["shear"]], [0.0, 1.0]])
    zoom = np.diag([p["zoom_x"], p["zoom_y"]])
    fwd = rot @ shear @ zoom
    inv = np.linalg.inv(fwd)
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    shift = np.array([p["shift_x"] * w, p["shift_y"] * h])
    # input = inv @ (output - center - shift) + center, converted to (row, col)
    offset_xy = center - inv @ (center + shift)
    matrix_rc = inv[::-1, ::-1]
    offset_rc = offset_xy[::-1]
    return matrix_rc, offset_rc


def augment(image: np.ndarray, mask: np.ndarray, spec: AugmentSpec, seed: int):
    """Apply one random affine transform (plus flips) to an image/mask pair.

    The image is resampled bilinearly with edge replication; the mask with
    nearest neighbour and zero fill, then re-binarized to {0, 255}.
    """
    image = np.asarray(image)
    mask = np.asarray(mask)
    if image.shape[:2] != mask.shape[:2]:
        raise ValueError(f"image {image.shape[:2]} and mask {mask.shape[:2]} sizes differ")
    p = augment_params(spec, seed)
    h, w = mask.shape[:2]
    identity = (p["rotation"] == 0.0 and p["shear"] == 0.0 and p["zoom_x"] == 1.0
                and p["zoom_y"] == 1.0 and p["shift_x"] == 0.0 and p["shift_y"] == 0.0)
    if identity:
        out_img = image.copy()
        out_mask = np.where(mask > 127, 255, 0).astype(np.uint8)
    else:
        m, off = _affine_matrix(p, h, w)
        if image.ndim == 3:
            chans = [ndimage.affine_transform(image[..., k].astype(np.float64), m, off, order=1, mode="nearest")
                     for k in range(image.shape[2])]
            warped = np.stack(chans, axis=-1)
        else:
            warped = ndimage.affine_transform(image.astype(np.float64), m, off, order=1, mode="nearest")
        out_img = np.clip(np.floor(warped + 0.5), 0, 255).astype(image.dtype)
        fg = (mask > 127).astype(np.uint8)
        warped_mask = ndimage.affine_transform(fg, m, off, order=0, mode="constant", cval=0)
        out_mask = np.where(warped_mask > 0, 255, 0).astype(np.uint8)
    if p["flip_h"]:
        out_img = out_img[:, ::-1].copy()
        out_mask = out_mask[:, ::-1].copy()
    if p["flip_v"]:
        out_img = out_img[::-1].copy()
        out_mask = out_mask[::-1].copy()
    return out_img, out_mask


def augment_manifest(manifest: DatasetManifest, spec: AugmentSpec, seed: int, out_dir) -> DatasetManifest:
    """Materialize one augmented copy of every record into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    for i, rec in enumerate(manifest.records):
        ip, mp = manifest.image_path(i), manifest.mask_path(i)
        for p in (ip, mp):
            if not p.exists():
                raise FileNotFoundError(f"missing file {p}")
        aug_seed = int(hashing.key(int(seed), rec.index, hashing.name_id("augment-record")))
        img, msk = augment(load_rgb(ip), load_mask(mp), spec, aug_seed)
        save_png(img, out_dir / image_name(i))
        save_png(msk, out_dir / mask_name(i))
        extra = dict(rec.extra)
        extra["augment"] = {"source_image": str(ip), "seed": aug_seed, "spec": spec.to_dict()}
        records.append(ManifestRecord(i, image_name(i), mask_name(i), rec.seed, rec.scene, extra))
    out = DatasetManifest(records, out_dir)
    out.write()
    return out


# ---------------------------------------------------------------------------
# Contact sheets
# ---------------------------------------------------------------------------

SHEET_GAP = 2
SHEET_BACKGROUND = 255


def contact_sheet(manifest: DatasetManifest, rows: int, cols: int) -> np.ndarray:
    """Row-major grid of the first ``rows * cols`` images with 2-pixel gaps
    between tiles and around the border."""
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be >= 1")
    if rows * cols > len(manifest):
        raise ValueError(f"{rows}x{cols} sheet needs {rows * cols} images, manifest has {len(manifest)}")
    tiles = []
    for i in range(rows * cols):
        path = manifest.image_path(i)
        if not path.exists():
            raise FileNotFoundError(f"missing image {path}")
        tiles.append(load_rgb(path))
    th, tw = tiles[0].shape[:2]
    for i, t in enumerate(tiles):
        if t.shape[:2] != (th, tw):
            raise ValueError(f"image {manifest.image_path(i)} is {t.shape[1]}x{t.shape[0]}, expected {tw}x{th}")
    g = SHEET_GAP
    sheet = np.full((rows * th + (rows + 1) * g, cols * tw + (cols + 1) * g, 3), SHEET_BACKGROUND, dtype=np.uint8)
    for i, t in enumerate(tiles):
        r, c = divmod(i, cols)
        y = g + r * (th + g)
        x = g + c * (tw + g)
        sheet[y:y + th, x:x + tw] = t
    return sheet
